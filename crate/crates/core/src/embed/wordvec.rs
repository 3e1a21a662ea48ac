use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{hex_digest, normalize_label};

/// Token vectors used to initialize node features.
///
/// Multi-word labels average their token vectors. Tokens missing from the
/// table get a pseudo-random unit vector derived from the token text and
/// `fallback_seed`, so lookups are total and deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    fallback_seed: u64,
}

impl WordVectorTable {
    pub fn new(dim: usize, fallback_seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("word vector dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            entries: HashMap::new(),
            fallback_seed,
        })
    }

    /// Parses the text format: one `token v1 ... vd` line per token. A leading
    /// `count dim` header line is skipped.
    pub fn load(input: &[u8], fallback_seed: u64) -> Result<Self> {
        let text = std::str::from_utf8(input).map_err(|e| Error::Parse {
            offset: e.valid_up_to(),
            message: "word vectors are not valid UTF-8".into(),
        })?;
        let mut dim: Option<usize> = None;
        let mut entries = HashMap::new();
        let mut offset = 0usize;
        for (lineno, raw) in text.split_inclusive('\n').enumerate() {
            let line_offset = offset;
            offset += raw.len();
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let token = fields[0].to_lowercase();
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    offset: line_offset,
                    message: format!("bad vector for '{token}': {e}"),
                })?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(Error::Parse {
                    offset: line_offset,
                    message: format!("vector for '{token}' has {} values, expected {d}", values.len()),
                });
            }
            entries.insert(token, values);
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            offset: 0,
            message: "word vector file is empty".into(),
        })?;
        Ok(Self {
            dim,
            entries,
            fallback_seed,
        })
    }

    pub fn to_text(&self) -> String {
        let mut tokens: Vec<&String> = self.entries.keys().collect();
        tokens.sort();
        let mut out = String::new();
        for t in tokens {
            out.push_str(t);
            for v in &self.entries[t] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Config(format!(
                "vector for '{token}' has length {}, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        self.entries.insert(token.to_lowercase(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fallback_seed(&self) -> u64 {
        self.fallback_seed
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(&token.to_lowercase())
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        match self.entries.get(token).or_else(|| self.entries.get(&token.to_lowercase())) {
            Some(v) => v.clone(),
            None => self.fallback_vector(token),
        }
    }

    /// Mean of the token vectors of a (normalized) label.
    pub fn label_vector(&self, label: &str) -> Vec<f64> {
        let norm = normalize_label(label);
        let tokens: Vec<&str> = norm.split(' ').filter(|t| !t.is_empty()).collect();
        if tokens.is_empty() {
            return self.fallback_vector("");
        }
        let mut acc = vec![0.0; self.dim];
        for t in &tokens {
            for (a, v) in acc.iter_mut().zip(self.token_vector(t)) {
                *a += v;
            }
        }
        let n = tokens.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    fn fallback_vector(&self, token: &str) -> Vec<f64> {
        let digest = Sha256::digest(token.as_bytes());
        let token_seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(token_seed ^ self.fallback_seed);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    /// Digest of the table contents and fallback seed.
    pub fn fingerprint(&self) -> String {
        hex_digest(format!("{}|{}|{}", self.dim, self.fallback_seed, self.to_text()).as_bytes())
    }
}
