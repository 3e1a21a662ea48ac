use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use graphcf::embed::WordVectorTable;
use graphcf::graph::parse_dataset;
use graphcf::{GraphDataset, Taxonomy};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Core(#[from] graphcf::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingArtifact(_) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    if !path.exists() {
        return Err(CliError::MissingArtifact(path.to_path_buf()));
    }
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read(path)?).map_err(|e| {
        CliError::Core(graphcf::Error::Parse {
            offset: e.utf8_error().valid_up_to(),
            message: format!("{} is not valid UTF-8", path.display()),
        })
    })
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write(path, bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Core(graphcf::Error::Parse {
            offset: 0,
            message: format!("{}: {e}", path.display()),
        })
    })
}

pub fn load_dataset(path: &Path) -> CliResult<GraphDataset> {
    Ok(parse_dataset(&read(path)?)?)
}

pub fn load_taxonomy(path: &Path) -> CliResult<Taxonomy> {
    Ok(graphcf::taxonomy::load_taxonomy(&read(path)?)?)
}

pub fn load_word_vectors(path: &Path) -> CliResult<WordVectorTable> {
    Ok(WordVectorTable::load(&read(path)?, 0)?)
}

pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Appends `command,phase,seconds,items,seconds_per_item` to timings.csv.
pub fn record_timing(out: &Path, command: &str, phase: &str, seconds: f64, items: usize) -> CliResult<()> {
    let path = out.join("timings.csv");
    let io = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(out).map_err(io)?;
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
    let mut line = String::new();
    if fresh {
        line.push_str("command,phase,seconds,items,seconds_per_item\n");
    }
    let per = if items > 0 { seconds / items as f64 } else { seconds };
    let _ = writeln!(line, "{command},{phase},{seconds:.6},{items},{per:.6}");
    f.write_all(line.as_bytes()).map_err(io)
}

/// Embeddings as CSV: `instance_id,d0,d1,...`.
pub fn embeddings_csv(ids: &[&str], e: &Array2<f64>) -> String {
    let mut out = String::from("instance_id");
    for k in 0..e.ncols() {
        let _ = write!(out, ",d{k}");
    }
    out.push('\n');
    for (id, row) in ids.iter().zip(e.rows()) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str, ds: &GraphDataset) -> CliResult<Array2<f64>> {
    let bad = |message: String| CliError::Core(graphcf::Error::Parse { offset: 0, message });
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("embedding file is empty".into()))?;
    let d = header.split(',').count() - 1;
    let mut out = Array2::zeros((ds.len(), d));
    let mut seen = vec![false; ds.len()];
    for line in lines.filter(|l| !l.is_empty()) {
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default();
        let row = ds
            .index_of(id)
            .ok_or_else(|| bad(format!("embedding for unknown instance '{id}'")))?;
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("embedding of '{id}': {e}"))))
            .collect::<CliResult<_>>()?;
        if values.len() != d {
            return Err(bad(format!("embedding of '{id}' has {} values, expected {d}", values.len())));
        }
        out.row_mut(row).assign(&ndarray::Array1::from(values));
        seen[row] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(bad(format!("no embedding for '{}'", ds.graphs()[k].instance_id())));
    }
    Ok(out)
}

/// Shared ranking format written by `retrieve` and `kernel`, read by `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rankings {
    pub method: String,
    pub queries: Vec<QueryRanking>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRanking {
    pub query_id: String,
    /// Candidates best first.
    pub candidates: Vec<ScoredCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub instance_id: String,
    pub score: f64,
}

impl Rankings {
    pub fn new(method: &str, ds: &GraphDataset, per_query: &[(usize, Vec<(usize, f64)>)]) -> Self {
        let g = ds.graphs();
        Self {
            method: method.to_string(),
            queries: per_query
                .iter()
                .map(|(q, r)| QueryRanking {
                    query_id: g[*q].instance_id().to_string(),
                    candidates: r
                        .iter()
                        .map(|&(c, s)| ScoredCandidate {
                            instance_id: g[c].instance_id().to_string(),
                            score: s,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Back to dataset indices.
    pub fn resolve(&self, ds: &GraphDataset) -> CliResult<Vec<(usize, Vec<(usize, f64)>)>> {
        let idx = |id: &str| {
            ds.index_of(id).ok_or_else(|| {
                CliError::Core(graphcf::Error::Validation(format!("ranking mentions unknown instance '{id}'")))
            })
        };
        self.queries
            .iter()
            .map(|q| {
                Ok((
                    idx(&q.query_id)?,
                    q.candidates
                        .iter()
                        .map(|c| Ok((idx(&c.instance_id)?, c.score)))
                        .collect::<CliResult<_>>()?,
                ))
            })
            .collect()
    }
}
