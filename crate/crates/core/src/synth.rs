//! Deterministic synthetic scene-graph corpus with a matching taxonomy,
//! word vectors and class-confusion map.
//!
//! Each of `templates` base scenes spawns one variant per class. A variant
//! is the base scene plus two objects typical of its class, followed by small
//! random perturbations (a sibling substitution, an extra object, a changed
//! relation). Variants of the same template are therefore close in GED.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embed::WordVectorTable;
use crate::error::Result;
use crate::graph::{serialize_dataset, Edge, GraphDataset, Node, SemanticGraph};
use crate::taxonomy::{load_taxonomy, Taxonomy};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_TEMPLATES: usize = 20;
pub const WORD_DIM: usize = 32;

const ROOT: &str = "entity";

/// (group, category, leaves)
const CONCEPTS: &[(&str, &str, &[&str])] = &[
    ("living", "person", &["man", "woman", "child", "player", "rider"]),
    ("living", "animal", &["dog", "cat", "horse", "bird", "cow"]),
    ("living", "vegetation", &["tree", "grass", "flower", "bush", "leaf"]),
    ("artifact", "vehicle", &["car", "bike", "bus", "boat", "truck"]),
    ("artifact", "furniture", &["chair", "table", "bench", "bed", "sofa"]),
    ("artifact", "clothing", &["shirt", "hat", "helmet", "jacket", "shoe"]),
    ("artifact", "item", &["ball", "bag", "umbrella", "cup", "phone"]),
    ("place", "structure", &["building", "fence", "road", "street sign", "traffic light"]),
    ("place", "terrain", &["beach", "field", "hill", "water", "snow"]),
];

const RELATIONS: &[&str] = &["on", "near", "has", "holding", "wearing", "riding", "under", "behind"];

/// (class, key objects typical of the class)
const CLASSES: &[(&str, &[&str])] = &[
    ("street", &["car", "traffic light", "street sign", "bus", "road"]),
    ("park", &["tree", "grass", "bench", "dog", "field"]),
    ("home", &["sofa", "table", "cat", "cup", "bed"]),
];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: GraphDataset,
    pub taxonomy_text: String,
    pub word_vectors: WordVectorTable,
    pub confusions: BTreeMap<String, String>,
}

impl SyntheticCorpus {
    pub fn taxonomy(&self) -> Result<Taxonomy> {
        load_taxonomy(self.taxonomy_text.as_bytes())
    }

    /// File name and contents of every artifact.
    pub fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        let mut confusions = serde_json::to_vec_pretty(&self.confusions).expect("map serializes");
        confusions.push(b'\n');
        vec![
            ("graphs.json", serialize_dataset(&self.dataset)),
            ("taxonomy.tsv", self.taxonomy_text.clone().into_bytes()),
            ("wordvectors.txt", self.word_vectors.to_text().into_bytes()),
            ("confusions.json", confusions),
        ]
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in self.files() {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

fn taxonomy_text() -> String {
    let mut out = format!("!root {ROOT}\n");
    let mut groups: Vec<&str> = CONCEPTS.iter().map(|c| c.0).collect();
    groups.dedup();
    for g in groups {
        out.push_str(&format!("{g}\t{ROOT}\n"));
    }
    for (group, category, leaves) in CONCEPTS {
        out.push_str(&format!("{category}\t{group}\n"));
        for leaf in *leaves {
            out.push_str(&format!("{leaf}\t{category}\n"));
        }
    }
    out
}

fn gaussian(rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    (0..WORD_DIM)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            scale * z
        })
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn round(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| (x * 1e6).round() / 1e6).collect()
}

/// Group, category and leaf offsets stack, so vectors of taxonomically close
/// concepts are close.
fn word_vectors(rng: &mut ChaCha8Rng) -> Result<WordVectorTable> {
    let mut wv = WordVectorTable::new(WORD_DIM, 0)?;
    let mut group_vecs: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (group, _, leaves) in CONCEPTS {
        let g = group_vecs.entry(group).or_insert_with(|| gaussian(rng, 1.0)).clone();
        let c = add(&g, &gaussian(rng, 0.6));
        for leaf in *leaves {
            let v = add(&c, &gaussian(rng, 0.4));
            let tokens: Vec<&str> = leaf.split(' ').collect();
            if tokens.len() == 1 {
                wv.insert(leaf, round(v))?;
            } else {
                for t in tokens {
                    wv.insert(t, round(add(&v, &gaussian(rng, 0.1))))?;
                }
            }
        }
    }
    for r in RELATIONS {
        wv.insert(r, round(gaussian(rng, 1.0)))?;
    }
    Ok(wv)
}

fn siblings(label: &str) -> &'static [&'static str] {
    CONCEPTS
        .iter()
        .find(|c| c.2.contains(&label))
        .map(|c| c.2)
        .unwrap_or(&[])
}

#[derive(Clone)]
struct Scene {
    labels: Vec<String>,
    edges: Vec<(u32, u32, String)>,
}

impl Scene {
    fn attach(&mut self, label: &str, rng: &mut ChaCha8Rng) {
        let new = self.labels.len() as u32;
        let anchor = rng.gen_range(0..new);
        let rel = RELATIONS.choose(rng).expect("relations").to_string();
        if rng.gen_bool(0.5) {
            self.edges.push((new, anchor, rel));
        } else {
            self.edges.push((anchor, new, rel));
        }
        self.labels.push(label.to_string());
    }
}

fn all_leaves() -> Vec<&'static str> {
    CONCEPTS.iter().flat_map(|c| c.2.iter().copied()).collect()
}

fn base_scene(rng: &mut ChaCha8Rng) -> Scene {
    let leaves = all_leaves();
    let size = rng.gen_range(3..=6);
    let mut scene = Scene {
        labels: vec![leaves.choose(rng).expect("leaves").to_string()],
        edges: Vec::new(),
    };
    while scene.labels.len() < size {
        let label = *leaves.choose(rng).expect("leaves");
        scene.attach(label, rng);
    }
    scene
}

fn variant(base: &Scene, keys: &[&str], rng: &mut ChaCha8Rng) -> Scene {
    let mut s = base.clone();
    let base_len = base.labels.len();
    let mut pool = keys.to_vec();
    pool.shuffle(rng);
    for key in &pool[..2] {
        s.attach(key, rng);
    }
    if rng.gen_bool(0.5) {
        let i = rng.gen_range(0..base_len);
        let sib = siblings(&s.labels[i]);
        if let Some(&l) = sib.choose(rng) {
            s.labels[i] = l.to_string();
        }
    }
    if rng.gen_bool(0.3) {
        let leaves = all_leaves();
        s.attach(leaves.choose(rng).expect("leaves"), rng);
    }
    if rng.gen_bool(0.3) && !s.edges.is_empty() {
        let k = rng.gen_range(0..s.edges.len());
        s.edges[k].2 = RELATIONS.choose(rng).expect("relations").to_string();
    }
    // parallel edges must carry distinct labels
    let mut seen = std::collections::HashSet::new();
    s.edges.retain(|e| seen.insert(e.clone()));
    s
}

/// Generates the corpus: `templates × 3` graphs of 5 to 10 nodes.
pub fn generate(seed: u64, templates: usize) -> Result<SyntheticCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word_vectors = word_vectors(&mut rng)?;
    let mut graphs = Vec::with_capacity(templates * CLASSES.len());
    for t in 0..templates {
        let base = base_scene(&mut rng);
        for (class, keys) in CLASSES {
            let s = variant(&base, keys, &mut rng);
            let nodes = s
                .labels
                .iter()
                .enumerate()
                .map(|(i, l)| Node {
                    id: i as u32,
                    label: l.clone(),
                })
                .collect();
            let edges = s
                .edges
                .into_iter()
                .map(|(src, dst, label)| Edge { src, dst, label })
                .collect();
            graphs.push(SemanticGraph::new(
                format!("t{t:02}_{class}"),
                Some(class.to_string()),
                *class,
                nodes,
                edges,
            )?);
        }
    }
    let confusions = CLASSES
        .iter()
        .enumerate()
        .map(|(i, (c, _))| (c.to_string(), CLASSES[(i + 1) % CLASSES.len()].0.to_string()))
        .collect();
    Ok(SyntheticCorpus {
        dataset: GraphDataset::new("synthetic", graphs)?,
        taxonomy_text: taxonomy_text(),
        word_vectors,
        confusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_shape() {
        let c = generate(DEFAULT_SEED, DEFAULT_TEMPLATES).unwrap();
        assert_eq!(c.dataset.len(), 60);
        for g in c.dataset.graphs() {
            assert!((5..=10).contains(&g.node_count()), "{} has {} nodes", g.instance_id(), g.node_count());
        }
        let mut classes = c.dataset.classes();
        classes.sort();
        classes.dedup();
        assert_eq!(classes, vec!["home", "park", "street"]);
    }

    #[test]
    fn every_label_is_a_concept_with_vectors() {
        let c = generate(DEFAULT_SEED, 4).unwrap();
        let tax = c.taxonomy().unwrap();
        for g in c.dataset.graphs() {
            for n in g.nodes() {
                assert!(tax.contains(&n.label), "{}", n.label);
                for tok in n.label.split(' ') {
                    assert!(c.word_vectors.contains(tok), "{tok}");
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(3, 5).unwrap();
        let b = generate(3, 5).unwrap();
        assert_eq!(a.files(), b.files());
        assert_ne!(a.files(), generate(4, 5).unwrap().files());
    }
}
