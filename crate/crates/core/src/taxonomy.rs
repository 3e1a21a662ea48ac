//! Concept hierarchy loaded from a child/parent edge list, with memoized
//! undirected shortest-path distances.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::graph::{hex_digest, normalize_label};

/// Result of a concept-distance query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConceptDistance {
    Known(u32),
    /// At least one of the two concepts is not in the taxonomy.
    Unknown,
}

impl ConceptDistance {
    pub fn known(self) -> Option<u32> {
        match self {
            ConceptDistance::Known(d) => Some(d),
            ConceptDistance::Unknown => None,
        }
    }
}

/// A rooted concept DAG. Concepts may have several parents.
#[derive(Debug)]
pub struct Taxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    links: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    root: usize,
    fingerprint: String,
    memo: RwLock<HashMap<usize, Arc<Vec<u32>>>>,
    diameter: OnceLock<u32>,
}

const UNREACHED: u32 = u32::MAX;

impl Taxonomy {
    /// Builds and validates a taxonomy from (child, parent) pairs.
    pub fn from_links<S: AsRef<str>>(root: &str, links: &[(S, S)]) -> Result<Self> {
        let root_name = normalize_label(root);
        if root_name.is_empty() {
            return Err(Error::Validation("taxonomy root name is empty".into()));
        }
        let mut names = vec![root_name.clone()];
        let mut index = HashMap::from([(root_name, 0usize)]);
        let mut intern = |name: String| -> usize {
            *index.entry(name.clone()).or_insert_with(|| {
                names.push(name);
                names.len() - 1
            })
        };

        let mut pairs = Vec::with_capacity(links.len());
        for (child, parent) in links {
            let c = normalize_label(child.as_ref());
            let p = normalize_label(parent.as_ref());
            if c.is_empty() || p.is_empty() {
                return Err(Error::Validation("taxonomy link with an empty concept".into()));
            }
            if c == p {
                return Err(Error::TaxonomyCycle(vec![c.clone(), c]));
            }
            pairs.push((intern(c), intern(p)));
        }
        pairs.dedup();

        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut adjacency = vec![Vec::new(); n];
        for &(c, p) in &pairs {
            if !parents[c].contains(&p) {
                parents[c].push(p);
                children[p].push(c);
                adjacency[c].push(p);
                adjacency[p].push(c);
            }
        }

        if let Some(cycle) = find_cycle(&parents) {
            return Err(Error::TaxonomyCycle(
                cycle.into_iter().map(|i| names[i].clone()).collect(),
            ));
        }

        let mut reached = vec![false; n];
        reached[0] = true;
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if !reached[c] {
                    reached[c] = true;
                    stack.push(c);
                }
            }
        }
        if let Some(lost) = reached.iter().position(|r| !r) {
            return Err(Error::Unreachable(names[lost].clone()));
        }

        let mut canon = format!("!root {}\n", names[0]);
        for &(c, p) in &pairs {
            canon.push_str(&format!("{}\t{}\n", names[c], names[p]));
        }

        Ok(Self {
            fingerprint: hex_digest(canon.as_bytes()),
            names,
            index,
            links: pairs,
            adjacency,
            root: 0,
            memo: RwLock::new(HashMap::new()),
            diameter: OnceLock::new(),
        })
    }

    pub fn root(&self) -> &str {
        &self.names[self.root]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.lookup(concept).is_some()
    }

    /// Parent links as (child, parent) in load order.
    pub fn parent_links(&self) -> impl Iterator<Item = (&str, &str)> {
        self.links
            .iter()
            .map(|&(c, p)| (self.names[c].as_str(), self.names[p].as_str()))
    }

    pub fn parents_of(&self, concept: &str) -> Vec<&str> {
        match self.lookup(concept) {
            Some(c) => self
                .links
                .iter()
                .filter(|&&(child, _)| child == c)
                .map(|&(_, p)| self.names[p].as_str())
                .collect(),
            None => Vec::new(),
        }
    }

    /// SHA-256 over the canonical link list.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn lookup(&self, concept: &str) -> Option<usize> {
        self.index
            .get(concept)
            .or_else(|| self.index.get(&normalize_label(concept)))
            .copied()
    }

    fn distances_from(&self, source: usize) -> Arc<Vec<u32>> {
        if let Some(d) = self.memo.read().expect("memo lock").get(&source) {
            return Arc::clone(d);
        }
        let dist = Arc::new(self.bfs(source));
        let mut memo = self.memo.write().expect("memo lock");
        Arc::clone(memo.entry(source).or_insert(dist))
    }

    fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.names.len()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if dist[w] == UNREACHED {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest path length between two concepts, treating parent links as
    /// undirected unit-weight edges.
    pub fn concept_distance(&self, a: &str, b: &str) -> ConceptDistance {
        if a == b || normalize_label(a) == normalize_label(b) {
            return ConceptDistance::Known(0);
        }
        match (self.lookup(a), self.lookup(b)) {
            (Some(x), Some(y)) => {
                let (from, to) = if x <= y { (x, y) } else { (y, x) };
                ConceptDistance::Known(self.distances_from(from)[to])
            }
            _ => ConceptDistance::Unknown,
        }
    }

    /// Longest shortest path between any two concepts.
    pub fn diameter(&self) -> u32 {
        *self.diameter.get_or_init(|| {
            (0..self.names.len())
                .map(|v| self.bfs(v).into_iter().max().unwrap_or(0))
                .max()
                .unwrap_or(0)
        })
    }
}

fn find_cycle(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = parents.len();
    let mut mark = vec![Mark::White; n];
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        // (node, next parent index to visit)
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        mark[start] = Mark::Grey;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < parents[v].len() {
                let p = parents[v][*next];
                *next += 1;
                match mark[p] {
                    Mark::White => {
                        mark[p] = Mark::Grey;
                        stack.push((p, 0));
                    }
                    Mark::Grey => {
                        let from = stack.iter().position(|&(u, _)| u == p).unwrap();
                        let mut cycle: Vec<usize> = stack[from..].iter().map(|&(u, _)| u).collect();
                        cycle.push(p);
                        return Some(cycle);
                    }
                    Mark::Black => {}
                }
            } else {
                mark[v] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Parses the taxonomy text format: an `!root <name>` declaration on the
/// first content line, then one `child<TAB>parent` pair per line. Lines
/// starting with `#` are comments.
pub fn load_taxonomy(input: &[u8]) -> Result<Taxonomy> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Parse {
        offset: e.valid_up_to(),
        message: "taxonomy is not valid UTF-8".into(),
    })?;

    let mut root: Option<String> = None;
    let mut links: Vec<(String, String)> = Vec::new();
    let mut offset = 0usize;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if root.is_none() {
            let name = trimmed.strip_prefix("!root").ok_or_else(|| Error::Parse {
                offset: line_offset,
                message: "first line must declare the root as '!root <name>'".into(),
            })?;
            root = Some(name.trim().to_string());
            continue;
        }
        let (child, parent) = match line.split_once('\t') {
            Some((c, p)) => (c.trim().to_string(), p.trim().to_string()),
            None => {
                let tokens: Vec<&str> = trimmed.split_whitespace().collect();
                if tokens.len() != 2 {
                    return Err(Error::Parse {
                        offset: line_offset,
                        message: format!("expected 'child<TAB>parent', got '{trimmed}'"),
                    });
                }
                (tokens[0].to_string(), tokens[1].to_string())
            }
        };
        if child.is_empty() || parent.is_empty() {
            return Err(Error::Parse {
                offset: line_offset,
                message: "empty concept name".into(),
            });
        }
        links.push((child, parent));
    }

    let root = root.ok_or_else(|| Error::Parse {
        offset: 0,
        message: "missing '!root <name>' declaration".into(),
    })?;
    Taxonomy::from_links(&root, &links)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn animals() -> Taxonomy {
        load_taxonomy(b"!root root\nanimal\troot\nbird\tanimal\nmammal\tanimal\ndog\tmammal\n").unwrap()
    }

    #[test]
    fn reads_simple_hierarchy() {
        let t = load_taxonomy(b"# comment\n!root root\nanimal root\nbird animal\ndog animal\n").unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t.root(), "root");
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = load_taxonomy(b"!root root\na\tb\nb\ta\n").unwrap_err();
        match err {
            Error::TaxonomyCycle(c) => {
                assert!(c.len() >= 3);
                assert_eq!(c.first(), c.last());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multiple_parents_are_accepted() {
        let t = load_taxonomy(
            b"!root root\nmammal\troot\nswimmer\troot\nseal\tmammal\nseal\tswimmer\n",
        )
        .unwrap();
        assert_eq!(t.parents_of("seal"), vec!["mammal", "swimmer"]);
    }

    #[test]
    fn unreachable_concept_is_named() {
        let err = load_taxonomy(b"!root root\na\troot\nx\ty\n").unwrap_err();
        assert!(matches!(err, Error::Unreachable(ref c) if c == "y" || c == "x"), "{err}");
    }

    #[test]
    fn missing_root_declaration() {
        assert!(matches!(load_taxonomy(b"a\tb\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn distances_on_small_hierarchy() {
        let t = animals();
        assert_eq!(t.concept_distance("bird", "bird"), ConceptDistance::Known(0));
        assert_eq!(t.concept_distance("bird", "dog"), ConceptDistance::Known(3));
        assert_eq!(t.concept_distance("dog", "bird"), ConceptDistance::Known(3));
        assert_eq!(t.concept_distance("Bird ", "DOG"), ConceptDistance::Known(3));
        assert_eq!(t.concept_distance("bird", "helicopter"), ConceptDistance::Unknown);
        assert_eq!(t.diameter(), 3);
    }

    #[test]
    fn multi_word_concepts_keep_internal_space() {
        let t = load_taxonomy(b"!root entity\ntraffic light\tentity\n").unwrap();
        assert!(t.contains("Traffic  Light"));
    }
}
