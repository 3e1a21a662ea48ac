//! Edit-operation costs derived from taxonomy distances.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::hex_digest;
use crate::taxonomy::{ConceptDistance, Taxonomy};

/// Edit-operation costs for graph edit distance.
///
/// Insertions and deletions cost a label-independent constant. Substitution
/// costs are taxonomy shortest-path distances clamped at `2 * indel`, so a
/// substitution never exceeds delete-then-insert.
#[derive(Debug, Clone)]
pub struct CostModel {
    node_indel: f64,
    edge_indel: f64,
    unknown_cost: f64,
    node_taxonomy: Arc<Taxonomy>,
    relation_taxonomy: Option<Arc<Taxonomy>>,
}

#[derive(Debug, Clone)]
pub struct CostModelBuilder {
    node_taxonomy: Arc<Taxonomy>,
    relation_taxonomy: Option<Arc<Taxonomy>>,
    node_indel: Option<f64>,
    edge_indel: Option<f64>,
    unknown_cost: Option<f64>,
}

impl CostModelBuilder {
    pub fn relation_taxonomy(mut self, t: Arc<Taxonomy>) -> Self {
        self.relation_taxonomy = Some(t);
        self
    }

    pub fn node_indel(mut self, cost: f64) -> Self {
        self.node_indel = Some(cost);
        self
    }

    pub fn edge_indel(mut self, cost: f64) -> Self {
        self.edge_indel = Some(cost);
        self
    }

    pub fn unknown_cost(mut self, cost: f64) -> Self {
        self.unknown_cost = Some(cost);
        self
    }

    pub fn build(self) -> Result<CostModel> {
        let node_indel = match self.node_indel {
            Some(c) => c,
            None => {
                let half = f64::from(self.node_taxonomy.diameter()) / 2.0;
                if half > 0.0 {
                    half
                } else {
                    1.0
                }
            }
        };
        let edge_indel = self.edge_indel.unwrap_or(1.0);
        let unknown_cost = self.unknown_cost.unwrap_or(2.0 * node_indel);
        for (name, v) in [
            ("node insertion/deletion", node_indel),
            ("edge insertion/deletion", edge_indel),
            ("unknown-concept", unknown_cost),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} cost must be finite and >= 0, got {v}")));
            }
        }
        Ok(CostModel {
            node_indel,
            edge_indel,
            unknown_cost,
            node_taxonomy: self.node_taxonomy,
            relation_taxonomy: self.relation_taxonomy,
        })
    }
}

impl CostModel {
    pub fn builder(node_taxonomy: Arc<Taxonomy>) -> CostModelBuilder {
        CostModelBuilder {
            node_taxonomy,
            relation_taxonomy: None,
            node_indel: None,
            edge_indel: None,
            unknown_cost: None,
        }
    }

    /// Cost model over an empty taxonomy: every pair of distinct labels costs
    /// `min(unknown, 2 * indel)` to substitute.
    pub fn uniform(node_indel: f64, edge_indel: f64) -> Result<Self> {
        let empty = Taxonomy::from_links::<&str>("entity", &[])?;
        Self::builder(Arc::new(empty))
            .node_indel(node_indel)
            .edge_indel(edge_indel)
            .build()
    }

    pub fn node_indel_cost(&self) -> f64 {
        self.node_indel
    }

    pub fn edge_indel_cost(&self) -> f64 {
        self.edge_indel
    }

    pub fn unknown_concept_cost(&self) -> f64 {
        self.unknown_cost
    }

    pub fn node_taxonomy(&self) -> &Taxonomy {
        &self.node_taxonomy
    }

    pub fn relation_taxonomy(&self) -> Option<&Taxonomy> {
        self.relation_taxonomy.as_deref()
    }

    pub fn node_substitution_cost(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 0.0;
        }
        clamped(&self.node_taxonomy, a, b, self.unknown_cost, self.node_indel)
    }

    pub fn edge_substitution_cost(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 0.0;
        }
        match &self.relation_taxonomy {
            Some(t) => clamped(t, a, b, self.unknown_cost, self.edge_indel),
            None => self.edge_indel,
        }
    }

    /// Stable digest of every parameter and both taxonomies.
    pub fn fingerprint(&self) -> String {
        let text = format!(
            "node_indel={:?};edge_indel={:?};unknown={:?};nodes={};relations={}",
            self.node_indel,
            self.edge_indel,
            self.unknown_cost,
            self.node_taxonomy.fingerprint(),
            self.relation_taxonomy
                .as_ref()
                .map(|t| t.fingerprint())
                .unwrap_or("none"),
        );
        hex_digest(text.as_bytes())
    }
}

fn clamped(t: &Taxonomy, a: &str, b: &str, unknown: f64, indel: f64) -> f64 {
    let raw = match t.concept_distance(a, b) {
        ConceptDistance::Known(d) => f64::from(d),
        ConceptDistance::Unknown => unknown,
    };
    raw.min(2.0 * indel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::load_taxonomy;

    fn animals() -> Arc<Taxonomy> {
        Arc::new(
            load_taxonomy(b"!root root\nanimal\troot\nbird\tanimal\nmammal\tanimal\ndog\tmammal\n").unwrap(),
        )
    }

    #[test]
    fn node_substitution_follows_clamped_distance() {
        let cm = CostModel::builder(animals()).node_indel(3.0).build().unwrap();
        assert_eq!(cm.node_substitution_cost("bird", "bird"), 0.0);
        assert_eq!(cm.node_substitution_cost("bird", "dog"), 3.0);
        let tight = CostModel::builder(animals()).node_indel(1.0).build().unwrap();
        assert_eq!(tight.node_substitution_cost("bird", "dog"), 2.0);
    }

    #[test]
    fn unknown_concepts_use_unknown_cost() {
        let cm = CostModel::builder(animals()).node_indel(3.0).unknown_cost(5.0).build().unwrap();
        assert_eq!(cm.node_substitution_cost("bird", "helicopter"), 5.0);
        let capped = CostModel::builder(animals()).node_indel(1.0).unknown_cost(5.0).build().unwrap();
        assert_eq!(capped.node_substitution_cost("bird", "helicopter"), 2.0);
    }

    #[test]
    fn defaults_derive_from_diameter() {
        let cm = CostModel::builder(animals()).build().unwrap();
        assert_eq!(cm.node_indel_cost(), 1.5);
        assert_eq!(cm.edge_indel_cost(), 1.0);
        assert_eq!(cm.unknown_concept_cost(), 3.0);
    }

    #[test]
    fn edge_costs_without_relation_taxonomy_are_uniform() {
        let cm = CostModel::builder(animals()).edge_indel(1.0).build().unwrap();
        assert_eq!(cm.edge_substitution_cost("riding", "riding"), 0.0);
        assert_eq!(cm.edge_substitution_cost("riding", "on"), 1.0);
    }

    #[test]
    fn edge_costs_with_relation_taxonomy() {
        let rel = Arc::new(load_taxonomy(b"!root relation\nmoving\trelation\nriding\tmoving\ndriving\tmoving\n").unwrap());
        let cm = CostModel::builder(animals())
            .relation_taxonomy(rel)
            .edge_indel(3.0)
            .build()
            .unwrap();
        assert_eq!(cm.edge_substitution_cost("riding", "driving"), 2.0);
    }

    #[test]
    fn negative_costs_are_rejected() {
        assert!(CostModel::builder(animals()).edge_indel(-1.0).build().is_err());
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let a = CostModel::builder(animals()).build().unwrap();
        let b = CostModel::builder(animals()).edge_indel(2.0).build().unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), CostModel::builder(animals()).build().unwrap().fingerprint());
    }
}
