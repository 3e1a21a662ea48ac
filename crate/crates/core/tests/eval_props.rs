mod common;

use std::sync::Arc;

use common::graph;
use graphcf::eval::{
    avg_precision_at_k, binary_ndcg_at_k, binary_precision_at_k, edit_statistics, eligible_ranking, ged_ranking,
    EvalReport,
};
use graphcf::ged::ged_matrix;
use graphcf::retrieval::{select_counterfactual, TargetRule};
use graphcf::synth::{generate, DEFAULT_SEED, DEFAULT_TEMPLATES};
use graphcf::{CostModel, GraphDataset};
use proptest::prelude::*;

proptest! {
    #[test]
    fn binary_metrics_are_monotone_in_k(perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(), gt_first in 0..12usize) {
        let mut gt: Vec<usize> = (0..12).collect();
        gt.swap(0, gt_first);
        let mut prev = (0.0, 0.0);
        for k in 1..=12 {
            let cur = (binary_precision_at_k(&gt, &perm, k).unwrap(), binary_ndcg_at_k(&gt, &perm, k).unwrap());
            prop_assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
            prop_assert!((0.0..=1.0).contains(&cur.1) && cur.1 <= cur.0);
            prev = cur;
        }
        prop_assert_eq!(avg_precision_at_k(&gt, &perm, 12).unwrap(), 1.0);
    }
}

#[test]
fn ged_retrieval_against_itself_scores_one() {
    let corpus = generate(DEFAULT_SEED, DEFAULT_TEMPLATES).unwrap();
    let ds = &corpus.dataset;
    let cm = CostModel::builder(Arc::new(corpus.taxonomy().unwrap())).build().unwrap();
    let ged = ged_matrix(ds, &cm, None).unwrap();
    for rule in [TargetRule::Fallback, TargetRule::Confusion(corpus.confusions.clone())] {
        let mut rankings = Vec::new();
        let mut results = Vec::new();
        for q in 0..ds.len() {
            let gt = ged_ranking(ds, &ged, q, &rule).unwrap();
            // the GED ranking expressed as descending similarity scores
            let scored: Vec<(usize, f64)> = (0..ds.len())
                .filter(|&c| c != q)
                .map(|c| (c, -ged.get(q, c).unwrap()))
                .collect();
            let mut scored = scored;
            graphcf::retrieval::sort_ranking(&mut scored, &ds.ids(), true);
            let pred = eligible_ranking(ds, &scored, q, &rule).unwrap();
            let target = rule.target_for(ds.graphs()[q].class_pred()).unwrap();
            results.push(select_counterfactual(ds, &scored, q, target.as_deref(), &cm).unwrap());
            rankings.push((gt, pred));
        }
        let stats = edit_statistics(&results, ds, &cm).unwrap();
        let report = EvalReport::build(&rankings, &[1, 2, 4], stats).unwrap();
        for m in [&report.avg_precision_at_k, &report.binary_precision_at_k, &report.binary_ndcg_at_k] {
            assert!(m.values().all(|&v| v == 1.0), "{m:?}");
        }
        assert!((report.avg_total_edits - report.avg_node_edits - report.avg_edge_edits).abs() < 1e-9);
        assert_eq!(report.num_queries, 60);
    }
}

#[test]
fn edit_statistics_average_hand_built_paths() {
    let cm = CostModel::uniform(1.0, 1.0).unwrap();
    // totals: 2 (two node insertions), 4 (two node + two edge insertions), 6
    let ds = GraphDataset::new(
        "edits",
        vec![
            graph("q1", &["dog"], &[]).relabeled("q1", "A").unwrap(),
            graph("c1", &["dog", "cat", "bus"], &[]).relabeled("c1", "B").unwrap(),
            graph("q2", &["dog"], &[]).relabeled("q2", "A").unwrap(),
            graph("c2", &["dog", "cat", "bus"], &[(0, 1, "near"), (0, 2, "near")]).relabeled("c2", "B").unwrap(),
            graph("q3", &["dog"], &[]).relabeled("q3", "A").unwrap(),
            graph("c3", &["dog", "cat", "bus", "car"], &[(0, 1, "near"), (0, 2, "near"), (0, 3, "on")])
                .relabeled("c3", "B")
                .unwrap(),
        ],
    )
    .unwrap();
    let results: Vec<_> = [(0, 1), (2, 3), (4, 5)]
        .iter()
        .map(|&(q, c)| select_counterfactual(&ds, &[(c, 1.0)], q, Some("B"), &cm).unwrap())
        .collect();
    let s = edit_statistics(&results, &ds, &cm).unwrap();
    assert_eq!(s.avg_total_edits, 4.0);
    assert_eq!(s.avg_node_edits, 7.0 / 3.0);
    assert_eq!(s.avg_edge_edits, 5.0 / 3.0);
    assert!(edit_statistics(&[], &ds, &cm).is_err());
}

#[test]
fn identical_counterfactuals_have_zero_edits() {
    let cm = CostModel::uniform(1.0, 1.0).unwrap();
    let g = graph("q", &["dog", "cat"], &[(0, 1, "near")]);
    let ds = GraphDataset::new("same", vec![g.relabeled("q", "A").unwrap(), g.relabeled("c", "B").unwrap()]).unwrap();
    let r = select_counterfactual(&ds, &[(1, 1.0)], 0, None, &cm).unwrap();
    let s = edit_statistics(&[r], &ds, &cm).unwrap();
    assert_eq!((s.avg_total_edits, s.avg_top1_ged), (0.0, 0.0));
}
