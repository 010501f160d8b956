use std::collections::BTreeMap;

use proptest::prelude::*;

use nudge_core::forest::{balanced_weights, ClassWeighting, MaxFeatures, Node};
use nudge_core::{EncodedMatrix, Forest, ForestParams};

fn gini(mass: &BTreeMap<u32, f64>) -> f64 {
    let total: f64 = mass.values().sum();
    if total == 0.0 {
        return 0.0;
    }
    1.0 - mass.values().map(|m| (m / total).powi(2)).sum::<f64>()
}

/// Best weighted-Gini root split by enumeration over midpoints. Ties go to
/// the lower feature, then the lower threshold.
fn brute_force_root(rows: &[Vec<f64>], labels: &[u32]) -> Option<(usize, f64)> {
    let weights = balanced_weights(labels);
    if weights.len() < 2 {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let (mut left, mut right) = (BTreeMap::new(), BTreeMap::new());
            for (r, &l) in rows.iter().zip(labels) {
                let side = if r[f] <= threshold { &mut left } else { &mut right };
                *side.entry(l).or_insert(0.0) += weights[&l];
            }
            let wl: f64 = left.values().sum();
            let wr: f64 = right.values().sum();
            let score = (wl * gini(&left) + wr * gini(&right)) / (wl + wr);
            if best.map_or(true, |(s, _, _)| score < s - 1e-9) {
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u32>)> {
    (2usize..=12, 1usize..=4, 2u32..=3).prop_flat_map(|(n, d, k)| {
        (
            prop::collection::vec(prop::collection::vec((0u8..4).prop_map(f64::from), d), n),
            prop::collection::vec(0..k, n),
        )
    })
}

fn stump() -> ForestParams {
    ForestParams {
        n_trees: 1,
        max_features: MaxFeatures::All,
        bootstrap: false,
        class_weighting: ClassWeighting::Balanced,
        max_depth: Some(1),
        ..ForestParams::default()
    }
}

proptest! {
    #[test]
    fn root_split_matches_brute_force((rows, labels) in dataset()) {
        let matrix = EncodedMatrix::from_rows(rows.clone(), labels.clone()).unwrap();
        let forest = Forest::fit(&matrix, &stump()).unwrap();
        let root = match &forest.trees()[0].nodes()[0] {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        };
        prop_assert_eq!(root, brute_force_root(&rows, &labels));
    }

    #[test]
    fn balanced_weights_equalise_class_mass(labels in prop::collection::vec(0u32..4, 1..40)) {
        let weights = balanced_weights(&labels);
        let k = weights.len() as f64;
        for (&class, &w) in &weights {
            let count = labels.iter().filter(|&&l| l == class).count() as f64;
            prop_assert_eq!(w, labels.len() as f64 / (k * count));
            prop_assert!((w * count - labels.len() as f64 / k).abs() < 1e-9);
        }
    }

    #[test]
    fn full_tree_memorises_consistent_data((rows, labels) in dataset()) {
        // Drop rows whose features repeat with a different label.
        let mut seen: BTreeMap<Vec<u64>, u32> = BTreeMap::new();
        let (mut kept_rows, mut kept_labels) = (Vec::new(), Vec::new());
        for (r, &l) in rows.iter().zip(&labels) {
            let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            if *seen.entry(key).or_insert(l) == l {
                kept_rows.push(r.clone());
                kept_labels.push(l);
            }
        }
        let matrix = EncodedMatrix::from_rows(kept_rows.clone(), kept_labels.clone()).unwrap();
        let forest = Forest::fit(&matrix, &ForestParams::single_tree()).unwrap();
        for (r, &l) in kept_rows.iter().zip(&kept_labels) {
            prop_assert_eq!(forest.predict(r).unwrap(), l);
        }
    }

    #[test]
    fn probabilities_sum_to_one((rows, labels) in dataset(), seed in 0u64..100) {
        let matrix = EncodedMatrix::from_rows(rows.clone(), labels).unwrap();
        let params = ForestParams { n_trees: 9, seed, ..ForestParams::default() };
        let forest = Forest::fit(&matrix, &params).unwrap();
        for r in &rows {
            let p = forest.predict_proba(r).unwrap();
            prop_assert_eq!(p.len(), forest.classes().len());
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn fitting_is_deterministic((rows, labels) in dataset(), seed in 0u64..100) {
        let matrix = EncodedMatrix::from_rows(rows, labels).unwrap();
        let params = ForestParams { n_trees: 5, seed, ..ForestParams::default() };
        prop_assert_eq!(Forest::fit(&matrix, &params).unwrap(), Forest::fit(&matrix, &params).unwrap());
    }
}

#[test]
fn json_round_trip_preserves_predictions() {
    use nudge_core::forest::{forest_from_json, forest_to_json};
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![f64::from(i % 5), f64::from(i % 3)]).collect();
    let labels: Vec<u32> = (0..30).map(|i| u32::from(i % 5 > 2)).collect();
    let matrix = EncodedMatrix::from_rows(rows.clone(), labels).unwrap();
    let forest = Forest::fit(&matrix, &ForestParams { n_trees: 7, ..ForestParams::default() }).unwrap();
    let text = forest_to_json(&forest);
    let back = forest_from_json(&text).unwrap();
    assert_eq!(forest_to_json(&back), text);
    for r in &rows {
        assert_eq!(back.predict(r).unwrap(), forest.predict(r).unwrap());
    }
}
