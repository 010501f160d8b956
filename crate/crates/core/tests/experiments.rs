use proptest::prelude::*;

use nudge_core::experiments::{
    accuracy, macro_f1, run, CohortSpec, ExperimentConfig, ExperimentId, Setup,
};
use nudge_core::ForestParams;

fn quick(id: ExperimentId) -> ExperimentConfig {
    ExperimentConfig {
        train_sizes: vec![4, 8],
        test_size: 60,
        repetitions: 2,
        forest: ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        },
        ..ExperimentConfig::new(id)
    }
}

/// Per-class F1 over the classes present in either vector, averaged.
fn reference_macro_f1(truth: &[u32], predicted: &[u32]) -> f64 {
    let mut classes: Vec<u32> = truth.iter().chain(predicted).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let f1s: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let tp = truth.iter().zip(predicted).filter(|(t, p)| **t == c && **p == c).count() as f64;
            let fp = truth.iter().zip(predicted).filter(|(t, p)| **t != c && **p == c).count() as f64;
            let fn_ = truth.iter().zip(predicted).filter(|(t, p)| **t == c && **p != c).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            }
        })
        .collect();
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

proptest! {
    #[test]
    fn macro_f1_matches_reference(pairs in prop::collection::vec((0u32..2, 0u32..2), 1..60)) {
        let (truth, predicted): (Vec<u32>, Vec<u32>) = pairs.into_iter().unzip();
        let got = macro_f1(&truth, &predicted, &[0, 1]).unwrap();
        prop_assert!((got - reference_macro_f1(&truth, &predicted)).abs() < 1e-12);
        let acc = accuracy(&truth, &predicted).unwrap();
        let agree = truth.iter().zip(&predicted).filter(|(a, b)| a == b).count();
        prop_assert!((acc - agree as f64 / truth.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn unreachable_threshold_gives_only_negatives() {
    let config = ExperimentConfig {
        thresholds: vec![64],
        ..quick(ExperimentId::ThresholdSweep)
    };
    let table = run(&config).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert_eq!(row.positive_label_fraction, 0.0);
        assert_eq!(row.macro_f1, 1.0);
    }
}

#[test]
fn conditions_are_reproducible_in_isolation() {
    let full = run(&ExperimentConfig {
        thresholds: vec![5, 10, 30],
        ..quick(ExperimentId::ThresholdSweep)
    })
    .unwrap();
    let alone = run(&ExperimentConfig {
        thresholds: vec![10],
        ..quick(ExperimentId::ThresholdSweep)
    })
    .unwrap();
    let subset: Vec<_> = full.rows.iter().filter(|r| r.condition == "threshold=10").cloned().collect();
    assert_eq!(subset, alone.rows);
    assert_eq!(full.rows.len(), 3 * 2 * 2);
}

#[test]
fn multi_patient_rows_and_summary() {
    let config = ExperimentConfig {
        cohorts: vec![
            CohortSpec { n_patients: 1, fraction_below_40: 1.0 },
            CohortSpec { n_patients: 5, fraction_below_40: 0.4 },
        ],
        ..quick(ExperimentId::MultiPatient)
    };
    let table = run(&config).unwrap();
    assert_eq!(table.rows.len(), 2 * 2 * 2);
    assert_eq!(table.conditions().len(), 2);
    let summary = table.summary();
    assert_eq!(summary.len(), 4);
    for row in &summary {
        assert_eq!(row.repetitions, 2);
        assert!((0.0..=1.0).contains(&row.mean_macro_f1));
    }
    let csv = table.to_csv();
    assert_eq!(csv.lines().count(), 1 + table.rows.len());
    assert!(table.to_svg("multi").contains("<polyline"));
}

#[test]
fn supervision_setups_share_cohorts() {
    let config = ExperimentConfig {
        cohorts: vec![CohortSpec { n_patients: 3, fraction_below_40: 0.7 }],
        setups: vec![Setup::Direct, Setup::GroundTruthMat],
        ..quick(ExperimentId::Supervision)
    };
    let table = run(&config).unwrap();
    assert_eq!(table.rows.len(), 2 * 2 * 2);
    let cohort = run(&ExperimentConfig {
        cohorts: config.cohorts.clone(),
        ..quick(ExperimentId::MultiPatient)
    })
    .unwrap();
    // Same test sets, so the positive share agrees row for row.
    for row in table.rows.iter().filter(|r| r.condition.ends_with(Setup::Direct.label())) {
        let twin = cohort
            .rows
            .iter()
            .find(|r| r.train_size == row.train_size && r.repetition == row.repetition)
            .unwrap();
        assert_eq!(twin.positive_label_fraction, row.positive_label_fraction);
    }
}

#[test]
fn mismatched_config_is_rejected() {
    let mut config = quick(ExperimentId::ThresholdSweep);
    config.repetitions = 0;
    assert!(run(&config).is_err());
    let mut config = quick(ExperimentId::MultiPatient);
    config.train_sizes = vec![8, 4];
    assert!(config.validate().is_err());
}
