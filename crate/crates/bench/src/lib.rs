//! Shared fixtures for the benchmarks.

use nudge_core::simulator::generate_dataset;
use nudge_core::{CohortConfig, Dataset, EncodedMatrix, Observation, ThresholdPolicy};

/// A simulated cohort with per-patient thresholds drawn uniformly.
pub fn cohort(n_patients: u32, samples_per_patient: u32) -> Dataset {
    generate_dataset(&CohortConfig {
        n_patients,
        samples_per_patient,
        threshold_policy: ThresholdPolicy::UniformRandom,
        seed: 42,
    })
    .expect("valid cohort config")
}

pub fn encoded(n_patients: u32, samples_per_patient: u32) -> EncodedMatrix {
    cohort(n_patients, samples_per_patient)
        .encode()
        .expect("encodable dataset")
        .1
}

/// Observations with behaviour 0, the usual starting point for personalisation.
pub fn negatives(data: &Dataset, limit: usize) -> Vec<Observation> {
    data.rows
        .iter()
        .filter(|s| s.behaviour == 0)
        .take(limit)
        .map(|s| s.observation)
        .collect()
}
