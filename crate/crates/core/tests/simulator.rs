mod common;

use proptest::prelude::*;

use nudge_core::domain::THRESHOLD_MAX;
use nudge_core::simulator::{behaviour, compute_mat_for, generate_cohort};
use nudge_core::{CohortConfig, ThresholdPolicy};

use nudge_core::domain::{
    ActivityType, BciSpec, Context, DayOfWeek, DeliverySchedule, Gender, Location,
    MessageContent, MessagePhrasing, Motion, Observation, PatientTraits, TimeOfDay,
};

use common::{observation, reference_mat};

/// Share of the full feature grid with a non-zero MAT product. Day of week
/// never enters the rule and is held fixed.
fn grid_positive_share() -> f64 {
    let (mut positive, mut total) = (0u64, 0u64);
    for m in 0..=4 {
        for affect in 0..=4 {
            for load in 0..=4 {
                for &motion in Motion::ALL {
                    for &location in Location::ALL {
                        for &time in TimeOfDay::ALL {
                            for &activity in ActivityType::ALL {
                                for dose in 0..=4 {
                                    for &schedule in DeliverySchedule::ALL {
                                        for &phrasing in MessagePhrasing::ALL {
                                            for &content in MessageContent::ALL {
                                                let obs = Observation {
                                                    patient: PatientTraits {
                                                        patient_id: 0,
                                                        age: 30,
                                                        gender: Gender::Other,
                                                        motivation_at_enrollment: m,
                                                    },
                                                    context: Context {
                                                        affect,
                                                        cognitive_load: load,
                                                        motion,
                                                        location,
                                                        time_of_day: time,
                                                        day_of_week: DayOfWeek::Mon,
                                                    },
                                                    bci: BciSpec {
                                                        activity_type: activity,
                                                        dose,
                                                        delivery_schedule: schedule,
                                                        message_phrasing: phrasing,
                                                        message_content: content,
                                                    },
                                                };
                                                let (a, b, c) = reference_mat(&obs);
                                                positive += u64::from(a > 0 && b > 0 && c > 0);
                                                total += 1;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    positive as f64 / total as f64
}

proptest! {
    #[test]
    fn mat_matches_reference(obs in observation()) {
        let mat = compute_mat_for(&obs);
        prop_assert_eq!((mat.motivation, mat.ability, mat.trigger), reference_mat(&obs));
    }

    #[test]
    fn mat_ignores_identity(obs in observation(), id in 0u32..1000, age in 18u8..=90) {
        let mut other = obs;
        other.patient.patient_id = id;
        other.patient.age = age;
        prop_assert_eq!(compute_mat_for(&obs), compute_mat_for(&other));
    }

    #[test]
    fn behaviour_is_strict_and_monotone(obs in observation(), t in 0u8..THRESHOLD_MAX) {
        let mat = compute_mat_for(&obs);
        prop_assert_eq!(behaviour(&mat, t) == 1, mat.product() > u32::from(t));
        prop_assert!(behaviour(&mat, t + 1) <= behaviour(&mat, t));
        prop_assert_eq!(behaviour(&mat, THRESHOLD_MAX), 0);
    }

    #[test]
    fn generated_labels_follow_the_rule(seed in 0u64..1000, n in 1u32..6) {
        let config = CohortConfig {
            n_patients: n,
            samples_per_patient: 20,
            threshold_policy: ThresholdPolicy::UniformRandom,
            seed,
            ..CohortConfig::default()
        };
        let cohort = generate_cohort(&config).unwrap();
        prop_assert_eq!(cohort.dataset.len(), (n * 20) as usize);
        for sample in &cohort.dataset.rows {
            let profile = cohort.profiles[sample.patient_id() as usize];
            let mat = sample.mat.unwrap();
            prop_assert_eq!(mat, compute_mat_for(&sample.observation));
            prop_assert_eq!(sample.behaviour, behaviour(&mat, profile.action_threshold));
        }
    }
}

#[test]
fn cohorts_are_reproducible() {
    let config = CohortConfig {
        n_patients: 4,
        samples_per_patient: 30,
        seed: 17,
        ..CohortConfig::default()
    };
    let a = generate_cohort(&config).unwrap();
    let b = generate_cohort(&config).unwrap();
    assert_eq!(a.profiles, b.profiles);
    assert_eq!(a.dataset.rows, b.dataset.rows);
    let other = generate_cohort(&CohortConfig { seed: 18, ..config }).unwrap();
    assert_ne!(a.dataset.rows, other.dataset.rows);
}

#[test]
fn stratified_cohort_has_requested_receptive_share() {
    let config = CohortConfig {
        n_patients: 20,
        samples_per_patient: 1,
        threshold_policy: ThresholdPolicy::Stratified(0.65),
        ..CohortConfig::default()
    };
    let cohort = generate_cohort(&config).unwrap();
    let below = cohort.profiles.iter().filter(|p| p.action_threshold < 40).count();
    assert_eq!(below, 13);
}

#[test]
fn zero_threshold_share_matches_the_grid() {
    let expected = grid_positive_share();
    assert!((expected - 0.5909).abs() < 5e-5, "{expected}");
    let config = CohortConfig {
        n_patients: 500,
        samples_per_patient: 40,
        threshold_policy: ThresholdPolicy::Fixed(0),
        seed: 3,
    };
    let share = generate_cohort(&config).unwrap().dataset.positive_fraction();
    assert!((share - expected).abs() < 0.02, "{share} vs {expected}");
}

#[test]
fn unreachable_threshold_never_acts() {
    let config = CohortConfig {
        n_patients: 3,
        samples_per_patient: 200,
        threshold_policy: ThresholdPolicy::Fixed(THRESHOLD_MAX),
        seed: 1,
    };
    assert_eq!(generate_cohort(&config).unwrap().dataset.positive_fraction(), 0.0);
}
