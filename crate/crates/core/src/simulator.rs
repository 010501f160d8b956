//! Synthetic patients and ground-truth behaviour.
//!
//! Each MAT component is a clamped sum of small integer effects of the
//! observable features (see [`compute_mat`]); behaviour is 1 exactly when the
//! MAT product strictly exceeds the patient's action threshold.
//!
//! Patient `i` of a cohort draws everything (profile first, then its daily
//! samples) from the stream `ChaCha8(mix(seed, i))`, so generation can run in
//! parallel and still be reproducible.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelKind};
use crate::domain::{
    schema_default, ActivityType, BciSpec, Context, DayOfWeek, DeliverySchedule, Gender,
    Location, MatVector, MessageContent, MessagePhrasing, Motion, Observation, PatientProfile,
    PatientTraits, Sample, TimeOfDay, AGE_MAX, AGE_MIN, LEVEL_MAX, THRESHOLD_MAX,
};
use crate::error::{Error, Result};
use crate::seed;

/// Thresholds below this value count as "receptive" in stratified cohorts.
pub const RECEPTIVE_CUTOFF: u8 = 40;

/// Stream index reserved for cohort-level draws (stratum assignment).
const COHORT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed(u8),
    UniformRandom,
    /// Fraction of patients whose threshold is drawn from `[0, 39]`; the rest
    /// come from `[40, 64]`.
    Stratified(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_patients: u32,
    pub threshold_policy: ThresholdPolicy,
    pub samples_per_patient: u32,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_patients: 1,
            threshold_policy: ThresholdPolicy::Fixed(10),
            samples_per_patient: 432,
            seed: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::InvalidConfig("n_patients must be at least 1".into()));
        }
        if self.samples_per_patient == 0 {
            return Err(Error::InvalidConfig(
                "samples_per_patient must be at least 1".into(),
            ));
        }
        match self.threshold_policy {
            ThresholdPolicy::Fixed(t) if t > THRESHOLD_MAX => Err(Error::InvalidConfig(format!(
                "threshold_policy.fixed: {t} outside [0, {THRESHOLD_MAX}]"
            ))),
            ThresholdPolicy::Stratified(f) if !(0.0..=1.0).contains(&f) => {
                Err(Error::InvalidConfig(format!(
                    "threshold_policy.stratified: fraction {f} outside [0, 1]"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of patients a stratified cohort places below the cutoff.
    pub fn receptive_count(&self) -> Option<u32> {
        match self.threshold_policy {
            ThresholdPolicy::Stratified(f) => Some((f * f64::from(self.n_patients)).round() as u32),
            _ => None,
        }
    }
}

fn clamp_level(x: i32) -> u8 {
    x.clamp(0, i32::from(LEVEL_MAX)) as u8
}

/// Ground-truth MAT scores. Depends only on observable features; the patient
/// id and action threshold play no part.
pub fn compute_mat(traits: &PatientTraits, context: &Context, bci: &BciSpec) -> MatVector {
    let affect_effect = match context.affect {
        a if a >= 3 => 1,
        a if a <= 1 => -1,
        _ => 0,
    };
    let benefit_message = i32::from(bci.message_content == MessageContent::MotivationalBenefit);
    let motivation =
        clamp_level(i32::from(traits.motivation_at_enrollment) + affect_effect + benefit_message);

    let planning_message = i32::from(bci.message_content == MessageContent::AbilityPlanning);
    let high_load = i32::from(context.cognitive_load >= 3);
    let away_from_home = i32::from(
        matches!(
            bci.activity_type,
            ActivityType::Yoga | ActivityType::TaiChi | ActivityType::Meditation
        ) && context.location != Location::Home,
    );
    let ability =
        clamp_level(4 - i32::from(bci.dose) + planning_message - high_load - away_from_home);

    let context_triggered = i32::from(bci.delivery_schedule == DeliverySchedule::ContextTriggered);
    let well_timed = i32::from(matches!(
        (bci.delivery_schedule, context.time_of_day),
        (DeliverySchedule::FixedMorning, TimeOfDay::Morning)
            | (DeliverySchedule::FixedEvening, TimeOfDay::Evening)
    ));
    let encouraging = i32::from(bci.message_phrasing == MessagePhrasing::Encouraging);
    let in_vehicle = i32::from(context.motion == Motion::InVehicle);
    let trigger = clamp_level(2 + context_triggered + well_timed + encouraging - in_vehicle);

    MatVector {
        motivation,
        ability,
        trigger,
    }
}

pub fn compute_mat_for(obs: &Observation) -> MatVector {
    compute_mat(&obs.patient, &obs.context, &obs.bci)
}

/// 1 iff `M × A × T > action_threshold`.
pub fn behaviour(mat: &MatVector, action_threshold: u8) -> u8 {
    u8::from(mat.product() > u32::from(action_threshold))
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, values: &[T]) -> T {
    values[rng.gen_range(0..values.len())]
}

fn receptive_patients(config: &CohortConfig) -> Vec<bool> {
    let n = config.n_patients as usize;
    let k = config.receptive_count().unwrap_or(0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(config.seed, COHORT_STREAM));
    let mut receptive = vec![false; n];
    for &i in order.iter().take(k.min(n)) {
        receptive[i] = true;
    }
    receptive
}

fn draw_profile(
    config: &CohortConfig,
    index: u32,
    receptive: bool,
    rng: &mut ChaCha8Rng,
) -> PatientProfile {
    let traits = PatientTraits {
        patient_id: index,
        age: rng.gen_range(AGE_MIN..=AGE_MAX),
        gender: pick(rng, Gender::ALL),
        motivation_at_enrollment: rng.gen_range(0..=LEVEL_MAX),
    };
    let action_threshold = match config.threshold_policy {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::UniformRandom => rng.gen_range(0..=THRESHOLD_MAX),
        ThresholdPolicy::Stratified(_) if receptive => rng.gen_range(0..RECEPTIVE_CUTOFF),
        ThresholdPolicy::Stratified(_) => rng.gen_range(RECEPTIVE_CUTOFF..=THRESHOLD_MAX),
    };
    PatientProfile {
        traits,
        action_threshold,
    }
}

/// Profile of patient `index`; identical on every call with the same config.
pub fn sample_patient(config: &CohortConfig, index: u32) -> Result<PatientProfile> {
    config.validate()?;
    if index >= config.n_patients {
        return Err(Error::InvalidConfig(format!(
            "patient index {index} out of range for {} patients",
            config.n_patients
        )));
    }
    let receptive = receptive_patients(config)[index as usize];
    let mut rng = seed::stream(config.seed, index.into());
    Ok(draw_profile(config, index, receptive, &mut rng))
}

pub fn random_context(rng: &mut ChaCha8Rng) -> Context {
    Context {
        affect: rng.gen_range(0..=LEVEL_MAX),
        cognitive_load: rng.gen_range(0..=LEVEL_MAX),
        motion: pick(rng, Motion::ALL),
        location: pick(rng, Location::ALL),
        time_of_day: pick(rng, TimeOfDay::ALL),
        day_of_week: pick(rng, DayOfWeek::ALL),
    }
}

pub fn random_bci(rng: &mut ChaCha8Rng) -> BciSpec {
    BciSpec {
        activity_type: pick(rng, ActivityType::ALL),
        dose: rng.gen_range(0..=LEVEL_MAX),
        delivery_schedule: pick(rng, DeliverySchedule::ALL),
        message_phrasing: pick(rng, MessagePhrasing::ALL),
        message_content: pick(rng, MessageContent::ALL),
    }
}

/// A labelled sample for a known patient.
pub fn simulate_sample(
    profile: &PatientProfile,
    context: Context,
    bci: BciSpec,
    day_index: u32,
) -> Sample {
    let mat = compute_mat(&profile.traits, &context, &bci);
    Sample {
        observation: Observation {
            patient: profile.traits,
            context,
            bci,
        },
        mat: Some(mat),
        behaviour: behaviour(&mat, profile.action_threshold),
        day_index,
    }
}

/// A simulated cohort: the dataset together with the hidden patient profiles.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub profiles: Vec<PatientProfile>,
    pub dataset: Dataset,
}

pub fn generate_cohort(config: &CohortConfig) -> Result<Cohort> {
    config.validate()?;
    let receptive = receptive_patients(config);
    let per_patient: Vec<(PatientProfile, Vec<Sample>)> = (0..config.n_patients)
        .into_par_iter()
        .map(|index| {
            let mut rng = seed::stream(config.seed, index.into());
            let profile = draw_profile(config, index, receptive[index as usize], &mut rng);
            let samples = (0..config.samples_per_patient)
                .map(|day| {
                    let context = random_context(&mut rng);
                    let bci = random_bci(&mut rng);
                    simulate_sample(&profile, context, bci, day)
                })
                .collect();
            (profile, samples)
        })
        .collect();

    let mut profiles = Vec::with_capacity(per_patient.len());
    let mut rows = Vec::with_capacity((config.n_patients * config.samples_per_patient) as usize);
    for (profile, samples) in per_patient {
        profiles.push(profile);
        rows.extend(samples);
    }
    Ok(Cohort {
        profiles,
        dataset: Dataset::new(schema_default(), rows, LabelKind::Behaviour),
    })
}

/// Labelled rows for every patient, ordered by patient id then day.
pub fn generate_dataset(config: &CohortConfig) -> Result<Dataset> {
    generate_cohort(config).map(|c| c.dataset)
}

/// Exact rule-based classifiers with the same interface as fitted models.
/// Used as oracles in tests and in the composition checks of the
/// supervision experiment.
pub mod oracle {
    use std::collections::BTreeMap;

    use super::{behaviour, compute_mat_for};
    use crate::counterfactual::Classifier;
    use crate::domain::{
        observation_from_codes, schema_default, FeatureId, FeatureSchema, MatDim, MatVector,
        Observation,
    };
    use crate::error::Result;

    const BINARY: [u32; 2] = [0, 1];
    const LEVELS: [u32; 5] = [0, 1, 2, 3, 4];

    fn one_hot(classes: &[u32], label: u32) -> Vec<f64> {
        classes
            .iter()
            .map(|&c| if c == label { 1.0 } else { 0.0 })
            .collect()
    }

    /// The behaviour rule for a single patient with a known threshold.
    #[derive(Debug, Clone)]
    pub struct BehaviourRule {
        schema: FeatureSchema,
        pub threshold: u8,
    }

    impl BehaviourRule {
        pub fn new(threshold: u8) -> Self {
            Self::with_schema(threshold, FeatureSchema::observation())
        }

        /// `schema` must cover all fourteen observation features.
        pub fn with_schema(threshold: u8, schema: FeatureSchema) -> Self {
            BehaviourRule { schema, threshold }
        }

        pub fn default_schema(threshold: u8) -> Self {
            Self::with_schema(threshold, schema_default())
        }
    }

    impl Classifier for BehaviourRule {
        fn schema(&self) -> &FeatureSchema {
            &self.schema
        }

        fn classes(&self) -> &[u32] {
            &BINARY
        }

        fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
            let obs = observation_from_codes(&self.schema, codes, &Observation::blank())?;
            let label = behaviour(&compute_mat_for(&obs), self.threshold);
            Ok(one_hot(&BINARY, label.into()))
        }
    }

    /// Exact MAT component from observation features.
    #[derive(Debug, Clone)]
    pub struct MatRule {
        schema: FeatureSchema,
        pub dim: MatDim,
    }

    impl MatRule {
        pub fn new(dim: MatDim) -> Self {
            MatRule {
                schema: FeatureSchema::observation(),
                dim,
            }
        }
    }

    impl Classifier for MatRule {
        fn schema(&self) -> &FeatureSchema {
            &self.schema
        }

        fn classes(&self) -> &[u32] {
            &LEVELS
        }

        fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
            let obs = observation_from_codes(&self.schema, codes, &Observation::blank())?;
            let value = compute_mat_for(&obs).get(self.dim);
            Ok(one_hot(&LEVELS, value.into()))
        }
    }

    /// Second-step oracle: thresholds the MAT product per patient. Unknown
    /// patients are treated as never acting.
    #[derive(Debug, Clone)]
    pub struct ThresholdRule {
        schema: FeatureSchema,
        pub thresholds: BTreeMap<u32, u8>,
    }

    impl ThresholdRule {
        pub fn new(thresholds: BTreeMap<u32, u8>) -> Self {
            ThresholdRule {
                schema: FeatureSchema::mat_with_id(),
                thresholds,
            }
        }
    }

    impl Classifier for ThresholdRule {
        fn schema(&self) -> &FeatureSchema {
            &self.schema
        }

        fn classes(&self) -> &[u32] {
            &BINARY
        }

        fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
            self.schema.validate_codes(codes)?;
            let get = |id| codes[self.schema.position(id).expect("step-two feature")];
            let mat = MatVector {
                motivation: get(FeatureId::MatM) as u8,
                ability: get(FeatureId::MatA) as u8,
                trigger: get(FeatureId::MatT) as u8,
            };
            let label = match self.thresholds.get(&get(FeatureId::PatientId)) {
                Some(&t) => behaviour(&mat, t),
                None => 0,
            };
            Ok(one_hot(&BINARY, label.into()))
        }
    }
}
