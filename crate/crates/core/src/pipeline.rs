//! Direct and two-step behaviour models and the personalisation flows built
//! on them.
//!
//! The direct model predicts behaviour from traits, context and intervention
//! (optionally with the patient id). The two-step model predicts each MAT
//! component from the same observation features, then predicts behaviour
//! from the three MAT values plus the patient id. Personalising a two-step
//! model runs the counterfactual search twice: once over MAT values to find
//! which dimensions to move, then over intervention properties to move them.

use log::warn;
use serde_json::{json, Value};

use crate::counterfactual::{generate, select_minimal, CfConstraints, Classifier, Counterfactual, GaParams};
use crate::dataset::{Dataset, Encoder, LabelKind};
use crate::domain::{
    observation_from_codes, FeatureId, FeatureSchema, MatDim, MatVector, Observation, LEVEL_MAX,
};
use crate::error::{Error, Result};
use crate::forest::{forest_from_value, forest_to_value, Forest, ForestParams};
use crate::seed;

/// An encoder and the forest trained on its output.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    encoder: Encoder,
    forest: Forest,
}

impl FittedModel {
    /// Fits on `dataset.schema` features against `dataset.label_kind`.
    pub fn fit(dataset: &Dataset, params: &ForestParams) -> Result<Self> {
        let (encoder, matrix) = dataset.encode()?;
        let forest = Forest::fit(&matrix, params)?;
        if forest.is_constant() {
            warn!(
                "training labels for {:?} contain a single class ({}); model is constant",
                dataset.label_kind,
                forest.classes()[0]
            );
        }
        Ok(FittedModel { encoder, forest })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn predict_observation(&self, obs: &Observation) -> Result<u32> {
        self.predict(&self.schema().observation_codes(obs)?)
    }

    /// Predictions for every row of `dataset`, using this model's schema.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<u32>> {
        let mut row = Vec::with_capacity(self.encoder.width());
        dataset
            .rows
            .iter()
            .map(|s| {
                row.clear();
                self.encoder.encode_codes_into(&self.schema().codes(s)?, &mut row)?;
                self.forest.predict(&row)
            })
            .collect()
    }

    pub fn to_value(&self) -> Value {
        json!({
            "schema": self.encoder.schema().names(),
            "id_levels": self.encoder.id_levels(),
            "forest": forest_to_value(&self.forest),
        })
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let names: Vec<String> = serde_json::from_value(value["schema"].clone())?;
        let ids: Vec<u32> = serde_json::from_value(value["id_levels"].clone())?;
        let schema = FeatureSchema::from_names(&names)?;
        let encoder = Encoder::with_ids(schema, ids);
        let forest = forest_from_value(&value["forest"])?;
        if forest.n_features() != encoder.width() {
            return Err(Error::DimensionMismatch {
                expected: encoder.width(),
                got: forest.n_features(),
            });
        }
        Ok(FittedModel { encoder, forest })
    }
}

impl Classifier for FittedModel {
    fn schema(&self) -> &FeatureSchema {
        self.encoder.schema()
    }

    fn classes(&self) -> &[u32] {
        self.forest.classes()
    }

    fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
        self.forest.predict_proba(&self.encoder.encode_codes(codes)?)
    }
}

/// Behaviour predicted straight from observation features.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectModel {
    pub model: FittedModel,
    pub include_patient_id: bool,
}

impl Classifier for DirectModel {
    fn schema(&self) -> &FeatureSchema {
        self.model.schema()
    }

    fn classes(&self) -> &[u32] {
        self.model.classes()
    }

    fn predict_proba(&self, codes: &[u32]) -> Result<Vec<f64>> {
        self.model.predict_proba(codes)
    }
}

pub fn train_direct(train: &Dataset, include_patient_id: bool, params: &ForestParams) -> Result<DirectModel> {
    let data = train.with_schema(FeatureSchema::behaviour_inputs(include_patient_id), LabelKind::Behaviour);
    Ok(DirectModel {
        model: FittedModel::fit(&data, params)?,
        include_patient_id,
    })
}

/// Step one: one 5-class model per MAT dimension over observation features.
/// Step two: behaviour from `(mat_m, mat_a, mat_t, patient_id)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepModel<S = FittedModel, B = FittedModel> {
    pub motivation: S,
    pub ability: S,
    pub trigger: S,
    pub behaviour: B,
}

pub fn train_two_step(train: &Dataset, params: &ForestParams) -> Result<TwoStepModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.rows.iter().any(|s| s.mat.is_none()) {
        return Err(Error::MissingMat);
    }
    Ok(TwoStepModel {
        motivation: fit_stream(train, FeatureSchema::observation(), LabelKind::Motivation, params, 0)?,
        ability: fit_stream(train, FeatureSchema::observation(), LabelKind::Ability, params, 1)?,
        trigger: fit_stream(train, FeatureSchema::observation(), LabelKind::Trigger, params, 2)?,
        behaviour: train_step_two(train, params)?,
    })
}

fn fit_stream(
    train: &Dataset,
    schema: FeatureSchema,
    label: LabelKind,
    params: &ForestParams,
    stream: u64,
) -> Result<FittedModel> {
    let params = ForestParams {
        seed: seed::mix(params.seed, stream),
        ..*params
    };
    FittedModel::fit(&train.with_schema(schema, label), &params)
}

/// The step-two model alone, identical to the one `train_two_step` builds
/// with the same parameters.
pub fn train_step_two(train: &Dataset, params: &ForestParams) -> Result<FittedModel> {
    if train.rows.iter().any(|s| s.mat.is_none()) {
        return Err(Error::MissingMat);
    }
    fit_stream(train, FeatureSchema::mat_with_id(), LabelKind::Behaviour, params, 3)
}

impl<S: Classifier, B: Classifier> TwoStepModel<S, B> {
    pub fn step_one(&self, dim: MatDim) -> &S {
        match dim {
            MatDim::Motivation => &self.motivation,
            MatDim::Ability => &self.ability,
            MatDim::Trigger => &self.trigger,
        }
    }

    pub fn predict_mat(&self, obs: &Observation) -> Result<MatVector> {
        let mut mat = MatVector {
            motivation: 0,
            ability: 0,
            trigger: 0,
        };
        for dim in MatDim::ALL {
            let model = self.step_one(dim);
            let value = model.predict(&model.schema().observation_codes(obs)?)?;
            mat.set(dim, value as u8);
        }
        Ok(mat)
    }

    /// Codes for the step-two model. Patient ids unseen in training encode
    /// as an all-zero identifier block.
    pub fn step_two_codes(&self, mat: &MatVector, patient_id: u32) -> Vec<u32> {
        self.behaviour
            .schema()
            .ids()
            .map(|id| match id {
                FeatureId::MatM => mat.motivation.into(),
                FeatureId::MatA => mat.ability.into(),
                FeatureId::MatT => mat.trigger.into(),
                FeatureId::PatientId => patient_id,
                other => panic!("unexpected step-two feature {other}"),
            })
            .collect()
    }

    pub fn predict_from_mat(&self, mat: &MatVector, patient_id: u32) -> Result<u32> {
        self.behaviour.predict(&self.step_two_codes(mat, patient_id))
    }

    pub fn predict(&self, obs: &Observation) -> Result<u32> {
        self.predict_from_mat(&self.predict_mat(obs)?, obs.patient.patient_id)
    }
}

impl TwoStepModel {
    /// Composed predictions for every row of `dataset`; ground-truth MAT
    /// columns are ignored.
    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<u32>> {
        let m = self.motivation.predict_dataset(dataset)?;
        let a = self.ability.predict_dataset(dataset)?;
        let t = self.trigger.predict_dataset(dataset)?;
        dataset
            .rows
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mat = MatVector::new(m[i] as u8, a[i] as u8, t[i] as u8)?;
                self.predict_from_mat(&mat, s.observation.patient.patient_id)
            })
            .collect()
    }
}

pub fn predict_two_step<S: Classifier, B: Classifier>(model: &TwoStepModel<S, B>, obs: &Observation) -> Result<u32> {
    model.predict(obs)
}

fn bci_constraints(schema: &FeatureSchema, target_class: u32, frozen: &[String]) -> CfConstraints {
    let names: Vec<&str> = FeatureId::BCI
        .iter()
        .filter(|f| schema.contains(**f) && !frozen.iter().any(|n| n == f.name()))
        .map(|f| f.name())
        .collect();
    CfConstraints::new(&names, target_class)
}

/// Sparsest intervention change that makes `model` predict behaviour 1.
pub fn personalize_direct<C: Classifier + ?Sized>(
    model: &C,
    obs: &Observation,
    params: &GaParams,
) -> Result<Option<Counterfactual>> {
    let schema = model.schema();
    let codes = schema.observation_codes(obs)?;
    let candidates = generate(model, &codes, &bci_constraints(schema, 1, &[]), params)?;
    if candidates.is_empty() {
        return Ok(None);
    }
    select_minimal(&candidates).map(Some)
}

/// Result of the two-pass personalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepPersonalization {
    /// MAT vector chosen by the first pass.
    pub mat_target: MatVector,
    /// Intervention change found by the second pass, over the step-one schema.
    pub bci_change: Counterfactual,
}

pub fn personalize_two_step<S: Classifier, B: Classifier>(
    model: &TwoStepModel<S, B>,
    obs: &Observation,
    params: &GaParams,
) -> Result<Option<TwoStepPersonalization>> {
    let step_one_schema = model.motivation.schema().clone();
    let original = step_one_schema.observation_codes(obs)?;
    let predicted = model.predict_mat(obs)?;
    let patient_id = obs.patient.patient_id;

    let behaviour_codes = model.step_two_codes(&predicted, patient_id);
    if model.behaviour.predict(&behaviour_codes)? == 1 {
        let p = model.behaviour.proba_of(&behaviour_codes, 1)?;
        return Ok(Some(TwoStepPersonalization {
            mat_target: predicted,
            bci_change: Counterfactual::new(&step_one_schema, &original, original.clone(), p),
        }));
    }

    // Pass 1: which MAT dimensions to move.
    let mat_names: Vec<&str> = MatDim::ALL.iter().map(|d| d.feature().name()).collect();
    let pass_one = GaParams {
        seed: seed::mix(params.seed, 0),
        ..*params
    };
    let candidates = generate(
        &model.behaviour,
        &behaviour_codes,
        &CfConstraints::new(&mat_names, 1),
        &pass_one,
    )?;
    if candidates.is_empty() {
        return Ok(None);
    }
    let chosen = select_minimal(&candidates)?;
    let position = |id| model.behaviour.schema().position(id).expect("MAT feature");
    let mut mat_target = predicted;
    for dim in MatDim::ALL {
        mat_target.set(dim, chosen.modified[position(dim.feature())] as u8);
    }

    // Pass 2: intervention changes that move each selected dimension.
    let mut current = original.clone();
    let mut frozen: Vec<String> = Vec::new();
    for (k, dim) in MatDim::ALL.into_iter().enumerate() {
        let required = mat_target.get(dim);
        if required == predicted.get(dim) {
            continue;
        }
        let step = model.step_one(dim);
        let ga = GaParams {
            seed: seed::mix(params.seed, 1 + k as u64),
            ..*params
        };
        let mut moved = false;
        for value in required..=LEVEL_MAX {
            let constraints = bci_constraints(&step_one_schema, value.into(), &frozen);
            if constraints.mutable.is_empty() {
                break;
            }
            let found = generate(step, &current, &constraints, &ga)?;
            if found.is_empty() {
                continue;
            }
            let best = select_minimal(&found)?;
            frozen.extend(best.changed_features.iter().cloned());
            current = best.modified;
            moved = true;
            break;
        }
        if !moved {
            return Ok(None);
        }
    }

    let revised = observation_from_codes(&step_one_schema, &current, obs)?;
    let revised_mat = model.predict_mat(&revised)?;
    let revised_codes = model.step_two_codes(&revised_mat, patient_id);
    if model.behaviour.predict(&revised_codes)? != 1 {
        return Ok(None);
    }
    let p = model.behaviour.proba_of(&revised_codes, 1)?;
    Ok(Some(TwoStepPersonalization {
        mat_target,
        bci_change: Counterfactual::new(&step_one_schema, &original, current, p),
    }))
}

/// `{original_bci, revised_bci, mat_target, changed_features, change_count, probability}`.
pub fn personalization_json(
    obs: &Observation,
    schema: &FeatureSchema,
    change: &Counterfactual,
    mat_target: Option<&MatVector>,
) -> Result<Value> {
    let revised = observation_from_codes(schema, &change.modified, obs)?;
    Ok(json!({
        "original_bci": obs.bci,
        "revised_bci": revised.bci,
        "mat_target": mat_target,
        "changed_features": change.changed_features,
        "change_count": change.change_count,
        "probability": crate::forest::round9(change.probability),
    }))
}

/// A persisted model of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Direct(DirectModel),
    TwoStep(TwoStepModel),
}

impl SavedModel {
    pub fn to_json(&self) -> String {
        let value = match self {
            SavedModel::Direct(m) => json!({
                "kind": "direct",
                "include_patient_id": m.include_patient_id,
                "model": m.model.to_value(),
            }),
            SavedModel::TwoStep(m) => json!({
                "kind": "two_step",
                "motivation": m.motivation.to_value(),
                "ability": m.ability.to_value(),
                "trigger": m.trigger.to_value(),
                "behaviour": m.behaviour.to_value(),
            }),
        };
        value.to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        match value["kind"].as_str() {
            Some("direct") => Ok(SavedModel::Direct(DirectModel {
                model: FittedModel::from_value(&value["model"])?,
                include_patient_id: value["include_patient_id"].as_bool().unwrap_or(false),
            })),
            Some("two_step") => Ok(SavedModel::TwoStep(TwoStepModel {
                motivation: FittedModel::from_value(&value["motivation"])?,
                ability: FittedModel::from_value(&value["ability"])?,
                trigger: FittedModel::from_value(&value["trigger"])?,
                behaviour: FittedModel::from_value(&value["behaviour"])?,
            })),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::simulator::oracle::{BehaviourRule, MatRule, ThresholdRule};
    use crate::simulator::{compute_mat_for, generate_cohort, CohortConfig, ThresholdPolicy};

    fn cohort(n: u32, policy: ThresholdPolicy, samples: u32, seed: u64) -> crate::simulator::Cohort {
        generate_cohort(&CohortConfig {
            n_patients: n,
            threshold_policy: policy,
            samples_per_patient: samples,
            seed,
        })
        .unwrap()
    }

    fn small_forest() -> ForestParams {
        ForestParams {
            n_trees: 20,
            ..Default::default()
        }
    }

    #[test]
    fn direct_model_feature_sets() {
        let one = cohort(1, ThresholdPolicy::Fixed(10), 60, 1);
        let model = train_direct(&one.dataset, false, &small_forest()).unwrap();
        assert_eq!(model.schema().len(), 14);
        assert!(!model.schema().contains(FeatureId::PatientId));

        let ten = cohort(10, ThresholdPolicy::UniformRandom, 20, 1);
        let model = train_direct(&ten.dataset, true, &small_forest()).unwrap();
        let id_cols = model
            .model
            .encoder()
            .columns()
            .iter()
            .filter(|c| c.starts_with("patient_id="))
            .count();
        assert_eq!(id_cols, 10);
    }

    #[test]
    fn single_class_training_gives_constant_model() {
        let never = cohort(1, ThresholdPolicy::Fixed(64), 30, 1);
        let model = train_direct(&never.dataset, false, &small_forest()).unwrap();
        assert!(model.model.forest().is_constant());
        let obs = never.dataset.rows[0].observation;
        assert_eq!(model.model.predict_observation(&obs).unwrap(), 0);
        assert!(personalize_direct(&model, &obs, &GaParams::default()).unwrap().is_none());
    }

    #[test]
    fn two_step_construction() {
        let data = cohort(4, ThresholdPolicy::UniformRandom, 40, 2);
        let model = train_two_step(&data.dataset, &small_forest()).unwrap();
        assert_eq!(model.behaviour.encoder().width(), 3 + 4);
        assert_eq!(model.motivation.schema(), &FeatureSchema::observation());
        let obs = data.dataset.rows[0].observation;
        let y = predict_two_step(&model, &obs).unwrap();
        assert!(y <= 1);

        let mut no_mat = data.dataset.clone();
        no_mat.rows[3].mat = None;
        assert!(matches!(train_two_step(&no_mat, &small_forest()), Err(Error::MissingMat)));
    }

    #[test]
    fn unknown_patient_encodes_as_zero_block() {
        let data = cohort(3, ThresholdPolicy::UniformRandom, 30, 2);
        let model = train_two_step(&data.dataset, &small_forest()).unwrap();
        let mut obs = data.dataset.rows[0].observation;
        obs.patient.patient_id = 77;
        assert!(predict_two_step(&model, &obs).unwrap() <= 1);
    }

    fn oracle_two_step(thresholds: BTreeMap<u32, u8>) -> TwoStepModel<MatRule, ThresholdRule> {
        TwoStepModel {
            motivation: MatRule::new(MatDim::Motivation),
            ability: MatRule::new(MatDim::Ability),
            trigger: MatRule::new(MatDim::Trigger),
            behaviour: ThresholdRule::new(thresholds),
        }
    }

    #[test]
    fn oracle_composition_matches_behaviour_rule() {
        let data = cohort(6, ThresholdPolicy::UniformRandom, 50, 9);
        let thresholds = data
            .profiles
            .iter()
            .map(|p| (p.traits.patient_id, p.action_threshold))
            .collect();
        let model = oracle_two_step(thresholds);
        for s in &data.dataset.rows {
            assert_eq!(predict_two_step(&model, &s.observation).unwrap(), u32::from(s.behaviour));
        }
    }

    #[test]
    fn constant_step_one_leaves_only_patient_dependence() {
        let data = cohort(5, ThresholdPolicy::UniformRandom, 40, 4);
        let mut constant = data.dataset.clone();
        for s in &mut constant.rows {
            s.mat = Some(MatVector::new(2, 2, 2).unwrap());
        }
        let trained = train_two_step(&data.dataset, &small_forest()).unwrap();
        let flat = train_two_step(&constant, &small_forest()).unwrap();
        let model = TwoStepModel {
            motivation: flat.motivation,
            ability: flat.ability,
            trigger: flat.trigger,
            behaviour: trained.behaviour,
        };
        let mut by_patient: BTreeMap<u32, u32> = BTreeMap::new();
        for s in &data.dataset.rows {
            assert_eq!(model.predict_mat(&s.observation).unwrap(), MatVector::new(2, 2, 2).unwrap());
            let y = predict_two_step(&model, &s.observation).unwrap();
            assert_eq!(*by_patient.entry(s.patient_id()).or_insert(y), y);
        }
    }

    #[test]
    fn personalize_direct_with_rule_model() {
        let model = BehaviourRule::new(10);
        let data = cohort(1, ThresholdPolicy::Fixed(10), 200, 5);
        let mut solved = 0;
        for s in &data.dataset.rows {
            let Some(cf) = personalize_direct(&model, &s.observation, &GaParams::default()).unwrap() else {
                continue;
            };
            solved += 1;
            if s.behaviour == 1 {
                assert_eq!(cf.change_count, 0);
            }
            let revised = observation_from_codes(model.schema(), &cf.modified, &s.observation).unwrap();
            assert_eq!(revised.patient, s.observation.patient);
            assert_eq!(revised.context, s.observation.context);
            assert_eq!(model.predict(&cf.modified).unwrap(), 1);
        }
        assert!(solved > 100);
    }

    #[test]
    fn two_step_personalisation_with_oracles() {
        let data = cohort(1, ThresholdPolicy::Fixed(10), 200, 13);
        let model = oracle_two_step(BTreeMap::from([(0, 10)]));
        let mut checked = 0;
        for s in data.dataset.rows.iter().filter(|s| s.behaviour == 0) {
            let Some(result) = personalize_two_step(&model, &s.observation, &GaParams::default()).unwrap() else {
                continue;
            };
            checked += 1;
            let revised = observation_from_codes(
                model.motivation.schema(),
                &result.bci_change.modified,
                &s.observation,
            )
            .unwrap();
            assert_eq!(revised.patient, s.observation.patient);
            assert_eq!(revised.context, s.observation.context);
            assert!(result.bci_change.changed_features.iter().all(|f| FeatureId::from_name(f).unwrap().is_bci()));
            assert_eq!(predict_two_step(&model, &revised).unwrap(), 1);
            assert!(compute_mat_for(&revised).product() > 10);
            assert!(result.mat_target.product() > 10);
        }
        assert!(checked > 20, "{checked}");
    }

    #[test]
    fn two_step_identity_case() {
        let data = cohort(1, ThresholdPolicy::Fixed(0), 50, 13);
        let model = oracle_two_step(BTreeMap::from([(0, 0)]));
        let s = data.dataset.rows.iter().find(|s| s.behaviour == 1).unwrap();
        let result = personalize_two_step(&model, &s.observation, &GaParams::default())
            .unwrap()
            .unwrap();
        assert_eq!(result.bci_change.change_count, 0);
        assert_eq!(result.mat_target, compute_mat_for(&s.observation));
    }

    #[test]
    fn saved_models_round_trip() {
        let data = cohort(3, ThresholdPolicy::UniformRandom, 30, 2);
        let direct = SavedModel::Direct(train_direct(&data.dataset, true, &small_forest()).unwrap());
        let text = direct.to_json();
        assert_eq!(SavedModel::from_json(&text).unwrap().to_json(), text);
        let two = SavedModel::TwoStep(train_two_step(&data.dataset, &small_forest()).unwrap());
        let text = two.to_json();
        let back = SavedModel::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        let (SavedModel::TwoStep(a), SavedModel::TwoStep(b)) = (&two, &back) else {
            unreachable!()
        };
        for s in &data.dataset.rows {
            assert_eq!(a.predict(&s.observation).unwrap(), b.predict(&s.observation).unwrap());
        }
        assert!(SavedModel::from_json(r#"{"kind":"other"}"#).is_err());
    }
}
