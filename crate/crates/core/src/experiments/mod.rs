//! Seeded reproductions of the three studies: the action-threshold sweep,
//! learning across patient cohorts, and MAT supervision.
//!
//! Every (condition, repetition) pair is an independent task run on the rayon
//! pool. Seeds are derived from the master seed alone, and rows are assembled
//! in a fixed order, so tables do not depend on the thread count.

mod metrics;
pub mod svg;

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{accuracy, macro_f1, mean_std};

use crate::dataset::{incremental_split, Dataset, LabelKind, Split};
use crate::domain::{FeatureSchema, MatDim};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::pipeline::{train_direct, train_step_two, train_two_step, FittedModel};
use crate::seed;
use crate::simulator::{generate_dataset, CohortConfig, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    ThresholdSweep,
    MultiPatient,
    Supervision,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 3] = [
        ExperimentId::ThresholdSweep,
        ExperimentId::MultiPatient,
        ExperimentId::Supervision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::ThresholdSweep => "threshold_sweep",
            ExperimentId::MultiPatient => "multi_patient",
            ExperimentId::Supervision => "supervision",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

/// One cohort of the multi-patient studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n_patients: u32,
    pub fraction_below_40: f64,
}

impl CohortSpec {
    fn descriptor(&self) -> String {
        format!("patients={} below40={:.2}", self.n_patients, self.fraction_below_40)
    }
}

pub const DEFAULT_THRESHOLDS: [u8; 14] = [0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 64];

pub const DEFAULT_COHORTS: [CohortSpec; 6] = [
    CohortSpec { n_patients: 1, fraction_below_40: 1.0 },
    CohortSpec { n_patients: 5, fraction_below_40: 0.4 },
    CohortSpec { n_patients: 10, fraction_below_40: 0.8 },
    CohortSpec { n_patients: 25, fraction_below_40: 0.65 },
    CohortSpec { n_patients: 50, fraction_below_40: 0.7 },
    CohortSpec { n_patients: 100, fraction_below_40: 0.52 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    /// Used by the threshold sweep.
    pub thresholds: Vec<u8>,
    /// Used by the multi-patient and supervision studies.
    pub cohorts: Vec<CohortSpec>,
    /// Train samples per patient; ascending.
    pub train_sizes: Vec<usize>,
    /// Test samples per patient.
    pub test_size: usize,
    pub repetitions: u32,
    pub master_seed: u64,
    pub forest: ForestParams,
    /// Supervision setups to evaluate; all of them by default.
    pub setups: Vec<Setup>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(id: ExperimentId) -> Self {
        let train_sizes = match id {
            ExperimentId::ThresholdSweep => vec![2, 4, 8, 16, 24, 32],
            ExperimentId::MultiPatient | ExperimentId::Supervision => vec![2, 4, 8, 16, 24, 30],
        };
        ExperimentConfig {
            id,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            cohorts: DEFAULT_COHORTS.to_vec(),
            train_sizes,
            test_size: 400,
            repetitions: 20,
            master_seed: 0,
            forest: ForestParams::default(),
            setups: Setup::ALL.to_vec(),
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.repetitions == 0 {
            return invalid("repetitions must be at least 1");
        }
        if self.train_sizes.is_empty() {
            return invalid("train_sizes must be non-empty");
        }
        if self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("train_sizes must be strictly ascending");
        }
        if self.train_sizes[0] == 0 {
            return invalid("train sizes must be positive");
        }
        if self.test_size == 0 {
            return invalid("test_size must be positive");
        }
        match self.id {
            ExperimentId::ThresholdSweep if self.thresholds.is_empty() => {
                return invalid("thresholds must be non-empty")
            }
            ExperimentId::MultiPatient | ExperimentId::Supervision if self.cohorts.is_empty() => {
                return invalid("cohorts must be non-empty")
            }
            _ => {}
        }
        if self.id == ExperimentId::Supervision && self.setups.is_empty() {
            return invalid("setups must be non-empty");
        }
        for cohort in &self.cohorts {
            self.cohort_config(cohort, 0).validate()?;
        }
        for &t in &self.thresholds {
            self.threshold_config(t, 0).validate()?;
        }
        self.forest.validate()
    }

    fn samples_per_patient(&self) -> u32 {
        (self.train_sizes.last().copied().unwrap_or(0) + self.test_size) as u32
    }

    fn threshold_config(&self, threshold: u8, seed: u64) -> CohortConfig {
        CohortConfig {
            n_patients: 1,
            threshold_policy: ThresholdPolicy::Fixed(threshold),
            samples_per_patient: self.samples_per_patient(),
            seed,
        }
    }

    fn cohort_config(&self, cohort: &CohortSpec, seed: u64) -> CohortConfig {
        CohortConfig {
            n_patients: cohort.n_patients,
            threshold_policy: ThresholdPolicy::Stratified(cohort.fraction_below_40),
            samples_per_patient: self.samples_per_patient(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: ExperimentId,
    pub condition: String,
    pub train_size: usize,
    pub repetition: u32,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Share of positive behaviour labels in the test set.
    pub positive_label_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub condition: String,
    pub train_size: usize,
    pub repetitions: usize,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
    pub mean_accuracy: f64,
    pub mean_positive_label_fraction: f64,
}

/// Rows ordered by condition, then train size, then repetition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const RESULT_HEADER: &str =
    "experiment,condition,train_size,repetition,macro_f1,accuracy,positive_label_fraction";

pub const SUMMARY_HEADER: &str = "experiment,condition,train_size,repetitions,mean_macro_f1,std_macro_f1,mean_accuracy,mean_positive_label_fraction";

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RESULT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6}",
                r.experiment,
                r.condition,
                r.train_size,
                r.repetition,
                r.macro_f1,
                r.accuracy,
                r.positive_label_fraction
            );
        }
        out
    }

    /// Conditions in first-appearance order.
    pub fn conditions(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.condition.as_str()) {
                seen.push(&r.condition);
            }
        }
        seen
    }

    pub fn cell(&self, condition: &str, train_size: usize) -> impl Iterator<Item = &ResultRow> {
        let condition = condition.to_string();
        self.rows
            .iter()
            .filter(move |r| r.condition == condition && r.train_size == train_size)
    }

    /// Mean macro F1 of one (condition, train size) cell.
    pub fn mean_macro_f1(&self, condition: &str, train_size: usize) -> Option<f64> {
        let values: Vec<f64> = self.cell(condition, train_size).map(|r| r.macro_f1).collect();
        (!values.is_empty()).then(|| mean_std(&values).0)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for condition in self.conditions() {
            let mut sizes: Vec<usize> = self
                .rows
                .iter()
                .filter(|r| r.condition == condition)
                .map(|r| r.train_size)
                .collect();
            sizes.dedup();
            for size in sizes {
                let cell: Vec<&ResultRow> = self.cell(condition, size).collect();
                let f1: Vec<f64> = cell.iter().map(|r| r.macro_f1).collect();
                let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
                let pos: Vec<f64> = cell.iter().map(|r| r.positive_label_fraction).collect();
                let (mean_f1, std_f1) = mean_std(&f1);
                out.push(SummaryRow {
                    experiment: cell[0].experiment.to_string(),
                    condition: condition.to_string(),
                    train_size: size,
                    repetitions: cell.len(),
                    mean_macro_f1: mean_f1,
                    std_macro_f1: std_f1,
                    mean_accuracy: mean_std(&acc).0,
                    mean_positive_label_fraction: mean_std(&pos).0,
                });
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for s in self.summary() {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                s.experiment,
                s.condition,
                s.train_size,
                s.repetitions,
                s.mean_macro_f1,
                s.std_macro_f1,
                s.mean_accuracy,
                s.mean_positive_label_fraction
            );
        }
        out
    }

    pub fn to_svg(&self, title: &str) -> String {
        svg::learning_curves(title, &self.summary())
    }
}

/// Per-repetition seed.
pub fn repetition_seed(master_seed: u64, repetition: u32) -> u64 {
    seed::mix(master_seed, u64::from(repetition))
}

/// Simulation seed of one condition. The stream is derived from the
/// condition itself rather than its position in the config, so a subset of
/// conditions reproduces the same data, and the supervision study sees the
/// same cohorts as the multi-patient study.
fn cohort_seed(master_seed: u64, repetition: u32, condition_stream: u64) -> u64 {
    seed::mix(repetition_seed(master_seed, repetition), condition_stream)
}

fn threshold_stream(threshold: u8) -> u64 {
    u64::from(threshold)
}

fn cohort_stream(cohort: &CohortSpec) -> u64 {
    seed::mix(u64::from(cohort.n_patients), cohort.fraction_below_40.to_bits())
}

/// Forest seed for one split and one model of a task.
fn forest_params(base: &ForestParams, cohort_seed: u64, train_size: usize, model: u64) -> ForestParams {
    ForestParams {
        seed: seed::mix(seed::mix(cohort_seed, train_size as u64), model),
        ..*base
    }
}

struct Scored {
    condition: usize,
    size_index: usize,
    row: ResultRow,
}

fn score(
    experiment: ExperimentId,
    condition: (usize, &str),
    split: (usize, &Split),
    repetition: u32,
    truth: &[u32],
    predicted: &[u32],
    domain: &[u32],
) -> Result<Scored> {
    Ok(Scored {
        condition: condition.0,
        size_index: split.0,
        row: ResultRow {
            experiment,
            condition: condition.1.to_string(),
            train_size: split.1.train_size,
            repetition,
            macro_f1: macro_f1(truth, predicted, domain)?,
            accuracy: accuracy(truth, predicted)?,
            positive_label_fraction: split.1.test.positive_fraction(),
        },
    })
}

fn assemble(tasks: Vec<Result<Vec<Scored>>>) -> Result<ResultTable> {
    let mut scored: Vec<Scored> = Vec::new();
    for task in tasks {
        scored.extend(task?);
    }
    scored.sort_by_key(|s| (s.condition, s.size_index, s.row.repetition));
    Ok(ResultTable {
        rows: scored.into_iter().map(|s| s.row).collect(),
    })
}

fn direct_scores(
    config: &ExperimentConfig,
    condition: (usize, &str),
    data: &Dataset,
    cohort_seed: u64,
    repetition: u32,
    include_patient_id: bool,
) -> Result<Vec<Scored>> {
    let splits = incremental_split(data, &config.train_sizes, config.test_size)?;
    let mut rows = Vec::with_capacity(splits.len());
    for (i, split) in splits.iter().enumerate() {
        let params = forest_params(&config.forest, cohort_seed, split.train_size, 0);
        let model = train_direct(&split.train, include_patient_id, &params)?;
        let predicted = model.model.predict_dataset(&split.test)?;
        let truth = split.test.labels()?;
        rows.push(score(config.id, condition, (i, split), repetition, &truth, &predicted, &[0, 1])?);
    }
    Ok(rows)
}

fn check_id(config: &ExperimentConfig, expected: ExperimentId) -> Result<()> {
    if config.id != expected {
        return Err(Error::InvalidConfig(format!(
            "config is for `{}`, not `{expected}`",
            config.id
        )));
    }
    config.validate()
}

/// Single patient per threshold; direct model without the patient id.
pub fn run_threshold_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    check_id(config, ExperimentId::ThresholdSweep)?;
    let conditions: Vec<String> = config.thresholds.iter().map(|t| format!("threshold={t}")).collect();
    let tasks: Vec<(usize, u32)> = (0..conditions.len())
        .flat_map(|c| (0..config.repetitions).map(move |r| (c, r)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(c, rep)| {
            let seed = cohort_seed(config.master_seed, rep, threshold_stream(config.thresholds[c]));
            let data = generate_dataset(&config.threshold_config(config.thresholds[c], seed))?;
            direct_scores(config, (c, &conditions[c]), &data, seed, rep, false)
        })
        .collect();
    assemble(results)
}

/// Stratified cohorts; direct model with the patient id, scored on the
/// pooled per-patient test sets.
pub fn run_multi_patient(config: &ExperimentConfig) -> Result<ResultTable> {
    check_id(config, ExperimentId::MultiPatient)?;
    let conditions: Vec<String> = config.cohorts.iter().map(CohortSpec::descriptor).collect();
    let tasks: Vec<(usize, u32)> = (0..conditions.len())
        .flat_map(|c| (0..config.repetitions).map(move |r| (c, r)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(c, rep)| {
            let seed = cohort_seed(config.master_seed, rep, cohort_stream(&config.cohorts[c]));
            let data = generate_dataset(&config.cohort_config(&config.cohorts[c], seed))?;
            direct_scores(config, (c, &conditions[c]), &data, seed, rep, true)
        })
        .collect();
    assemble(results)
}

/// Setups evaluated by the supervision study, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Context, intervention and id to behaviour.
    #[serde(rename = "a_raw_id")]
    Direct,
    /// Ground-truth MAT and id to behaviour.
    #[serde(rename = "b_mat_id")]
    GroundTruthMat,
    /// Context and intervention to one MAT dimension.
    #[serde(rename = "c_motivation")]
    Motivation,
    #[serde(rename = "c_ability")]
    Ability,
    #[serde(rename = "c_trigger")]
    Trigger,
    /// Step-one predictions fed to the step-two model.
    #[serde(rename = "two_step")]
    TwoStep,
}

impl Setup {
    pub const ALL: [Setup; 6] = [
        Setup::Direct,
        Setup::GroundTruthMat,
        Setup::Motivation,
        Setup::Ability,
        Setup::Trigger,
        Setup::TwoStep,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Setup::Direct => "a_raw_id",
            Setup::GroundTruthMat => "b_mat_id",
            Setup::Motivation => "c_motivation",
            Setup::Ability => "c_ability",
            Setup::Trigger => "c_trigger",
            Setup::TwoStep => "two_step",
        }
    }

    fn mat_dim(self) -> Option<MatDim> {
        match self {
            Setup::Motivation => Some(MatDim::Motivation),
            Setup::Ability => Some(MatDim::Ability),
            Setup::Trigger => Some(MatDim::Trigger),
            _ => None,
        }
    }
}

/// Condition descriptor used by the supervision study.
pub fn supervision_condition(cohort: &CohortSpec, setup: Setup) -> String {
    format!("{} setup={}", cohort.descriptor(), setup.label())
}

fn supervision_scores(
    config: &ExperimentConfig,
    cohort_index: usize,
    data: &Dataset,
    cohort_seed: u64,
    repetition: u32,
) -> Result<Vec<Scored>> {
    let cohort = &config.cohorts[cohort_index];
    let splits = incremental_split(data, &config.train_sizes, config.test_size)?;
    let mut rows = Vec::new();
    for (i, split) in splits.iter().enumerate() {
        let behaviour_truth = split.test.labels()?;
        let params = forest_params(&config.forest, cohort_seed, split.train_size, 0);
        let needs_step_one = config.setups.iter().any(|s| !matches!(s, Setup::Direct | Setup::GroundTruthMat));
        let two_step = if needs_step_one {
            Some(train_two_step(&split.train, &params)?)
        } else {
            None
        };
        let step_two = match &two_step {
            Some(model) => model.behaviour.clone(),
            None => train_step_two(&split.train, &params)?,
        };
        for &setup in &config.setups {
            let s = Setup::ALL.iter().position(|&x| x == setup).unwrap_or(0);
            let condition = supervision_condition(cohort, setup);
            let index = cohort_index * Setup::ALL.len() + s;
            let (truth, predicted, domain) = match (setup, setup.mat_dim()) {
                (_, Some(dim)) => {
                    let kind = LabelKind::of(dim);
                    let test = split.test.with_schema(FeatureSchema::observation(), kind);
                    let model: &FittedModel = two_step.as_ref().expect("step one trained").step_one(dim);
                    (test.labels()?, model.predict_dataset(&test)?, kind.classes())
                }
                (Setup::Direct, _) => {
                    let params = forest_params(&config.forest, cohort_seed, split.train_size, 1);
                    let model = train_direct(&split.train, true, &params)?;
                    (behaviour_truth.clone(), model.model.predict_dataset(&split.test)?, vec![0, 1])
                }
                (Setup::GroundTruthMat, _) => {
                    (behaviour_truth.clone(), step_two.predict_dataset(&split.test)?, vec![0, 1])
                }
                _ => {
                    let model = two_step.as_ref().expect("step one trained");
                    (behaviour_truth.clone(), model.predict_dataset(&split.test)?, vec![0, 1])
                }
            };
            rows.push(score(
                config.id,
                (index, &condition),
                (i, split),
                repetition,
                &truth,
                &predicted,
                &domain,
            )?);
        }
    }
    Ok(rows)
}

/// Setups (a), (b), (c) and the composed two-step prediction on the
/// multi-patient cohorts.
pub fn run_supervision_comparison(config: &ExperimentConfig) -> Result<ResultTable> {
    check_id(config, ExperimentId::Supervision)?;
    let tasks: Vec<(usize, u32)> = (0..config.cohorts.len())
        .flat_map(|c| (0..config.repetitions).map(move |r| (c, r)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(c, rep)| {
            let seed = cohort_seed(config.master_seed, rep, cohort_stream(&config.cohorts[c]));
            let data = generate_dataset(&config.cohort_config(&config.cohorts[c], seed))?;
            supervision_scores(config, c, &data, seed, rep)
        })
        .collect();
    assemble(results)
}

pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    match config.id {
        ExperimentId::ThresholdSweep => run_threshold_sweep(config),
        ExperimentId::MultiPatient => run_multi_patient(config),
        ExperimentId::Supervision => run_supervision_comparison(config),
    }
}
