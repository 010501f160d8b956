use std::fs;
use std::path::Path;

use anyhow::{Context as _, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nudge_core::experiments::{ExperimentConfig, ExperimentId};
use nudge_core::{CohortConfig, ForestParams, GaParams};

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Direct,
    TwoStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub mode: Mode,
    pub include_patient_id: bool,
}

/// Everything a command may read from `--config`. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cohort: CohortConfig,
    pub forest: ForestParams,
    pub ga: GaParams,
    pub train: TrainSettings,
    /// Overrides applied on top of the chosen experiment's defaults.
    pub experiment: Option<Value>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.cohort.validate().map_err(|e| Invalid(format!("cohort: {e}")))?;
        self.forest.validate().map_err(|e| Invalid(format!("forest: {e}")))?;
        self.ga.validate(1).map_err(|e| Invalid(format!("ga: {e}")))?;
        if let Some(overrides) = &self.experiment {
            if !overrides.is_object() {
                return Err(Invalid("experiment: expected an object".into()).into());
            }
        }
        Ok(())
    }

    /// Applies `--seed` to every seeded section.
    pub fn override_seed(&mut self, seed: u64) {
        self.cohort.seed = seed;
        self.forest.seed = seed;
        self.ga.seed = seed;
        let overrides = self.experiment.get_or_insert_with(|| Value::Object(Default::default()));
        if let Some(map) = overrides.as_object_mut() {
            map.insert("master_seed".into(), seed.into());
        }
    }

    /// Experiment defaults for `id`, with the top-level forest settings and
    /// then the `experiment` overrides applied.
    pub fn experiment(&self, id: ExperimentId) -> Result<ExperimentConfig> {
        let mut base = ExperimentConfig::new(id);
        base.forest = self.forest;
        let mut value = serde_json::to_value(&base)?;
        if let (Some(Value::Object(overrides)), Some(map)) = (&self.experiment, value.as_object_mut()) {
            for (key, v) in overrides {
                if key == "id" {
                    return Err(Invalid("experiment.id: set by the command line".into()).into());
                }
                map.insert(key.clone(), v.clone());
            }
        }
        let config: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Invalid(format!("experiment: {e}")))?;
        config
            .validate()
            .map_err(|e| Invalid(format!("experiment: {e}")))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.cohort.samples_per_patient, 432);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_str::<RunConfig>(r#"{"cohort":{"dose":7}}"#).unwrap_err();
        assert!(err.to_string().contains("dose"));
    }

    #[test]
    fn experiment_overrides() {
        let c: RunConfig = serde_json::from_str(
            r#"{"forest":{"n_trees":5},"experiment":{"repetitions":2,"thresholds":[10]}}"#,
        )
        .unwrap();
        let e = c.experiment(ExperimentId::ThresholdSweep).unwrap();
        assert_eq!(e.repetitions, 2);
        assert_eq!(e.thresholds, [10]);
        assert_eq!(e.forest.n_trees, 5);
        let bad: RunConfig = serde_json::from_str(r#"{"experiment":{"reps":2}}"#).unwrap();
        assert!(bad.experiment(ExperimentId::ThresholdSweep).is_err());
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let mut c = RunConfig::default();
        c.override_seed(9);
        assert_eq!((c.cohort.seed, c.forest.seed, c.ga.seed), (9, 9, 9));
        assert_eq!(c.experiment(ExperimentId::MultiPatient).unwrap().master_seed, 9);
    }
}
