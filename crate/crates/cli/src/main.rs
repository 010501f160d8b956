//! `nudge`: simulate patients, train and evaluate behaviour models,
//! personalise interventions and run the experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input or config.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};
use log::info;
use serde_json::{json, Value};

use nudge_core::dataset::{read_csv, write_csv};
use nudge_core::experiments::{self, accuracy, macro_f1, ExperimentId};
use nudge_core::pipeline::{
    personalization_json, personalize_direct, personalize_two_step, train_direct, train_two_step,
    SavedModel,
};
use nudge_core::simulator::generate_dataset;
use nudge_core::{Classifier, Dataset, Observation};

use config::{Mode, RunConfig};

const DEFAULT_OUT: &str = "out";

/// Input the user can fix: bad config, bad instance, bad data file.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Parser)]
#[command(name = "nudge", version, about = "Behaviour-change intervention simulator and personaliser")]
struct Cli {
    /// JSON run configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort and write `dataset.csv`.
    Simulate,
    /// Train a model and write `model.json`.
    Train {
        /// Training CSV; simulated from the cohort config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Use the patient id as a feature (direct mode).
        #[arg(long)]
        include_patient_id: bool,
    },
    /// Score a saved model on a CSV and write `evaluation.json`.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Test CSV; simulated from the cohort config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Search for a minimal intervention change that flips the prediction.
    Personalize {
        /// Saved model; trained from the config when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Observation JSON.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Run an experiment and write `<id>_results.csv` and `<id>_plot.svg`.
    Experiment {
        #[arg(value_parser = parse_experiment)]
        id: ExperimentId,
    },
}

fn parse_experiment(s: &str) -> Result<ExperimentId, String> {
    s.parse().map_err(|_| {
        format!("unknown experiment `{s}` (expected threshold_sweep, multi_patient or supervision)")
    })
}

fn is_validation(err: &anyhow::Error) -> bool {
    use nudge_core::Error as E;
    err.chain().any(|cause| {
        if cause.is::<Invalid>() || cause.is::<serde_json::Error>() {
            return true;
        }
        matches!(
            cause.downcast_ref::<E>(),
            Some(
                E::SchemaViolation { .. }
                    | E::UnknownFeature(_)
                    | E::EmptyDataset
                    | E::InsufficientRows { .. }
                    | E::DimensionMismatch { .. }
                    | E::Parse { .. }
                    | E::MissingHeader
                    | E::InvalidConfig(_)
                    | E::Constraint(_)
                    | E::MissingMat
                    | E::Json(_)
            )
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_validation(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut config = RunConfig::load(cli.config.as_deref())?;
    let cli_out = cli.out.clone();
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let out_dir = cli.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let out = out_dir.as_path();
    match cli.command {
        Command::Simulate => simulate(&config, out),
        Command::Train {
            data,
            mode,
            include_patient_id,
        } => {
            let data = load_or_simulate(&config, data.as_deref())?;
            let mode = mode.unwrap_or(config.train.mode);
            let include = include_patient_id || config.train.include_patient_id;
            let model = train(&config, &data, mode, include)?;
            let path = write(out, "model.json", &model.to_json())?;
            println!("wrote {} model trained on {} rows to {}", mode_name(mode), data.len(), path.display());
            Ok(())
        }
        Command::Evaluate { model, data } => {
            let model = load_model(&model)?;
            let data = load_or_simulate(&config, data.as_deref())?;
            let report = evaluate(&model, &data)?;
            let text = serde_json::to_string_pretty(&report)?;
            write(out, "evaluation.json", &text)?;
            println!("{text}");
            Ok(())
        }
        Command::Personalize {
            model,
            instance,
            mode,
        } => personalize(&config, out, model.as_deref(), &instance, mode),
        Command::Experiment { id } => experiment(&config, cli_out.as_deref(), id),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Direct => "direct",
        Mode::TwoStep => "two_step",
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let data = generate_dataset(&config.cohort)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("dataset.csv");
    write_csv(&data, &path)?;
    println!(
        "wrote {} rows (positive fraction {:.4}) to {}",
        data.len(),
        data.positive_fraction(),
        path.display()
    );
    Ok(())
}

fn load_or_simulate(config: &RunConfig, path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(path) => read_csv(path).with_context(|| format!("reading {}", path.display())),
        None => {
            info!("no data file given; simulating from the cohort config");
            Ok(generate_dataset(&config.cohort)?)
        }
    }
}

fn train(config: &RunConfig, data: &Dataset, mode: Mode, include_patient_id: bool) -> Result<SavedModel> {
    Ok(match mode {
        Mode::Direct => SavedModel::Direct(train_direct(data, include_patient_id, &config.forest)?),
        Mode::TwoStep => SavedModel::TwoStep(train_two_step(data, &config.forest)?),
    })
}

fn load_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SavedModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn evaluate(model: &SavedModel, data: &Dataset) -> Result<Value> {
    let truth = data.labels()?;
    let predicted = match model {
        SavedModel::Direct(m) => m.model.predict_dataset(data)?,
        SavedModel::TwoStep(m) => m.predict_dataset(data)?,
    };
    Ok(json!({
        "rows": data.len(),
        "macro_f1": nudge_core::forest::round9(macro_f1(&truth, &predicted, &[0, 1])?),
        "accuracy": nudge_core::forest::round9(accuracy(&truth, &predicted)?),
        "positive_label_fraction": nudge_core::forest::round9(data.positive_fraction()),
    }))
}

fn personalize(
    config: &RunConfig,
    out: &Path,
    model: Option<&Path>,
    instance: &Path,
    mode: Option<Mode>,
) -> Result<()> {
    let text = fs::read_to_string(instance).with_context(|| format!("reading {}", instance.display()))?;
    let obs: Observation = serde_json::from_str(&text)
        .map_err(|e| Invalid(format!("instance {}: {e}", instance.display())))?;
    obs.validate()
        .map_err(|e| Invalid(format!("instance {}: {e}", instance.display())))?;

    let model = match model {
        Some(path) => {
            let model = load_model(path)?;
            let kind = match model {
                SavedModel::Direct(_) => Mode::Direct,
                SavedModel::TwoStep(_) => Mode::TwoStep,
            };
            if mode.is_some_and(|m| m != kind) {
                bail!(Invalid(format!(
                    "--mode {} does not match the saved {} model",
                    mode_name(mode.unwrap_or_default()),
                    mode_name(kind)
                )));
            }
            model
        }
        None => {
            let data = generate_dataset(&config.cohort)?;
            let mode = mode.unwrap_or(config.train.mode);
            train(config, &data, mode, config.train.include_patient_id)?
        }
    };

    let result = match &model {
        SavedModel::Direct(m) => match personalize_direct(m, &obs, &config.ga)? {
            Some(cf) => Some(personalization_json(&obs, m.schema(), &cf, None)?),
            None => None,
        },
        SavedModel::TwoStep(m) => match personalize_two_step(m, &obs, &config.ga)? {
            Some(p) => Some(personalization_json(
                &obs,
                m.motivation.schema(),
                &p.bci_change,
                Some(&p.mat_target),
            )?),
            None => None,
        },
    };
    let text = match &result {
        Some(value) => serde_json::to_string_pretty(value)?,
        None => {
            eprintln!("no intervention change within the allowed features flips the prediction");
            "null".to_string()
        }
    };
    write(out, "personalization.json", &text)?;
    println!("{text}");
    Ok(())
}

fn experiment(config: &RunConfig, out: Option<&Path>, id: ExperimentId) -> Result<()> {
    let experiment = config.experiment(id)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| experiment.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    info!(
        "running {id}: {} repetitions, train sizes {:?}",
        experiment.repetitions, experiment.train_sizes
    );
    let table = experiments::run(&experiment)?;
    let csv = write(&out, &format!("{id}_results.csv"), &table.to_csv())?;
    let svg = write(&out, &format!("{id}_plot.svg"), &table.to_svg(&format!("{id}: macro F1 vs train size")))?;
    for row in table.summary() {
        println!(
            "{:<48} n={:<3} macro_f1 {:.3} ± {:.3}",
            row.condition, row.train_size, row.mean_macro_f1, row.std_macro_f1
        );
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
