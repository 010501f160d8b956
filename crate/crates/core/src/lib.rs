//! Behaviour-change intervention personalisation toolkit.
//!
//! The crate simulates patients whose daily behaviour follows a
//! motivation × ability × trigger threshold rule, trains random-forest
//! classifiers on the simulated data, and searches for minimal changes to an
//! intervention that flip a predicted non-adherence into adherence.
//!
//! Module map:
//!
//! * [`domain`] – patients, contexts, interventions, MAT scores and the
//!   feature schema shared by every other module.
//! * [`simulator`] – synthetic cohorts and ground-truth labels.
//! * [`dataset`] – encoding, temporal splitting and CSV persistence.
//! * [`forest`] – CART trees and random forests with balanced class weights.
//! * [`counterfactual`] – genetic counterfactual search with feature control,
//!   plus an exhaustive oracle.
//! * [`pipeline`] – direct and two-step (MAT) personalisation.
//! * [`experiments`] – the threshold sweep, multi-patient and supervision
//!   studies, macro F1 and chart output.

pub mod counterfactual;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod pipeline;
pub mod seed;
pub mod simulator;

pub use counterfactual::{CfConstraints, Classifier, Counterfactual, GaParams};
pub use dataset::{Dataset, EncodedMatrix, Encoder, LabelKind};
pub use domain::{
    BciSpec, Context, FeatureId, FeatureSchema, MatVector, Observation, PatientProfile,
    PatientTraits, Sample,
};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams};
pub use pipeline::{DirectModel, FittedModel, TwoStepModel};
pub use simulator::{CohortConfig, ThresholdPolicy};
