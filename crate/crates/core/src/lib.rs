//! Entry-wise causal matrix completion under multiple discrete treatment levels.
//!
//! The crate implements two estimators for the expected potential outcome
//! `A_ij^(d)` of a panel where every entry is observed under at most one
//! treatment level:
//!
//! * SNN, which regresses on anchor blocks fully observed at the target level;
//! * MSNN, which lets each anchor column carry its own level and rescales the
//!   columns with per-level weights before the principal component regression.
//!
//! Around the estimators sit a latent-factor simulator ([`datagen`]), anchor
//! discovery over bipartite indicator matrices ([`anchors`]), closed-form and
//! enumerated anchor counts ([`theory`]), and an experiment driver
//! ([`harness`]). See the `examples/` directory for one runnable program per
//! capability.

pub mod anchors;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod panel;
pub mod spectral;
pub mod theory;

pub use anchors::{AnchorMode, AnchorSet, BicliqueMode, IndicatorMatrix, SubgroupPlan};
pub use datagen::{AssignmentMechanism, LatentModel, ModelParams};
pub use error::{Error, Result};
pub use estimators::{
    EstimateRecord, EstimatorKind, FeasibilityPolicy, PipelineConfig, WeightFunction,
    WeightSource,
};
pub use panel::{EntryQuery, ObservedPanel, Treatment};
pub use spectral::RankRule;
