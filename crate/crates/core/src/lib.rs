//! Cooperative spectrum sensing simulator.
//!
//! Secondary users run energy detectors on a shared band, send soft or hard
//! reports over faded links, and a fusion center combines them with fixed
//! k-of-M rules or trained adaptive fusers. [`experiment::run_experiment`]
//! ties the pieces into a seeded Monte Carlo run.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod output;
pub mod reporting;
pub mod rng;
pub mod signal;

pub use config::{FuserSpec, ScenarioConfig};
pub use detector::{
    decide, energy, energy_for_user, pd_as_printed, pd_theoretical, q_function, q_inverse, threshold_for_pfa,
    DetectionOperatingPoint, DetectorConfig, EnergyStatistic,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, train_fusers, FuserResult, RunOptions, RunSummary, TrainedFusers};
pub use fusion::{
    adaline_predict, fuse_and, fuse_k_of_m, fuse_majority, fuse_or, mlp_predict, nlms_step, train_mlp, train_nlms,
    AdaptiveFuser, EpochRecord, FusionInput, HardRule, MlpFuser, MlpParams, NlmsParams, Split, TrainingRecord,
};
pub use metrics::{auc, confusion, roc_from_scores, ConfusionMatrix, ErrorHistogram, RocCurve, RocPoint};
pub use output::{emit_outputs, load_summary};
pub use reporting::{
    equalize, fusion_feature, recover_hard_bit, transmit_report, Payload, Report, ReportMode, ReportingChannel,
};
pub use signal::{Complex, Hypothesis, PrimarySignal, SignalKind, SumOfSinusoids, UserChannel};
