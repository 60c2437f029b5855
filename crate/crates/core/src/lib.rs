//! Kmeans estimation of panel data models with latent group structure.
//!
//! Units `i = 1..N` observed over `t = 1..T` follow
//! `y_it = mu[g_i] + sigma_i v_it` with unknown memberships `g` and group
//! means `mu`. The crate provides:
//!
//! - [`dgp`]: simulation designs, noise laws and design diagnostics
//!   (classification threshold, misclassification budget);
//! - [`estimator`]: multi-start Lloyd iteration plus two exact global
//!   optima (enumeration and a 1-D dynamic program) used as oracles;
//! - [`alignment`]: label alignment and error metrics against ground truth;
//! - [`inference`]: root-NT confidence intervals;
//! - [`montecarlo`]: replication studies, rate regressions, coverage and
//!   tail checks;
//! - [`panel_csv`]: long-format CSV panels;
//! - [`cli`]: the `panel-kmeans` command-line front end.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod cli;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod montecarlo;
pub mod numeric;
pub mod panel_csv;
pub mod rng;

pub use alignment::{align, best_permutation, AlignmentReport, GroupPermutation};
pub use dgp::{
    design_diagnostics, generate_panel, DesignDiagnostics, DgpConfig, ErrorLaw, PanelData,
    SigmaSchedule, Truth,
};
pub use error::{Error, Result};
pub use estimator::{
    estimate, exact_global_dp, exact_global_enumeration, lloyd, EstimateResult, FitOptions,
    GroupAssignment, GroupMeans, InitStrategy,
};
pub use inference::{infer, InferenceResult};
pub use montecarlo::{run_mc, McConfig, ReplicationRow};
