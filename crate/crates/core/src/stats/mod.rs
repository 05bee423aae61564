//! Student-level features, OLS inference and false-discovery-rate control.

mod bh;
mod features;
mod ols;
pub mod tdist;

pub use bh::bh_adjust;
pub use features::{
    apply_bh, build_features, results_csv, run_model_suite, AssessmentScores, Assessments, BhScope,
    FeatureTable, OutcomeVar, StudentFeatures, Suite,
};
pub use ols::{ols_fit, RegressionResult};
