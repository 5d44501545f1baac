//! Gradient-boosted decision trees for the anomaly / normal decision, with
//! ROC evaluation and stratified cross-validation.

mod cv;
mod gbdt;
mod metrics;
mod tree;

pub use cv::{cross_validate, CvReport, CV_SCHEMA};
pub use gbdt::{load_model, save_model, train, GbdtHyperparams, GbdtModel, MODEL_SCHEMA};
pub use metrics::{log_loss, roc_auc, roc_curve, sigmoid, RocPoint};
pub use tree::Node;
