//! The two learners behind the FDD pipeline: a CART decision tree that
//! localizes which component drifted, and per-class ε-SVR models that
//! estimate the drifted value. Both consume the same fixed feature layout
//! and persist to a versioned line-oriented text format.

pub mod persist;
pub mod svr;
pub mod tree;

pub use persist::{load_svr, load_tree, save_svr, save_tree, ModelIoError};
pub use svr::{SvrModel, SvrParams};
pub use tree::{DecisionTreeModel, DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_LEAF};

use thiserror::Error;

use crate::hydronet::{ControlVector, ProcessVector};

/// Fixed model input: [u1, u2, p1, p2, p3, p4, fl]. The order is part of
/// the model contract.
pub type FeatureVector = [f64; 7];

pub const FEATURE_COUNT: usize = 7;

/// Assemble the feature vector from setpoints and observables.
pub fn features_from(u: &ControlVector, y: &ProcessVector) -> FeatureVector {
    [
        u.pump_speed,
        u.valve_opening,
        y.p1,
        y.p2,
        y.p3,
        y.p4,
        y.flow,
    ]
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("training set is empty")]
    Empty,
    #[error("need at least {needed} training rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("rows and targets differ in length: {rows} vs {targets}")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("need at least two distinct class labels")]
    SingleClass,
    #[error("non-finite value in training data")]
    NonFinite,
}
