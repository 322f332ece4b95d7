//! Calcium-omics and fat-omics features from calcium-scoring CT, gradient
//! boosted trees with exact TreeSHAP, and the cross-validation and
//! statistics used to evaluate obstructive-CAD prediction.

pub mod calcium;
pub mod error;
pub mod eval;
pub mod fat;
pub mod gbdt;
pub mod phantom;
pub mod pipeline;
pub mod registry;
pub mod shap;
pub mod shape;
pub mod stats;
pub mod table;
pub mod volume;

pub use error::{Error, Result};
