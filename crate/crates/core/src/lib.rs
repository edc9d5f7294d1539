//! Amodal optical flow: layered flow data model, evaluation metrics,
//! synthetic ground truth, infilling baselines and mask-propagation tracking.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod flow;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod stats;
pub mod stratify;
pub mod synthgen;
pub mod tracking;
pub mod viz;

pub use error::{Error, Result};
pub use flow::{endpoint_error, FlowField, LayeredFlowStack, LevelField, MAX_LEVELS};
pub use raster::{DepthMap, IdMap, Mask, Raster};
