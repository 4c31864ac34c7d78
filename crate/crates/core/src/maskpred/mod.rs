//! The learned mask predictor and its baseline.
//!
//! Given the two final observations of an SC-experiment, predict one
//! difference mask per observation: all zeros when the rollouts commuted,
//! all ones when the agent itself ended up elsewhere, and the moved
//! object's silhouettes otherwise. Everything is built from scratch on f64
//! tensors — strided convolutions, reverse-mode gradients checked against
//! finite differences, Adam — so training is deterministic down to the bit.
//!
//! [`naive_subtract`] is the baseline the learned predictor is measured
//! against: thresholded per-pixel image differencing. It cannot tell which
//! observation an object belongs to, so a moved object smears into both
//! masks (its old and new silhouette), which is exactly the failure the
//! evaluation quantifies.

mod net;
mod tensor;
mod train;

pub use net::{
    forward, init_params, input_from_obs, load_params, params_bytes, params_parse, save_params,
    Arch, LayerSpec, ModelParams,
};
pub use tensor::{
    concat, conv2d, conv2d_backward, relu, sigmoid, upsample2, ShapeError, Tensor,
};
pub use train::{
    backward, bce_loss, train, train_tuples, tuple_tensors, TrainConfig, TrainResult, BCE_EPSILON,
};

use crate::render::{Mask, Observation};

#[derive(Debug, thiserror::Error)]
pub enum MaskPredError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("bad architecture: {0}")]
    BadArch(String),
    #[error("bad params file: {0}")]
    BadFile(String),
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("dataset holds too few tuples to train on")]
    EmptyDataset,
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Baseline difference detector: a pixel is marked in both masks when any
/// color channel differs by more than `threshold` steps.
pub fn naive_subtract(
    obs1: &Observation,
    obs2: &Observation,
    threshold: u8,
) -> Result<(Mask, Mask), MaskPredError> {
    if (obs1.width, obs1.height) != (obs2.width, obs2.height) {
        return Err(MaskPredError::Shape(ShapeError::Mismatch(format!(
            "observations {}x{} vs {}x{}",
            obs1.width, obs1.height, obs2.width, obs2.height
        ))));
    }
    let n = obs1.width * obs1.height;
    let mut bits = vec![0u8; n];
    for p in 0..n {
        let mut max_diff = 0u8;
        for c in 0..3 {
            let d = obs1.rgb[3 * p + c].abs_diff(obs2.rgb[3 * p + c]);
            max_diff = max_diff.max(d);
        }
        bits[p] = u8::from(max_diff > threshold);
    }
    let mask = Mask { width: obs1.width, height: obs1.height, bits };
    Ok((mask.clone(), mask))
}
