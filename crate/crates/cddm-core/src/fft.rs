//! Thin wrappers around rustfft for the row-wise DFTs and PSD estimation.

use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Plans a forward/inverse pair for one length. Plans are immutable and
/// shareable across threads.
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}
