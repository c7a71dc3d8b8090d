//! Tunable parameters shared by the pipeline stages.

/// Numeric knobs for the whole selection pipeline, with the defaults used in
/// the experiments.
///
/// `speedup` is the required overall acceleration S (original frames per
/// output frame). The sampler first runs at `speedup * spf` and the smoothing
/// pass inserts frames until each segment reaches its exact budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// Required overall speed-up S; must exceed 1.
    pub speedup: f64,
    /// Oversparsification factor applied before transition smoothing.
    pub spf: u32,
    /// Locality-penalty weight inside abrupt-motion intervals.
    pub weight_low: f64,
    /// Locality-penalty weight everywhere else.
    pub weight_high: f64,
    /// Relative activation threshold on |alpha| (fraction of the maximum).
    pub tau_rel: f64,
    /// Bins per channel for the transition color histograms.
    pub color_bins: usize,
    /// Sliding-window length for the instability metric.
    pub instability_window: usize,
    /// Minimum length of a semantic/non-semantic run, in frames.
    pub min_segment_len: usize,
    /// Width of the moving average applied to the semantic profile (odd).
    pub semantic_smooth_width: usize,
    /// Width of the moving average applied to displacement curves (odd).
    pub cdc_smooth_width: usize,
    /// Block size in pixels for block-matching optical flow.
    pub flow_block: usize,
    /// Search radius in pixels for block-matching optical flow.
    pub flow_radius: usize,
    /// L2-normalize each descriptor block before concatenation.
    pub normalize_blocks: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            speedup: 10.0,
            spf: 2,
            weight_low: 0.1,
            weight_high: 1.0,
            tau_rel: 1e-3,
            color_bins: 32,
            instability_window: 4,
            min_segment_len: 50,
            semantic_smooth_width: 51,
            cdc_smooth_width: 31,
            flow_block: 8,
            flow_radius: 7,
            normalize_blocks: false,
        }
    }
}

impl Params {
    /// Validates the ranges the pipeline relies on.
    pub fn validate(&self) -> Result<(), crate::CoreError> {
        use crate::CoreError::InvalidArgument;
        use alloc::string::ToString;
        if !self.speedup.is_finite() || self.speedup <= 1.0 {
            return Err(InvalidArgument("speed-up must exceed 1".to_string()));
        }
        if self.spf < 1 {
            return Err(InvalidArgument("spf must be at least 1".to_string()));
        }
        if !(self.weight_low > 0.0 && self.weight_low <= self.weight_high) {
            return Err(InvalidArgument(
                "weights must satisfy 0 < low <= high".to_string(),
            ));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(InvalidArgument("tau must lie in (0, 1)".to_string()));
        }
        if self.color_bins == 0 || self.color_bins > 256 {
            return Err(InvalidArgument("color bins must lie in 1..=256".to_string()));
        }
        if self.instability_window < 2 {
            return Err(InvalidArgument("instability window must be >= 2".to_string()));
        }
        if self.semantic_smooth_width.is_multiple_of(2) || self.cdc_smooth_width.is_multiple_of(2)
        {
            return Err(InvalidArgument("smoothing widths must be odd".to_string()));
        }
        if self.flow_block < 4 {
            return Err(InvalidArgument("flow block must be >= 4 px".to_string()));
        }
        Ok(())
    }
}
