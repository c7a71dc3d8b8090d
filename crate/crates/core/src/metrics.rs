//! Output-quality metrics: visual instability, speed-up deviation, semantic
//! retention, and the spread of transition appearance costs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::frame::GrayFrame;
use crate::math;
use crate::sft::SelectionTimeline;

/// Mean per-pixel luma deviation over sliding windows of the selected
/// frames.
///
/// For every window of `window` consecutive frames, each pixel's population
/// standard deviation across the window is averaged over all pixels; the
/// index is the mean over windows. A perfectly static clip scores 0; a clip
/// alternating black/white scores 127.5.
pub fn instability_index(frames: &[GrayFrame], window: usize) -> Result<f64> {
    Ok(math::mean(&instability_windows(frames, window)?))
}

/// The per-window values behind [`instability_index`]: entry `k` is the mean
/// per-pixel standard deviation of frames `k..k+window`.
pub fn instability_windows(frames: &[GrayFrame], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "instability window {window} must be at least 2"
        )));
    }
    if frames.len() < window {
        return Err(CoreError::InvalidArgument(format!(
            "{} frames cannot fill a window of {window}",
            frames.len()
        )));
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    for (i, f) in frames.iter().enumerate() {
        if f.width() != w || f.height() != h {
            return Err(CoreError::DimensionMismatch(format!(
                "frame {i} is {}x{}, expected {w}x{h}",
                f.width(),
                f.height()
            )));
        }
    }
    let npx = w * h;
    let inv_w = 1.0 / window as f64;
    let mut sum = vec![0.0f64; npx];
    let mut sumsq = vec![0.0f64; npx];
    let mut window_means = Vec::with_capacity(frames.len() - window + 1);
    for start in 0..=frames.len() - window {
        sum.fill(0.0);
        sumsq.fill(0.0);
        for f in &frames[start..start + window] {
            for (p, v) in f.data().iter().enumerate() {
                let v = *v as f64;
                sum[p] += v;
                sumsq[p] += v * v;
            }
        }
        let mut acc = 0.0;
        for p in 0..npx {
            let mean = sum[p] * inv_w;
            let var = (sumsq[p] * inv_w - mean * mean).max(0.0);
            acc += math::sqrt(var);
        }
        window_means.push(acc / npx as f64);
    }
    Ok(window_means)
}

/// Ratio of original to selected frame counts.
pub fn achieved_speedup(num_original: usize, num_selected: usize) -> Result<f64> {
    if num_selected == 0 {
        return Err(CoreError::EmptyInput("no frames selected".into()));
    }
    if num_original < num_selected {
        return Err(CoreError::InvalidArgument(format!(
            "{num_selected} selected out of {num_original} original frames"
        )));
    }
    Ok(num_original as f64 / num_selected as f64)
}

/// Signed gap between the achieved and requested speed-ups; positive means
/// the output is faster than asked.
pub fn speedup_deviation(
    num_original: usize,
    num_selected: usize,
    target_speedup: f64,
) -> Result<f64> {
    if !target_speedup.is_finite() || target_speedup <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "target speed-up {target_speedup} must be positive"
        )));
    }
    Ok(achieved_speedup(num_original, num_selected)? - target_speedup)
}

/// Fraction of the best attainable semantic mass that the selection kept.
///
/// The reference is the sum of the `max(1, round(n / s))` largest per-frame
/// scores — the most any selection of the expected size could capture. The
/// ratio is clamped to 1, and a video with no semantic content retains 1 by
/// convention.
pub fn semantic_retention(selected: &[usize], scores: &[f64], target_speedup: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(CoreError::EmptyInput("no semantic scores".into()));
    }
    if !target_speedup.is_finite() || target_speedup <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "target speed-up {target_speedup} must be positive"
        )));
    }
    for s in scores {
        if !s.is_finite() || *s < 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "semantic score {s} must be finite and nonnegative"
            )));
        }
    }
    if selected.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidArgument(
            "selection indices must be strictly increasing".into(),
        ));
    }
    if let Some(last) = selected.last() {
        if *last >= scores.len() {
            return Err(CoreError::InvalidArgument(format!(
                "selected index {last} beyond {} frames",
                scores.len()
            )));
        }
    }

    let n = scores.len();
    let n_expected = (math::round(n as f64 / target_speedup) as usize).clamp(1, n);
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("scores checked finite"));
    let best_possible: f64 = sorted[..n_expected].iter().sum();
    if best_possible == 0.0 {
        return Ok(1.0);
    }
    let kept: f64 = selected.iter().map(|&i| scores[i]).sum();
    Ok((kept / best_possible).min(1.0))
}

/// Coefficient of variation (population std over mean) of a cost sequence.
/// Needs at least two values; an all-zero sequence scores 0.
pub fn cost_cv(costs: &[f64]) -> Result<f64> {
    if costs.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "coefficient of variation needs at least 2 transitions, got {}",
            costs.len()
        )));
    }
    let mean = math::mean(costs);
    if mean == 0.0 {
        return Ok(0.0);
    }
    Ok(math::population_std(costs) / mean)
}

/// Coefficient of variation of a timeline's transition appearance costs —
/// the smoothing pass's uniformity target.
pub fn appearance_cost_cv(timeline: &SelectionTimeline) -> Result<f64> {
    cost_cv(timeline.transition_costs())
}

/// Per-segment slice of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
    pub semantic: bool,
    pub speedup: f64,
    pub target_frames: usize,
    pub selected_frames: usize,
    pub lambda: f64,
    pub residual: f64,
    pub target_hit: bool,
    pub appearance_cv: Option<f64>,
}

/// Whole-run quality summary. `instability` is present only when pixel data
/// was available; `appearance_cv` only when the selection has two or more
/// transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub num_frames: usize,
    pub num_selected: usize,
    pub target_speedup: f64,
    pub achieved_speedup: f64,
    pub speedup_deviation: f64,
    pub semantic_retention: f64,
    pub instability: Option<f64>,
    pub appearance_cv: Option<f64>,
    pub segments: Vec<SegmentReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use crate::sft::AppearanceCost;

    struct PlantedCost(Vec<f64>);

    impl AppearanceCost for PlantedCost {
        fn cost(&self, i: usize, j: usize) -> f64 {
            debug_assert!(j > i);
            self.0[i]
        }
    }

    fn gray(level: u8) -> GrayFrame {
        Frame::filled(4, 4, [level, level, level]).unwrap().to_gray()
    }

    #[test]
    fn static_clip_scores_zero() {
        let frames = vec![gray(80); 6];
        assert_eq!(instability_index(&frames, 4).unwrap(), 0.0);
    }

    #[test]
    fn alternating_black_white_scores_half_range() {
        let frames: Vec<GrayFrame> = (0..8)
            .map(|i| gray(if i % 2 == 0 { 0 } else { 255 }))
            .collect();
        let idx = instability_index(&frames, 4).unwrap();
        assert!((idx - 127.5).abs() < 1e-9);
    }

    #[test]
    fn instability_rejects_bad_windows() {
        let frames = vec![gray(10); 3];
        assert!(instability_index(&frames, 1).is_err());
        assert!(instability_index(&frames, 4).is_err());
        let mixed = vec![
            gray(0),
            Frame::filled(5, 4, [0, 0, 0]).unwrap().to_gray(),
            gray(0),
            gray(0),
        ];
        assert!(instability_index(&mixed, 4).is_err());
    }

    #[test]
    fn one_jump_inside_an_otherwise_static_clip() {
        // Windows of 4 over [0,0,0,255,255,255]: per-pixel stds are
        // std({0,0,0,255}) = 255·sqrt(3)/4, std({0,0,255,255}) = 127.5 and
        // std({0,255,255,255}) = 255·sqrt(3)/4.
        let frames = vec![gray(0), gray(0), gray(0), gray(255), gray(255), gray(255)];
        let idx = instability_index(&frames, 4).unwrap();
        let skew = 255.0 * (3.0f64).sqrt() / 4.0;
        assert!((idx - (2.0 * skew + 127.5) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn speedup_deviation_examples() {
        let d = speedup_deviation(1000, 98, 10.0).unwrap();
        assert!((d - (1000.0 / 98.0 - 10.0)).abs() < 1e-12);
        assert!((d - 0.204).abs() < 5e-4);
        assert_eq!(speedup_deviation(1000, 125, 10.0).unwrap(), -2.0);
        assert_eq!(speedup_deviation(1000, 100, 10.0).unwrap(), 0.0);
        assert!(speedup_deviation(1000, 0, 10.0).is_err());
        assert!(speedup_deviation(10, 20, 2.0).is_err());
    }

    #[test]
    fn retention_against_the_best_attainable_mass() {
        let scores = [10.0, 0.0, 0.0, 10.0];
        // Expected size round(4/2) = 2, best mass 20.
        assert_eq!(semantic_retention(&[0, 1], &scores, 2.0).unwrap(), 0.5);
        assert_eq!(semantic_retention(&[0, 3], &scores, 2.0).unwrap(), 1.0);
        assert_eq!(semantic_retention(&[1, 2], &scores, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn retention_clamps_and_handles_no_semantics() {
        // Selecting more than the expected count cannot exceed 1.
        let flat = [5.0, 5.0, 5.0, 5.0];
        assert_eq!(semantic_retention(&[0, 1, 2, 3], &flat, 2.0).unwrap(), 1.0);
        // Nothing to retain → 1 by convention.
        let none = [0.0; 6];
        assert_eq!(semantic_retention(&[2], &none, 6.0).unwrap(), 1.0);
    }

    #[test]
    fn retention_validates_inputs() {
        let scores = [1.0, 2.0];
        assert!(semantic_retention(&[0, 0], &scores, 2.0).is_err());
        assert!(semantic_retention(&[5], &scores, 2.0).is_err());
        assert!(semantic_retention(&[0], &[], 2.0).is_err());
        assert!(semantic_retention(&[0], &[1.0, f64::NAN], 2.0).is_err());
        assert!(semantic_retention(&[0], &scores, 0.0).is_err());
    }

    #[test]
    fn cv_of_two_transitions() {
        // Costs (1, 3): mean 2, population std 1 → CV 0.5.
        assert_eq!(cost_cv(&[1.0, 3.0]).unwrap(), 0.5);
        assert_eq!(cost_cv(&[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cost_cv(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(cost_cv(&[1.0]).is_err());
        assert!(cost_cv(&[]).is_err());
    }

    #[test]
    fn timeline_cv_uses_cached_costs() {
        let cost = PlantedCost(vec![1.0, 0.0, 3.0, 0.0]);
        let tl = SelectionTimeline::new(vec![0, 1, 2], 1.0, &cost).unwrap();
        // Transition costs (1, 0·…) — cost(1,2) = planted[1] = 0 → (1, 0).
        assert_eq!(appearance_cost_cv(&tl).unwrap(), 1.0);
        let single = SelectionTimeline::new(vec![0, 2], 1.0, &cost).unwrap();
        assert!(appearance_cost_cv(&single).is_err());
    }
}
