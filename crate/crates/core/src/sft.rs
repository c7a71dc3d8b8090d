//! Smoothing frame transitions: insert frames into the shakiest transitions
//! of an oversparsified selection until the exact frame budget is met.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::features::FeatureMatrix;
use crate::frame::Frame;
use crate::math;

/// Per-channel RGB histogram, L1-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    bins: usize,
    channels: [Vec<f64>; 3],
}

impl ColorHistogram {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }
}

/// Histogram of a frame's RGB values over `bins` equal-width bins of
/// [0, 256), each channel normalized to unit mass.
pub fn color_histogram(frame: &Frame, bins: usize) -> Result<ColorHistogram> {
    if bins == 0 || bins > 256 {
        return Err(CoreError::InvalidArgument(format!(
            "bin count {bins} outside 1..=256"
        )));
    }
    let mut channels = [
        alloc::vec![0.0f64; bins],
        alloc::vec![0.0f64; bins],
        alloc::vec![0.0f64; bins],
    ];
    for px in frame.data().chunks_exact(3) {
        for c in 0..3 {
            let bin = (px[c] as usize * bins) / 256;
            channels[c][bin] += 1.0;
        }
    }
    let count = (frame.width() * frame.height()) as f64;
    for ch in channels.iter_mut() {
        for b in ch.iter_mut() {
            *b /= count;
        }
    }
    Ok(ColorHistogram { bins, channels })
}

/// Earth Mover's Distance between two equal-mass 1-D histograms with unit
/// ground distance between adjacent bins: the L1 distance of their CDFs.
pub fn emd_1d(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "histograms of {} and {} bins",
            h1.len(),
            h2.len()
        )));
    }
    let (m1, m2): (f64, f64) = (h1.iter().sum(), h2.iter().sum());
    if math::abs(m1 - m2) > 1e-9 {
        return Err(CoreError::InvalidArgument(format!(
            "histogram masses differ: {m1} vs {m2}"
        )));
    }
    let mut cdf1 = 0.0;
    let mut cdf2 = 0.0;
    let mut emd = 0.0;
    for (a, b) in h1.iter().zip(h2) {
        cdf1 += a;
        cdf2 += b;
        emd += math::abs(cdf1 - cdf2);
    }
    Ok(emd)
}

/// Appearance cost between two histograms: EMD summed over the 3 channels.
pub fn appearance_cost(h1: &ColorHistogram, h2: &ColorHistogram) -> Result<f64> {
    let mut total = 0.0;
    for c in 0..3 {
        total += emd_1d(h1.channel(c), h2.channel(c))?;
    }
    Ok(total)
}

/// Appearance-cost provider over original frame indices.
///
/// The smoothing pass only needs pairwise appearance costs, so the source is
/// abstracted: color histograms when frames are available, descriptor
/// distances when the pipeline runs from a feature file alone.
pub trait AppearanceCost {
    /// AC between original frames `i` and `j`; symmetric, nonnegative.
    fn cost(&self, i: usize, j: usize) -> f64;
}

/// Histogram-EMD appearance cost with per-frame histograms precomputed.
#[derive(Debug, Clone)]
pub struct HistogramCost {
    histograms: Vec<ColorHistogram>,
}

impl HistogramCost {
    pub fn from_frames(frames: &[Frame], bins: usize) -> Result<Self> {
        let histograms = frames
            .iter()
            .map(|f| color_histogram(f, bins))
            .collect::<Result<Vec<_>>>()?;
        Ok(HistogramCost { histograms })
    }
}

impl AppearanceCost for HistogramCost {
    fn cost(&self, i: usize, j: usize) -> f64 {
        appearance_cost(&self.histograms[i], &self.histograms[j]).unwrap_or(0.0)
    }
}

/// Fallback appearance cost for frameless runs: Euclidean distance between
/// feature columns.
#[derive(Debug, Clone, Copy)]
pub struct FeatureCost<'a> {
    features: &'a FeatureMatrix,
}

impl<'a> FeatureCost<'a> {
    pub fn new(features: &'a FeatureMatrix) -> Self {
        FeatureCost { features }
    }
}

impl AppearanceCost for FeatureCost<'_> {
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.features.column_distance(i, j)
    }
}

/// Instability of showing original frame `y` right after `x`: the appearance
/// cost scaled by how far the gap deviates from the segment's speed-up.
/// Negative when the gap undershoots the speed-up.
pub fn instability<C: AppearanceCost + ?Sized>(
    cost: &C,
    x: usize,
    y: usize,
    speedup: f64,
) -> Result<f64> {
    if y <= x {
        return Err(CoreError::InvalidArgument(format!(
            "transition {x} → {y} is not forward"
        )));
    }
    Ok(cost.cost(x, y) * ((y - x) as f64 - speedup))
}

/// One segment's selection with cached per-transition costs.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTimeline {
    indices: Vec<usize>,
    speedup: f64,
    trans_cost: Vec<f64>,
    trans_instability: Vec<f64>,
}

impl SelectionTimeline {
    /// Builds the timeline and caches AC and instability per transition.
    /// `indices` must be strictly increasing original-frame indices.
    pub fn new<C: AppearanceCost + ?Sized>(
        indices: Vec<usize>,
        speedup: f64,
        cost: &C,
    ) -> Result<Self> {
        if indices.is_empty() {
            return Err(CoreError::EmptyInput("empty selection".into()));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidArgument(
                "selection indices must be strictly increasing".into(),
            ));
        }
        if !speedup.is_finite() || speedup < 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "segment speed-up {speedup} must be at least 1"
            )));
        }
        let mut timeline = SelectionTimeline {
            indices,
            speedup,
            trans_cost: Vec::new(),
            trans_instability: Vec::new(),
        };
        timeline.trans_cost = timeline
            .indices
            .windows(2)
            .map(|w| cost.cost(w[0], w[1]))
            .collect();
        timeline.trans_instability = timeline
            .indices
            .windows(2)
            .zip(&timeline.trans_cost)
            .map(|(w, ac)| ac * ((w[1] - w[0]) as f64 - speedup))
            .collect();
        Ok(timeline)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn speedup(&self) -> f64 {
        self.speedup
    }

    /// Cached appearance cost of each consecutive transition.
    pub fn transition_costs(&self) -> &[f64] {
        &self.trans_cost
    }

    /// Cached instability of each consecutive transition.
    pub fn transition_instabilities(&self) -> &[f64] {
        &self.trans_instability
    }

    /// Inserts original frame `j` inside transition `t`, refreshing the two
    /// affected cache entries.
    fn insert<C: AppearanceCost + ?Sized>(&mut self, t: usize, j: usize, cost: &C) {
        let (x, y) = (self.indices[t], self.indices[t + 1]);
        debug_assert!(x < j && j < y);
        self.indices.insert(t + 1, j);
        let ac_left = cost.cost(x, j);
        let ac_right = cost.cost(j, y);
        self.trans_cost[t] = ac_left;
        self.trans_cost.insert(t + 1, ac_right);
        self.trans_instability[t] = ac_left * ((j - x) as f64 - self.speedup);
        self.trans_instability
            .insert(t + 1, ac_right * ((y - j) as f64 - self.speedup));
    }

    /// Frames that smoothing could still insert: unselected originals
    /// strictly inside the selection span.
    pub fn remaining_capacity(&self) -> usize {
        match (self.indices.first(), self.indices.last()) {
            (Some(first), Some(last)) => (last - first + 1) - self.indices.len(),
            _ => 0,
        }
    }
}

/// The transition to smooth next: the one with the largest instability among
/// those that still have room for an insertion (gap ≥ 2). `None` means every
/// transition is saturated.
pub fn find_shakiest_transition(timeline: &SelectionTimeline) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (t, w) in timeline.indices.windows(2).enumerate() {
        if w[1] - w[0] < 2 {
            continue;
        }
        let i = timeline.trans_instability[t];
        match best {
            Some((_, bi)) if i <= bi => {}
            _ => best = Some((t, i)),
        }
    }
    best.map(|(t, _)| t)
}

/// The frame to insert into transition `t`: the interior `j` minimizing
/// `I(x, j)² + I(j, y)²` (squares, because instability can be negative).
/// Ties keep the smallest `j`.
pub fn best_insert_frame<C: AppearanceCost + ?Sized>(
    timeline: &SelectionTimeline,
    t: usize,
    cost: &C,
) -> Result<usize> {
    let (x, y) = (timeline.indices[t], timeline.indices[t + 1]);
    if y - x < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "transition {x} → {y} has no interior"
        )));
    }
    let s = timeline.speedup;
    let mut best_j = x + 1;
    let mut best_obj = f64::INFINITY;
    for j in x + 1..y {
        let left = cost.cost(x, j) * ((j - x) as f64 - s);
        let right = cost.cost(j, y) * ((y - j) as f64 - s);
        let obj = left * left + right * right;
        if obj < best_obj {
            best_obj = obj;
            best_j = j;
        }
    }
    Ok(best_j)
}

/// Greedy smoothing: repeatedly locate the shakiest transition and insert
/// its best interior frame until the selection reaches `target` frames (or
/// no transition can take another frame).
pub fn smooth_transitions<C: AppearanceCost + ?Sized>(
    timeline: &SelectionTimeline,
    target: usize,
    cost: &C,
) -> Result<SelectionTimeline> {
    if target < timeline.len() {
        return Err(CoreError::InvalidArgument(format!(
            "target {target} below current selection size {}",
            timeline.len()
        )));
    }
    let mut out = timeline.clone();
    while out.len() < target {
        let Some(t) = find_shakiest_transition(&out) else {
            break; // saturated
        };
        let j = best_insert_frame(&out, t, cost)?;
        out.insert(t, j, cost);
    }
    Ok(out)
}
