//! Whole-video frame selection: run the sparse sampler per segment at a
//! reduced budget, then smooth transitions back up to each segment's frame
//! target, topping up across segments when one saturates.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::features::FeatureMatrix;
use crate::math;
use crate::params::Params;
use crate::sampler;
use crate::semantics::{SegmentKind, SegmentPlan};
use crate::sft::{smooth_transitions, AppearanceCost, SelectionTimeline};

/// One segment's outcome: which original frames it kept and how the sparse
/// stage got there.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSelection {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub speedup: f64,
    /// Frame budget for this segment.
    pub target_frames: usize,
    /// Reduced budget handed to the sparse sampler before smoothing.
    pub sparse_target: usize,
    /// Regularization weight the sampler settled on.
    pub lambda: f64,
    /// Reconstruction residual ‖Dα − v‖ at that λ.
    pub residual: f64,
    /// Whether the sampler hit `sparse_target` exactly.
    pub target_hit: bool,
    /// Selected original-frame indices, strictly increasing.
    pub frames: Vec<usize>,
}

/// Complete selection over all segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSelection {
    segments: Vec<SegmentSelection>,
}

impl FrameSelection {
    pub fn segments(&self) -> &[SegmentSelection] {
        &self.segments
    }

    /// Total number of selected frames.
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.frames.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.frames.is_empty())
    }

    /// All selected original-frame indices in temporal order.
    pub fn indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        for seg in &self.segments {
            out.extend_from_slice(&seg.frames);
        }
        out
    }
}

fn validate_plan(plan: &SegmentPlan, num_frames: usize) -> Result<()> {
    if plan.segments.is_empty() {
        return Err(CoreError::EmptyInput("segment plan is empty".into()));
    }
    let mut expect = 0usize;
    for seg in &plan.segments {
        if seg.start != expect || seg.end <= seg.start {
            return Err(CoreError::InvalidArgument(format!(
                "segment {}..{} breaks the tiling at {expect}",
                seg.start, seg.end
            )));
        }
        if seg.target_frames < 1 || seg.target_frames > seg.len() {
            return Err(CoreError::InvalidArgument(format!(
                "segment {}..{} target {} outside 1..={}",
                seg.start,
                seg.end,
                seg.target_frames,
                seg.len()
            )));
        }
        if !seg.speedup.is_finite() || seg.speedup < 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "segment speed-up {} below 1",
                seg.speedup
            )));
        }
        expect = seg.end;
    }
    if expect != num_frames {
        return Err(CoreError::DimensionMismatch(format!(
            "plan covers {expect} frames, features hold {num_frames}"
        )));
    }
    Ok(())
}

/// The phase-one sampling budget for a segment: the frame target shrunk by
/// the sparsification factor, rounded, and clamped to [1, len].
pub fn sparse_target(target_frames: usize, spf: u32, len: usize) -> usize {
    ((math::round(target_frames as f64 / spf as f64) as usize).max(1)).min(len)
}

/// Runs the two-phase selection over every planned segment.
///
/// Phase one samples each segment at `target / sparsification_factor` via
/// the weighted sparse solver; phase two inserts frames into the shakiest
/// transitions until the segment budget is met. If a segment saturates (its
/// selection span has no room left), the shortfall is redistributed to the
/// other segments in proportion to their remaining room.
pub fn select_frames<C: AppearanceCost + ?Sized>(
    features: &FeatureMatrix,
    weights: &[f64],
    plan: &SegmentPlan,
    params: &Params,
    cost: &C,
) -> Result<FrameSelection> {
    params.validate()?;
    let n = features.cols();
    if weights.len() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "{} weights for {n} frames",
            weights.len()
        )));
    }
    validate_plan(plan, n)?;

    let mut segments = Vec::with_capacity(plan.segments.len());
    let mut timelines: Vec<SelectionTimeline> = Vec::with_capacity(plan.segments.len());
    for seg in &plan.segments {
        let slice = features.slice_columns(seg.start, seg.end)?;
        let sparse_target = sparse_target(seg.target_frames, params.spf, seg.len());
        let sampled = sampler::sample_segment(
            &slice,
            &weights[seg.start..seg.end],
            sparse_target,
            params.tau_rel,
        )?;
        let frames: Vec<usize> = sampled.selected.iter().map(|i| i + seg.start).collect();
        let mut timeline = SelectionTimeline::new(frames, seg.speedup, cost)?;
        if timeline.len() < seg.target_frames {
            timeline = smooth_transitions(&timeline, seg.target_frames, cost)?;
        }
        segments.push(SegmentSelection {
            start: seg.start,
            end: seg.end,
            kind: seg.kind,
            speedup: seg.speedup,
            target_frames: seg.target_frames,
            sparse_target,
            lambda: sampled.lambda,
            residual: sampled.residual,
            target_hit: sampled.target_hit,
            frames: Vec::new(),
        });
        timelines.push(timeline);
    }

    redistribute_shortfall(plan.total_target(), &mut timelines, cost)?;

    for (seg, timeline) in segments.iter_mut().zip(&timelines) {
        seg.frames = timeline.indices().to_vec();
    }
    Ok(FrameSelection { segments })
}

/// Tops segments up toward the whole-video budget when some segment stopped
/// short. Extra insertions go to segments with spare room, split in
/// proportion to that room (largest remainders first, earlier segments
/// breaking ties).
fn redistribute_shortfall<C: AppearanceCost + ?Sized>(
    goal: usize,
    timelines: &mut [SelectionTimeline],
    cost: &C,
) -> Result<()> {
    loop {
        let total: usize = timelines.iter().map(|t| t.len()).sum();
        if total >= goal {
            return Ok(());
        }
        let deficit = goal - total;
        let room: Vec<usize> = timelines.iter().map(|t| t.remaining_capacity()).collect();
        let room_total: usize = room.iter().sum();
        if room_total == 0 {
            return Ok(()); // every segment saturated; accept the shortfall
        }
        let give = deficit.min(room_total);

        // Proportional split, floored, capped by each segment's room.
        let mut extra: Vec<usize> = room
            .iter()
            .map(|r| ((give * r) / room_total).min(*r))
            .collect();
        let mut assigned: usize = extra.iter().sum();
        // Hand out the remainder by largest fractional share.
        let mut order: Vec<usize> = (0..timelines.len()).collect();
        order.sort_by_key(|&i| core::cmp::Reverse((give * room[i]) % room_total));
        'outer: while assigned < give {
            let mut moved = false;
            for &i in &order {
                if extra[i] < room[i] {
                    extra[i] += 1;
                    assigned += 1;
                    moved = true;
                    if assigned == give {
                        break 'outer;
                    }
                }
            }
            if !moved {
                break;
            }
        }

        for (timeline, add) in timelines.iter_mut().zip(&extra) {
            if *add > 0 {
                let target = timeline.len() + add;
                *timeline = smooth_transitions(timeline, target, cost)?;
            }
        }
    }
}
