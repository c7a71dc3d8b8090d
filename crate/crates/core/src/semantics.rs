//! Semantic profile, semantic/non-semantic segmentation, and per-segment
//! speed-up allocation.

use alloc::format;
use alloc::vec::Vec;

use crate::detect::Detection;
use crate::error::{CoreError, Result};
use crate::math;

/// Minimum per-segment speed-up: semantic segments never play slower than
/// this (keeps the output a fast-forward, not slow motion).
pub const MIN_SEMANTIC_SPEEDUP: f64 = 2.0;
/// Cap on the non-semantic speed-up, as a multiple of the required rate.
pub const MAX_SPEEDUP_FACTOR: f64 = 10.0;

/// Per-frame semantic scores and their smoothed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProfile {
    pub score: Vec<f64>,
    pub smoothed_score: Vec<f64>,
}

impl SemanticProfile {
    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }
}

/// Segment classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Semantic,
    NonSemantic,
}

/// Half-open frame range of one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// A segment with its allocated playback rate and frame budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedSegment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub speedup: f64,
    pub target_frames: usize,
}

impl PlannedSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// The full per-segment plan for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    pub segments: Vec<PlannedSegment>,
}

impl SegmentPlan {
    pub fn total_target(&self) -> usize {
        self.segments.iter().map(|s| s.target_frames).sum()
    }

    pub fn num_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }
}

/// Semantic score of one frame: each detection contributes its classifier
/// confidence, discounted by a Gaussian on the distance of its center from
/// the frame center (σ = width/4, value 1 at the center) and scaled by its
/// area as a fraction of the frame. No detections score 0.
pub fn semantic_score(detections: &[Detection], frame_width: f64, frame_height: f64) -> f64 {
    if !(frame_width > 0.0 && frame_height > 0.0) {
        return 0.0;
    }
    let sigma = frame_width / 4.0;
    let (mx, my) = (frame_width / 2.0, frame_height / 2.0);
    let frame_area = frame_width * frame_height;
    detections
        .iter()
        .map(|det| {
            let (cx, cy) = det.bbox.center();
            let d2 = (cx - mx) * (cx - mx) + (cy - my) * (cy - my);
            let centrality = math::exp(-d2 / (2.0 * sigma * sigma));
            det.confidence * centrality * (det.bbox.area() / frame_area)
        })
        .sum()
}

/// Profile from raw per-frame scores: the smoothed curve is a centered
/// moving average (default width 51) with windows truncated at the borders.
pub fn build_profile(scores: &[f64], smooth_width: usize) -> Result<SemanticProfile> {
    if scores.len() < 2 {
        return Err(CoreError::EmptyInput(format!(
            "profile needs at least 2 frames, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(CoreError::InvalidArgument(
            "semantic scores must be finite and nonnegative".into(),
        ));
    }
    Ok(SemanticProfile {
        score: scores.to_vec(),
        smoothed_score: math::moving_average(scores, smooth_width),
    })
}

/// Splits the clip into semantic/non-semantic runs.
///
/// A frame is semantic when its smoothed score strictly exceeds the mean of
/// the smoothed curve. Runs shorter than `min_segment_length` are absorbed
/// into a neighbor — the preceding run when one exists — until every run is
/// long enough (a single remaining run is kept regardless of length).
pub fn segment_profile(profile: &SemanticProfile, min_segment_length: usize) -> Vec<Segment> {
    let n = profile.smoothed_score.len();
    if n == 0 {
        return Vec::new();
    }
    let threshold = math::mean(&profile.smoothed_score);
    let mut runs: Vec<Segment> = Vec::new();
    for (i, s) in profile.smoothed_score.iter().enumerate() {
        let kind = if *s > threshold {
            SegmentKind::Semantic
        } else {
            SegmentKind::NonSemantic
        };
        match runs.last_mut() {
            Some(last) if last.kind == kind => last.end = i + 1,
            _ => runs.push(Segment {
                start: i,
                end: i + 1,
                kind,
            }),
        }
    }

    // Merge short runs into a neighbor (preferring the preceding one), then
    // coalesce and repeat until stable.
    loop {
        if runs.len() <= 1 {
            break;
        }
        let Some(short) = runs.iter().position(|r| r.len() < min_segment_length) else {
            break;
        };
        let absorb_into_prev = short > 0;
        if absorb_into_prev {
            runs[short].kind = runs[short - 1].kind;
        } else {
            runs[short].kind = runs[short + 1].kind;
        }
        // Coalesce adjacent same-kind runs.
        let mut merged: Vec<Segment> = Vec::with_capacity(runs.len());
        for r in runs.drain(..) {
            match merged.last_mut() {
                Some(last) if last.kind == r.kind => last.end = r.end,
                _ => merged.push(r),
            }
        }
        runs = merged;
    }
    runs
}

/// Assigns per-segment speed-ups and frame budgets so the whole video meets
/// the required rate `s`.
///
/// Semantic segments start at `max(2, s/2)`; the non-semantic rate follows
/// from the frame-budget balance `F_sem/s_sem + F_non/s_non = n/s`. When the
/// solved non-semantic rate leaves `[s, 10·s]` it is clamped and the
/// semantic rate recomputed; when no feasible pair remains, both rates fall
/// back to `s`. Per-segment budgets are `round(len/speedup)` clamped to
/// `[1, len]`, and the global rounding residual is settled against
/// `round(n/s)` by nudging the largest segments first.
pub fn allocate_speedups(segments: &[Segment], s: f64) -> Result<SegmentPlan> {
    if segments.is_empty() {
        return Err(CoreError::EmptyInput("no segments to plan".into()));
    }
    if !s.is_finite() || s <= 1.0 {
        return Err(CoreError::InvalidArgument("speed-up must exceed 1".into()));
    }
    let mut prev_end = segments[0].start;
    if segments[0].start != 0 {
        return Err(CoreError::InvalidArgument("segments must start at frame 0".into()));
    }
    for seg in segments {
        if seg.start != prev_end || seg.is_empty() {
            return Err(CoreError::InvalidArgument(
                "segments must tile the clip without gaps or overlaps".into(),
            ));
        }
        prev_end = seg.end;
    }

    let n = prev_end as f64;
    let f_sem: f64 = segments
        .iter()
        .filter(|r| r.kind == SegmentKind::Semantic)
        .map(|r| r.len() as f64)
        .sum();
    let f_non = n - f_sem;
    let budget = n / s;

    let (s_sem, s_non) = if f_sem == 0.0 || f_non == 0.0 {
        // Single-kind video: the balance equation pins the rate at s.
        (s, s)
    } else {
        let mut s_sem = MIN_SEMANTIC_SPEEDUP.max(s / 2.0);
        let remaining = budget - f_sem / s_sem;
        let s_cap = MAX_SPEEDUP_FACTOR * s;
        let mut s_non = if remaining > 0.0 { f_non / remaining } else { f64::INFINITY };
        if s_non < s || s_non > s_cap {
            s_non = if s_non < s { s } else { s_cap };
            let rem = budget - f_non / s_non;
            s_sem = if rem > 0.0 { f_sem / rem } else { f64::INFINITY };
            if !s_sem.is_finite() || s_sem < 1.0 || s_sem > s_non {
                s_sem = s;
                s_non = s;
            }
        }
        (s_sem, s_non)
    };

    let mut planned: Vec<PlannedSegment> = segments
        .iter()
        .map(|seg| {
            let speedup = match seg.kind {
                SegmentKind::Semantic => s_sem,
                SegmentKind::NonSemantic => s_non,
            };
            let len = seg.len();
            let target = (math::round(len as f64 / speedup) as usize).clamp(1, len);
            PlannedSegment {
                start: seg.start,
                end: seg.end,
                kind: seg.kind,
                speedup,
                target_frames: target,
            }
        })
        .collect();

    // Settle the rounding residual on the largest segments first.
    let goal = (math::round(n / s) as usize).max(1);
    let mut order: Vec<usize> = (0..planned.len()).collect();
    order.sort_by(|a, b| planned[*b].len().cmp(&planned[*a].len()).then(a.cmp(b)));
    loop {
        let total: usize = planned.iter().map(|p| p.target_frames).sum();
        if total == goal {
            break;
        }
        let mut moved = false;
        for &i in &order {
            let p = &mut planned[i];
            if total < goal && p.target_frames < p.len() {
                p.target_frames += 1;
                moved = true;
                break;
            }
            if total > goal && p.target_frames > 1 {
                p.target_frames -= 1;
                moved = true;
                break;
            }
        }
        if !moved {
            break; // every segment pinned at a bound
        }
    }

    Ok(SegmentPlan { segments: planned })
}
