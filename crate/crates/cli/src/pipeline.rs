//! End-to-end batch pipeline: ingest, describe, plan, sample, smooth,
//! evaluate, and write artifacts.
//!
//! Stages run in order; within the flow and descriptor stages per-frame work
//! fans out to a worker pool, and all files are written by a single writer
//! once every stage has finished. Selections and reports are byte-identical
//! across reruns on the same inputs; the manifest additionally records stage
//! timings, which naturally vary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use semff_core::detect::DetectionSet;
use semff_core::features::FeatureMatrix;
use semff_core::flow::{compute_dense_flow, FlowField};
use semff_core::frame::{Frame, FrameSequence, GrayFrame};
use semff_core::metrics;
use semff_core::motion::MotionProfile;
use semff_core::select::{self, FrameSelection};
use semff_core::semantics::{self, SegmentKind, SegmentPlan};
use semff_core::sft::{AppearanceCost, FeatureCost, HistogramCost, SelectionTimeline};
use semff_core::Params;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::ingest;

/// Resolved inputs and knobs for one `run` invocation.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory of numbered frame images. Mutually exclusive with `features`.
    pub input: Option<PathBuf>,
    /// Precomputed feature-matrix file. Mutually exclusive with `input`.
    pub features: Option<PathBuf>,
    /// Object detections in JSON-lines form; optional.
    pub detections: Option<PathBuf>,
    /// Precomputed optical-flow cache; optional.
    pub flows: Option<PathBuf>,
    /// Output directory. When absent nothing is written.
    pub out: Option<PathBuf>,
    pub params: Params,
    /// Frame dimensions, required to score detections in feature mode.
    pub frame_dims: Option<(usize, usize)>,
    /// Worker-pool size; default lets the pool pick.
    pub workers: Option<usize>,
    /// Copy the selected frames into `out/frames/` in playback order.
    pub export_frames: bool,
}

/// Everything a run produces, for callers that want the numbers without
/// re-reading the written files.
pub struct RunResult {
    pub num_frames: usize,
    pub selection: SelectionDoc,
    pub report: Report,
    pub timings: Vec<StageTiming>,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize, Clone)]
pub struct StageTiming {
    pub stage: &'static str,
    pub ms: f64,
}

// ---------------------------------------------------------------------------
// Output documents

/// JSON form of the final selection; the text form is one index per line.
#[derive(Serialize)]
pub struct SelectionDoc {
    pub num_frames: usize,
    pub speedup: f64,
    pub total_selected: usize,
    pub segments: Vec<SegmentSelectionDoc>,
}

#[derive(Serialize)]
pub struct SegmentSelectionDoc {
    pub segment: usize,
    pub start: usize,
    pub end: usize,
    pub kind: &'static str,
    pub speedup: f64,
    pub target_frames: usize,
    pub sparse_target: usize,
    pub lambda: f64,
    pub residual: f64,
    pub target_hit: bool,
    pub indices: Vec<usize>,
}

/// Metric choices that make the report self-describing.
#[derive(Serialize)]
pub struct DesignNotes {
    pub instability: String,
    pub grayscale: &'static str,
    pub appearance_cost: String,
    pub segmentation_threshold: &'static str,
    pub activation_rule: String,
    pub sparsification: String,
}

#[derive(Serialize)]
pub struct VideoInfo {
    pub num_frames: usize,
    pub frame_width: Option<usize>,
    pub frame_height: Option<usize>,
    pub feature_dim: usize,
    pub num_segments: usize,
}

/// One selection scored by every metric that applies to the input mode.
#[derive(Serialize)]
pub struct EvalDoc {
    pub num_selected: usize,
    pub speedup_achieved: f64,
    pub speedup_deviation: f64,
    pub semantic_retention: f64,
    /// Coefficient of variation of per-transition appearance costs; absent
    /// with fewer than two transitions.
    pub appearance_cv: Option<f64>,
    /// Pixel-domain instability; absent in feature mode or when the
    /// selection is shorter than the window.
    pub instability: Option<f64>,
}

#[derive(Serialize)]
pub struct SegmentReportDoc {
    pub segment: usize,
    pub start: usize,
    pub end: usize,
    pub kind: &'static str,
    pub speedup: f64,
    pub target_frames: usize,
    pub selected: usize,
    pub lambda: f64,
    pub target_hit: bool,
    pub appearance_cv: Option<f64>,
}

/// The evaluation report: the pipeline's selection and the uniform
/// every-S-th-frame baseline, scored identically.
#[derive(Serialize)]
pub struct Report {
    pub design: DesignNotes,
    pub video: VideoInfo,
    pub pipeline: EvalDoc,
    pub uniform: EvalDoc,
    /// Instability of the unsampled video, when frames are available.
    pub original_instability: Option<f64>,
    pub segments: Vec<SegmentReportDoc>,
}

#[derive(Serialize)]
struct Versions {
    core: &'static str,
    cli: &'static str,
}

#[derive(Serialize)]
struct ConfigSnapshot {
    mode: &'static str,
    input: Option<String>,
    features: Option<String>,
    detections: Option<String>,
    flows: Option<String>,
    speedup: f64,
    spf: u32,
    weight_low: f64,
    weight_high: f64,
    tau_rel: f64,
    color_bins: usize,
    instability_window: usize,
    min_segment_len: usize,
    semantic_smooth_width: usize,
    cdc_smooth_width: usize,
    flow_block: usize,
    flow_radius: usize,
    normalize_blocks: bool,
    frame_width: Option<usize>,
    frame_height: Option<usize>,
    workers: Option<usize>,
    export_frames: bool,
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    kind: &'static str,
    sha256: String,
    detail: String,
}

#[derive(Serialize)]
struct OutputRecord {
    file: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest {
    versions: Versions,
    config: ConfigSnapshot,
    inputs: Vec<InputRecord>,
    timings_ms: Vec<StageTiming>,
    outputs: Vec<OutputRecord>,
}

// ---------------------------------------------------------------------------
// Shared stage helpers

/// Semantic plan for a score profile: smooth, threshold at the mean, merge
/// short runs, then divide the requested speed-up between the two kinds.
pub fn plan_from_scores(scores: &[f64], params: &Params) -> Result<SegmentPlan> {
    let profile = semantics::build_profile(scores, params.semantic_smooth_width)?;
    let segments = semantics::segment_profile(&profile, params.min_segment_len);
    Ok(semantics::allocate_speedups(&segments, params.speedup)?)
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| CliError::Internal(format!("worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

/// Pairwise dense flow for a frame sequence, computed or loaded from cache.
fn flows_for(
    seq: &FrameSequence,
    cache: Option<&Path>,
    params: &Params,
    workers: Option<usize>,
) -> Result<Vec<FlowField>> {
    let n = seq.len();
    if let Some(path) = cache {
        let flows = ingest::load_flows(path)?;
        if flows.len() != n - 1 {
            return Err(CliError::Input(format!(
                "flow cache {} has {} fields for {} frames (need {})",
                path.display(),
                flows.len(),
                n,
                n - 1
            )));
        }
        return Ok(flows);
    }
    let frames = seq.frames();
    with_pool(workers, || {
        (0..n - 1)
            .into_par_iter()
            .map(|i| {
                compute_dense_flow(&frames[i], &frames[i + 1], params.flow_block, params.flow_radius)
                    .map_err(CliError::from)
            })
            .collect()
    })
}

/// Per-frame descriptors: frame `i` pairs with flow `i`, the final frame
/// reusing the last flow field.
fn descriptors_for(
    seq: &FrameSequence,
    flows: &[FlowField],
    detections: &DetectionSet,
    params: &Params,
    workers: Option<usize>,
) -> Result<FeatureMatrix> {
    let frames = seq.frames();
    let buckets = detections.buckets();
    let n = frames.len();
    let descriptors = with_pool(workers, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let flow = &flows[i.min(n - 2)];
                semff_core::descriptor::describe_frame(
                    &frames[i],
                    flow,
                    &buckets[i],
                    i,
                    params.normalize_blocks,
                )
                .map_err(CliError::from)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(FeatureMatrix::from_descriptors(&descriptors)?)
}

fn semantic_scores(detections: &DetectionSet, width: f64, height: f64) -> Vec<f64> {
    detections
        .buckets()
        .iter()
        .map(|dets| semantics::semantic_score(dets, width, height))
        .collect()
}

/// The uniform every-S-th-frame baseline: `floor(n/S)` indices starting at 0.
pub fn uniform_selection(n: usize, speedup: f64) -> Vec<usize> {
    let count = (n as f64 / speedup).floor() as usize;
    (0..count).map(|k| (k as f64 * speedup) as usize).collect()
}

fn gray_frames(frames: &[Frame], indices: &[usize]) -> Vec<GrayFrame> {
    indices.iter().map(|&i| frames[i].to_gray()).collect()
}

fn instability_of(frames: Option<&[Frame]>, indices: &[usize], window: usize) -> Option<f64> {
    let frames = frames?;
    if indices.len() < window {
        return None;
    }
    metrics::instability_index(&gray_frames(frames, indices), window).ok()
}

/// Scores one selection with every metric the input mode supports.
fn evaluate_selection<C: AppearanceCost + ?Sized>(
    indices: &[usize],
    per_segment: &[(f64, Vec<usize>)],
    n: usize,
    scores: &[f64],
    frames: Option<&[Frame]>,
    params: &Params,
    cost: &C,
) -> Result<EvalDoc> {
    if indices.is_empty() {
        return Err(CliError::Internal("selection is empty".into()));
    }
    let mut acs = Vec::new();
    for (speedup, seg_indices) in per_segment {
        if seg_indices.is_empty() {
            continue;
        }
        let timeline = SelectionTimeline::new(seg_indices.clone(), *speedup, cost)?;
        acs.extend_from_slice(timeline.transition_costs());
    }
    Ok(EvalDoc {
        num_selected: indices.len(),
        speedup_achieved: metrics::achieved_speedup(n, indices.len())?,
        speedup_deviation: metrics::speedup_deviation(n, indices.len(), params.speedup)?,
        semantic_retention: metrics::semantic_retention(indices, scores, params.speedup)?,
        appearance_cv: metrics::cost_cv(&acs).ok(),
        instability: instability_of(frames, indices, params.instability_window),
    })
}

fn design_notes(params: &Params) -> DesignNotes {
    DesignNotes {
        instability: format!(
            "mean over sliding windows of {} selected frames of the per-pixel \
             temporal standard deviation, averaged over pixels",
            params.instability_window
        ),
        grayscale: "ITU-R BT.601 luma",
        appearance_cost: format!(
            "1-D CDF Earth Mover's Distance between {}-bin per-channel RGB \
             histograms, summed over channels",
            params.color_bins
        ),
        segmentation_threshold: "mean of the smoothed semantic profile; runs shorter than \
             the minimum are merged into a neighbor",
        activation_rule: format!(
            "coefficients within {} of the peak magnitude count as active",
            params.tau_rel
        ),
        sparsification: format!(
            "sampler first targets 1/{} of each segment budget; transition \
             smoothing inserts the rest",
            params.spf
        ),
    }
}

// ---------------------------------------------------------------------------
// Hashing

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of a directory of frames: sha256 over (name, content-hash) pairs in
/// load order.
fn hash_frame_dir(dir: &Path) -> Result<String> {
    let files = ingest::frame_files(dir)?;
    let mut hasher = Sha256::new();
    for (_, path) in &files {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        hasher.update(name.as_bytes());
        hasher.update(b"\0");
        let bytes = fs::read(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        hasher.update(sha256_hex(&bytes).as_bytes());
        hasher.update(b"\0");
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

// ---------------------------------------------------------------------------
// The run pipeline

struct Clock {
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn start() -> Self {
        Clock {
            last: Instant::now(),
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        let ms = now.duration_since(self.last).as_secs_f64() * 1e3;
        self.timings.push(StageTiming { stage, ms });
        self.last = now;
    }
}

fn stage_err(stage: &'static str, e: CliError) -> CliError {
    match e {
        CliError::Usage(m) => CliError::Usage(format!("{stage}: {m}")),
        CliError::Input(m) => CliError::Input(format!("{stage}: {m}")),
        CliError::Internal(m) => CliError::Internal(format!("{stage}: {m}")),
    }
}

/// What the ingest/describe stages hand to planning and sampling, whichever
/// input mode produced it.
struct PreparedInput {
    features: FeatureMatrix,
    weights: Vec<f64>,
    scores: Vec<f64>,
    seq: Option<FrameSequence>,
    dims: Option<(usize, usize)>,
}

pub fn run(opts: &RunOptions) -> Result<RunResult> {
    opts.params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let params = &opts.params;
    match (&opts.input, &opts.features) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either a frame directory or a feature file, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "an input is required: a frame directory or a feature file".into(),
            ))
        }
        _ => {}
    }

    let mut clock = Clock::start();

    // Ingest + describe. Both modes end with features, per-frame weights,
    // and per-frame semantic scores; frames mode keeps the pixels around for
    // appearance costs and instability.
    let mut inputs: Vec<InputRecord> = Vec::new();
    let prepared = if let Some(dir) = &opts.input {
        let seq = ingest::load_frame_sequence(dir).map_err(|e| stage_err("ingest", e))?;
        let n = seq.len();
        let (w, h) = seq.dimensions().expect("non-empty sequence has dimensions");
        inputs.push(InputRecord {
            path: dir.display().to_string(),
            kind: "frames",
            sha256: hash_frame_dir(dir)?,
            detail: format!("{n} frames {w}x{h}"),
        });
        let detections = match &opts.detections {
            Some(path) => {
                let set = ingest::load_detections(path, n, w, h)
                    .map_err(|e| stage_err("ingest", e))?;
                inputs.push(InputRecord {
                    path: path.display().to_string(),
                    kind: "detections",
                    sha256: hash_file(path)?,
                    detail: format!("{} detections", set.buckets().iter().map(Vec::len).sum::<usize>()),
                });
                set
            }
            None => DetectionSet::empty(n),
        };
        clock.lap("ingest");

        let flows = flows_for(&seq, opts.flows.as_deref(), params, opts.workers)
            .map_err(|e| stage_err("descriptor", e))?;
        if let Some(path) = &opts.flows {
            inputs.push(InputRecord {
                path: path.display().to_string(),
                kind: "flows",
                sha256: hash_file(path)?,
                detail: format!("{} fields", flows.len()),
            });
        }
        let features = descriptors_for(&seq, &flows, &detections, params, opts.workers)
            .map_err(|e| stage_err("descriptor", e))?;
        let motion = MotionProfile::from_flows(
            &flows,
            params.cdc_smooth_width,
            params.weight_low,
            params.weight_high,
        )
        .map_err(|e| stage_err("descriptor", CliError::from(e)))?;
        let scores = semantic_scores(&detections, w as f64, h as f64);
        clock.lap("descriptor");
        PreparedInput {
            features,
            weights: motion.weights,
            scores,
            seq: Some(seq),
            dims: Some((w, h)),
        }
    } else {
        let path = opts.features.as_ref().expect("checked above");
        let features = ingest::load_feature_matrix(path).map_err(|e| stage_err("ingest", e))?;
        let n = features.cols();
        inputs.push(InputRecord {
            path: path.display().to_string(),
            kind: "features",
            sha256: hash_file(path)?,
            detail: format!("{}x{}", features.rows(), features.cols()),
        });
        if n < 2 {
            return Err(stage_err(
                "ingest",
                CliError::Input(format!("need at least 2 frames, found {n}")),
            ));
        }
        let scores = match &opts.detections {
            Some(path) => {
                let (w, h) = opts.frame_dims.ok_or_else(|| {
                    CliError::Usage(
                        "scoring detections against a feature file needs the frame \
                         size (flag or config frame_width/frame_height)"
                            .into(),
                    )
                })?;
                let set = ingest::load_detections(path, n, w, h)
                    .map_err(|e| stage_err("ingest", e))?;
                inputs.push(InputRecord {
                    path: path.display().to_string(),
                    kind: "detections",
                    sha256: hash_file(path)?,
                    detail: format!("{} detections", set.buckets().iter().map(Vec::len).sum::<usize>()),
                });
                semantic_scores(&set, w as f64, h as f64)
            }
            None => vec![0.0; n],
        };
        clock.lap("ingest");

        let weights = match &opts.flows {
            Some(path) => {
                let flows = ingest::load_flows(path).map_err(|e| stage_err("descriptor", e))?;
                if flows.len() != n - 1 {
                    return Err(stage_err(
                        "descriptor",
                        CliError::Input(format!(
                            "flow cache {} has {} fields for {n} frames (need {})",
                            path.display(),
                            flows.len(),
                            n - 1
                        )),
                    ));
                }
                inputs.push(InputRecord {
                    path: path.display().to_string(),
                    kind: "flows",
                    sha256: hash_file(path)?,
                    detail: format!("{} fields", flows.len()),
                });
                let motion = MotionProfile::from_flows(
                    &flows,
                    params.cdc_smooth_width,
                    params.weight_low,
                    params.weight_high,
                )
                .map_err(|e| stage_err("descriptor", CliError::from(e)))?;
                motion.weights
            }
            None => vec![params.weight_high; n],
        };
        clock.lap("descriptor");
        PreparedInput {
            features,
            weights,
            scores,
            seq: None,
            dims: opts.frame_dims,
        }
    };
    let PreparedInput {
        features,
        weights,
        scores,
        seq,
        dims,
    } = prepared;

    let n = features.cols();

    // Semantics: profile, segmentation, speed-up allocation.
    let plan = plan_from_scores(&scores, params).map_err(|e| stage_err("semantics", e))?;
    clock.lap("semantics");

    // Sampling + transition smoothing, then metrics, costed by pixels when
    // we have them and by feature distance otherwise.
    let (selection, report, transitions) = match &seq {
        Some(seq) => {
            let cost = HistogramCost::from_frames(seq.frames(), params.color_bins)
                .map_err(|e| stage_err("sampling", CliError::from(e)))?;
            let selection = select::select_frames(&features, &weights, &plan, params, &cost)
                .map_err(|e| stage_err("sampling", CliError::from(e)))?;
            clock.lap("sampling");
            let (report, transitions) = build_report(
                &selection,
                &plan,
                n,
                features.rows(),
                &scores,
                Some(seq.frames()),
                dims,
                params,
                &cost,
            )
            .map_err(|e| stage_err("metrics", e))?;
            clock.lap("metrics");
            (selection, report, transitions)
        }
        None => {
            let cost = FeatureCost::new(&features);
            let selection = select::select_frames(&features, &weights, &plan, params, &cost)
                .map_err(|e| stage_err("sampling", CliError::from(e)))?;
            clock.lap("sampling");
            let (report, transitions) = build_report(
                &selection,
                &plan,
                n,
                features.rows(),
                &scores,
                None,
                dims,
                params,
                &cost,
            )
            .map_err(|e| stage_err("metrics", e))?;
            clock.lap("metrics");
            (selection, report, transitions)
        }
    };

    let selection_doc = selection_doc(&selection, n, params);

    // Outputs, written by one writer after everything is computed.
    let mut written = Vec::new();
    if let Some(out) = &opts.out {
        let per_window = seq.as_ref().and_then(|seq| {
            let indices = selection.indices();
            if indices.len() < params.instability_window {
                return None;
            }
            metrics::instability_windows(
                &gray_frames(seq.frames(), &indices),
                params.instability_window,
            )
            .ok()
        });
        written = write_outputs(
            out,
            &selection_doc,
            &report,
            &transitions,
            per_window.as_deref(),
            seq.as_ref().filter(|_| opts.export_frames).map(|s| {
                let indices = selection.indices();
                indices.iter().map(|&i| s.frames()[i].clone()).collect::<Vec<_>>()
            }),
            opts,
            inputs,
            &mut clock,
        )
        .map_err(|e| stage_err("outputs", e))?;
    }

    Ok(RunResult {
        num_frames: n,
        selection: selection_doc,
        report,
        timings: clock.timings,
        written,
    })
}

fn kind_name(kind: SegmentKind) -> &'static str {
    match kind {
        SegmentKind::Semantic => "semantic",
        SegmentKind::NonSemantic => "non-semantic",
    }
}

fn selection_doc(selection: &FrameSelection, n: usize, params: &Params) -> SelectionDoc {
    SelectionDoc {
        num_frames: n,
        speedup: params.speedup,
        total_selected: selection.len(),
        segments: selection
            .segments()
            .iter()
            .enumerate()
            .map(|(i, seg)| SegmentSelectionDoc {
                segment: i,
                start: seg.start,
                end: seg.end,
                kind: kind_name(seg.kind),
                speedup: seg.speedup,
                target_frames: seg.target_frames,
                sparse_target: seg.sparse_target,
                lambda: seg.lambda,
                residual: seg.residual,
                target_hit: seg.target_hit,
                indices: seg.frames.clone(),
            })
            .collect(),
    }
}

/// One output transition, for the CSV series.
pub struct TransitionRow {
    pub segment: usize,
    pub from: usize,
    pub to: usize,
    pub appearance_cost: f64,
    pub instability: f64,
}

#[allow(clippy::too_many_arguments)]
fn build_report<C: AppearanceCost + ?Sized>(
    selection: &FrameSelection,
    plan: &SegmentPlan,
    n: usize,
    feature_dim: usize,
    scores: &[f64],
    frames: Option<&[Frame]>,
    dims: Option<(usize, usize)>,
    params: &Params,
    cost: &C,
) -> Result<(Report, Vec<TransitionRow>)> {
    let indices = selection.indices();
    let per_segment: Vec<(f64, Vec<usize>)> = selection
        .segments()
        .iter()
        .map(|s| (s.speedup, s.frames.clone()))
        .collect();
    let pipeline = evaluate_selection(&indices, &per_segment, n, scores, frames, params, cost)?;

    let uniform = uniform_selection(n, params.speedup);
    let uniform_doc = evaluate_selection(
        &uniform,
        &[(params.speedup, uniform.clone())],
        n,
        scores,
        frames,
        params,
        cost,
    )?;

    let all: Vec<usize> = (0..n).collect();
    let original_instability = instability_of(frames, &all, params.instability_window);

    let mut segments = Vec::with_capacity(selection.segments().len());
    let mut transitions = Vec::new();
    for (i, seg) in selection.segments().iter().enumerate() {
        let mut cv = None;
        if seg.frames.len() >= 2 {
            let timeline = SelectionTimeline::new(seg.frames.clone(), seg.speedup, cost)?;
            for ((pair, ac), inst) in seg
                .frames
                .windows(2)
                .zip(timeline.transition_costs())
                .zip(timeline.transition_instabilities())
            {
                transitions.push(TransitionRow {
                    segment: i,
                    from: pair[0],
                    to: pair[1],
                    appearance_cost: *ac,
                    instability: *inst,
                });
            }
            if seg.frames.len() >= 3 {
                cv = metrics::appearance_cost_cv(&timeline).ok();
            }
        }
        segments.push(SegmentReportDoc {
            segment: i,
            start: seg.start,
            end: seg.end,
            kind: kind_name(seg.kind),
            speedup: seg.speedup,
            target_frames: seg.target_frames,
            selected: seg.frames.len(),
            lambda: seg.lambda,
            target_hit: seg.target_hit,
            appearance_cv: cv,
        });
    }

    let report = Report {
        design: design_notes(params),
        video: VideoInfo {
            num_frames: n,
            frame_width: dims.map(|d| d.0),
            frame_height: dims.map(|d| d.1),
            feature_dim,
            num_segments: plan.segments.len(),
        },
        pipeline,
        uniform: uniform_doc,
        original_instability,
        segments,
    };
    Ok((report, transitions))
}

// ---------------------------------------------------------------------------
// Writing

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    out: &Path,
    selection: &SelectionDoc,
    report: &Report,
    transitions: &[TransitionRow],
    per_window: Option<&[f64]>,
    export: Option<Vec<Frame>>,
    opts: &RunOptions,
    inputs: Vec<InputRecord>,
    clock: &mut Clock,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    let mut text = String::new();
    for seg in &selection.segments {
        for &i in &seg.indices {
            text.push_str(&format!("{i}\n"));
        }
    }
    files.push(("selection.txt".into(), text.into_bytes()));

    let mut json = serde_json::to_vec_pretty(selection)
        .map_err(|e| CliError::Internal(format!("selection serialization: {e}")))?;
    json.push(b'\n');
    files.push(("selection.json".into(), json));

    let mut json = serde_json::to_vec_pretty(report)
        .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
    json.push(b'\n');
    files.push(("report.json".into(), json));

    files.push(("transitions.csv".into(), transitions_csv(transitions).into_bytes()));

    if let Some(values) = per_window {
        let mut csv = String::from("window_start,instability\n");
        for (k, v) in values.iter().enumerate() {
            csv.push_str(&format!("{k},{v}\n"));
        }
        files.push(("instability.csv".into(), csv.into_bytes()));
    }

    let mut written: Vec<PathBuf> = Vec::new();
    let cleanup = |written: &[PathBuf]| {
        for path in written {
            let _ = fs::remove_file(path);
        }
    };

    // Exported frames first: they are the bulkiest and the most likely to
    // fail on a full disk.
    if let Some(frames) = export {
        let dir = out.join("frames");
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        for (pos, frame) in frames.iter().enumerate() {
            let path = dir.join(format!("{pos:06}.png"));
            if let Err(e) = ingest::save_png(&path, frame) {
                cleanup(&written);
                return Err(e);
            }
            written.push(path);
        }
    }

    let mut outputs: Vec<OutputRecord> = Vec::new();
    for (name, bytes) in &files {
        outputs.push(OutputRecord {
            file: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        let path = out.join(name);
        if let Err(e) = write_file(&path, bytes) {
            cleanup(&written);
            return Err(e);
        }
        written.push(path);
    }

    clock.lap("outputs");

    let manifest = Manifest {
        versions: Versions {
            core: semff_core::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        config: snapshot(opts),
        inputs,
        timings_ms: clock.timings.clone(),
        outputs,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::Internal(format!("manifest serialization: {e}")))?;
    json.push(b'\n');
    let path = out.join("manifest.json");
    if let Err(e) = write_file(&path, &json) {
        cleanup(&written);
        return Err(e);
    }
    written.push(path);

    Ok(written)
}

fn transitions_csv(rows: &[TransitionRow]) -> String {
    let mut out = String::from("segment,from,to,appearance_cost,instability\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.segment, row.from, row.to, row.appearance_cost, row.instability
        ));
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// describe: frames in, feature file out

#[derive(Debug, Clone)]
pub struct DescribeOptions {
    pub input: PathBuf,
    pub detections: Option<PathBuf>,
    /// Flow cache to reuse instead of computing.
    pub flows: Option<PathBuf>,
    /// Where to store the computed flow fields, for later reuse.
    pub save_flows: Option<PathBuf>,
    /// Feature file to write (`.csv` for the text form).
    pub out: PathBuf,
    pub params: Params,
    pub workers: Option<usize>,
}

/// Extracts per-frame descriptors and writes them as a feature matrix.
/// Returns (feature dimension, frame count).
pub fn describe(opts: &DescribeOptions) -> Result<(usize, usize)> {
    opts.params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seq = ingest::load_frame_sequence(&opts.input)?;
    let n = seq.len();
    let (w, h) = seq.dimensions().expect("non-empty sequence has dimensions");
    let detections = match &opts.detections {
        Some(path) => ingest::load_detections(path, n, w, h)?,
        None => DetectionSet::empty(n),
    };
    let flows = flows_for(&seq, opts.flows.as_deref(), &opts.params, opts.workers)?;
    if let Some(path) = &opts.save_flows {
        ingest::save_flows(path, &flows)?;
    }
    let features = descriptors_for(&seq, &flows, &detections, &opts.params, opts.workers)?;
    ingest::save_feature_matrix(&opts.out, &features)?;
    Ok((features.rows(), features.cols()))
}

// ---------------------------------------------------------------------------
// sample: one segment straight from a feature file

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub features: PathBuf,
    pub target: usize,
    pub tau: f64,
    /// Per-frame locality weights, one per line; default all 1.
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub struct SampleResult {
    pub selected: Vec<usize>,
    pub lambda: f64,
    pub residual: f64,
    pub target_hit: bool,
}

/// Runs the weighted sparse sampler over the whole feature file as one
/// segment, with no smoothing pass.
pub fn sample(opts: &SampleOptions) -> Result<SampleResult> {
    let features = ingest::load_feature_matrix(&opts.features)?;
    let n = features.cols();
    if opts.target == 0 || opts.target > n {
        return Err(CliError::Usage(format!(
            "target must be between 1 and {n}, got {}",
            opts.target
        )));
    }
    if !(opts.tau.is_finite() && opts.tau >= 0.0) {
        return Err(CliError::Usage(format!(
            "activation threshold must be a nonnegative number, got {}",
            opts.tau
        )));
    }
    let weights = match &opts.weights {
        Some(path) => ingest::load_weights(path, n)?,
        None => vec![1.0; n],
    };
    let result = semff_core::sampler::sample_segment(&features, &weights, opts.target, opts.tau)?;
    let sample = SampleResult {
        selected: result.selected,
        lambda: result.lambda,
        residual: result.residual,
        target_hit: result.target_hit,
    };
    if let Some(path) = &opts.out {
        let mut text = String::new();
        for i in &sample.selected {
            text.push_str(&format!("{i}\n"));
        }
        write_file(path, text.as_bytes())?;
    }
    Ok(sample)
}

// ---------------------------------------------------------------------------
// evaluate: metrics on an external selection

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub input: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub selection: PathBuf,
    pub detections: Option<PathBuf>,
    pub params: Params,
    pub frame_dims: Option<(usize, usize)>,
    /// Report path; the caller prints to stdout when absent.
    pub out: Option<PathBuf>,
}

/// Report for an external selection: the selection and the uniform baseline
/// scored with the same metrics.
#[derive(Serialize)]
pub struct EvaluateReport {
    pub design: DesignNotes,
    pub video: VideoInfo,
    pub selection: EvalDoc,
    pub uniform: EvalDoc,
    pub original_instability: Option<f64>,
}

pub fn evaluate(opts: &EvaluateOptions) -> Result<EvaluateReport> {
    opts.params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let params = &opts.params;
    match (&opts.input, &opts.features) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "give either a frame directory or a feature file, not both".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "an input is required: a frame directory or a feature file".into(),
            ))
        }
        _ => {}
    }
    let indices = ingest::load_selection(&opts.selection)?;

    let Some(dir) = &opts.input else {
        let path = opts.features.as_ref().expect("checked above");
        let features = ingest::load_feature_matrix(path)?;
        let n = features.cols();
        let scores = match &opts.detections {
            Some(det_path) => {
                let (w, h) = opts.frame_dims.ok_or_else(|| {
                    CliError::Usage(
                        "scoring detections against a feature file needs the frame \
                         size (flag or config frame_width/frame_height)"
                            .into(),
                    )
                })?;
                let set = ingest::load_detections(det_path, n, w, h)?;
                semantic_scores(&set, w as f64, h as f64)
            }
            None => vec![0.0; n],
        };
        // Keep the matrix for appearance costs below.
        return evaluate_with_cost(
            opts,
            &indices,
            n,
            features.rows(),
            &scores,
            None,
            opts.frame_dims,
            &FeatureCost::new(&features),
        );
    };

    let seq = ingest::load_frame_sequence(dir)?;
    let n = seq.len();
    let (w, h) = seq.dimensions().expect("non-empty sequence has dimensions");
    let scores = match &opts.detections {
        Some(path) => {
            let set = ingest::load_detections(path, n, w, h)?;
            semantic_scores(&set, w as f64, h as f64)
        }
        None => vec![0.0; n],
    };
    let cost = HistogramCost::from_frames(seq.frames(), params.color_bins)?;
    evaluate_with_cost(
        opts,
        &indices,
        n,
        0,
        &scores,
        Some(seq.frames()),
        Some((w, h)),
        &cost,
    )
}

#[allow(clippy::too_many_arguments)]
fn evaluate_with_cost<C: AppearanceCost + ?Sized>(
    opts: &EvaluateOptions,
    indices: &[usize],
    n: usize,
    feature_dim: usize,
    scores: &[f64],
    frames: Option<&[Frame]>,
    dims: Option<(usize, usize)>,
    cost: &C,
) -> Result<EvaluateReport> {
    let params = &opts.params;
    if let Some(&last) = indices.last() {
        if last >= n {
            return Err(CliError::Input(format!(
                "selection index {last} out of range (video has {n} frames)"
            )));
        }
    }
    let selection = evaluate_selection(
        indices,
        &[(params.speedup, indices.to_vec())],
        n,
        scores,
        frames,
        params,
        cost,
    )?;
    let uniform = uniform_selection(n, params.speedup);
    let uniform_doc = evaluate_selection(
        &uniform,
        &[(params.speedup, uniform.clone())],
        n,
        scores,
        frames,
        params,
        cost,
    )?;
    let all: Vec<usize> = (0..n).collect();
    let report = EvaluateReport {
        design: design_notes(params),
        video: VideoInfo {
            num_frames: n,
            frame_width: dims.map(|d| d.0),
            frame_height: dims.map(|d| d.1),
            feature_dim,
            num_segments: 1,
        },
        selection,
        uniform: uniform_doc,
        original_instability: instability_of(frames, &all, params.instability_window),
    };
    if let Some(path) = &opts.out {
        let mut json = serde_json::to_vec_pretty(&report)
            .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
        json.push(b'\n');
        write_file(path, &json)?;
    }
    Ok(report)
}

fn snapshot(opts: &RunOptions) -> ConfigSnapshot {
    let p = &opts.params;
    ConfigSnapshot {
        mode: if opts.input.is_some() { "frames" } else { "features" },
        input: opts.input.as_ref().map(|p| p.display().to_string()),
        features: opts.features.as_ref().map(|p| p.display().to_string()),
        detections: opts.detections.as_ref().map(|p| p.display().to_string()),
        flows: opts.flows.as_ref().map(|p| p.display().to_string()),
        speedup: p.speedup,
        spf: p.spf,
        weight_low: p.weight_low,
        weight_high: p.weight_high,
        tau_rel: p.tau_rel,
        color_bins: p.color_bins,
        instability_window: p.instability_window,
        min_segment_len: p.min_segment_len,
        semantic_smooth_width: p.semantic_smooth_width,
        cdc_smooth_width: p.cdc_smooth_width,
        flow_block: p.flow_block,
        flow_radius: p.flow_radius,
        normalize_blocks: p.normalize_blocks,
        frame_width: opts.frame_dims.map(|d| d.0),
        frame_height: opts.frame_dims.map(|d| d.1),
        workers: opts.workers,
        export_frames: opts.export_frames,
    }
}
