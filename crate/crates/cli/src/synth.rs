//! Synthetic corpus generation for tests and benchmarks.
//!
//! The feature generators plant a known activation structure: a few "anchor"
//! columns carry amplitudes within one decade of each other plus a shared
//! positive direction component, while the remaining "filler" columns sit at
//! least four decades lower. Relative to the activation threshold of 1e-3,
//! the anchors stay active and the fillers drop out as soon as the locality
//! penalty dominates, so the sampler's count search lands exactly on the
//! planted anchor count.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semff_core::features::FeatureMatrix;
use semff_core::frame::Frame;
use semff_core::semantics::SegmentPlan;
use semff_core::Params;
use serde::Serialize;

use crate::config::FileConfig;
use crate::error::{CliError, Result};
use crate::ingest;
use crate::pipeline;

/// Virtual frame size baked into generated configs; detections are scored
/// against these dimensions.
pub const SYNTH_FRAME_WIDTH: usize = 640;
pub const SYNTH_FRAME_HEIGHT: usize = 480;

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1 = rng.random::<f64>().max(1e-300);
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `k` distinct sorted positions in `[0, n)`.
pub fn pick_positions<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    assert!(k <= n, "cannot pick {k} of {n}");
    let mut all: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    let mut picked = all[..k].to_vec();
    picked.sort_unstable();
    picked
}

/// Amplitude bands used by the feature generators, as powers of ten.
#[derive(Clone, Copy)]
enum Band {
    /// [0.1, 1): survives the activation threshold at any penalty strength.
    Anchor,
    /// [1e-4, 1e-3): straddles the threshold; a 0.1 weight flips it active.
    Mid,
    /// [1e-8, 1e-7): never activates.
    Filler,
}

fn amplitude<R: Rng>(band: Band, rng: &mut R) -> f64 {
    let exp = match band {
        Band::Anchor => -1.0,
        Band::Mid => -4.0,
        Band::Filler => -8.0,
    };
    10f64.powf(exp + rng.random::<f64>())
}

fn banded_columns<R: Rng>(f: usize, bands: &[Band], rng: &mut R) -> FeatureMatrix {
    let n = bands.len();
    let shared = 1.0 / (f as f64).sqrt();
    let mut data = vec![0f32; f * n];
    for (i, &band) in bands.iter().enumerate() {
        let amp = amplitude(band, rng);
        let col: Vec<f64> = (0..f)
            .map(|_| shared + gauss(rng) / (f as f64).sqrt())
            .collect();
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (r, &c) in col.iter().enumerate() {
            data[i * f + r] = (amp * c / norm) as f32;
        }
    }
    FeatureMatrix::new(f, n, data).expect("generated columns are finite")
}

/// Features whose sparse selection lands exactly on `anchors`: anchor
/// columns in the top band, everything else in the filler band.
pub fn planted_features<R: Rng>(f: usize, n: usize, anchors: &[usize], rng: &mut R) -> FeatureMatrix {
    let mut bands = vec![Band::Filler; n];
    for &a in anchors {
        bands[a] = Band::Anchor;
    }
    banded_columns(f, &bands, rng)
}

/// Features with a mid band straddling the activation threshold: `top`
/// columns always activate, `mid` columns activate only when their locality
/// weight drops, the rest never do.
pub fn threshold_band_features<R: Rng>(
    f: usize,
    n: usize,
    top: &[usize],
    mid: &[usize],
    rng: &mut R,
) -> FeatureMatrix {
    let mut bands = vec![Band::Filler; n];
    for &i in mid {
        bands[i] = Band::Mid;
    }
    for &i in top {
        bands[i] = Band::Anchor;
    }
    banded_columns(f, &bands, rng)
}

/// Features that drift linearly along the column index, so the appearance
/// distance between two columns is proportional to their index gap.
pub fn drift_features(f: usize, n: usize, step: f32) -> FeatureMatrix {
    assert!(f >= 2, "drift features need at least 2 rows");
    let mut data = vec![0f32; f * n];
    for i in 0..n {
        data[i * f] = i as f32 * step;
        data[i * f + 1] = 1.0;
    }
    FeatureMatrix::new(f, n, data).expect("drift columns are finite")
}

// ---------------------------------------------------------------------------
// Corpus files

/// What kind of corpus to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Feature file with zero semantics: one segment at the full speed-up.
    Flat,
    /// Feature file plus a contiguous detection burst somewhere inside.
    Burst,
    /// Feature file where every frame carries the same semantic score.
    FullBurst,
    /// A small rendered PNG video with a moving gradient and one detection
    /// burst; exercises the full descriptor path.
    Frames,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Flat => "flat",
            SynthKind::Burst => "burst",
            SynthKind::FullBurst => "full-burst",
            SynthKind::Frames => "frames",
        }
    }
}

/// Requested corpus shape.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub num_frames: usize,
    pub feature_dim: usize,
    pub seed: u64,
    pub speedup: f64,
    pub spf: u32,
}

#[derive(Serialize)]
struct DetectionLine {
    frame: usize,
    class_id: usize,
    confidence: f64,
    bbox: [f64; 4],
}

#[derive(Serialize)]
struct TruthSegment {
    start: usize,
    end: usize,
    kind: &'static str,
    speedup: f64,
    target_frames: usize,
    planted: Vec<usize>,
}

/// Ground truth written next to each corpus, for tests to assert against.
#[derive(Serialize)]
pub struct SynthTruth {
    kind: &'static str,
    seed: u64,
    num_frames: usize,
    feature_dim: usize,
    speedup: f64,
    spf: u32,
    total_target: usize,
    burst: Option<[usize; 2]>,
    segments: Vec<TruthSegment>,
}

/// A generated corpus, in memory.
pub struct SynthCorpus {
    pub features: Option<FeatureMatrix>,
    pub frames: Option<Vec<Frame>>,
    pub detection_lines: Vec<String>,
    pub config: FileConfig,
    pub plan: SegmentPlan,
    pub anchors: Vec<Vec<usize>>,
    pub burst: Option<(usize, usize)>,
    truth: SynthTruth,
}

fn burst_detection(frame: usize, confidence: f64) -> DetectionLine {
    // Centered box of a quarter of the frame area.
    let (w, h) = (SYNTH_FRAME_WIDTH as f64, SYNTH_FRAME_HEIGHT as f64);
    DetectionLine {
        frame,
        class_id: 0,
        confidence,
        bbox: [w / 4.0, h / 4.0, w / 2.0, h / 2.0],
    }
}

fn detection_score(confidence: f64) -> f64 {
    // Centered quarter-area box: centrality 1, area ratio 1/4.
    confidence * 0.25
}

/// Generates a corpus. The planted anchor counts replicate the plan the
/// pipeline will derive from the same detections and parameters, so the
/// sparse pass hits its per-segment budget exactly.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    let params = Params {
        speedup: spec.speedup,
        spf: spec.spf,
        ..Params::default()
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let n = spec.num_frames;
    if n < 2 {
        return Err(CliError::Usage(format!(
            "corpus needs at least 2 frames, asked for {n}"
        )));
    }
    if spec.kind == SynthKind::Frames {
        return generate_frames(spec, &params);
    }
    let f = spec.feature_dim;
    if f < 2 {
        return Err(CliError::Usage(format!(
            "feature dimension must be at least 2, asked for {f}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let confidence = 0.9;
    let (burst, detection_lines): (Option<(usize, usize)>, Vec<String>) = match spec.kind {
        SynthKind::Flat => (None, Vec::new()),
        SynthKind::FullBurst => {
            let lines = (0..n)
                .map(|i| serde_json::to_string(&burst_detection(i, confidence)).unwrap())
                .collect();
            (Some((0, n)), lines)
        }
        SynthKind::Burst => {
            let min_len = (n / 5).max(params.min_segment_len * 2);
            let max_len = (n / 2).max(min_len + 1);
            let len = rng.random_range(min_len..max_len).min(n);
            let start = rng.random_range(0..=(n - len));
            let lines = (start..start + len)
                .map(|i| serde_json::to_string(&burst_detection(i, confidence)).unwrap())
                .collect();
            (Some((start, start + len)), lines)
        }
        SynthKind::Frames => unreachable!(),
    };

    let scores: Vec<f64> = (0..n)
        .map(|i| match burst {
            Some((b0, b1)) if i >= b0 && i < b1 => detection_score(confidence),
            _ => 0.0,
        })
        .collect();
    let plan = pipeline::plan_from_scores(&scores, &params)?;

    let mut anchors: Vec<Vec<usize>> = Vec::with_capacity(plan.segments.len());
    let mut all_anchors = Vec::new();
    for seg in &plan.segments {
        let k = semff_core::select::sparse_target(seg.target_frames, params.spf, seg.len());
        let local = pick_positions(seg.len(), k, &mut rng);
        let global: Vec<usize> = local.iter().map(|p| p + seg.start).collect();
        all_anchors.extend_from_slice(&global);
        anchors.push(global);
    }
    let features = planted_features(f, n, &all_anchors, &mut rng);

    let config = FileConfig {
        speedup: Some(spec.speedup),
        spf: Some(spec.spf),
        frame_width: Some(SYNTH_FRAME_WIDTH),
        frame_height: Some(SYNTH_FRAME_HEIGHT),
        ..FileConfig::default()
    };
    let truth = build_truth(spec, &plan, &anchors, burst, f);
    Ok(SynthCorpus {
        features: Some(features),
        frames: None,
        detection_lines,
        config,
        plan,
        anchors,
        burst,
        truth,
    })
}

fn build_truth(
    spec: &SynthSpec,
    plan: &SegmentPlan,
    anchors: &[Vec<usize>],
    burst: Option<(usize, usize)>,
    feature_dim: usize,
) -> SynthTruth {
    SynthTruth {
        kind: spec.kind.name(),
        seed: spec.seed,
        num_frames: spec.num_frames,
        feature_dim,
        speedup: spec.speedup,
        spf: spec.spf,
        total_target: plan.total_target(),
        burst: burst.map(|(a, b)| [a, b]),
        segments: plan
            .segments
            .iter()
            .zip(anchors)
            .map(|(seg, planted)| TruthSegment {
                start: seg.start,
                end: seg.end,
                kind: match seg.kind {
                    semff_core::semantics::SegmentKind::Semantic => "semantic",
                    semff_core::semantics::SegmentKind::NonSemantic => "non-semantic",
                },
                speedup: seg.speedup,
                target_frames: seg.target_frames,
                planted: planted.clone(),
            })
            .collect(),
    }
}

/// Renders a small video: a static camera over a striped scene, two "pan"
/// intervals where every block shifts 2 px/frame (abrupt motion, by the
/// all-cells-same-sign rule), and a bright detected object in the middle
/// third. Pixels are a pure function of (scene, pan offset, burst flag), and
/// the scene is fixed by the corpus seed.
fn generate_frames(spec: &SynthSpec, params: &Params) -> Result<SynthCorpus> {
    let n = spec.num_frames;
    let (w, h) = (64usize, 48usize);
    let burst = (n / 3, (2 * n) / 3);
    let confidence = 0.9;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Pans sit in the outer thirds, away from the burst.
    let pan_len = (n / 12).clamp(2, 24);
    let pans = [(n / 6, n / 6 + pan_len), (n - n / 6 - pan_len, n - n / 6)];
    let step_px = 2usize;

    // Striped scene, wide enough to cover the largest pan offset.
    let max_offset = step_px * pans.iter().map(|(a, b)| b - a).sum::<usize>();
    let scene_w = w + max_offset;
    let tile = 4usize;
    let palette: Vec<[u8; 3]> = (0..scene_w.div_ceil(tile))
        .map(|_| {
            [
                rng.random_range(0..=255u8),
                rng.random_range(0..=255u8),
                rng.random_range(0..=255u8),
            ]
        })
        .collect();

    let mut frames = Vec::with_capacity(n);
    let mut offset = 0usize;
    for t in 0..n {
        let mut data = vec![0u8; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let stripe = palette[((x + offset) % scene_w) / tile];
                // Mild vertical shading keeps rows distinguishable.
                let shade = 255 - (y * 64 / h) as u16;
                let i = (y * w + x) * 3;
                data[i] = ((stripe[0] as u16 * shade) / 255) as u8;
                data[i + 1] = ((stripe[1] as u16 * shade) / 255) as u8;
                data[i + 2] = ((stripe[2] as u16 * shade) / 255) as u8;
            }
        }
        if t >= burst.0 && t < burst.1 {
            // Bright square while the "object" is visible.
            for y in h / 2 - 6..h / 2 + 6 {
                for x in w / 2 - 8..w / 2 + 8 {
                    let i = (y * w + x) * 3;
                    data[i] = 255;
                    data[i + 1] = 255;
                    data[i + 2] = 255;
                }
            }
        }
        frames.push(Frame::from_rgb8(w, h, data).expect("rendered frame is well-formed"));
        if pans.iter().any(|&(a, b)| t >= a && t < b) {
            offset += step_px;
        }
    }

    let object = |t: usize| DetectionLine {
        frame: t,
        class_id: 0,
        confidence,
        bbox: [
            (w / 2 - 8) as f64,
            (h / 2 - 6) as f64,
            16.0,
            12.0,
        ],
    };
    let detection_lines: Vec<String> = (burst.0..burst.1)
        .map(|t| serde_json::to_string(&object(t)).unwrap())
        .collect();

    // The plan depends on descriptor output only through the scores, which
    // are deterministic; replicate them for the truth file.
    let score = {
        let bbox = semff_core::detect::BBox::new(
            (w / 2 - 8) as f64,
            (h / 2 - 6) as f64,
            16.0,
            12.0,
        )
        .expect("static box is valid");
        let det = semff_core::detect::Detection::new(0, confidence, bbox)
            .expect("static detection is valid");
        semff_core::semantics::semantic_score(std::slice::from_ref(&det), w as f64, h as f64)
    };
    let scores: Vec<f64> = (0..n)
        .map(|t| if t >= burst.0 && t < burst.1 { score } else { 0.0 })
        .collect();
    let plan = pipeline::plan_from_scores(&scores, params)?;

    let config = FileConfig {
        speedup: Some(spec.speedup),
        spf: Some(spec.spf),
        frame_width: Some(w),
        frame_height: Some(h),
        ..FileConfig::default()
    };
    let anchors: Vec<Vec<usize>> = plan.segments.iter().map(|_| Vec::new()).collect();
    let truth = build_truth(spec, &plan, &anchors, Some(burst), 0);
    Ok(SynthCorpus {
        features: None,
        frames: Some(frames),
        detection_lines,
        config,
        plan,
        anchors,
        burst: Some(burst),
        truth,
    })
}

/// Writes a corpus into `dir`: `features.sffm` or `frames/`, plus
/// `detections.jsonl`, `config.toml`, and `truth.json`. Returns the paths
/// written.
pub fn write_corpus(dir: &Path, corpus: &SynthCorpus) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();

    if let Some(features) = &corpus.features {
        let path = dir.join("features.sffm");
        ingest::save_feature_matrix(&path, features)?;
        written.push(path);
    }
    if let Some(frames) = &corpus.frames {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", frames_dir.display())))?;
        for (i, frame) in frames.iter().enumerate() {
            let path = frames_dir.join(format!("{i:06}.png"));
            ingest::save_png(&path, frame)?;
        }
        written.push(frames_dir);
    }

    let det_path = dir.join("detections.jsonl");
    let mut det_text = corpus.detection_lines.join("\n");
    if !det_text.is_empty() {
        det_text.push('\n');
    }
    fs::write(&det_path, det_text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", det_path.display())))?;
    written.push(det_path);

    let config_path = dir.join("config.toml");
    let config_text = toml::to_string(&corpus.config)
        .map_err(|e| CliError::Internal(format!("config serialization failed: {e}")))?;
    fs::write(&config_path, config_text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", config_path.display())))?;
    written.push(config_path);

    let truth_path = dir.join("truth.json");
    let truth_text = serde_json::to_vec_pretty(&corpus.truth)
        .map_err(|e| CliError::Internal(format!("truth serialization failed: {e}")))?;
    fs::write(&truth_path, truth_text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", truth_path.display())))?;
    written.push(truth_path);

    Ok(written)
}
