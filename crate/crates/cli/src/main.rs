//! Command-line entry point: semantic fast-forward frame selection.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semff::config::{self, FileConfig, ParamOverrides};
use semff::error::{CliError, Result};
use semff::pipeline::{self, DescribeOptions, EvaluateOptions, RunOptions, SampleOptions};
use semff::synth::{self, SynthKind, SynthSpec};

#[derive(Parser)]
#[command(
    name = "semff",
    version,
    about = "Semantic fast-forward frame selection for first-person video"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write selection, report, and manifest.
    Run(RunArgs),
    /// Extract per-frame descriptors from images into a feature file.
    Describe(DescribeArgs),
    /// Run the sparse sampler over a feature file as one segment.
    Sample(SampleArgs),
    /// Score an existing selection with the quality metrics.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic test corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonParams {
    /// Overall speed-up factor (original frames per output frame).
    #[arg(long)]
    speedup: Option<f64>,
    /// Oversparsification factor: the sampler first targets 1/SPF of each
    /// segment budget, transition smoothing supplies the rest.
    #[arg(long)]
    spf: Option<u32>,
    /// Locality weights "low,high"; low applies inside abrupt-motion spans.
    #[arg(long, value_parser = parse_weights, value_name = "LOW,HIGH")]
    weights: Option<(f64, f64)>,
    /// Relative activation threshold of the sparse solver.
    #[arg(long)]
    tau: Option<f64>,
    /// Config file (TOML, or JSON with a .json extension); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker-pool size for per-frame stages; default picks automatically.
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_weights(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LOW,HIGH, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad weight {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad weight {hi:?}"))?;
    Ok((lo, hi))
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if w == 0 || h == 0 {
        return Err("frame size must be positive".into());
    }
    Ok((w, h))
}

/// Loads the config file (if any) and resolves the algorithm parameters:
/// flags override file values override defaults.
fn resolve(common: &CommonParams) -> Result<(semff_core::Params, FileConfig)> {
    let file = match &common.config {
        Some(path) => config::load_config(path)?,
        None => FileConfig::default(),
    };
    let over = ParamOverrides {
        speedup: common.speedup,
        spf: common.spf,
        weights: common.weights,
        tau: common.tau,
    };
    let params = config::resolve_params(&over, &file)?;
    Ok((params, file))
}

fn file_dims(file: &FileConfig) -> Option<(usize, usize)> {
    match (file.frame_width, file.frame_height) {
        (Some(w), Some(h)) => Some((w, h)),
        _ => None,
    }
}

fn require(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| CliError::Usage(format!("{what} is required")))
}

// ---------------------------------------------------------------------------
// run

#[derive(Args)]
struct RunArgs {
    /// Directory of numbered frame images (PNG or PPM).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Precomputed feature matrix (binary, or text with a .csv extension).
    #[arg(long, conflicts_with = "input")]
    features: Option<PathBuf>,
    /// Object detections, one JSON record per line.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Optical-flow cache produced by `describe --save-flows`.
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Output directory for selection, report, CSV series, and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frame size WIDTHxHEIGHT, for scoring detections in feature mode.
    #[arg(long, value_parser = parse_dims, value_name = "WxH")]
    frame_size: Option<(usize, usize)>,
    /// Also copy the selected frames into OUT/frames in playback order.
    #[arg(long)]
    export_frames: bool,
    #[command(flatten)]
    common: CommonParams,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (params, file) = resolve(&args.common)?;
    let out = require(args.out.or(file.out.clone()), "an output directory (--out)")?;
    let opts = RunOptions {
        input: args.input.or(file.input.clone()),
        features: args.features.or(file.features.clone()),
        detections: args.detections.or(file.detections.clone()),
        flows: args.flows.or(file.flows.clone()),
        out: Some(out.clone()),
        params,
        frame_dims: args.frame_size.or(file_dims(&file)),
        workers: args.common.workers.or(file.workers),
        export_frames: args.export_frames,
    };
    let result = pipeline::run(&opts)?;
    let p = &result.report.pipeline;
    println!(
        "selected {} of {} frames: speed-up {:.3} (deviation {:+.3}), retention {:.3}",
        p.num_selected,
        result.num_frames,
        p.speedup_achieved,
        p.speedup_deviation,
        p.semantic_retention
    );
    if let Some(i) = p.instability {
        println!("instability {i:.3} (uniform {:.3})", result.report.uniform.instability.unwrap_or(f64::NAN));
    }
    for t in &result.timings {
        println!("  {:<12} {:9.1} ms", t.stage, t.ms);
    }
    println!("wrote {} files under {}", result.written.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// describe

#[derive(Args)]
struct DescribeArgs {
    /// Directory of numbered frame images (PNG or PPM).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Object detections, one JSON record per line.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Optical-flow cache to reuse instead of computing flow.
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Write the computed flow fields here for later reuse.
    #[arg(long)]
    save_flows: Option<PathBuf>,
    /// Feature file to write (binary, or text with a .csv extension).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonParams,
}

fn cmd_describe(args: DescribeArgs) -> Result<()> {
    let (params, file) = resolve(&args.common)?;
    let opts = DescribeOptions {
        input: require(args.input.or(file.input.clone()), "a frame directory (--input)")?,
        detections: args.detections.or(file.detections.clone()),
        flows: args.flows.or(file.flows.clone()),
        save_flows: args.save_flows,
        out: require(args.out.or(file.out.clone()), "a feature-file path (--out)")?,
        params,
        workers: args.common.workers.or(file.workers),
    };
    let (dim, n) = pipeline::describe(&opts)?;
    println!("wrote {dim}x{n} feature matrix to {}", opts.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sample

#[derive(Args)]
struct SampleArgs {
    /// Precomputed feature matrix (binary, or text with a .csv extension).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Number of frames to select.
    #[arg(long)]
    target: usize,
    /// Per-frame locality weights, one per line; default all 1.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Selection file to write; default prints indices to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonParams,
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let (params, file) = resolve(&args.common)?;
    let opts = SampleOptions {
        features: require(args.features.or(file.features.clone()), "a feature file (--features)")?,
        target: args.target,
        tau: params.tau_rel,
        weights: args.weights_file,
        out: args.out.clone(),
    };
    let result = pipeline::sample(&opts)?;
    let summary = format!(
        "selected {} frames at lambda {} (target {}, residual {:.6})",
        result.selected.len(),
        result.lambda,
        if result.target_hit { "hit" } else { "missed" },
        result.residual
    );
    match &args.out {
        Some(path) => {
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            eprintln!("{summary}");
            for i in &result.selected {
                println!("{i}");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of numbered frame images (PNG or PPM).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Precomputed feature matrix (binary, or text with a .csv extension).
    #[arg(long, conflicts_with = "input")]
    features: Option<PathBuf>,
    /// Selection to score: plain text or the JSON export.
    #[arg(long)]
    selection: PathBuf,
    /// Object detections, one JSON record per line.
    #[arg(long)]
    detections: Option<PathBuf>,
    /// Frame size WIDTHxHEIGHT, for scoring detections in feature mode.
    #[arg(long, value_parser = parse_dims, value_name = "WxH")]
    frame_size: Option<(usize, usize)>,
    /// Report file to write; default prints the report to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonParams,
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (params, file) = resolve(&args.common)?;
    let opts = EvaluateOptions {
        input: args.input.or(file.input.clone()),
        features: args.features.or(file.features.clone()),
        selection: args.selection,
        detections: args.detections.or(file.detections.clone()),
        params,
        frame_dims: args.frame_size.or(file_dims(&file)),
        out: args.out.clone(),
    };
    let report = pipeline::evaluate(&opts)?;
    match &args.out {
        Some(path) => println!("wrote {}", path.display()),
        None => {
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Internal(format!("report serialization: {e}")))?;
            println!("{json}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args)]
struct SynthArgs {
    /// Corpus kind: flat, burst, full-burst, or frames.
    #[arg(long, default_value = "flat")]
    kind: String,
    /// Number of frames.
    #[arg(long, default_value_t = 1000)]
    frames: usize,
    /// Feature dimension (feature-file kinds).
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// RNG seed; corpora are fully determined by (kind, sizes, seed).
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Directory to write the corpus into.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonParams,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let (params, file) = resolve(&args.common)?;
    let kind = match args.kind.as_str() {
        "flat" => SynthKind::Flat,
        "burst" => SynthKind::Burst,
        "full-burst" => SynthKind::FullBurst,
        "frames" => SynthKind::Frames,
        other => {
            return Err(CliError::Usage(format!(
                "unknown corpus kind {other:?} (expected flat, burst, full-burst, or frames)"
            )))
        }
    };
    let out = require(args.out.or(file.out.clone()), "an output directory (--out)")?;
    let spec = SynthSpec {
        kind,
        num_frames: args.frames,
        feature_dim: args.dim,
        seed: args.seed,
        speedup: params.speedup,
        spf: params.spf,
    };
    let corpus = synth::generate(&spec)?;
    let written = synth::write_corpus(&out, &corpus)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Describe(args) => cmd_describe(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version print to stdout and exit 0; anything else
            // is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
