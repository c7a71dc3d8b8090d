//! Config-file loading and flag/file/default resolution.

use std::fs;
use std::path::{Path, PathBuf};

use semff_core::Params;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Flat key-value config file (TOML, or JSON when the path ends in `.json`).
/// Every field is optional; command-line flags win over file values, file
/// values win over defaults.
#[derive(Debug, Default, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detections: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flows: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spf: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instability_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_segment_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_smooth_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cdc_smooth_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_block: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize_blocks: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Loads a config file; the format is TOML unless the extension is `.json`.
pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Command-line parameter overrides shared by the pipeline subcommands.
#[derive(Debug, Default, Clone)]
pub struct ParamOverrides {
    pub speedup: Option<f64>,
    pub spf: Option<u32>,
    pub weights: Option<(f64, f64)>,
    pub tau: Option<f64>,
}

/// Resolves the algorithm parameters from overrides, file values, and
/// defaults, then validates them.
pub fn resolve_params(over: &ParamOverrides, file: &FileConfig) -> Result<Params> {
    let defaults = Params::default();
    let (flag_low, flag_high) = match over.weights {
        Some((lo, hi)) => (Some(lo), Some(hi)),
        None => (None, None),
    };
    let params = Params {
        speedup: over.speedup.or(file.speedup).unwrap_or(defaults.speedup),
        spf: over.spf.or(file.spf).unwrap_or(defaults.spf),
        weight_low: flag_low.or(file.weight_low).unwrap_or(defaults.weight_low),
        weight_high: flag_high.or(file.weight_high).unwrap_or(defaults.weight_high),
        tau_rel: over.tau.or(file.tau).unwrap_or(defaults.tau_rel),
        color_bins: file.color_bins.unwrap_or(defaults.color_bins),
        instability_window: file.instability_window.unwrap_or(defaults.instability_window),
        min_segment_len: file.min_segment_len.unwrap_or(defaults.min_segment_len),
        semantic_smooth_width: file
            .semantic_smooth_width
            .unwrap_or(defaults.semantic_smooth_width),
        cdc_smooth_width: file.cdc_smooth_width.unwrap_or(defaults.cdc_smooth_width),
        flow_block: file.flow_block.unwrap_or(defaults.flow_block),
        flow_radius: file.flow_radius.unwrap_or(defaults.flow_radius),
        normalize_blocks: file.normalize_blocks.unwrap_or(defaults.normalize_blocks),
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}
