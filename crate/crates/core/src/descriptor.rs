//! The 446-dimensional per-frame descriptor and its five blocks.

use alloc::format;
use alloc::vec::Vec;

use crate::detect::Detection;
use crate::error::{CoreError, Result};
use crate::features::{
    FrameDescriptor, APPEARANCE_LEN, CONTENT_LEN, HOF_MAG_BINS, HOF_ORI_BINS, SEQUENCE_LEN,
};
use crate::flow::FlowField;
use crate::frame::Frame;
use crate::math;

/// Upper edge of the magnitude histogram's closed range: the frame diagonal
/// divided by 16. Magnitudes beyond it fall into the open last bin.
pub fn magnitude_cap(frame_width: usize, frame_height: usize) -> f64 {
    math::hypot(frame_width as f64, frame_height as f64) / 16.0
}

/// Histograms of optical-flow magnitude (50 bins over `[0, mag_cap]`, last
/// bin open) and orientation (72 bins of 5° over `[0°, 360°)`).
///
/// Both are L1-normalized. Zero-magnitude vectors carry no orientation, so
/// they are excluded from the orientation histogram; a field with no motion
/// at all yields two all-zero histograms. When some motion exists, the
/// magnitude histogram still counts the zero-magnitude vectors (in bin 0).
pub fn flow_histograms(
    flow: &FlowField,
    mag_cap: f64,
) -> Result<([f32; HOF_MAG_BINS], [f32; HOF_ORI_BINS])> {
    if !mag_cap.is_finite() || mag_cap <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "magnitude cap {mag_cap} must be positive"
        )));
    }
    let mut mag = [0.0f32; HOF_MAG_BINS];
    let mut ori = [0.0f32; HOF_ORI_BINS];
    let mut total = 0usize;
    let mut moving = 0usize;
    for (dx, dy) in flow.vectors() {
        let (dxf, dyf) = (dx as f64, dy as f64);
        let m = math::hypot(dxf, dyf);
        total += 1;
        let mbin = ((m / mag_cap * HOF_MAG_BINS as f64) as usize).min(HOF_MAG_BINS - 1);
        mag[mbin] += 1.0;
        if m > 0.0 {
            moving += 1;
            let mut deg = math::atan2(dyf, dxf).to_degrees();
            if deg < 0.0 {
                deg += 360.0;
            }
            if deg >= 360.0 {
                deg -= 360.0;
            }
            let obin = ((deg / 5.0) as usize).min(HOF_ORI_BINS - 1);
            ori[obin] += 1.0;
        }
    }
    if moving == 0 {
        return Ok(([0.0; HOF_MAG_BINS], [0.0; HOF_ORI_BINS]));
    }
    for b in mag.iter_mut() {
        *b /= total as f32;
    }
    for b in ori.iter_mut() {
        *b /= moving as f32;
    }
    Ok((mag, ori))
}

/// Per-cell HSV statistics over a 4×4 grid: for each cell (row-major) and
/// each channel (H, S, V) the mean, population standard deviation, and
/// skewness — 16 · 3 · 3 = 144 values. Skewness is defined as 0 whenever the
/// standard deviation falls below 1e-8.
pub fn appearance_descriptor(frame: &Frame) -> Result<[f32; APPEARANCE_LEN]> {
    const GRID: usize = 4;
    let (w, h) = (frame.width(), frame.height());
    if w < GRID || h < GRID {
        return Err(CoreError::InvalidArgument(format!(
            "frame {w}x{h} smaller than the {GRID}x{GRID} appearance grid"
        )));
    }
    let hsv = frame.to_hsv();
    let mut out = [0.0f32; APPEARANCE_LEN];
    let (cw, ch) = (w / GRID, h / GRID);
    let mut cell = 0usize;
    let mut values: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for gy in 0..GRID {
        let y0 = gy * ch;
        let y1 = if gy == GRID - 1 { h } else { (gy + 1) * ch };
        for gx in 0..GRID {
            let x0 = gx * cw;
            let x1 = if gx == GRID - 1 { w } else { (gx + 1) * cw };
            for v in values.iter_mut() {
                v.clear();
            }
            for y in y0..y1 {
                for x in x0..x1 {
                    let px = hsv[y * w + x];
                    for (v, p) in values.iter_mut().zip(px) {
                        v.push(p as f64);
                    }
                }
            }
            for (channel, vals) in values.iter().enumerate() {
                let base = cell * 9 + channel * 3;
                out[base] = math::mean(vals) as f32;
                out[base + 1] = math::population_std(vals) as f32;
                out[base + 2] = math::population_skewness(vals, 1e-8) as f32;
            }
            cell += 1;
        }
    }
    Ok(out)
}

/// Raw detection counts per object class.
pub fn content_descriptor(detections: &[Detection]) -> [f32; CONTENT_LEN] {
    let mut out = [0.0f32; CONTENT_LEN];
    for det in detections {
        out[det.class_id] += 1.0;
    }
    out
}

/// One-hot temporal position: index `i mod 100` set to 1.
pub fn sequence_descriptor(i: usize) -> [f32; SEQUENCE_LEN] {
    let mut out = [0.0f32; SEQUENCE_LEN];
    out[i % SEQUENCE_LEN] = 1.0;
    out
}

/// Full descriptor for frame `i`: `[hof_mag | hof_ori | appearance | content
/// | sequence]`, optionally L2-normalizing each block before concatenation.
pub fn describe_frame(
    frame: &Frame,
    flow: &FlowField,
    detections: &[Detection],
    i: usize,
    normalize_blocks: bool,
) -> Result<FrameDescriptor> {
    let cap = magnitude_cap(frame.width(), frame.height());
    let (hof_mag, hof_ori) = flow_histograms(flow, cap)?;
    let mut d = FrameDescriptor {
        hof_mag,
        hof_ori,
        appearance: appearance_descriptor(frame)?,
        content: content_descriptor(detections),
        sequence: sequence_descriptor(i),
    };
    if normalize_blocks {
        l2_normalize(&mut d.hof_mag);
        l2_normalize(&mut d.hof_ori);
        l2_normalize(&mut d.appearance);
        l2_normalize(&mut d.content);
        l2_normalize(&mut d.sequence);
    }
    Ok(d)
}

fn l2_normalize(block: &mut [f32]) {
    let norm2: f64 = block.iter().map(|v| (*v as f64) * (*v as f64)).sum();
    if norm2 > 0.0 {
        let inv = 1.0 / math::sqrt(norm2);
        for v in block.iter_mut() {
            *v = (*v as f64 * inv) as f32;
        }
    }
}
