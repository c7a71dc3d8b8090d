//! Cumulative displacement curves and the abrupt-motion weighting they drive.
//!
//! A head turn shows up as every region of the image moving the same way at
//! once: all 25 cumulative curves rise (or fall) together. Frames inside such
//! intervals get the low locality weight so the sampler keeps more of them.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::flow::FlowField;
use crate::math;

/// Cells per side of the grid the displacement curves are computed over.
pub const CDC_GRID: usize = 5;
/// Curve count: one per grid cell.
pub const CDC_CURVES: usize = CDC_GRID * CDC_GRID;

/// Camera-motion summary of one clip.
///
/// `curves[c][i]` is the raw running sum of cell `c`'s mean horizontal
/// displacement up to frame `i`; `derivs` is the central difference of the
/// moving-average-smoothed curves. `abrupt` and `weights` are filled by
/// [`MotionProfile::from_flows`] (or by applying [`abrupt_motion_mask`] and
/// [`weights_from_mask`] manually) and are empty on a bare
/// [`cumulative_displacement_curves`] result.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    pub curves: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub abrupt: Vec<bool>,
    pub weights: Vec<f64>,
}

impl MotionProfile {
    /// Number of frames covered (one more than the flow-pair count).
    pub fn num_frames(&self) -> usize {
        self.curves.first().map_or(0, |c| c.len())
    }

    /// Full profile: curves, derivatives, abruptness flags, and weights.
    pub fn from_flows(
        flows: &[FlowField],
        smooth_width: usize,
        weight_low: f64,
        weight_high: f64,
    ) -> Result<Self> {
        let mut profile = cumulative_displacement_curves(flows, smooth_width)?;
        profile.abrupt = abrupt_motion_mask(&profile.derivs);
        profile.weights = weights_from_mask(&profile.abrupt, weight_low, weight_high);
        Ok(profile)
    }
}

/// Index of the 5×5 group a block coordinate falls into, with the last group
/// absorbing the remainder; grids smaller than 5 map block k to group k.
#[inline]
fn cdc_group(block: usize, blocks: usize) -> usize {
    let per = blocks / CDC_GRID;
    block
        .checked_div(per)
        .map_or(block, |g| g.min(CDC_GRID - 1))
}

/// The 25 cumulative displacement curves of a clip and their derivatives.
///
/// Flow field `t` connects frames `t` and `t+1`; frame `t`'s displacement is
/// taken from it and the final frame reuses the last field, so the curves
/// cover `flows.len() + 1` frames and line up with per-frame weights. Each
/// cell's per-frame value is the mean `dx` over the blocks it covers (cells
/// with no blocks contribute 0). The running sums are smoothed with a
/// centered moving average (window truncated at the borders) before the
/// central difference.
pub fn cumulative_displacement_curves(
    flows: &[FlowField],
    smooth_width: usize,
) -> Result<MotionProfile> {
    if flows.len() < 2 {
        return Err(CoreError::EmptyInput(
            "need at least 2 flow fields for displacement curves".into(),
        ));
    }
    let (cx, cy) = (flows[0].cells_x(), flows[0].cells_y());
    for (t, f) in flows.iter().enumerate() {
        if f.cells_x() != cx || f.cells_y() != cy {
            return Err(CoreError::DimensionMismatch(alloc::format!(
                "flow {t} has grid {}x{}, expected {cx}x{cy}",
                f.cells_x(),
                f.cells_y()
            )));
        }
    }

    let n = flows.len() + 1;
    let mut counts = [0usize; CDC_CURVES];
    for by in 0..cy {
        for bx in 0..cx {
            counts[cdc_group(by, cy) * CDC_GRID + cdc_group(bx, cx)] += 1;
        }
    }
    // Per-frame mean dx of each 5×5 cell.
    let mut per_frame = vec![vec![0.0f64; n]; CDC_CURVES];
    for (t, flow) in flows.iter().enumerate() {
        let mut sums = [0.0f64; CDC_CURVES];
        for by in 0..cy {
            let gy = cdc_group(by, cy);
            for bx in 0..cx {
                sums[gy * CDC_GRID + cdc_group(bx, cx)] += flow.at(bx, by).0 as f64;
            }
        }
        for (cell, sum) in sums.iter().enumerate() {
            if counts[cell] > 0 {
                per_frame[cell][t] = sum / counts[cell] as f64;
            }
        }
    }
    // The last frame has no outgoing flow; reuse the previous displacement.
    for series in per_frame.iter_mut() {
        series[n - 1] = series[n - 2];
    }

    let mut curves = Vec::with_capacity(CDC_CURVES);
    let mut derivs = Vec::with_capacity(CDC_CURVES);
    for series in &per_frame {
        let mut c = Vec::with_capacity(n);
        let mut acc = 0.0f64;
        for v in series {
            acc += v;
            c.push(acc);
        }
        let smoothed = math::moving_average(&c, smooth_width);
        derivs.push(math::central_difference(&smoothed));
        curves.push(c);
    }
    Ok(MotionProfile {
        curves,
        derivs,
        abrupt: Vec::new(),
        weights: Vec::new(),
    })
}

/// True wherever every curve's derivative carries the same strict sign.
pub fn abrupt_motion_mask(derivs: &[Vec<f64>]) -> Vec<bool> {
    let n = derivs.first().map_or(0, |d| d.len());
    (0..n)
        .map(|i| {
            derivs.iter().all(|d| d[i] > 0.0) || derivs.iter().all(|d| d[i] < 0.0)
        })
        .collect()
}

/// Per-frame locality weights from the abruptness mask.
pub fn weights_from_mask(mask: &[bool], weight_low: f64, weight_high: f64) -> Vec<f64> {
    mask.iter()
        .map(|abrupt| if *abrupt { weight_low } else { weight_high })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_flow(cells_x: usize, cells_y: usize, dx: f32) -> FlowField {
        let cells = cells_x * cells_y;
        FlowField::from_vectors(cells_x, cells_y, vec![dx; cells], vec![0.0; cells]).unwrap()
    }

    #[test]
    fn zero_flows_give_flat_curves_and_high_weights() {
        let flows = vec![constant_flow(5, 5, 0.0); 10];
        let p = MotionProfile::from_flows(&flows, 31, 0.1, 1.0).unwrap();
        assert_eq!(p.num_frames(), 11);
        assert!(p.curves.iter().flatten().all(|v| *v == 0.0));
        assert!(p.derivs.iter().flatten().all(|v| *v == 0.0));
        assert!(p.abrupt.iter().all(|a| !*a));
        assert!(p.weights.iter().all(|w| *w == 1.0));
    }

    #[test]
    fn unit_dx_gives_ramp_and_unit_derivative() {
        let flows = vec![constant_flow(10, 10, 1.0); 60];
        let p = cumulative_displacement_curves(&flows, 31).unwrap();
        for curve in &p.curves {
            for (i, v) in curve.iter().enumerate() {
                assert!((v - (i + 1) as f64).abs() < 1e-9, "ramp at {i}: {v}");
            }
        }
        // Smoothing a linear ramp is exact in the interior; the central
        // difference there is 1.
        for d in &p.derivs {
            for (i, v) in d.iter().enumerate().skip(16).take(60 - 32) {
                assert!((v - 1.0).abs() < 1e-9, "deriv at {i}: {v}");
            }
        }
    }

    #[test]
    fn sign_flip_appears_near_the_midpoint() {
        let mut flows = vec![constant_flow(5, 5, 1.0); 40];
        flows.extend(vec![constant_flow(5, 5, -1.0); 40]);
        let p = cumulative_displacement_curves(&flows, 31).unwrap();
        for d in &p.derivs {
            assert!(d[10] > 0.0);
            assert!(d[70] < 0.0);
        }
    }

    #[test]
    fn same_sign_everywhere_marks_abrupt() {
        let flows = vec![constant_flow(10, 10, 2.0); 30];
        let p = MotionProfile::from_flows(&flows, 31, 0.1, 1.0).unwrap();
        assert!(p.abrupt.iter().all(|a| *a));
        assert!(p.weights.iter().all(|w| *w == 0.1));
    }

    #[test]
    fn mixed_signs_are_not_abrupt() {
        // One block column moves left while the rest move right; with a 5x5
        // block grid each block is its own CDC cell, so one curve disagrees.
        let mut dx = vec![1.0f32; 25];
        for row in 0..5 {
            dx[row * 5] = -1.0;
        }
        let f = FlowField::from_vectors(5, 5, dx, vec![0.0; 25]).unwrap();
        let flows = vec![f; 20];
        let p = MotionProfile::from_flows(&flows, 31, 0.1, 1.0).unwrap();
        assert!(p.abrupt.iter().all(|a| !*a));
    }

    #[test]
    fn abruptness_is_scale_invariant() {
        let flows_small = vec![constant_flow(5, 5, 0.25); 25];
        let flows_big = vec![constant_flow(5, 5, 250.0); 25];
        let a = MotionProfile::from_flows(&flows_small, 31, 0.1, 1.0).unwrap();
        let b = MotionProfile::from_flows(&flows_big, 31, 0.1, 1.0).unwrap();
        assert_eq!(a.abrupt, b.abrupt);
    }

    #[test]
    fn tiny_grids_still_produce_curves() {
        // 2x2 block grid: only 4 of the 25 cells are populated.
        let flows = vec![constant_flow(2, 2, 1.0); 10];
        let p = cumulative_displacement_curves(&flows, 31).unwrap();
        let nonzero = p.curves.iter().filter(|c| c.iter().any(|v| *v != 0.0)).count();
        assert_eq!(nonzero, 4);
    }
}
