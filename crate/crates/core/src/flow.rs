//! Block-matching optical flow between consecutive frames.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::frame::{Frame, GrayFrame};

/// Per-block displacement field between two frames, on a regular grid of
/// `cells_x × cells_y` blocks (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    cells_x: usize,
    cells_y: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl FlowField {
    pub fn from_vectors(cells_x: usize, cells_y: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        let cells = cells_x * cells_y;
        if cells == 0 {
            return Err(CoreError::EmptyInput("flow grid with no cells".into()));
        }
        if dx.len() != cells || dy.len() != cells {
            return Err(CoreError::DimensionMismatch(format!(
                "flow grid {cells_x}x{cells_y} needs {cells} vectors, got {}/{}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("flow field"));
        }
        Ok(FlowField {
            cells_x,
            cells_y,
            dx,
            dy,
        })
    }

    pub fn zeros(cells_x: usize, cells_y: usize) -> Result<Self> {
        let cells = cells_x * cells_y;
        FlowField::from_vectors(cells_x, cells_y, vec![0.0; cells], vec![0.0; cells])
    }

    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    /// Displacement of block (bx, by).
    #[inline]
    pub fn at(&self, bx: usize, by: usize) -> (f32, f32) {
        let i = by * self.cells_x + bx;
        (self.dx[i], self.dy[i])
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    /// All (dx, dy) pairs in row-major block order.
    pub fn vectors(&self) -> impl Iterator<Item = (f32, f32)> + '_ {
        self.dx.iter().copied().zip(self.dy.iter().copied())
    }
}

/// Exhaustive block-matching flow from `prev` to `next` on grayscale frames.
///
/// The frame is tiled into complete `block × block` squares; for each tile
/// the displacement within `±radius` pixels minimizing the sum of absolute
/// differences wins. Ties keep the earlier candidate in scan order (dy outer,
/// dx inner, both ascending from −radius), with the zero displacement tried
/// first — so identical frames yield an all-zero field.
pub fn compute_dense_flow_gray(
    prev: &GrayFrame,
    next: &GrayFrame,
    block: usize,
    radius: usize,
) -> Result<FlowField> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(CoreError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    if block < 4 {
        return Err(CoreError::InvalidArgument(format!(
            "block size {block} below minimum 4"
        )));
    }
    let (w, h) = (prev.width(), prev.height());
    let cells_x = w / block;
    let cells_y = h / block;
    if cells_x == 0 || cells_y == 0 {
        return Err(CoreError::InvalidArgument(format!(
            "frame {w}x{h} smaller than one {block}px block"
        )));
    }

    let r = radius as isize;
    let mut dx = Vec::with_capacity(cells_x * cells_y);
    let mut dy = Vec::with_capacity(cells_x * cells_y);
    for by in 0..cells_y {
        for bx in 0..cells_x {
            let x0 = (bx * block) as isize;
            let y0 = (by * block) as isize;
            let mut best = sad(prev, next, x0, y0, 0, 0, block).unwrap_or(f64::INFINITY);
            let (mut best_u, mut best_v) = (0i32, 0i32);
            for v in -r..=r {
                for u in -r..=r {
                    if u == 0 && v == 0 {
                        continue;
                    }
                    if let Some(cost) = sad(prev, next, x0, y0, u, v, block) {
                        if cost < best {
                            best = cost;
                            best_u = u as i32;
                            best_v = v as i32;
                        }
                    }
                }
            }
            dx.push(best_u as f32);
            dy.push(best_v as f32);
        }
    }
    FlowField::from_vectors(cells_x, cells_y, dx, dy)
}

/// RGB convenience wrapper around [`compute_dense_flow_gray`].
pub fn compute_dense_flow(prev: &Frame, next: &Frame, block: usize, radius: usize) -> Result<FlowField> {
    compute_dense_flow_gray(&prev.to_gray(), &next.to_gray(), block, radius)
}

/// SAD between the prev tile at (x0, y0) and the next tile displaced by
/// (u, v); None when the displaced tile leaves the frame.
fn sad(
    prev: &GrayFrame,
    next: &GrayFrame,
    x0: isize,
    y0: isize,
    u: isize,
    v: isize,
    block: usize,
) -> Option<f64> {
    let (w, h) = (next.width() as isize, next.height() as isize);
    let (nx, ny) = (x0 + u, y0 + v);
    if nx < 0 || ny < 0 || nx + block as isize > w || ny + block as isize > h {
        return None;
    }
    let mut total = 0.0f64;
    for row in 0..block {
        let py = y0 as usize + row;
        let qy = ny as usize + row;
        for col in 0..block {
            let a = prev.at(x0 as usize + col, py);
            let b = next.at(nx as usize + col, qy);
            total += (a - b).abs() as f64;
        }
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;

    /// Deterministic speckle pattern with enough texture for matching.
    fn textured(w: usize, h: usize, seed: u32) -> Frame {
        let mut state = seed.wrapping_mul(2654435761).wrapping_add(1);
        let mut data = Vec::with_capacity(w * h * 3);
        for _ in 0..w * h {
            state = state.wrapping_mul(1664525).wrapping_add(1013904223);
            let v = (state >> 24) as u8;
            data.extend_from_slice(&[v, v, v]);
        }
        Frame::from_rgb8(w, h, data).unwrap()
    }

    fn shifted_right(src: &Frame, shift: usize) -> Frame {
        let (w, h) = (src.width(), src.height());
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let px = src.pixel(x.saturating_sub(shift), y);
                data.extend_from_slice(&px);
            }
        }
        Frame::from_rgb8(w, h, data).unwrap()
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = textured(32, 24, 7);
        let flow = compute_dense_flow(&f, &f, 8, 7).unwrap();
        assert_eq!((flow.cells_x(), flow.cells_y()), (4, 3));
        assert!(flow.vectors().all(|(dx, dy)| dx == 0.0 && dy == 0.0));
    }

    #[test]
    fn recovers_planted_integer_shift_on_interior_blocks() {
        let prev = textured(64, 48, 3);
        let next = shifted_right(&prev, 3);
        let flow = compute_dense_flow(&prev, &next, 8, 7).unwrap();
        // Skip the outermost block columns: the left edge is filled rather
        // than shifted, and the rightmost blocks' true match leaves the frame.
        for by in 0..flow.cells_y() {
            for bx in 1..flow.cells_x() - 1 {
                let (dx, dy) = flow.at(bx, by);
                assert_eq!((dx, dy), (3.0, 0.0), "block ({bx},{by})");
            }
        }
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let a = textured(64, 48, 1);
        let b = textured(32, 24, 1);
        assert!(compute_dense_flow(&a, &b, 8, 7).is_err());
    }

    #[test]
    fn grid_dimensions_follow_floor_division() {
        let a = textured(20, 17, 5);
        let flow = compute_dense_flow(&a, &a, 8, 2).unwrap();
        assert_eq!((flow.cells_x(), flow.cells_y()), (2, 2));
    }
}
