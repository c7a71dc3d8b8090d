//! Raw video frames and the pixel-space conversions the descriptors need.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;

/// A single RGB frame, 8 bits per channel, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    /// Wraps an interleaved RGB buffer. `data.len()` must equal `w * h * 3`.
    pub fn from_rgb8(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::EmptyInput(format!(
                "frame dimensions {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|px| px.checked_mul(3))
            .ok_or_else(|| CoreError::InvalidArgument(format!("frame size {width}x{height} overflows")))?;
        if data.len() != expected {
            return Err(CoreError::DimensionMismatch(format!(
                "RGB buffer holds {} bytes, {width}x{height} needs {expected}",
                data.len()
            )));
        }
        Ok(Frame { width, height, data })
    }

    /// Solid-color frame, handy for tests and synthetic clips.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Frame::from_rgb8(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved RGB bytes, row-major.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// RGB triple at (x, y); panics outside the frame.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        debug_assert!(x < self.width && y < self.height);
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// ITU-R 601 luma on the 0..=255 scale: `0.299 R + 0.587 G + 0.114 B`.
    pub fn to_gray(&self) -> GrayFrame {
        let mut data = Vec::with_capacity(self.width * self.height);
        for px in self.data.chunks_exact(3) {
            let y = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
            data.push(y);
        }
        GrayFrame {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// HSV per pixel with every channel on [0, 1] (hue divided by 360).
    pub fn to_hsv(&self) -> Vec<[f32; 3]> {
        self.data.chunks_exact(3).map(|px| rgb_to_hsv(px[0], px[1], px[2])).collect()
    }
}

/// Grayscale frame stored as f32 luma values on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayFrame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }
}

/// An in-memory clip: frames in temporal order, all the same size.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameSequence {
    frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            let (w, h) = (first.width(), first.height());
            for (i, f) in frames.iter().enumerate() {
                if f.width() != w || f.height() != h {
                    return Err(CoreError::DimensionMismatch(format!(
                        "frame {i} is {}x{}, expected {w}x{h}",
                        f.width(),
                        f.height()
                    )));
                }
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn get(&self, i: usize) -> Option<&Frame> {
        self.frames.get(i)
    }

    /// Width/height shared by every frame, if the clip is non-empty.
    pub fn dimensions(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.width(), f.height()))
    }
}

/// RGB (0..=255 each) to HSV with all three channels scaled to [0, 1].
///
/// Achromatic pixels (max == min) get hue 0; saturation is 0 when the pixel
/// is black.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> [f32; 3] {
    let rf = r as f32 / 255.0;
    let gf = g as f32 / 255.0;
    let bf = b as f32 / 255.0;
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;

    let hue_deg = if delta == 0.0 {
        0.0
    } else if max == rf {
        let mut h = 60.0 * ((gf - bf) / delta);
        if h < 0.0 {
            h += 360.0;
        }
        h
    } else if max == gf {
        60.0 * ((bf - rf) / delta) + 120.0
    } else {
        60.0 * ((rf - gf) / delta) + 240.0
    };

    let s = if max == 0.0 { 0.0 } else { delta / max };
    [hue_deg / 360.0, s, max]
}

/// Convenience used by tests: per-pixel absolute difference summed over a
/// grayscale pair (sanity metric, not part of the pipeline).
pub fn gray_abs_diff(a: &GrayFrame, b: &GrayFrame) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(CoreError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| math::abs((x - y) as f64))
        .sum();
    Ok(sum)
}
