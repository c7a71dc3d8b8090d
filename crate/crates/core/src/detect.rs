//! Object detections consumed from an external detector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Number of object classes the content descriptor histograms over.
pub const NUM_OBJECT_CLASSES: usize = 80;

/// Axis-aligned bounding box in pixel coordinates (top-left origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(CoreError::NonFinite("bounding box"));
        }
        if w < 0.0 || h < 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "negative bbox extent {w}x{h}"
            )));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Intersects the box with `[0, width] × [0, height]`.
    pub fn clamped_to(&self, width: f64, height: f64) -> BBox {
        let x0 = self.x.max(0.0).min(width);
        let y0 = self.y.max(0.0).min(height);
        let x1 = (self.x + self.w).max(0.0).min(width);
        let y1 = (self.y + self.h).max(0.0).min(height);
        BBox {
            x: x0,
            y: y0,
            w: (x1 - x0).max(0.0),
            h: (y1 - y0).max(0.0),
        }
    }
}

/// One detector hit on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class_id: usize,
    pub confidence: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(class_id: usize, confidence: f64, bbox: BBox) -> Result<Self> {
        if class_id >= NUM_OBJECT_CLASSES {
            return Err(CoreError::InvalidArgument(format!(
                "class {class_id} out of range (max {})",
                NUM_OBJECT_CLASSES - 1
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CoreError::InvalidArgument(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Detection {
            class_id,
            confidence,
            bbox,
        })
    }
}

/// Detections bucketed per frame; frames without hits hold empty lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    per_frame: Vec<Vec<Detection>>,
}

impl DetectionSet {
    /// `n` empty buckets.
    pub fn empty(n: usize) -> Self {
        DetectionSet {
            per_frame: vec![Vec::new(); n],
        }
    }

    pub fn from_buckets(per_frame: Vec<Vec<Detection>>) -> Self {
        DetectionSet { per_frame }
    }

    /// Adds one detection; `frame` must be within range.
    pub fn push(&mut self, frame: usize, det: Detection) -> Result<()> {
        let n = self.per_frame.len();
        let bucket = self.per_frame.get_mut(frame).ok_or_else(|| {
            CoreError::InvalidArgument(format!("frame {frame} out of range (n = {n})"))
        })?;
        bucket.push(det);
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.per_frame.len()
    }

    pub fn frame(&self, i: usize) -> &[Detection] {
        &self.per_frame[i]
    }

    pub fn buckets(&self) -> &[Vec<Detection>] {
        &self.per_frame
    }
}
