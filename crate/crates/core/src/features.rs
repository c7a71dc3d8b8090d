//! Per-frame descriptors and the column-major feature matrix they form.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Magnitude bins of the optical-flow histogram.
pub const HOF_MAG_BINS: usize = 50;
/// Orientation bins of the optical-flow histogram (5° each).
pub const HOF_ORI_BINS: usize = 72;
/// Appearance block: 4×4 grid × 3 HSV channels × (mean, std, skew).
pub const APPEARANCE_LEN: usize = 144;
/// Content block: one bin per object class.
pub const CONTENT_LEN: usize = crate::detect::NUM_OBJECT_CLASSES;
/// Sequence block: one-hot frame position modulo 100.
pub const SEQUENCE_LEN: usize = 100;
/// Full descriptor length: 50 + 72 + 144 + 80 + 100.
pub const DESCRIPTOR_LEN: usize =
    HOF_MAG_BINS + HOF_ORI_BINS + APPEARANCE_LEN + CONTENT_LEN + SEQUENCE_LEN;

/// One frame's descriptor, kept in blocks so each part stays inspectable.
///
/// The concatenation order is fixed: `[hof_mag | hof_ori | appearance |
/// content | sequence]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDescriptor {
    pub hof_mag: [f32; HOF_MAG_BINS],
    pub hof_ori: [f32; HOF_ORI_BINS],
    pub appearance: [f32; APPEARANCE_LEN],
    pub content: [f32; CONTENT_LEN],
    pub sequence: [f32; SEQUENCE_LEN],
}

impl FrameDescriptor {
    pub fn zeros() -> Self {
        FrameDescriptor {
            hof_mag: [0.0; HOF_MAG_BINS],
            hof_ori: [0.0; HOF_ORI_BINS],
            appearance: [0.0; APPEARANCE_LEN],
            content: [0.0; CONTENT_LEN],
            sequence: [0.0; SEQUENCE_LEN],
        }
    }

    /// Blocks concatenated in the fixed order; always 446 values.
    pub fn concat(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
        out.extend_from_slice(&self.hof_mag);
        out.extend_from_slice(&self.hof_ori);
        out.extend_from_slice(&self.appearance);
        out.extend_from_slice(&self.content);
        out.extend_from_slice(&self.sequence);
        out
    }
}

/// Dense f×n matrix of per-frame features, stored column-major; column `j`
/// is frame `j`'s descriptor. `f` is free so synthetic corpora can use small
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    /// Wraps column-major data; `data.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 {
            return Err(CoreError::EmptyInput("feature dimension 0".into()));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| CoreError::InvalidArgument(format!("{rows}x{cols} overflows")))?;
        if data.len() != expected {
            return Err(CoreError::DimensionMismatch(format!(
                "payload holds {} values, {rows}x{cols} needs {expected}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_columns(columns: &[Vec<f32>]) -> Result<Self> {
        let rows = columns
            .first()
            .map(|c| c.len())
            .ok_or_else(|| CoreError::EmptyInput("no feature columns".into()))?;
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(CoreError::DimensionMismatch(format!(
                    "column {j} has {} rows, expected {rows}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        FeatureMatrix::new(rows, columns.len(), data)
    }

    pub fn from_descriptors(descriptors: &[FrameDescriptor]) -> Result<Self> {
        let cols: Vec<Vec<f32>> = descriptors.iter().map(|d| d.concat()).collect();
        FeatureMatrix::from_columns(&cols)
    }

    /// Feature dimension f.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Frame count n.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[f32] {
        debug_assert!(j < self.cols);
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column-major backing store.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Copy of columns `start..end` as a new matrix (one video segment).
    pub fn slice_columns(&self, start: usize, end: usize) -> Result<FeatureMatrix> {
        if start >= end || end > self.cols {
            return Err(CoreError::InvalidArgument(format!(
                "column range {start}..{end} invalid for n = {}",
                self.cols
            )));
        }
        FeatureMatrix::new(
            self.rows,
            end - start,
            self.data[start * self.rows..end * self.rows].to_vec(),
        )
    }

    /// Euclidean distance between two columns, accumulated in f64.
    pub fn column_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.column(i), self.column(j));
        let sum: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = (*x - *y) as f64;
                d * d
            })
            .sum();
        crate::math::sqrt(sum)
    }
}
