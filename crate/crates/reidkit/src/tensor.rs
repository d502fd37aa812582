//! Dense numeric containers and the elementary vector operations built on them.
//!
//! A [`FeatureMap`] is an `H x W x D` activation grid standing in for a
//! backbone's output; an [`Embedding`] is a flat real vector. All in-memory
//! math runs in `f64`; the 32-bit truncation happens only at file boundaries.

use crate::error::{Error, Result};

/// Norms below this threshold are treated as degenerate in [`l2_normalize`].
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

/// A dense `H x W x D` grid of activations, row-major (row, column, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    depth: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    /// Builds a map from row-major values. Rejects empty dimensions,
    /// mismatched lengths and non-finite entries.
    pub fn new(height: usize, width: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || depth == 0 {
            return Err(Error::shape(format!(
                "feature map dims must be positive, got {height}x{width}x{depth}"
            )));
        }
        if values.len() != height * width * depth {
            return Err(Error::shape(format!(
                "feature map {height}x{width}x{depth} needs {} values, got {}",
                height * width * depth,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape(format!(
                "feature map value at flat index {pos} is not finite"
            )));
        }
        Ok(Self { height, width, depth, values })
    }

    /// All-zero map of the given shape.
    pub fn zeros(height: usize, width: usize, depth: usize) -> Self {
        Self { height, width, depth, values: vec![0.0; height * width * depth] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of spatial locations `H * W`.
    pub fn locations(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width && channel < self.depth);
        self.values[(row * self.width + col) * self.depth + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width && channel < self.depth);
        self.values[(row * self.width + col) * self.depth + channel] = value;
    }

    /// The `D` channel values at one spatial location.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let base = (row * self.width + col) * self.depth;
        &self.values[base..base + self.depth]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// A flat real vector (`f^B`, `f^C` or the fused feature).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::shape("embedding must have dim >= 1"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::shape(format!("embedding value at index {pos} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// Squared Euclidean distance `||a - b||^2`.
    pub fn sq_dist(&self, other: &Embedding) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum()
    }
}

impl std::ops::Index<usize> for Embedding {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

/// Scales `v` to unit Euclidean norm, preserving direction.
///
/// Fails with [`Error::ZeroVector`] when the norm is below
/// [`ZERO_NORM_THRESHOLD`], which signals a degenerate feature upstream.
pub fn l2_normalize(v: &Embedding) -> Result<Embedding> {
    let norm = v.norm();
    if norm < ZERO_NORM_THRESHOLD {
        return Err(Error::ZeroVector { norm });
    }
    let values = v.values.iter().map(|x| x / norm).collect();
    Ok(Embedding { values })
}

/// Per-channel spatial mean: `out_k = mean_{i,j} A[i,j,k]`.
pub fn avg_pool(map: &FeatureMap) -> Embedding {
    let scale = 1.0 / map.locations() as f64;
    let mut out = vec![0.0; map.depth()];
    for row in 0..map.height() {
        for col in 0..map.width() {
            let loc = map.at(row, col);
            for (acc, v) in out.iter_mut().zip(loc) {
                *acc += v;
            }
        }
    }
    for v in &mut out {
        *v *= scale;
    }
    Embedding { values: out }
}
