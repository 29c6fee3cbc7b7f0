//! Discrete unit discovery and sequence codecs.
//!
//! Frame-level feature vectors are clustered with k-means; the centroids form a
//! [`Codebook`] that maps every frame to the index of its nearest centroid. The
//! resulting frame-rate [`UnitSequence`] can be collapsed into a
//! [`ReducedUnitSequence`] (distinct consecutive units plus their run lengths)
//! and expanded back without loss.

mod format;
mod kmeans;
mod runs;

pub use format::{
    parse_codebook, parse_reduced_file, parse_unit_file, write_codebook, write_reduced_file, write_unit_file,
};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansFit};
pub use runs::{expand, reduce};

use crate::error::{Error, Result};

/// Default analysis hop of the unit stream, in seconds.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.020;

/// A sequence of equal-dimension feature vectors sampled every `frame_period` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    data: Vec<f64>,
    dim: usize,
    frame_period: f64,
}

impl FrameFeatures {
    pub fn new(frames: Vec<Vec<f64>>, frame_period: f64) -> Result<Self> {
        let dim = frames.first().map_or(0, Vec::len);
        if frames.is_empty() {
            // An empty sequence still needs a dimension; callers use `from_flat`.
            return Err(Error::invalid("frame features need at least one frame"));
        }
        let mut data = Vec::with_capacity(frames.len() * dim);
        for frame in &frames {
            if frame.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: frame.len(),
                });
            }
            data.extend_from_slice(frame);
        }
        Self::from_flat(data, dim, frame_period)
    }

    /// Builds features from row-major storage of `data.len() / dim` frames.
    pub fn from_flat(data: Vec<f64>, dim: usize, frame_period: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not divide into frames of dimension {dim}",
                data.len()
            )));
        }
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::invalid("frame period must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frame features must be finite"));
        }
        Ok(Self {
            data,
            dim,
            frame_period,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// K centroids of dimension D. No two centroids are identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
    dim: usize,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centroids.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(centroids.len() * dim);
        for c in &centroids {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            flat.extend_from_slice(c);
        }
        Self::from_flat(flat, dim)
    }

    pub fn from_flat(centroids: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::invalid("codebook needs K >= 1 centroids of dimension D >= 1"));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook centroids must be finite"));
        }
        let book = Self { centroids, dim };
        for i in 0..book.k() {
            for j in 0..i {
                if book.centroid(i) == book.centroid(j) {
                    return Err(Error::invalid(format!("centroids {j} and {i} are identical")));
                }
            }
        }
        Ok(book)
    }

    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, index: usize) -> &[f64] {
        &self.centroids[index * self.dim..(index + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centroids.chunks_exact(self.dim)
    }

    /// Index of the nearest centroid and its squared distance. Ties go to the
    /// lowest index.
    pub fn nearest(&self, frame: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centroids().enumerate() {
            let d = squared_distance(frame, c);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    /// Maps every frame to its nearest centroid.
    pub fn quantize(&self, features: &FrameFeatures) -> Result<UnitSequence> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: features.dim(),
            });
        }
        let units = features.frames().map(|f| self.nearest(f).0 as u32).collect();
        Ok(UnitSequence {
            units,
            frame_period: features.frame_period(),
        })
    }
}

/// Free-function form of [`Codebook::quantize`].
pub fn quantize(features: &FrameFeatures, codebook: &Codebook) -> Result<UnitSequence> {
    codebook.quantize(features)
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Frame-rate sequence of cluster indices.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSequence {
    pub units: Vec<u32>,
    pub frame_period: f64,
}

impl UnitSequence {
    pub fn new(units: Vec<u32>, frame_period: f64) -> Self {
        Self { units, frame_period }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Checks every unit against a codebook size.
    pub fn check_range(&self, k: usize) -> Result<()> {
        check_units(&self.units, k)
    }
}

pub(crate) fn check_units(units: &[u32], k: usize) -> Result<()> {
    match units.iter().find(|&&u| u as usize >= k) {
        Some(&unit) => Err(Error::UnitOutOfRange { unit, k }),
        None => Ok(()),
    }
}

/// Run-length form of a unit sequence: no two consecutive units are equal and
/// every duration is at least one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReducedUnitSequence {
    units: Vec<u32>,
    durations: Vec<u32>,
}

impl ReducedUnitSequence {
    pub fn new(units: Vec<u32>, durations: Vec<u32>) -> Result<Self> {
        if units.len() != durations.len() {
            return Err(Error::invalid(format!(
                "{} units but {} durations",
                units.len(),
                durations.len()
            )));
        }
        if let Some((index, &value)) = durations.iter().enumerate().find(|(_, &d)| d < 1) {
            return Err(Error::InvalidDuration { index, value });
        }
        if let Some(i) = units.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "units {i} and {} repeat value {}",
                i + 1,
                units[i]
            )));
        }
        Ok(Self { units, durations })
    }

    /// Reduced units whose durations are not yet known (all set to one frame).
    pub fn from_units(units: Vec<u32>) -> Result<Self> {
        let durations = vec![1; units.len()];
        Self::new(units, durations)
    }

    pub fn units(&self) -> &[u32] {
        &self.units
    }

    pub fn durations(&self) -> &[u32] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Total number of frames after expansion.
    pub fn total_frames(&self) -> usize {
        self.durations.iter().map(|&d| d as usize).sum()
    }

    /// Replaces the durations, e.g. with predicted values.
    pub fn with_durations(&self, durations: Vec<u32>) -> Result<Self> {
        Self::new(self.units.clone(), durations)
    }
}
