//! Image containers shared by every stage of the pipeline.
//!
//! All images are row-major with intensities stored as `f64` on the 0–255
//! scale. Quantization to bytes only happens on export.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pgm;

/// Width and height of a pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Self {
        Dims { width, height }
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, loc: PixelLocation) -> bool {
        loc.row < self.height && loc.col < self.width
    }

    pub fn index(&self, loc: PixelLocation) -> usize {
        loc.row * self.width + loc.col
    }

    pub fn location(&self, index: usize) -> PixelLocation {
        PixelLocation::new(index / self.width, index % self.width)
    }

    pub(crate) fn check(&self, loc: PixelLocation) -> Result<usize> {
        if self.contains(loc) {
            Ok(self.index(loc))
        } else {
            Err(Error::OutOfBounds {
                location: loc,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub(crate) fn ensure_same(&self, other: Dims) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left: (self.width, self.height),
                right: (other.width, other.height),
            })
        }
    }

    /// Inclusive row/column bounds of the `(2w+1)²` window centered at `loc`,
    /// clipped to the grid.
    pub fn window(&self, loc: PixelLocation, halfwidth: usize) -> Window {
        Window {
            row0: loc.row.saturating_sub(halfwidth),
            row1: (loc.row + halfwidth).min(self.height - 1),
            col0: loc.col.saturating_sub(halfwidth),
            col1: (loc.col + halfwidth).min(self.width - 1),
        }
    }
}

/// A clipped rectangular window of pixels, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl Window {
    pub fn area(&self) -> usize {
        (self.row1 - self.row0 + 1) * (self.col1 - self.col0 + 1)
    }

    /// Linear indices inside the window in row-major order.
    pub fn indices(self, dims: Dims) -> impl Iterator<Item = usize> {
        (self.row0..=self.row1)
            .flat_map(move |r| (self.col0..=self.col1).map(move |c| r * dims.width + c))
    }
}

/// A pixel position on the scan grid.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct PixelLocation {
    pub row: usize,
    pub col: usize,
}

impl PixelLocation {
    pub const fn new(row: usize, col: usize) -> Self {
        PixelLocation { row, col }
    }

    /// Squared Euclidean distance on the grid. Exact in integers.
    pub fn dist2(&self, other: PixelLocation) -> u64 {
        let dr = self.row.abs_diff(other.row) as u64;
        let dc = self.col.abs_diff(other.col) as u64;
        dr * dr + dc * dc
    }

    pub fn chebyshev(&self, other: PixelLocation) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

impl fmt::Display for PixelLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// The full image the simulated instrument can probe.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthImage {
    dims: Dims,
    values: Vec<f64>,
}

impl GroundTruthImage {
    /// Builds an image from row-major values, which must lie in `[0, 255]`.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dims must be positive, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for a {width}x{height} image, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "intensity {bad} outside [0, 255]"
            )));
        }
        Ok(GroundTruthImage {
            dims: Dims::new(width, height),
            values,
        })
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, loc: PixelLocation) -> f64 {
        self.values[self.dims.index(loc)]
    }

    /// Reads a binary 8-bit graymap.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_image(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        pgm::write_pgm(path, self.dims, &quantize(&self.values))
    }
}

/// Loads a P5 graymap as a ground-truth image.
pub fn load_image(path: impl AsRef<Path>) -> Result<GroundTruthImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, pixels) = pgm::decode(&bytes).map_err(|source| Error::Pgm {
        path: path.to_path_buf(),
        source,
    })?;
    GroundTruthImage::from_bytes(dims.width, dims.height, pixels)
}

/// An estimate of the image computed from a sparse measurement set.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    dims: Dims,
    values: Vec<f64>,
}

impl Reconstruction {
    pub(crate) fn from_parts(dims: Dims, values: Vec<f64>) -> Self {
        debug_assert_eq!(dims.len(), values.len());
        Reconstruction { dims, values }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, loc: PixelLocation) -> f64 {
        self.values[self.dims.index(loc)]
    }

    /// Writes the reconstruction as a P5 graymap, rounding half away from
    /// zero and clamping to `[0, 255]`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        pgm::write_pgm(path, self.dims, &quantize(&self.values))
    }
}

/// Rounds half away from zero and clamps to a byte.
pub fn quantize(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_clipped() {
        let d = Dims::new(10, 8);
        let w = d.window(PixelLocation::new(1, 9), 3);
        assert_eq!(
            w,
            Window {
                row0: 0,
                row1: 4,
                col0: 6,
                col1: 9
            }
        );
        assert_eq!(w.area(), 20);
        assert_eq!(w.indices(d).count(), 20);
    }

    #[test]
    fn rejects_out_of_range_values() {
        assert!(GroundTruthImage::new(2, 1, vec![0.0, 256.0]).is_err());
        assert!(GroundTruthImage::new(2, 1, vec![0.0]).is_err());
        assert!(GroundTruthImage::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        assert_eq!(quantize(&[0.5, 1.49, 254.5, 300.0, -3.0]), vec![1, 1, 255, 255, 0]);
    }
}
