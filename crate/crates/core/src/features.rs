//! Local descriptors for unmeasured pixels and their standardization.
//!
//! | index | descriptor |
//! |-------|------------|
//! | f1 | horizontal central gradient of the reconstruction (one-sided at borders) |
//! | f2 | vertical central gradient of the reconstruction (one-sided at borders) |
//! | f3 | population standard deviation of the `L` nearest measured values |
//! | f4 | mean absolute difference between the reconstruction at `s` and those values |
//! | f5 | distance from `s` to the nearest measured pixel |
//! | f6 | fraction of measured pixels in the clipped Chebyshev window of radius `w` |

use crate::error::{Error, Result};
use crate::image::{Dims, PixelLocation, Reconstruction};
use crate::measurement::MeasurementSet;
use crate::recon::{GridIndex, IdwParams, Neighbor};

/// Number of descriptors per location.
pub const FEATURE_COUNT: usize = 6;

/// Smallest standard deviation used when standardizing.
pub const STDDEV_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub location: PixelLocation,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_COUNT], location: PixelLocation) -> Self {
        FeatureVector { values, location }
    }
}

/// Extracts the six descriptors for unmeasured location `s`.
pub fn extract_features(
    recon: &Reconstruction,
    set: &MeasurementSet,
    s: PixelLocation,
    params: &IdwParams,
) -> Result<FeatureVector> {
    FeatureContext::new(recon, set, params)?.features(s)
}

/// Reusable state for extracting features of many locations against one
/// frozen `(reconstruction, measurements)` snapshot.
pub struct FeatureContext<'a> {
    recon: &'a Reconstruction,
    set: &'a MeasurementSet,
    params: IdwParams,
    index: GridIndex,
    density: DensityTable,
}

impl<'a> FeatureContext<'a> {
    pub fn new(recon: &'a Reconstruction, set: &'a MeasurementSet, params: &IdwParams) -> Result<Self> {
        params.validate()?;
        recon.dims().ensure_same(set.dims())?;
        if set.is_empty() {
            return Err(Error::EmptyMeasurementSet);
        }
        Ok(FeatureContext {
            recon,
            set,
            params: *params,
            index: GridIndex::new(set, params.neighbors),
            density: DensityTable::new(set),
        })
    }

    pub(crate) fn with_index(
        recon: &'a Reconstruction,
        set: &'a MeasurementSet,
        params: &IdwParams,
        index: GridIndex,
    ) -> Self {
        FeatureContext {
            recon,
            set,
            params: *params,
            index,
            density: DensityTable::new(set),
        }
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn features(&self, s: PixelLocation) -> Result<FeatureVector> {
        let mut buf = Vec::with_capacity(self.params.neighbors + 1);
        self.features_with(s, &mut buf)
    }

    pub(crate) fn features_with(
        &self,
        s: PixelLocation,
        buf: &mut Vec<Neighbor>,
    ) -> Result<FeatureVector> {
        let dims = self.set.dims();
        dims.check(s)?;
        if self.set.is_measured(s) {
            return Err(Error::AlreadyMeasured(s));
        }
        self.index.nearest_into(s, self.params.neighbors, buf);
        let window = dims.window(s, self.params.window);
        let count = self.density.count(window.row0, window.row1, window.col0, window.col1);
        Ok(compute_features(
            self.recon,
            s,
            buf,
            count,
            window.area(),
        ))
    }
}

/// Evaluates the descriptors from precomputed neighbor and density data.
/// `neighbors` must be ascending and non-empty.
#[inline]
pub(crate) fn compute_features(
    recon: &Reconstruction,
    s: PixelLocation,
    neighbors: &[Neighbor],
    measured_in_window: u32,
    window_area: usize,
) -> FeatureVector {
    let dims = recon.dims();
    let vals = recon.values();
    let here = vals[dims.index(s)];

    let f1 = gradient(vals, dims, s, false);
    let f2 = gradient(vals, dims, s, true);

    let n = neighbors.len() as f64;
    let mean = neighbors.iter().map(|nb| nb.value).sum::<f64>() / n;
    let var = neighbors
        .iter()
        .map(|nb| (nb.value - mean) * (nb.value - mean))
        .sum::<f64>()
        / n;
    let f3 = var.sqrt();
    let f4 = neighbors.iter().map(|nb| (here - nb.value).abs()).sum::<f64>() / n;
    let f5 = neighbors[0].distance();
    let f6 = f64::from(measured_in_window) / window_area as f64;

    FeatureVector::new([f1, f2, f3, f4, f5, f6], s)
}

fn gradient(vals: &[f64], dims: Dims, s: PixelLocation, vertical: bool) -> f64 {
    let (pos, len) = if vertical {
        (s.row, dims.height)
    } else {
        (s.col, dims.width)
    };
    if len < 2 {
        return 0.0;
    }
    let at = |p: usize| {
        if vertical {
            vals[p * dims.width + s.col]
        } else {
            vals[s.row * dims.width + p]
        }
    };
    if pos == 0 {
        (at(1) - at(0)).abs()
    } else if pos == len - 1 {
        (at(pos) - at(pos - 1)).abs()
    } else {
        (at(pos + 1) - at(pos - 1)).abs() / 2.0
    }
}

/// Summed-area table over the measurement mask.
#[derive(Debug, Clone)]
pub(crate) struct DensityTable {
    width: usize,
    sums: Vec<u32>,
}

impl DensityTable {
    pub(crate) fn new(set: &MeasurementSet) -> Self {
        let d = set.dims();
        let w1 = d.width + 1;
        let mut sums = vec![0u32; w1 * (d.height + 1)];
        let mask = set.mask();
        for r in 0..d.height {
            let mut row_sum = 0u32;
            for c in 0..d.width {
                row_sum += u32::from(mask[r * d.width + c]);
                sums[(r + 1) * w1 + c + 1] = sums[r * w1 + c + 1] + row_sum;
            }
        }
        DensityTable { width: w1, sums }
    }

    /// Measured pixels in the inclusive rectangle.
    pub(crate) fn count(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> u32 {
        let w = self.width;
        self.sums[(r1 + 1) * w + c1 + 1] + self.sums[r0 * w + c0]
            - self.sums[r0 * w + c1 + 1]
            - self.sums[(r1 + 1) * w + c0]
    }
}

/// Per-descriptor mean and (floored) population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureStats {
    pub means: [f64; FEATURE_COUNT],
    pub stddevs: [f64; FEATURE_COUNT],
}

impl FeatureStats {
    /// Identity transform: zero means, unit deviations.
    pub fn identity() -> Self {
        FeatureStats {
            means: [0.0; FEATURE_COUNT],
            stddevs: [1.0; FEATURE_COUNT],
        }
    }

    /// Fits statistics with Welford's streaming update.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64; FEATURE_COUNT]>) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut m2 = [0.0; FEATURE_COUNT];
        for row in rows {
            n += 1;
            for j in 0..FEATURE_COUNT {
                let delta = row[j] - mean[j];
                mean[j] += delta / n as f64;
                m2[j] += delta * (row[j] - mean[j]);
            }
        }
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        let mut stddevs = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            stddevs[j] = (m2[j] / n as f64).sqrt().max(STDDEV_FLOOR);
        }
        Ok(FeatureStats {
            means: mean,
            stddevs,
        })
    }

    /// `(v - mean) / stddev` elementwise. Not idempotent.
    pub fn standardize(&self, v: &FeatureVector) -> FeatureVector {
        FeatureVector::new(self.apply(&v.values), v.location)
    }

    #[inline]
    pub fn apply(&self, v: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            out[j] = (v[j] - self.means[j]) / self.stddevs[j];
        }
        out
    }

    /// Standardizes a raw slice, checking its length.
    pub fn apply_slice(&self, v: &[f64]) -> Result<[f64; FEATURE_COUNT]> {
        let arr: &[f64; FEATURE_COUNT] = v.try_into().map_err(|_| Error::FeatureLength {
            expected: FEATURE_COUNT,
            found: v.len(),
        })?;
        Ok(self.apply(arr))
    }
}

/// Standardizes `v` with `stats`.
pub fn standardize(v: &FeatureVector, stats: &FeatureStats) -> FeatureVector {
    stats.standardize(v)
}
