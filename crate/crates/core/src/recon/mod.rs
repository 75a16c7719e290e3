//! Inverse-distance-weighted (IDW) mean interpolation from scattered
//! measurements.
//!
//! Each unmeasured pixel receives `Σ w_j v_j / Σ w_j` over its `L` nearest
//! measured pixels, with `w_j = 1 / d_j^p`. Neighbor lists are always sorted
//! by `(distance, linear index)` and summed in that order, so the result does
//! not depend on the order measurements were recorded in.

mod grid;

pub use grid::{GridIndex, Neighbor};
pub(crate) use grid::insert_bounded;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{PixelLocation, Reconstruction};
use crate::measurement::MeasurementSet;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IdwParams {
    /// Number of nearest measured pixels blended per query (`L`).
    pub neighbors: usize,
    /// Distance exponent `p`.
    pub power: f64,
    /// Half-width `w` of the square update window used by incremental
    /// reconstruction, windowed RD and the local density feature.
    pub window: usize,
}

impl Default for IdwParams {
    fn default() -> Self {
        IdwParams {
            neighbors: 10,
            power: 2.0,
            window: 15,
        }
    }
}

impl IdwParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors < 1 {
            return Err(Error::InvalidParameter("neighbor count must be >= 1".into()));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "IDW power must be positive, got {}",
                self.power
            )));
        }
        if self.window < 1 {
            return Err(Error::InvalidParameter("window half-width must be >= 1".into()));
        }
        Ok(())
    }
}

/// The `min(limit, k)` measured pixels nearest to `q`, ascending by distance
/// with ties going to the lower linear index.
pub fn nearest_measured(
    set: &MeasurementSet,
    q: PixelLocation,
    limit: usize,
) -> Result<Vec<Neighbor>> {
    if set.is_empty() {
        return Err(Error::EmptyMeasurementSet);
    }
    set.dims().check(q)?;
    Ok(GridIndex::new(set, limit).nearest(q, limit))
}

/// Weighted mean of an ascending neighbor list. A zero-distance neighbor
/// short-circuits to its own value, and so does a neighborhood whose values
/// are all equal (keeps constant regions exact).
#[inline]
pub fn idw_value(neighbors: &[Neighbor], power: f64) -> f64 {
    let first = &neighbors[0];
    if first.dist2 == 0 || neighbors.iter().all(|n| n.value == first.value) {
        return first.value;
    }
    let half = power / 2.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for n in neighbors {
        let d = n.dist2 as f64;
        let w = 1.0 / if half == 1.0 { d } else { d.powf(half) };
        num += w * n.value;
        den += w;
    }
    num / den
}

/// Full IDW reconstruction of every pixel.
pub fn reconstruct(set: &MeasurementSet, params: &IdwParams) -> Result<Reconstruction> {
    params.validate()?;
    if set.is_empty() {
        return Err(Error::EmptyMeasurementSet);
    }
    let index = GridIndex::new(set, params.neighbors);
    Ok(reconstruct_with_index(set, &index, params))
}

pub(crate) fn reconstruct_with_index(
    set: &MeasurementSet,
    index: &GridIndex,
    params: &IdwParams,
) -> Reconstruction {
    let dims = set.dims();
    let mut values = vec![0.0; dims.len()];
    values
        .par_chunks_mut(dims.width)
        .enumerate()
        .for_each_init(
            || Vec::with_capacity(params.neighbors + 1),
            |buf, (row, out)| {
                for (col, v) in out.iter_mut().enumerate() {
                    let i = row * dims.width + col;
                    *v = match set.value_at(i) {
                        Some(m) => m,
                        None => {
                            index.nearest_into(PixelLocation::new(row, col), params.neighbors, buf);
                            idw_value(buf, params.power)
                        }
                    };
                }
            },
        );
    Reconstruction::from_parts(dims, values)
}

/// Updates `prev` after `s_new` was appended to `set`, recomputing only the
/// unmeasured pixels inside the `(2w+1)²` window around `s_new`.
pub fn reconstruct_incremental(
    prev: &Reconstruction,
    set: &MeasurementSet,
    s_new: PixelLocation,
    params: &IdwParams,
) -> Result<Reconstruction> {
    params.validate()?;
    set.dims().ensure_same(prev.dims())?;
    match set.latest() {
        Some(m) if m.location == s_new => {}
        _ => return Err(Error::NotLatestMeasurement(s_new)),
    }
    let index = GridIndex::new(set, params.neighbors);
    let mut next = prev.clone();
    let mut buf = Vec::with_capacity(params.neighbors + 1);
    refresh_window(&mut next, set, s_new, params, |loc, _| {
        index.nearest_into(loc, params.neighbors, &mut buf);
        idw_value(&buf, params.power)
    });
    Ok(next)
}

/// Rewrites the window around `center`: measured pixels take their measured
/// value, unmeasured ones are produced by `interpolate(location, index)`.
pub(crate) fn refresh_window(
    recon: &mut Reconstruction,
    set: &MeasurementSet,
    center: PixelLocation,
    params: &IdwParams,
    mut interpolate: impl FnMut(PixelLocation, usize) -> f64,
) {
    let dims = set.dims();
    let window = dims.window(center, params.window);
    let values = recon.values_mut();
    for i in window.indices(dims) {
        values[i] = match set.value_at(i) {
            Some(m) => m,
            None => interpolate(dims.location(i), i),
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{Dims, GroundTruthImage};
    use crate::metrics::distortion;
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};

    fn random_set(d: Dims, k: usize, seed: u64) -> MeasurementSet {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let picks = sample(&mut rng, d.len(), k);
        let vals: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..255.0)).collect();
        MeasurementSet::from_measurements(d, picks.iter().map(|i| d.location(i)).zip(vals)).unwrap()
    }

    #[test]
    fn nearest_three_four_five() {
        let set = MeasurementSet::from_measurements(
            Dims::new(8, 8),
            [(PixelLocation::new(0, 0), 42.0)],
        )
        .unwrap();
        let nn = nearest_measured(&set, PixelLocation::new(3, 4), 10).unwrap();
        assert_eq!(nn.len(), 1);
        assert_eq!(nn[0].index, 0);
        assert_eq!(nn[0].value, 42.0);
        assert_eq!(nn[0].distance(), 5.0);
    }

    #[test]
    fn nearest_at_measured_pixel_is_itself() {
        let set = random_set(Dims::new(10, 10), 20, 1);
        let m = set.entries()[7];
        let nn = nearest_measured(&set, m.location, 5).unwrap();
        assert_eq!(nn[0].dist2, 0);
        assert_eq!(nn[0].value, m.value);
    }

    #[test]
    fn nearest_on_empty_set_fails() {
        let set = MeasurementSet::new(Dims::new(4, 4));
        assert!(matches!(
            nearest_measured(&set, PixelLocation::new(0, 0), 3),
            Err(Error::EmptyMeasurementSet)
        ));
        assert!(reconstruct(&set, &IdwParams::default()).is_err());
    }

    #[test]
    fn nearest_matches_full_sort() {
        let d = Dims::new(32, 32);
        let set = random_set(d, 50, 9);
        for q in (0..d.len()).step_by(7) {
            let q = d.location(q);
            let mut all: Vec<(u64, usize, f64)> = set
                .entries()
                .iter()
                .map(|m| (q.dist2(m.location), d.index(m.location), m.value))
                .collect();
            all.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            let got = nearest_measured(&set, q, 10).unwrap();
            let want: Vec<_> = all[..10].iter().map(|&(d2, i, v)| (d2, i, v)).collect();
            let got: Vec<_> = got.iter().map(|n| (n.dist2, n.index, n.value)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn single_measurement_gives_constant_image() {
        let set = MeasurementSet::from_measurements(
            Dims::new(5, 4),
            [(PixelLocation::new(2, 3), 17.5)],
        )
        .unwrap();
        let r = reconstruct(&set, &IdwParams::default()).unwrap();
        assert!(r.values().iter().all(|&v| v == 17.5));
    }

    #[test]
    fn hand_evaluated_weights() {
        // query (0,1): value 0 at distance 1, value 100 at distance 2
        let set = MeasurementSet::from_measurements(
            Dims::new(4, 1),
            [(PixelLocation::new(0, 0), 0.0), (PixelLocation::new(0, 3), 100.0)],
        )
        .unwrap();
        let params = IdwParams {
            neighbors: 2,
            ..IdwParams::default()
        };
        let r = reconstruct(&set, &params).unwrap();
        assert!((r.values()[1] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn full_sampling_is_exact() {
        let d = Dims::new(6, 5);
        let vals: Vec<f64> = (0..30).map(|i| (i * 7 % 256) as f64).collect();
        let truth = GroundTruthImage::new(6, 5, vals.clone()).unwrap();
        let set =
            MeasurementSet::from_measurements(d, (0..30).rev().map(|i| (d.location(i), vals[i])))
                .unwrap();
        let r = reconstruct(&set, &IdwParams::default()).unwrap();
        assert_eq!(r.values(), truth.values());
        assert_eq!(distortion(&truth, &r).unwrap(), 0.0);
    }

    #[test]
    fn incremental_with_full_window_equals_full() {
        let d = Dims::new(20, 14);
        let params = IdwParams {
            window: 20,
            ..IdwParams::default()
        };
        let mut set = random_set(d, 15, 3);
        let mut recon = reconstruct(&set, &params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let free: Vec<usize> = set.unmeasured().collect();
            let s = d.location(free[rng.random_range(0..free.len())]);
            set.add_measurement(s, rng.random_range(0.0..255.0)).unwrap();
            recon = reconstruct_incremental(&recon, &set, s, &params).unwrap();
            let full = reconstruct(&set, &params).unwrap();
            let a: Vec<u64> = recon.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = full.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn incremental_leaves_outside_window_untouched() {
        let d = Dims::new(64, 64);
        let params = IdwParams::default();
        let mut set = random_set(d, 410, 21);
        let prev = reconstruct(&set, &params).unwrap();
        let s = d.location(set.unmeasured().nth(1000).unwrap());
        set.add_measurement(s, 3.0).unwrap();
        let inc = reconstruct_incremental(&prev, &set, s, &params).unwrap();
        let full = reconstruct(&set, &params).unwrap();
        let mut max_outside = 0.0f64;
        for i in 0..d.len() {
            let loc = d.location(i);
            if loc.chebyshev(s) > params.window {
                assert_eq!(inc.values()[i], prev.values()[i]);
                max_outside = max_outside.max((inc.values()[i] - prev.values()[i]).abs());
            } else {
                assert_eq!(inc.values()[i], full.values()[i]);
            }
        }
        assert_eq!(max_outside, 0.0);
    }

    #[test]
    fn incremental_requires_latest_entry() {
        let d = Dims::new(8, 8);
        let set = random_set(d, 5, 2);
        let prev = reconstruct(&set, &IdwParams::default()).unwrap();
        let not_latest = set.entries()[0].location;
        assert!(matches!(
            reconstruct_incremental(&prev, &set, not_latest, &IdwParams::default()),
            Err(Error::NotLatestMeasurement(_))
        ));
    }

    #[test]
    fn invalid_params() {
        let set = random_set(Dims::new(4, 4), 2, 0);
        for p in [
            IdwParams { neighbors: 0, ..IdwParams::default() },
            IdwParams { power: 0.0, ..IdwParams::default() },
            IdwParams { window: 0, ..IdwParams::default() },
        ] {
            assert!(reconstruct(&set, &p).is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_bounded_and_order_free(seed in 0u64..10_000, k in 1usize..60, l in 1usize..12) {
            let d = Dims::new(13, 11);
            let set = random_set(d, k, seed);
            let params = IdwParams { neighbors: l, ..IdwParams::default() };
            let r = reconstruct(&set, &params).unwrap();
            let lo = set.entries().iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
            let hi = set.entries().iter().map(|m| m.value).fold(f64::NEG_INFINITY, f64::max);
            for m in set.entries() {
                prop_assert_eq!(r.get(m.location), m.value);
            }
            for &v in r.values() {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
            let mut shuffled: Vec<_> = set.entries().iter().map(|m| (m.location, m.value)).collect();
            shuffled.reverse();
            shuffled.rotate_left(k / 3);
            let set2 = MeasurementSet::from_measurements(d, shuffled).unwrap();
            let r2 = reconstruct(&set2, &params).unwrap();
            prop_assert_eq!(r.values(), r2.values());
        }
    }
}
