//! Reduction-in-distortion targets and training databases.
//!
//! The reduction in distortion of measuring `s` is the drop in total absolute
//! error between the current reconstruction and the one obtained after `s`
//! is added. [`rd_exact`] recomputes the whole image; [`rd_windowed`] only
//! the `(2w+1)²` window around `s`, which is what database generation uses.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureContext, FeatureVector, FEATURE_COUNT};
use crate::fsutil;
use crate::image::{GroundTruthImage, PixelLocation, Reconstruction};
use crate::measurement::MeasurementSet;
use crate::metrics::distortion;
use crate::recon::{idw_value, insert_bounded, reconstruct, GridIndex, IdwParams, Neighbor};

/// Pixel count for a density fraction, `ceil(density · N)`.
///
/// A tiny tolerance keeps products such as `0.4 · 100` from rounding up to 41.
pub fn budget_pixels(density: f64, n: usize) -> usize {
    let raw = density * n as f64 - 1e-9;
    (raw.ceil().max(0.0) as usize).min(n)
}

fn check_candidate(x: &GroundTruthImage, set: &MeasurementSet, s: PixelLocation) -> Result<()> {
    x.dims().ensure_same(set.dims())?;
    x.dims().check(s)?;
    if set.is_empty() {
        return Err(Error::EmptyMeasurementSet);
    }
    if set.is_measured(s) {
        return Err(Error::AlreadyMeasured(s));
    }
    Ok(())
}

/// Full-image reduction in distortion from measuring `s` at its true value.
///
/// The result can be negative: a new sample may pull some interpolated
/// pixels away from the truth.
pub fn rd_exact(
    x: &GroundTruthImage,
    set: &MeasurementSet,
    s: PixelLocation,
    params: &IdwParams,
) -> Result<f64> {
    check_candidate(x, set, s)?;
    let before = distortion(x, &reconstruct(set, params)?)?;
    let mut next = set.clone();
    next.add_measurement(s, x.get(s))?;
    let after = distortion(x, &reconstruct(&next, params)?)?;
    Ok(before - after)
}

/// Reduction in distortion restricted to the `(2w+1)²` window around `s`.
pub fn rd_windowed(
    x: &GroundTruthImage,
    set: &MeasurementSet,
    s: PixelLocation,
    params: &IdwParams,
    w: usize,
) -> Result<f64> {
    check_candidate(x, set, s)?;
    params.validate()?;
    let dims = set.dims();
    let index = GridIndex::new(set, params.neighbors);
    let truth = x.values();
    let xs = x.get(s);
    let s_idx = dims.index(s);
    let mut buf = Vec::with_capacity(params.neighbors + 1);
    let (mut before, mut after) = (0.0, 0.0);
    for i in dims.window(s, w).indices(dims) {
        let (prev, next) = match set.value_at(i) {
            Some(m) => (m, m),
            None => {
                let q = dims.location(i);
                index.nearest_into(q, params.neighbors, &mut buf);
                let prev = idw_value(&buf, params.power);
                let cand = Neighbor {
                    index: s_idx,
                    dist2: q.dist2(s),
                    value: xs,
                };
                let next = if i == s_idx {
                    xs
                } else if insert_bounded(&mut buf, cand, params.neighbors) {
                    idw_value(&buf, params.power)
                } else {
                    prev
                };
                (prev, next)
            }
        };
        before += (truth[i] - prev).abs();
        after += (truth[i] - next).abs();
    }
    Ok(before - after)
}

/// Windowed RD against a precomputed reconstruction and neighbor index of
/// `set`. The post-measurement neighbors are obtained by merging `s` into
/// each pixel's current neighbor list, which yields exactly the list a fresh
/// index over `set ∪ {s}` would return.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rd_windowed_with(
    x: &GroundTruthImage,
    set: &MeasurementSet,
    recon: &Reconstruction,
    index: &GridIndex,
    s: PixelLocation,
    params: &IdwParams,
    w: usize,
    buf: &mut Vec<Neighbor>,
) -> f64 {
    let dims = set.dims();
    let truth = x.values();
    let prev = recon.values();
    let xs = x.get(s);
    let s_idx = dims.index(s);
    let window = dims.window(s, w);

    let before: f64 = window
        .indices(dims)
        .map(|i| (truth[i] - prev[i]).abs())
        .sum();
    let after: f64 = window
        .indices(dims)
        .map(|i| {
            let v = if i == s_idx {
                xs
            } else if let Some(m) = set.value_at(i) {
                m
            } else {
                let q = dims.location(i);
                index.nearest_into(q, params.neighbors, buf);
                let cand = Neighbor {
                    index: s_idx,
                    dist2: q.dist2(s),
                    value: xs,
                };
                if insert_bounded(buf, cand, params.neighbors) {
                    idw_value(buf, params.power)
                } else {
                    prev[i]
                }
            };
            (truth[i] - v).abs()
        })
        .sum();
    before - after
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingSchedule {
    pub densities: Vec<f64>,
    /// Candidates recorded per image and density (`M`).
    pub samples_per_level: usize,
    /// Half-width of the RD window.
    pub rd_window: usize,
    pub seed: u64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            densities: vec![0.01, 0.05, 0.10, 0.20, 0.30, 0.40],
            samples_per_level: 500,
            rd_window: 15,
            seed: 0,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.densities.is_empty() {
            return Err(Error::InvalidParameter("no training densities".into()));
        }
        if self.densities.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "training densities must lie in (0, 1): {:?}",
                self.densities
            )));
        }
        if self.densities.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(format!(
                "training densities must be strictly increasing: {:?}",
                self.densities
            )));
        }
        if self.samples_per_level == 0 {
            return Err(Error::InvalidParameter("samples per level must be >= 1".into()));
        }
        if self.rd_window == 0 {
            return Err(Error::InvalidParameter("RD window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Origin of one block of rows.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub image_id: String,
    pub density: f64,
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub features: FeatureVector,
    pub rd: f64,
    /// Index into [`TrainingDatabase::provenance`].
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDatabase {
    pub rows: Vec<TrainingRow>,
    pub provenance: Vec<Provenance>,
}

impl TrainingDatabase {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<[f64; FEATURE_COUNT]> {
        self.rows.iter().map(|r| r.features.values).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rd).collect()
    }

    /// CSV with header `image_id,density,f1,…,f6,rd`; reals in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,density,f1,f2,f3,f4,f5,f6,rd\n");
        for row in &self.rows {
            let p = &self.provenance[row.block];
            let _ = write!(out, "{},{}", p.image_id, p.density);
            for v in row.features.values {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", row.rd);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fsutil::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Seed of block `(image, level)` derived from the schedule seed.
pub fn block_seed(seed: u64, image: usize, level: usize) -> u64 {
    let mut z = seed
        ^ (image as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (level as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Builds the training database. `images` pairs an identifier with each
/// image. Blocks run in parallel; row order is by image, density, then
/// candidate draw order.
pub fn generate_training_db(
    images: &[(String, GroundTruthImage)],
    schedule: &TrainingSchedule,
    idw: &IdwParams,
) -> Result<TrainingDatabase> {
    schedule.validate()?;
    idw.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidParameter("no training images".into()));
    }
    let mut jobs = Vec::new();
    for (ii, (id, img)) in images.iter().enumerate() {
        let n = img.dims().len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "training image {id} has a single pixel"
            )));
        }
        for (li, &d) in schedule.densities.iter().enumerate() {
            let k = budget_pixels(d, n);
            if k < 1 {
                return Err(Error::InvalidParameter(format!(
                    "density {d} selects no pixel of the {n}-pixel image {id}"
                )));
            }
            if k >= n {
                return Err(Error::InvalidParameter(format!(
                    "density {d} leaves no candidate in the {n}-pixel image {id}"
                )));
            }
            jobs.push((ii, li, d, k));
        }
    }
    let blocks: Vec<(Provenance, Vec<(FeatureVector, f64)>)> = jobs
        .par_iter()
        .map(|&(ii, li, d, k)| {
            let (id, img) = &images[ii];
            let seed = block_seed(schedule.seed, ii, li);
            let rows = generate_block(img, k, seed, schedule, idw);
            let prov = Provenance {
                image_id: id.clone(),
                density: d,
                seed,
                rows: rows.len(),
            };
            (prov, rows)
        })
        .collect();
    let mut db = TrainingDatabase {
        rows: Vec::new(),
        provenance: Vec::with_capacity(blocks.len()),
    };
    for (b, (prov, rows)) in blocks.into_iter().enumerate() {
        db.provenance.push(prov);
        db.rows.extend(rows.into_iter().map(|(features, rd)| TrainingRow {
            features,
            rd,
            block: b,
        }));
    }
    Ok(db)
}

fn generate_block(
    img: &GroundTruthImage,
    k: usize,
    seed: u64,
    schedule: &TrainingSchedule,
    idw: &IdwParams,
) -> Vec<(FeatureVector, f64)> {
    let dims = img.dims();
    let n = dims.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, n, k).into_vec();
    picks.sort_unstable();
    let set = MeasurementSet::from_measurements(
        dims,
        picks.iter().map(|&i| (dims.location(i), img.values()[i])),
    )
    .expect("sampled indices are distinct and in bounds");
    let unmeasured: Vec<usize> = set.unmeasured().collect();
    let m = schedule.samples_per_level.min(unmeasured.len());
    let candidates = sample(&mut rng, unmeasured.len(), m);

    let index = GridIndex::new(&set, idw.neighbors);
    let recon = crate::recon::reconstruct_with_index(&set, &index, idw);
    let ctx = FeatureContext::with_index(&recon, &set, idw, index);
    let mut buf = Vec::with_capacity(idw.neighbors + 1);
    candidates
        .iter()
        .map(|c| {
            let s = dims.location(unmeasured[c]);
            let fv = ctx
                .features_with(s, &mut buf)
                .expect("candidate is unmeasured");
            let rd = rd_windowed_with(img, &set, &recon, ctx.index(), s, idw, schedule.rd_window, &mut buf);
            (fv, rd)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Dims;
    use crate::metrics::spearman;
    use rand::Rng;

    fn random_image(d: Dims, seed: u64) -> GroundTruthImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..d.len()).map(|_| rng.random_range(0..=255) as f64).collect();
        GroundTruthImage::new(d.width, d.height, v).unwrap()
    }

    fn random_set(img: &GroundTruthImage, k: usize, seed: u64) -> MeasurementSet {
        let d = img.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = sample(&mut rng, d.len(), k);
        MeasurementSet::from_measurements(d, picks.iter().map(|i| (d.location(i), img.values()[i])))
            .unwrap()
    }

    /// Independent before/after pipeline: brute-force neighbors, plain loops.
    fn rd_oracle(x: &GroundTruthImage, set: &MeasurementSet, s: PixelLocation, l: usize) -> f64 {
        let d = x.dims();
        let recon = |entries: &[(usize, f64)]| -> Vec<f64> {
            (0..d.len())
                .map(|i| {
                    if let Some(&(_, v)) = entries.iter().find(|e| e.0 == i) {
                        return v;
                    }
                    let q = d.location(i);
                    let mut nb: Vec<Neighbor> = entries
                        .iter()
                        .map(|&(j, v)| Neighbor {
                            index: j,
                            dist2: q.dist2(d.location(j)),
                            value: v,
                        })
                        .collect();
                    nb.sort_by_key(|n| (n.dist2, n.index));
                    nb.truncate(l);
                    idw_value(&nb, 2.0)
                })
                .collect()
        };
        let mut entries: Vec<(usize, f64)> = set
            .entries()
            .iter()
            .map(|m| (d.index(m.location), m.value))
            .collect();
        let dist = |r: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..d.len() {
                acc += (x.values()[i] - r[i]).abs();
            }
            acc
        };
        let before = dist(&recon(&entries));
        entries.push((d.index(s), x.get(s)));
        before - dist(&recon(&entries))
    }

    #[test]
    fn constant_image_has_zero_rd() {
        let img = GroundTruthImage::new(12, 9, vec![77.0; 108]).unwrap();
        let set = random_set(&img, 10, 1);
        let p = IdwParams::default();
        for i in set.unmeasured() {
            let s = img.dims().location(i);
            assert_eq!(rd_exact(&img, &set, s, &p).unwrap(), 0.0);
            assert_eq!(rd_windowed(&img, &set, s, &p, 2).unwrap(), 0.0);
        }
    }

    #[test]
    fn three_pixel_line() {
        let img = GroundTruthImage::new(3, 1, vec![0.0, 100.0, 0.0]).unwrap();
        let set = MeasurementSet::from_measurements(
            img.dims(),
            [(PixelLocation::new(0, 0), 0.0), (PixelLocation::new(0, 2), 0.0)],
        )
        .unwrap();
        // both ends measured at 0: middle interpolates to 0, D = 100
        let rd = rd_exact(&img, &set, PixelLocation::new(0, 1), &IdwParams::default()).unwrap();
        assert_eq!(rd, 100.0);
    }

    #[test]
    fn three_pixel_line_with_distinct_ends() {
        // ends measured as 0 and 100: middle interpolates to 50, D = 50
        let img = GroundTruthImage::new(3, 1, vec![0.0, 100.0, 100.0]).unwrap();
        let set = MeasurementSet::from_measurements(
            img.dims(),
            [(PixelLocation::new(0, 0), 0.0), (PixelLocation::new(0, 2), 100.0)],
        )
        .unwrap();
        let rd = rd_exact(&img, &set, PixelLocation::new(0, 1), &IdwParams::default()).unwrap();
        assert_eq!(rd, 50.0);
    }

    #[test]
    fn exact_matches_independent_pipeline() {
        let img = random_image(Dims::new(16, 16), 5);
        let set = random_set(&img, 26, 6);
        let p = IdwParams::default();
        for i in set.unmeasured() {
            let s = img.dims().location(i);
            assert_eq!(rd_exact(&img, &set, s, &p).unwrap(), rd_oracle(&img, &set, s, 10));
        }
    }

    #[test]
    fn full_window_equals_exact() {
        let img = random_image(Dims::new(20, 13), 8);
        let set = random_set(&img, 30, 9);
        let p = IdwParams::default();
        for i in set.unmeasured() {
            let s = img.dims().location(i);
            let exact = rd_exact(&img, &set, s, &p).unwrap();
            assert_eq!(rd_windowed(&img, &set, s, &p, 20).unwrap(), exact);
        }
    }

    #[test]
    fn windowed_converges_with_window() {
        let img = random_image(Dims::new(24, 24), 2);
        let set = random_set(&img, 40, 3);
        let p = IdwParams::default();
        let s = img.dims().location(set.unmeasured().nth(100).unwrap());
        let exact = rd_exact(&img, &set, s, &p).unwrap();
        let errs: Vec<f64> = [1, 4, 24]
            .iter()
            .map(|&w| (rd_windowed(&img, &set, s, &p, w).unwrap() - exact).abs())
            .collect();
        assert_eq!(errs[2], 0.0);
        assert!(errs[0] >= errs[2]);
    }

    #[test]
    fn windowed_ranks_like_exact() {
        let img = crate::synth::blobs(64, 64, 4);
        let set = random_set(&img, 410, 5);
        let p = IdwParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let un: Vec<usize> = set.unmeasured().collect();
        let picks = sample(&mut rng, un.len(), 100);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for c in picks.iter() {
            let s = img.dims().location(un[c]);
            a.push(rd_windowed(&img, &set, s, &p, 15).unwrap());
            b.push(rd_exact(&img, &set, s, &p).unwrap());
        }
        let rho = spearman(&a, &b);
        assert!(rho >= 0.95, "{rho}");
    }

    #[test]
    fn measured_candidate_is_rejected() {
        let img = random_image(Dims::new(4, 4), 1);
        let set = random_set(&img, 3, 1);
        let s = set.entries()[0].location;
        assert!(matches!(
            rd_exact(&img, &set, s, &IdwParams::default()),
            Err(Error::AlreadyMeasured(_))
        ));
    }

    #[test]
    fn budget_rounding() {
        assert_eq!(budget_pixels(0.4, 100), 40);
        assert_eq!(budget_pixels(0.01, 4096), 41);
        assert_eq!(budget_pixels(1.0, 64), 64);
        assert_eq!(budget_pixels(0.1, 128 * 128), 1639);
        assert_eq!(budget_pixels(0.001, 10), 1);
    }

    #[test]
    fn block_row_count_and_provenance() {
        let img = random_image(Dims::new(16, 16), 3);
        let sched = TrainingSchedule {
            densities: vec![0.1],
            samples_per_level: 10,
            rd_window: 5,
            seed: 4,
        };
        let db = generate_training_db(&[("a".into(), img)], &sched, &IdwParams::default()).unwrap();
        assert_eq!(db.len(), 10);
        assert_eq!(db.provenance.len(), 1);
        assert_eq!(db.provenance[0].image_id, "a");
        assert_eq!(db.provenance[0].density, 0.1);
        assert_eq!(db.provenance[0].rows, 10);
        assert!(db.rows.iter().all(|r| r.block == 0 && r.rd.is_finite()));
    }

    #[test]
    fn constant_image_trains_zero_linear_model() {
        let img = GroundTruthImage::new(16, 16, vec![30.0; 256]).unwrap();
        let sched = TrainingSchedule {
            densities: vec![0.1, 0.3],
            samples_per_level: 20,
            rd_window: 5,
            seed: 0,
        };
        let db = generate_training_db(&[("c".into(), img)], &sched, &IdwParams::default()).unwrap();
        assert!(db.rows.iter().all(|r| r.rd == 0.0));
        let (model, _) = crate::regress::train_model(
            &db.features(),
            &db.targets(),
            &crate::regress::RegressorSpec::Lsq,
            IdwParams::default(),
        )
        .unwrap();
        match model.regressor {
            crate::regress::Regressor::Lsq(m) => assert_eq!(m.theta, [0.0; 6]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let imgs = vec![
            ("x".to_string(), random_image(Dims::new(20, 20), 1)),
            ("y".to_string(), random_image(Dims::new(12, 30), 2)),
        ];
        let sched = TrainingSchedule {
            samples_per_level: 15,
            seed: 99,
            ..TrainingSchedule::default()
        };
        let a = generate_training_db(&imgs, &sched, &IdwParams::default()).unwrap();
        let b = generate_training_db(&imgs, &sched, &IdwParams::default()).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.provenance.len(), 12);
        assert!(a.to_csv().starts_with("image_id,density,f1,f2,f3,f4,f5,f6,rd\n"));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let one = GroundTruthImage::new(1, 1, vec![3.0]).unwrap();
        let s = TrainingSchedule::default();
        assert!(generate_training_db(&[("p".into(), one)], &s, &IdwParams::default()).is_err());
        let small = random_image(Dims::new(5, 5), 0);
        let s = TrainingSchedule {
            densities: vec![0.01],
            ..TrainingSchedule::default()
        };
        // ceil(0.01·25) = 1 is fine
        assert!(generate_training_db(&[("q".into(), small)], &s, &IdwParams::default()).is_ok());
        let bad = TrainingSchedule {
            densities: vec![0.2, 0.1],
            ..TrainingSchedule::default()
        };
        assert!(bad.validate().is_err());
        assert!(generate_training_db(&[], &TrainingSchedule::default(), &IdwParams::default()).is_err());
    }
}
