//! Candidate scoring.
//!
//! [`score_all`] extracts descriptors for every unmeasured pixel from scratch.
//! [`CachedScorer`] keeps each pixel's neighbor list, density count and score
//! between steps and, after a new measurement, re-scores only the pixels
//! whose descriptors can have changed: those within `w + 1` of the new
//! sample and those whose neighbor list now contains it. Both paths feed the
//! same descriptor routine with the same inputs, so their scores agree
//! bit for bit.

use rayon::prelude::*;

use crate::features::{compute_features, DensityTable, FeatureContext, FEATURE_COUNT};
use crate::image::{Dims, Reconstruction};
use crate::measurement::MeasurementSet;
use crate::recon::{idw_value, refresh_window, GridIndex, IdwParams, Neighbor};
use crate::regress::ErdPredictor;

const CHUNK: usize = 256;

/// Scores `pixels` in chunks, optionally across threads. `describe` fills
/// the raw descriptor of one pixel.
pub(crate) fn score_pixels<P, F>(
    model: &P,
    pixels: &[usize],
    parallel: bool,
    describe: F,
) -> Vec<f64>
where
    P: ErdPredictor + ?Sized,
    F: Fn(usize, &mut Vec<Neighbor>) -> [f64; FEATURE_COUNT] + Sync,
{
    let mut out = vec![0.0; pixels.len()];
    let run = |(idx, out): (&[usize], &mut [f64])| {
        let mut buf = Vec::new();
        let feats: Vec<[f64; FEATURE_COUNT]> = idx.iter().map(|&i| describe(i, &mut buf)).collect();
        model.predict_batch(&feats, out);
    };
    if parallel {
        pixels
            .par_chunks(CHUNK)
            .zip(out.par_chunks_mut(CHUNK))
            .for_each(run);
    } else {
        pixels.chunks(CHUNK).zip(out.chunks_mut(CHUNK)).for_each(run);
    }
    out
}

/// Index of the maximum score, lowest index on ties. NaN never wins.
pub(crate) fn argmax(candidates: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in candidates {
        if s.is_nan() {
            if best.is_none() {
                best = Some((i, s));
            }
            continue;
        }
        match best {
            Some((_, b)) if !b.is_nan() && s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best
}

/// Scores of every unmeasured pixel, recomputed from scratch.
pub(crate) fn score_all<P: ErdPredictor + ?Sized>(
    model: &P,
    recon: &Reconstruction,
    set: &MeasurementSet,
    idw: &IdwParams,
    parallel: bool,
) -> crate::error::Result<(Vec<usize>, Vec<f64>)> {
    let ctx = FeatureContext::new(recon, set, idw)?;
    let dims = set.dims();
    let pixels: Vec<usize> = set.unmeasured().collect();
    let scores = score_pixels(model, &pixels, parallel, |i, buf| {
        ctx.features_with(dims.location(i), buf)
            .expect("pixel is unmeasured")
            .values
    });
    Ok((pixels, scores))
}

pub(crate) struct CachedScorer {
    dims: Dims,
    idw: IdwParams,
    /// `limit` neighbor slots per pixel.
    knn: Vec<Neighbor>,
    knn_len: Vec<u16>,
    limit: usize,
    counts: Vec<u32>,
    scores: Vec<f64>,
    stamp: Vec<u32>,
    epoch: u32,
    parallel: bool,
}

impl CachedScorer {
    pub(crate) fn new<P: ErdPredictor + ?Sized>(
        model: &P,
        recon: &Reconstruction,
        set: &MeasurementSet,
        idw: &IdwParams,
        parallel: bool,
    ) -> Self {
        let dims = set.dims();
        let limit = idw.neighbors.min(set.dims().len());
        let n = dims.len();
        let index = GridIndex::new(set, idw.neighbors);
        let density = DensityTable::new(set);
        let mut knn = vec![
            Neighbor {
                index: 0,
                dist2: 0,
                value: 0.0
            };
            n * limit
        ];
        let mut knn_len = vec![0u16; n];
        let mut counts = vec![0u32; n];
        let mut buf = Vec::with_capacity(limit + 1);
        for i in set.unmeasured() {
            let q = dims.location(i);
            index.nearest_into(q, limit, &mut buf);
            knn[i * limit..i * limit + buf.len()].copy_from_slice(&buf);
            knn_len[i] = buf.len() as u16;
            let w = dims.window(q, idw.window);
            counts[i] = density.count(w.row0, w.row1, w.col0, w.col1);
        }
        let mut scorer = CachedScorer {
            dims,
            idw: *idw,
            knn,
            knn_len,
            limit,
            counts,
            scores: vec![f64::NEG_INFINITY; n],
            stamp: vec![0; n],
            epoch: 0,
            parallel,
        };
        let pixels: Vec<usize> = set.unmeasured().collect();
        scorer.rescore(model, recon, &pixels);
        scorer
    }

    fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.knn[i * self.limit..i * self.limit + self.knn_len[i] as usize]
    }

    fn rescore<P: ErdPredictor + ?Sized>(&mut self, model: &P, recon: &Reconstruction, pixels: &[usize]) {
        let scores = {
            let this = &*self;
            score_pixels(model, pixels, this.parallel, |i, _| {
                let q = this.dims.location(i);
                let area = this.dims.window(q, this.idw.window).area();
                compute_features(recon, q, this.neighbors(i), this.counts[i], area).values
            })
        };
        for (&i, s) in pixels.iter().zip(scores) {
            self.scores[i] = s;
        }
    }

    /// Best unmeasured pixel and its score.
    pub(crate) fn best(&self, set: &MeasurementSet) -> Option<(usize, f64)> {
        argmax(set.unmeasured().map(|i| (i, self.scores[i])))
    }

    /// Folds the latest measurement of `set` into the caches, applies the
    /// windowed reconstruction update to `recon` and re-scores what changed.
    pub(crate) fn update<P: ErdPredictor + ?Sized>(
        &mut self,
        model: &P,
        recon: &mut Reconstruction,
        set: &MeasurementSet,
    ) {
        let latest = *set.latest().expect("set has a latest measurement");
        let s = latest.location;
        let s_idx = self.dims.index(s);
        self.scores[s_idx] = f64::NEG_INFINITY;
        self.epoch += 1;
        let epoch = self.epoch;
        let mut dirty = Vec::new();

        let (width, height) = (self.dims.width, self.dims.height);
        let limit = self.limit;
        let mask = set.mask();
        for r in 0..height {
            let dr = r.abs_diff(s.row) as u64;
            for c in 0..width {
                let i = r * width + c;
                if mask[i] {
                    continue;
                }
                let dc = c.abs_diff(s.col) as u64;
                let cand = Neighbor {
                    index: s_idx,
                    dist2: dr * dr + dc * dc,
                    value: latest.value,
                };
                let len = self.knn_len[i] as usize;
                let list = &mut self.knn[i * limit..(i + 1) * limit];
                if len == limit && cand.key() >= list[limit - 1].key() {
                    continue;
                }
                let pos = list[..len].partition_point(|n| n.key() < cand.key());
                let end = len.min(limit - 1);
                list.copy_within(pos..end, pos + 1);
                list[pos] = cand;
                if len < limit {
                    self.knn_len[i] += 1;
                }
                self.stamp[i] = epoch;
                dirty.push(i);
            }
        }

        let win = self.dims.window(s, self.idw.window);
        for i in win.indices(self.dims) {
            self.counts[i] += 1;
        }

        {
            let this = &*self;
            let power = this.idw.power;
            refresh_window(recon, set, s, &this.idw, |_, i| idw_value(this.neighbors(i), power));
        }

        for i in self.dims.window(s, self.idw.window + 1).indices(self.dims) {
            if !mask[i] && self.stamp[i] != epoch {
                self.stamp[i] = epoch;
                dirty.push(i);
            }
        }
        dirty.sort_unstable();
        self.rescore(model, recon, &dirty);
    }

    /// Current score of pixel `s`, for diagnostics.
    #[cfg(test)]
    pub(crate) fn score(&self, s: crate::image::PixelLocation) -> f64 {
        self.scores[self.dims.index(s)]
    }
}
