//! The greedy sampling loop.
//!
//! A run seeds a uniform random set of measurements, then repeatedly scores
//! every unmeasured pixel with an ERD model, measures the best one and
//! updates the reconstruction, until the density budget is spent.

mod export;
mod scorer;
mod source;

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{Dims, GroundTruthImage, PixelLocation, Reconstruction};
use crate::measurement::MeasurementSet;
use crate::metrics::{distortion, psnr};
use crate::recon::{reconstruct, reconstruct_incremental, IdwParams};
use crate::regress::ErdPredictor;
use crate::training::budget_pixels;

pub use source::{MeasurementSource, SimulatedSource};

use scorer::{argmax, score_all, CachedScorer};

/// How candidates are re-scored between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMode {
    /// Every unmeasured pixel is re-scored from scratch each step.
    Full,
    /// Only pixels whose descriptors changed are re-scored. Selects exactly
    /// the same pixels as `Full`.
    #[default]
    Incremental,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub initial_density: f64,
    pub budget_density: f64,
    pub checkpoint_densities: Vec<f64>,
    pub seed: u64,
    pub idw: IdwParams,
    pub scoring: ScoringMode,
    /// Score candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            initial_density: 0.01,
            budget_density: 0.40,
            checkpoint_densities: vec![0.10, 0.20, 0.30, 0.40],
            seed: 0,
            idw: IdwParams::default(),
            scoring: ScoringMode::Incremental,
            parallel: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.idw.validate()?;
        let (i, b) = (self.initial_density, self.budget_density);
        if !(i > 0.0 && i <= b && b <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "densities must satisfy 0 < initial <= budget <= 1, got initial {i} and budget {b}"
            )));
        }
        if self
            .checkpoint_densities
            .iter()
            .any(|&d| !(d > 0.0 && d <= 1.0))
        {
            return Err(Error::InvalidParameter(format!(
                "checkpoint densities must lie in (0, 1]: {:?}",
                self.checkpoint_densities
            )));
        }
        Ok(())
    }

    /// Checkpoints within the budget, ascending and deduplicated.
    fn active_checkpoints(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self
            .checkpoint_densities
            .iter()
            .copied()
            .filter(|&d| d <= self.budget_density + 1e-12)
            .collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    }
}

/// One measurement in acquisition order.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HistoryEntry {
    /// Position in the history, starting at 0.
    pub step: usize,
    pub location: PixelLocation,
    pub value: f64,
    /// ERD estimate that selected this pixel; `None` for seed and random picks.
    pub predicted_erd: Option<f64>,
}

/// Snapshot taken the first time the measured fraction reaches a
/// configured density.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub density: f64,
    pub measured: usize,
    pub mask: Vec<u8>,
    pub reconstruction: Reconstruction,
    pub psnr: Option<f64>,
    pub distortion: Option<f64>,
    /// Seconds of acquisition loop time spent before this snapshot.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingRun {
    pub history: Vec<HistoryEntry>,
    pub checkpoints: Vec<Checkpoint>,
    pub config: RunConfig,
    pub measurements: MeasurementSet,
    pub reconstruction: Reconstruction,
    /// Seconds spent in the acquisition loop, excluding seeding.
    pub wall_time_s: f64,
}

impl SamplingRun {
    /// The checkpoint recorded for `density`, if any.
    pub fn checkpoint(&self, density: f64) -> Option<&Checkpoint> {
        self.checkpoints
            .iter()
            .find(|c| (c.density - density).abs() < 1e-12)
    }

    /// PSNR of the last checkpoint, when ground truth was available.
    pub fn final_psnr(&self) -> Option<f64> {
        self.checkpoints.last().and_then(|c| c.psnr)
    }
}

/// Best next pixel given the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub location: PixelLocation,
    pub predicted_erd: f64,
}

/// Scores every unmeasured pixel and returns the maximizer, lowest linear
/// index on ties.
pub fn select_next<P: ErdPredictor + ?Sized>(
    model: &P,
    recon: &Reconstruction,
    set: &MeasurementSet,
    idw: &IdwParams,
) -> Result<Selection> {
    select_next_with(model, recon, set, idw, false)
}

/// [`select_next`] with optional parallel scoring. The selection does not
/// depend on `parallel`.
pub fn select_next_with<P: ErdPredictor + ?Sized>(
    model: &P,
    recon: &Reconstruction,
    set: &MeasurementSet,
    idw: &IdwParams,
    parallel: bool,
) -> Result<Selection> {
    if set.is_full() {
        return Err(Error::FullyMeasured);
    }
    let (pixels, scores) = score_all(model, recon, set, idw, parallel)?;
    let (i, s) = argmax(pixels.into_iter().zip(scores)).expect("an unmeasured pixel exists");
    Ok(Selection {
        location: set.dims().location(i),
        predicted_erd: s,
    })
}

struct Recorder<'a> {
    dims: Dims,
    pending: Vec<(f64, usize)>,
    ground_truth: Option<&'a GroundTruthImage>,
    checkpoints: Vec<Checkpoint>,
}

impl<'a> Recorder<'a> {
    fn new(config: &RunConfig, dims: Dims, ground_truth: Option<&'a GroundTruthImage>) -> Self {
        let pending = config
            .active_checkpoints()
            .into_iter()
            .map(|d| (d, budget_pixels(d, dims.len()).max(1)))
            .rev()
            .collect();
        Recorder {
            dims,
            pending,
            ground_truth,
            checkpoints: Vec::new(),
        }
    }

    fn observe(
        &mut self,
        set: &MeasurementSet,
        recon: &Reconstruction,
        start: Option<Instant>,
    ) -> Result<()> {
        while let Some(&(density, target)) = self.pending.last() {
            if set.len() < target {
                break;
            }
            self.pending.pop();
            let (p, d) = match self.ground_truth {
                Some(x) => (Some(psnr(x, recon)?), Some(distortion(x, recon)?)),
                None => (None, None),
            };
            debug_assert_eq!(recon.dims(), self.dims);
            self.checkpoints.push(Checkpoint {
                density,
                measured: set.len(),
                mask: set.mask_bytes(),
                reconstruction: recon.clone(),
                psnr: p,
                distortion: d,
                elapsed_s: start.map_or(0.0, |t| t.elapsed().as_secs_f64()),
            });
        }
        Ok(())
    }
}

fn check_inputs<S: MeasurementSource + ?Sized>(
    source: &S,
    config: &RunConfig,
    ground_truth: Option<&GroundTruthImage>,
) -> Result<Dims> {
    config.validate()?;
    let dims = source.dims();
    if let Some(x) = ground_truth {
        dims.ensure_same(x.dims())?;
    }
    if dims.len() < 2 {
        return Err(Error::InvalidParameter("image must have at least two pixels".into()));
    }
    Ok(dims)
}

fn probe<S: MeasurementSource + ?Sized>(
    source: &mut S,
    s: PixelLocation,
    step: usize,
) -> Result<f64> {
    let v = source
        .measure(s)
        .map_err(|reason| Error::Source { step, reason })?;
    if !v.is_finite() {
        return Err(Error::Source {
            step,
            reason: format!("non-finite value {v} at {s}"),
        });
    }
    Ok(v)
}

/// Seeds the run with `ceil(initial · N)` uniform random measurements.
fn seed_measurements<S: MeasurementSource + ?Sized>(
    source: &mut S,
    config: &RunConfig,
    dims: Dims,
    rng: &mut ChaCha8Rng,
    history: &mut Vec<HistoryEntry>,
) -> Result<MeasurementSet> {
    let k0 = budget_pixels(config.initial_density, dims.len()).max(1);
    let mut picks = sample(rng, dims.len(), k0).into_vec();
    picks.sort_unstable();
    let mut set = MeasurementSet::new(dims);
    for i in picks {
        let s = dims.location(i);
        let step = history.len();
        let v = probe(source, s, step)?;
        set.add_measurement(s, v)?;
        history.push(HistoryEntry {
            step,
            location: s,
            value: v,
            predicted_erd: None,
        });
    }
    Ok(set)
}

/// Greedy ERD-driven acquisition up to the density budget.
pub fn run_sampling<S, P>(
    source: &mut S,
    model: &P,
    config: &RunConfig,
    ground_truth: Option<&GroundTruthImage>,
) -> Result<SamplingRun>
where
    S: MeasurementSource + ?Sized,
    P: ErdPredictor + ?Sized,
{
    let dims = check_inputs(source, config, ground_truth)?;
    let budget = budget_pixels(config.budget_density, dims.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(budget);
    let mut set = seed_measurements(source, config, dims, &mut rng, &mut history)?;
    let mut recon = reconstruct(&set, &config.idw)?;
    let mut recorder = Recorder::new(config, dims, ground_truth);
    recorder.observe(&set, &recon, None)?;

    let start = Instant::now();
    let mut cache = match config.scoring {
        ScoringMode::Incremental if set.len() < budget => Some(CachedScorer::new(
            model,
            &recon,
            &set,
            &config.idw,
            config.parallel,
        )),
        _ => None,
    };
    while set.len() < budget {
        let (s, erd) = match &cache {
            Some(c) => {
                let (i, e) = c.best(&set).expect("an unmeasured pixel exists");
                (dims.location(i), e)
            }
            None => {
                let sel = select_next_with(model, &recon, &set, &config.idw, config.parallel)?;
                (sel.location, sel.predicted_erd)
            }
        };
        let step = history.len();
        let v = probe(source, s, step)?;
        set.add_measurement(s, v)?;
        history.push(HistoryEntry {
            step,
            location: s,
            value: v,
            predicted_erd: Some(erd),
        });
        match &mut cache {
            Some(c) => c.update(model, &mut recon, &set),
            None => recon = reconstruct_incremental(&recon, &set, s, &config.idw)?,
        }
        recorder.observe(&set, &recon, Some(start))?;
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    Ok(SamplingRun {
        history,
        checkpoints: recorder.checkpoints,
        config: config.clone(),
        measurements: set,
        reconstruction: recon,
        wall_time_s,
    })
}

/// Static uniform random sampling with the same seed set as
/// [`run_sampling`] under the same configuration.
pub fn run_random_baseline<S>(
    source: &mut S,
    config: &RunConfig,
    ground_truth: Option<&GroundTruthImage>,
) -> Result<SamplingRun>
where
    S: MeasurementSource + ?Sized,
{
    let dims = check_inputs(source, config, ground_truth)?;
    let budget = budget_pixels(config.budget_density, dims.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(budget);
    let mut set = seed_measurements(source, config, dims, &mut rng, &mut history)?;
    let mut recon = reconstruct(&set, &config.idw)?;
    let mut recorder = Recorder::new(config, dims, ground_truth);
    recorder.observe(&set, &recon, None)?;

    let start = Instant::now();
    let mut pool: Vec<usize> = set.unmeasured().collect();
    while set.len() < budget {
        let j = rng.random_range(0..pool.len());
        let i = pool.swap_remove(j);
        let s = dims.location(i);
        let step = history.len();
        let v = probe(source, s, step)?;
        set.add_measurement(s, v)?;
        history.push(HistoryEntry {
            step,
            location: s,
            value: v,
            predicted_erd: None,
        });
        recon = reconstruct_incremental(&recon, &set, s, &config.idw)?;
        recorder.observe(&set, &recon, Some(start))?;
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    Ok(SamplingRun {
        history,
        checkpoints: recorder.checkpoints,
        config: config.clone(),
        measurements: set,
        reconstruction: recon,
        wall_time_s,
    })
}
