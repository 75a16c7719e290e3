//! Supervised dynamic sparse sampling.
//!
//! A regressor learns to predict the expected reduction in distortion (ERD)
//! that measuring an unmeasured pixel would bring, and a greedy loop keeps
//! measuring the pixel with the highest predicted ERD until a density budget
//! is spent. Images are reconstructed from the sparse measurements by
//! inverse-distance-weighted interpolation.
//!
//! Module map:
//!
//! - [`image`], [`pgm`], [`measurement`], [`metrics`]: containers, graymap
//!   I/O, measurement bookkeeping, distortion and PSNR.
//! - [`recon`]: IDW reconstruction, full and windowed.
//! - [`features`]: the six local descriptors and their standardization.
//! - [`regress`]: least squares, ε-SVR and MLP regressors plus the model file.
//! - [`training`]: reduction-in-distortion targets and training databases.
//! - [`engine`]: the greedy sampling loop and the random baseline.
//! - [`cli`]: the `slads` command implementations.
//! - [`synth`]: procedural test images.

pub mod cli;
pub mod engine;
pub mod error;
pub mod features;
mod fsutil;
pub mod image;
pub mod measurement;
pub mod metrics;
pub mod pgm;
pub mod recon;
pub mod regress;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureStats, FeatureVector, FEATURE_COUNT};
pub use image::{load_image, Dims, GroundTruthImage, PixelLocation, Reconstruction};
pub use measurement::{Measurement, MeasurementSet};
pub use metrics::{distortion, psnr};
pub use recon::{reconstruct, reconstruct_incremental, IdwParams};
pub use regress::{load_model, save_model, ErdModel, ErdPredictor, ModelKind};
pub use training::{generate_training_db, rd_exact, rd_windowed, TrainingDatabase, TrainingSchedule};
pub use engine::{run_random_baseline, run_sampling, select_next, MeasurementSource, RunConfig, SamplingRun, SimulatedSource};
