//! Measurement sources: the instrument side of the sampling loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::image::{Dims, GroundTruthImage, PixelLocation};

/// Answers point queries on the scan grid.
pub trait MeasurementSource {
    fn dims(&self) -> Dims;

    /// Probes `s`. Errors are reported to the caller as plain text.
    fn measure(&mut self, s: PixelLocation) -> Result<f64, String>;
}

/// Simulated instrument reading a ground-truth image, optionally with
/// Gaussian noise. The noise at each pixel is a fixed function of
/// `(seed, pixel)`, so repeated or reordered queries agree.
#[derive(Debug, Clone)]
pub struct SimulatedSource {
    image: GroundTruthImage,
    noise_sigma: f64,
    seed: u64,
}

impl SimulatedSource {
    pub fn new(image: GroundTruthImage) -> Self {
        SimulatedSource {
            image,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_noise(image: GroundTruthImage, noise_sigma: f64, seed: u64) -> Self {
        SimulatedSource {
            image,
            noise_sigma: noise_sigma.max(0.0),
            seed,
        }
    }

    pub fn image(&self) -> &GroundTruthImage {
        &self.image
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// The value a query at `s` returns.
    pub fn value(&self, s: PixelLocation) -> f64 {
        let x = self.image.get(s);
        if self.noise_sigma == 0.0 {
            return x;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.image.dims().index(s) as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        x + self.noise_sigma * z
    }
}

impl MeasurementSource for SimulatedSource {
    fn dims(&self) -> Dims {
        self.image.dims()
    }

    fn measure(&mut self, s: PixelLocation) -> Result<f64, String> {
        if !self.image.dims().contains(s) {
            return Err(format!("location {s} is outside the image"));
        }
        Ok(self.value(s))
    }
}
