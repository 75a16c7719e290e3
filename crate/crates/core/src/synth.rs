//! Procedural 8-bit test images.
//!
//! All generators are deterministic in their seed and quantize to integer
//! intensities so the images survive a graymap round trip unchanged.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::GroundTruthImage;

fn finish(width: usize, height: usize, values: Vec<f64>) -> GroundTruthImage {
    let q = values.iter().map(|v| v.round().clamp(0.0, 255.0)).collect();
    GroundTruthImage::new(width, height, q).expect("generator output is in range")
}

/// Soft-edged elliptical particles of assorted brightness on a flat
/// background, similar to a micrograph of dispersed particles.
pub fn blobs(width: usize, height: usize, seed: u64) -> GroundTruthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = width.min(height) as f64;
    let background: f64 = rng.random_range(10.0..60.0);
    let count = rng.random_range(6..12);
    let shapes: Vec<(f64, f64, f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let cy = rng.random_range(0.0..height as f64);
            let cx = rng.random_range(0.0..width as f64);
            let a = rng.random_range(0.06..0.2) * scale;
            let b = rng.random_range(0.06..0.2) * scale;
            let theta = rng.random_range(0.0..PI);
            let level = rng.random_range(90.0..240.0);
            (cy, cx, a, b, theta, level)
        })
        .collect();
    let mut values = vec![background; width * height];
    for (r, row) in values.chunks_mut(width).enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            for &(cy, cx, a, b, theta, level) in &shapes {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                let u = dx * theta.cos() + dy * theta.sin();
                let w = -dx * theta.sin() + dy * theta.cos();
                let rho = ((u / a).powi(2) + (w / b).powi(2)).sqrt();
                // about a one-pixel soft edge at rho = 1
                let edge = (rho - 1.0) * a.min(b);
                let cover = 1.0 / (1.0 + (edge * 2.5).exp());
                *v += (level - *v) * cover;
            }
        }
    }
    finish(width, height, values)
}

/// Superposed oriented gratings with a smooth envelope: fine periodic
/// structure everywhere and no flat regions.
pub fn texture(width: usize, height: usize, seed: u64) -> GroundTruthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let period = rng.random_range(5.0..14.0);
            let angle = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(20.0..45.0);
            (2.0 * PI / period, angle, phase, amp)
        })
        .collect();
    let env_angle = rng.random_range(0.0..PI);
    let env_period = rng.random_range(1.0..2.0) * width.max(height) as f64;
    let mut values = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64, c as f64);
            let mut v = 128.0;
            for &(k, angle, phase, amp) in &waves {
                v += amp * (k * (x * angle.cos() + y * angle.sin()) + phase).sin();
            }
            let e = 0.6
                + 0.4 * (2.0 * PI * (x * env_angle.cos() + y * env_angle.sin()) / env_period).sin();
            values.push(128.0 + (v - 128.0) * e);
        }
    }
    finish(width, height, values)
}

/// Voronoi cells with one random intensity each.
pub fn piecewise_constant(width: usize, height: usize, seed: u64) -> GroundTruthImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = ((width * height) as f64 / 80.0).ceil().max(2.0) as usize;
    let sites: Vec<(usize, usize, f64)> = (0..cells)
        .map(|_| {
            (
                rng.random_range(0..height),
                rng.random_range(0..width),
                rng.random_range(0..=255) as f64,
            )
        })
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let best = sites
                .iter()
                .min_by_key(|&&(sr, sc, _)| {
                    let (dr, dc) = (sr.abs_diff(r), sc.abs_diff(c));
                    dr * dr + dc * dc
                })
                .unwrap();
            values.push(best.2);
        }
    }
    finish(width, height, values)
}

/// Generator families addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Blobs,
    Texture,
    PiecewiseConstant,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Blobs, Family::Texture, Family::PiecewiseConstant];

    pub fn name(self) -> &'static str {
        match self {
            Family::Blobs => "blobs",
            Family::Texture => "texture",
            Family::PiecewiseConstant => "piecewise",
        }
    }

    pub fn generate(self, width: usize, height: usize, seed: u64) -> GroundTruthImage {
        match self {
            Family::Blobs => blobs(width, height, seed),
            Family::Texture => texture(width, height, seed),
            Family::PiecewiseConstant => piecewise_constant(width, height, seed),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                crate::error::Error::InvalidParameter(format!(
                    "unknown image family {s:?} (expected blobs, texture or piecewise)"
                ))
            })
    }
}
