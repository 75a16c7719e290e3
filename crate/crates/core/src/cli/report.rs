//! PSNR-versus-density evaluation reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::SamplingRun;
use crate::error::Result;
use crate::fsutil;

pub const HEADER: &str = "method,density,psnr_mean,psnr_std,distortion_mean,wall_time_mean_s";

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub method: String,
    pub density: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub distortion_mean: f64,
    /// `None` when timing was left out of the report.
    pub wall_time_mean_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub repeats: usize,
    pub seeds: Vec<u64>,
}

/// Mean and population standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summarizes the runs of one method at each density. A missing run
/// (`None`) turns every statistic of the method into NaN.
pub fn summarize(
    method: &str,
    densities: &[f64],
    runs: &[Option<SamplingRun>],
    timing: bool,
) -> Vec<EvalRow> {
    densities
        .iter()
        .map(|&d| {
            let mut psnr = Vec::new();
            let mut dist = Vec::new();
            let mut time = Vec::new();
            let mut complete = true;
            for run in runs {
                match run.as_ref().and_then(|r| r.checkpoint(d)) {
                    Some(c) => {
                        psnr.push(c.psnr.unwrap_or(f64::NAN));
                        dist.push(c.distortion.unwrap_or(f64::NAN));
                        time.push(c.elapsed_s);
                    }
                    None => complete = false,
                }
            }
            if !complete {
                return EvalRow {
                    method: method.to_string(),
                    density: d,
                    psnr_mean: f64::NAN,
                    psnr_std: f64::NAN,
                    distortion_mean: f64::NAN,
                    wall_time_mean_s: timing.then_some(f64::NAN),
                };
            }
            let (pm, ps) = mean_std(&psnr);
            EvalRow {
                method: method.to_string(),
                density: d,
                psnr_mean: pm,
                psnr_std: ps,
                distortion_mean: mean_std(&dist).0,
                wall_time_mean_s: timing.then(|| mean_std(&time).0),
            }
        })
        .collect()
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},",
                r.method, r.density, r.psnr_mean, r.psnr_std, r.distortion_mean
            );
            if let Some(t) = r.wall_time_mean_s {
                let _ = write!(out, "{t}");
            }
            out.push('\n');
        }
        out
    }

    /// Writes the CSV atomically.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fsutil::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }

    pub fn row(&self, method: &str, density: f64) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && (r.density - density).abs() < 1e-12)
    }
}
