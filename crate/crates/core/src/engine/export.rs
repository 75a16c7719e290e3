//! Run artifacts: history CSV and checkpoint graymaps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::image::quantize;
use crate::pgm;

use super::{Checkpoint, SamplingRun};

impl SamplingRun {
    /// `step,row,col,value,predicted_erd`, one line per measurement; the
    /// last field is empty when no model chose the pixel.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("step,row,col,value,predicted_erd\n");
        for h in &self.history {
            let _ = write!(out, "{},{},{},{},", h.step, h.location.row, h.location.col, h.value);
            if let Some(e) = h.predicted_erd {
                let _ = write!(out, "{e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_history_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fsutil::write_atomic(path.as_ref(), self.history_csv().as_bytes())
    }

    /// Writes `mask_XXX.pgm` and `recon_XXX.pgm` per checkpoint into `dir`,
    /// where `XXX` is the density in percent, creating `dir` if needed.
    /// Returns the written paths.
    pub fn export_checkpoints(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let dims = self.measurements.dims();
        let mut paths = Vec::new();
        for c in &self.checkpoints {
            let tag = c.tag();
            let mask = dir.join(format!("mask_{tag}.pgm"));
            fsutil::write_atomic(&mask, &pgm::encode(dims, &c.mask))?;
            let recon = dir.join(format!("recon_{tag}.pgm"));
            fsutil::write_atomic(&recon, &pgm::encode(dims, &quantize(c.reconstruction.values())))?;
            paths.push(mask);
            paths.push(recon);
        }
        Ok(paths)
    }
}

impl Checkpoint {
    /// Density in percent, zero padded, e.g. `040`; fractional percents
    /// keep their decimals.
    pub fn tag(&self) -> String {
        let pct = self.density * 100.0;
        if (pct - pct.round()).abs() < 1e-9 {
            format!("{:03}", pct.round() as u32)
        } else {
            format!("{pct}")
        }
    }
}
