//! Drives the greedy loop step by step against a custom instrument and
//! stops on an application condition instead of a fixed budget.

use slads::engine::{select_next, MeasurementSource};
use slads::regress::{train_model, RegressorSpec};
use slads::synth::{texture, Family};
use slads::training::{generate_training_db, TrainingSchedule};
use slads::{psnr, reconstruct, reconstruct_incremental, Dims, IdwParams, MeasurementSet, PixelLocation};

/// Instrument that counts its probes and reads a smooth analytic field.
struct Probe {
    dims: Dims,
    calls: usize,
}

impl MeasurementSource for Probe {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn measure(&mut self, s: PixelLocation) -> Result<f64, String> {
        self.calls += 1;
        let (y, x) = (s.row as f64 / 8.0, s.col as f64 / 8.0);
        Ok(128.0 + 60.0 * (x.sin() * y.cos()))
    }
}

fn main() -> slads::Result<()> {
    let params = IdwParams::default();
    let train = vec![("tex".to_string(), texture(64, 64, 3)), ("blobs".to_string(), Family::Blobs.generate(64, 64, 3))];
    let db = generate_training_db(&train, &TrainingSchedule { samples_per_level: 80, ..Default::default() }, &params)?;
    let (model, _) = train_model(&db.features(), &db.targets(), &RegressorSpec::Lsq, params)?;

    let mut probe = Probe { dims: Dims::new(48, 48), calls: 0 };
    let mut set = MeasurementSet::new(probe.dims());
    for r in (0..48).step_by(12) {
        for c in (0..48).step_by(12) {
            let s = PixelLocation::new(r, c);
            let v = probe.measure(s).map_err(slads::Error::InvalidParameter)?;
            set.add_measurement(s, v)?;
        }
    }
    let mut recon = reconstruct(&set, &params)?;
    loop {
        let pick = select_next(&model, &recon, &set, &params)?;
        if pick.predicted_erd < 20.0 || set.density() >= 0.3 {
            println!("stopping: predicted ERD {:.1}, density {:.1}%", pick.predicted_erd, set.density() * 100.0);
            break;
        }
        let v = probe.measure(pick.location).map_err(slads::Error::InvalidParameter)?;
        set.add_measurement(pick.location, v)?;
        recon = reconstruct_incremental(&recon, &set, pick.location, &params)?;
    }
    let truth = slads::GroundTruthImage::new(
        48,
        48,
        (0..48 * 48)
            .map(|i| {
                let (y, x) = ((i / 48) as f64 / 8.0, (i % 48) as f64 / 8.0);
                128.0 + 60.0 * (x.sin() * y.cos())
            })
            .collect(),
    )?;
    println!("{} probes, psnr {:.2} dB", probe.calls, psnr(&truth, &recon)?);
    Ok(())
}
