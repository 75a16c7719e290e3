//! Trains an nn ERD model on blobs, samples an unseen blobs image to 40%
//! and compares PSNR with random sampling at each checkpoint. Masks,
//! reconstructions and the acquisition history go to `out_dir`.
//!
//! Run with `cargo run --release --example sampling_run [out_dir]`.

use slads::engine::SimulatedSource;
use slads::regress::{train_model, RegressorSpec};
use slads::synth::Family;
use slads::training::{generate_training_db, TrainingSchedule};
use slads::{run_random_baseline, run_sampling, IdwParams, ModelKind, RunConfig};

fn main() -> slads::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sampling_out".into());
    let params = IdwParams::default();
    let train: Vec<_> = (0..3).map(|i| (format!("train{i}"), Family::Blobs.generate(64, 64, 100 + i))).collect();
    let schedule = TrainingSchedule { samples_per_level: 150, ..Default::default() };
    let db = generate_training_db(&train, &schedule, &params)?;
    let mut spec = RegressorSpec::with_defaults(ModelKind::Nn, 0);
    if let RegressorSpec::Nn(c) = &mut spec {
        c.epochs = 150;
    }
    let (model, _) = train_model(&db.features(), &db.targets(), &spec, params)?;

    let truth = Family::Blobs.generate(64, 64, 1);
    let config = RunConfig::default();
    let slads_run = run_sampling(&mut SimulatedSource::new(truth.clone()), &model, &config, Some(&truth))?;
    let random_run = run_random_baseline(&mut SimulatedSource::new(truth.clone()), &config, Some(&truth))?;

    println!("density   nn psnr   random psnr");
    for (a, b) in slads_run.checkpoints.iter().zip(&random_run.checkpoints) {
        println!("{:6.0}%  {:8.2}  {:12.2}", a.density * 100.0, a.psnr.unwrap(), b.psnr.unwrap());
    }
    let written = slads_run.export_checkpoints(&out)?;
    slads_run.write_history_csv(format!("{out}/history.csv"))?;
    println!("{} measurements in {:.2} s; wrote {} images to {out}", slads_run.history.len(), slads_run.wall_time_s, written.len());
    Ok(())
}
