//! Evaluates lsq, nn and random sampling over seeded repeats on several
//! test images and prints a PSNR-versus-density table.

use slads::cli::report::summarize;
use slads::engine::SimulatedSource;
use slads::regress::{train_model, ErdModel, RegressorSpec};
use slads::synth::Family;
use slads::training::{generate_training_db, TrainingSchedule};
use slads::{run_random_baseline, run_sampling, IdwParams, ModelKind, RunConfig};

fn main() -> slads::Result<()> {
    let params = IdwParams::default();
    let train: Vec<_> = (0..3).map(|i| (format!("t{i}"), Family::Blobs.generate(64, 64, 50 + i))).collect();
    let db = generate_training_db(&train, &TrainingSchedule { samples_per_level: 120, ..Default::default() }, &params)?;
    let mut models: Vec<(String, Option<ErdModel>)> = vec![("random".into(), None)];
    for kind in [ModelKind::Lsq, ModelKind::Nn] {
        let mut spec = RegressorSpec::with_defaults(kind, 0);
        if let RegressorSpec::Nn(c) = &mut spec {
            c.epochs = 120;
        }
        models.push((kind.to_string(), Some(train_model(&db.features(), &db.targets(), &spec, params)?.0)));
    }

    let tests: Vec<_> = (0..2).map(|i| Family::Blobs.generate(64, 64, i)).collect();
    let densities = [0.1, 0.2, 0.3, 0.4];
    println!("method  density  psnr_mean  psnr_std");
    for (name, model) in &models {
        let mut runs = Vec::new();
        for img in &tests {
            for seed in 0..3 {
                let config = RunConfig { seed, ..Default::default() };
                let mut src = SimulatedSource::new(img.clone());
                let run = match model {
                    Some(m) => run_sampling(&mut src, m, &config, Some(img)),
                    None => run_random_baseline(&mut src, &config, Some(img)),
                };
                runs.push(run.ok());
            }
        }
        for row in summarize(name, &densities, &runs, false) {
            println!("{:<7} {:>6.0}%  {:9.2}  {:8.2}", row.method, row.density * 100.0, row.psnr_mean, row.psnr_std);
        }
    }
    Ok(())
}
