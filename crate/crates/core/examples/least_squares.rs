//! Fits the linear ERD regressor, first on a toy system with a known answer
//! and then on a training database.

use slads::regress::{fit_linear, lstsq, train_model, RegressorSpec};
use slads::synth::Family;
use slads::training::{generate_training_db, TrainingSchedule};
use slads::IdwParams;

fn main() -> slads::Result<()> {
    // y = 1 + 2 x
    let a = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0];
    let sol = lstsq(&a, 4, 2, &[1.0, 3.0, 5.0, 7.0]);
    println!("toy fit: intercept {:.6}, slope {:.6}, rank {}", sol.x[0], sol.x[1], sol.rank);

    // duplicated column: minimum-norm split of the weight
    let dup: Vec<[f64; 6]> = (0..20).map(|i| {
        let x = i as f64;
        [x, x, 1.0, 0.0, 0.0, 0.0]
    }).collect();
    let r: Vec<f64> = (0..20).map(|i| 4.0 * i as f64).collect();
    let fit = fit_linear(&dup, &r)?;
    println!("rank-deficient fit: rank {}, theta {:?}", fit.rank, fit.model.theta.map(|t| (t * 1e6).round() / 1e6));

    let params = IdwParams::default();
    let images: Vec<_> = (0..2).map(|i| (format!("b{i}"), Family::Blobs.generate(64, 64, i))).collect();
    let schedule = TrainingSchedule { samples_per_level: 100, ..Default::default() };
    let db = generate_training_db(&images, &schedule, &params)?;
    let (model, summary) = train_model(&db.features(), &db.targets(), &RegressorSpec::Lsq, params)?;
    println!("ERD model on {} rows: residual norm {:.1}", summary.rows, summary.final_loss);
    if let slads::regress::Regressor::Lsq(m) = &model.regressor {
        println!("theta {:?}", m.theta.map(|t| (t * 100.0).round() / 100.0));
    }
    Ok(())
}
