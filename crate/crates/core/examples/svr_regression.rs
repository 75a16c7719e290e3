//! Fits an RBF ε-SVR to a noisy sine and reports the fit quality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slads::regress::{fit_svr, Gamma, SvrConfig};

fn main() -> slads::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<[f64; 1]> = (0..80).map(|i| [i as f64 / 80.0 * 6.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + rng.random_range(-0.05..0.05)).collect();
    let config = SvrConfig {
        c: 10.0,
        epsilon: 0.05,
        gamma: Gamma::Fixed(1.0),
        ..Default::default()
    };
    let fit = fit_svr(&xs, &ys, &config)?;
    println!(
        "converged {} after {} iterations, {} support vectors, dual objective {:.4}",
        fit.converged,
        fit.iterations,
        fit.model.support_count(),
        fit.objective
    );
    let mut worst: f64 = 0.0;
    for x in (0..=12).map(|i| i as f64 * 0.5) {
        let err = (fit.model.predict(&[x]) - x.sin()).abs();
        worst = worst.max(err);
        println!("x {x:4.1}  svr {:+.3}  sin {:+.3}", fit.model.predict(&[x]), x.sin());
    }
    println!("max error on the grid: {worst:.3}");
    Ok(())
}
