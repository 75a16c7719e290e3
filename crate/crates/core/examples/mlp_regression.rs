//! Trains the multilayer perceptron on a smooth two-input function and
//! prints the loss curve.

use slads::regress::{fit_mlp, Activation, MlpConfig};

fn main() -> slads::Result<()> {
    let mut x = Vec::new();
    let mut t = Vec::new();
    for i in 0..20 {
        for j in 0..20 {
            let (a, b) = (i as f64 / 19.0, j as f64 / 19.0);
            x.extend([a, b]);
            t.push((3.0 * a).sin() + b * b);
        }
    }
    let config = MlpConfig {
        hidden: vec![32, 32],
        epochs: 300,
        batch_size: 32,
        learning_rate: 0.003,
        activation: Activation::Relu,
        seed: 9,
        ..Default::default()
    };
    let fit = fit_mlp(&x, 2, &t, &config)?;
    for (e, loss) in fit.epoch_losses.iter().enumerate().filter(|(e, _)| e % 50 == 0) {
        println!("epoch {e:3}: loss {loss:.5}");
    }
    println!("initial loss {:.4}, final loss {:.5}", fit.initial_loss, fit.final_loss);
    for (a, b) in [(0.1, 0.2), (0.5, 0.5), (0.9, 0.8)] {
        let y = fit.model.predict(&[a, b]);
        println!("f({a}, {b}) = {y:.4} (true {:.4})", (3.0 * a).sin() + b * b);
    }
    Ok(())
}
