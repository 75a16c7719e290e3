//! Fully connected regression network trained by mini-batch Adam on
//! `½ Σ (R − g(V))²`.
//!
//! Parameters live in one flat vector, layer by layer: the `in × out`
//! row-major weight matrix followed by the `out` biases. The output layer is
//! always linear; hidden layers use the configured activation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation {other:?} (expected relu or identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub activation: Activation,
    /// Train against `(t − mean) / std` and fold the scale back into the
    /// output layer afterwards. The returned network predicts raw targets
    /// either way.
    pub normalize_targets: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![50; 5],
            epochs: 500,
            batch_size: 64,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            activation: Activation::Relu,
            normalize_targets: true,
        }
    }
}

/// Adam with bias correction and a constant learning rate.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// Layer widths including input and output, e.g. `[6, 50, 50, 50, 50, 50, 1]`.
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    pub model: MlpModel,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
}

/// Number of parameters for the given layer widths.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases from a seeded generator.
    pub fn init(sizes: Vec<usize>, activation: Activation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(&sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        MlpModel {
            sizes,
            params,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(weights, biases)` of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off = self.offset(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (
            &self.params[off..off + i * o],
            &self.params[off + i * o..off + i * o + o],
        )
    }

    fn offset(&self, l: usize) -> usize {
        param_count(&self.sizes[..=l])
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.predict_batch(x, 1, &mut out);
        out[0]
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn predict_batch(&self, x: &[f64], batch: usize, out: &mut [f64]) {
        let mut cur = self.layer_forward(0, x, batch);
        for l in 1..self.layer_count() {
            cur = self.layer_forward(l, &cur, batch);
        }
        out[..batch].copy_from_slice(&cur);
    }

    /// All layer outputs, starting with the input itself.
    fn forward(&self, x: &[f64], batch: usize) -> Vec<Vec<f64>> {
        debug_assert_eq!(x.len(), batch * self.input_dim());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for l in 0..self.layer_count() {
            let y = self.layer_forward(l, &acts[l], batch);
            acts.push(y);
        }
        acts
    }

    fn layer_forward(&self, l: usize, input: &[f64], batch: usize) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
        let mut y = vec![0.0; batch * no];
        for (xi, ys) in input.chunks_exact(ni).zip(y.chunks_exact_mut(no)) {
            ys.copy_from_slice(b);
            for (k, &xk) in xi.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                for (yo, wko) in ys.iter_mut().zip(&w[k * no..(k + 1) * no]) {
                    *yo += xk * wko;
                }
            }
        }
        if l + 1 < self.layer_count() {
            y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        }
        y
    }

    /// Loss `½ Σ (t − g(x))²` over the batch and its gradient with respect
    /// to every parameter.
    pub fn loss_and_gradient(&self, x: &[f64], targets: &[f64], grad: &mut [f64]) -> f64 {
        let batch = targets.len();
        let acts = self.forward(x, batch);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let out = acts.last().unwrap();
        let mut loss = 0.0;
        // dL/d(output) = g − t
        let mut delta: Vec<f64> = out
            .iter()
            .zip(targets)
            .map(|(g, t)| {
                loss += 0.5 * (t - g) * (t - g);
                g - t
            })
            .collect();
        for l in (0..self.layer_count()).rev() {
            let (ni, no) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            let input = &acts[l];
            {
                let (gw, gb) = grad[off..off + ni * no + no].split_at_mut(ni * no);
                for (xi, ds) in input.chunks_exact(ni).zip(delta.chunks_exact(no)) {
                    for (g, d) in gb.iter_mut().zip(ds) {
                        *g += d;
                    }
                    for (k, &xk) in xi.iter().enumerate() {
                        if xk == 0.0 {
                            continue;
                        }
                        for (g, d) in gw[k * no..(k + 1) * no].iter_mut().zip(ds) {
                            *g += xk * d;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; batch * ni];
            for ((ps, ds), ys) in prev
                .chunks_exact_mut(ni)
                .zip(delta.chunks_exact(no))
                .zip(input.chunks_exact(ni))
            {
                for (k, (p, y)) in ps.iter_mut().zip(ys).enumerate() {
                    let slope = self.activation.slope(*y);
                    if slope == 0.0 {
                        continue;
                    }
                    let dot: f64 = w[k * no..(k + 1) * no].iter().zip(ds).map(|(a, b)| a * b).sum();
                    *p = dot * slope;
                }
            }
            delta = prev;
        }
        loss
    }

    /// Turns `g` into `scale · g + shift` by rescaling the output layer.
    fn fold_output(&mut self, shift: f64, scale: f64) {
        if shift == 0.0 && scale == 1.0 {
            return;
        }
        let last = self.layer_count() - 1;
        let off = self.offset(last);
        let len = self.sizes[last] + 1;
        let (w, b) = self.params[off..off + len].split_at_mut(len - 1);
        w.iter_mut().for_each(|v| *v *= scale);
        b[0] = b[0] * scale + shift;
    }

    /// With identity activations the network is affine; returns the collapsed
    /// `(weights, bias)` of `x ↦ wᵀx + b`.
    pub fn collapse_linear(&self) -> Option<(Vec<f64>, f64)> {
        if self.activation != Activation::Identity || *self.sizes.last().unwrap() != 1 {
            return None;
        }
        // running affine map: A (cur × in), c (cur)
        let n_in = self.input_dim();
        let mut a: Vec<f64> = (0..n_in * n_in)
            .map(|k| if k / n_in == k % n_in { 1.0 } else { 0.0 })
            .collect();
        let mut c = vec![0.0; n_in];
        let mut cur = n_in;
        for l in 0..self.layer_count() {
            let (w, b) = self.layer(l);
            let no = self.sizes[l + 1];
            let mut na = vec![0.0; no * n_in];
            let mut nc = b.to_vec();
            for o in 0..no {
                for k in 0..cur {
                    let wk = w[k * no + o];
                    nc[o] += wk * c[k];
                    for j in 0..n_in {
                        na[o * n_in + j] += wk * a[k * n_in + j];
                    }
                }
            }
            a = na;
            c = nc;
            cur = no;
        }
        Some((a, c[0]))
    }
}

/// Trains a network on row-major `x` (`n × dim`) against `targets`.
pub fn fit_mlp(x: &[f64], dim: usize, targets: &[f64], config: &MlpConfig) -> Result<MlpFit> {
    let n = targets.len();
    if n == 0 {
        return Err(Error::EmptyDatabase);
    }
    if x.len() != n * dim {
        return Err(Error::InvalidParameter(format!(
            "expected {} feature values for {n} rows of width {dim}, got {}",
            n * dim,
            x.len()
        )));
    }
    if config.batch_size == 0 || config.hidden.contains(&0) {
        return Err(Error::InvalidParameter(
            "batch size and hidden widths must be positive".into(),
        ));
    }
    let mut sizes = Vec::with_capacity(config.hidden.len() + 2);
    sizes.push(dim);
    sizes.extend_from_slice(&config.hidden);
    sizes.push(1);
    let mut model = MlpModel::init(sizes, config.activation, config.seed);
    let mut adam = Adam::new(
        model.params.len(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.adam_epsilon,
    );
    let mut grad = vec![0.0; model.params.len()];
    let (shift, scale) = if config.normalize_targets {
        target_scale(targets)
    } else {
        (0.0, 1.0)
    };
    let scaled: Vec<f64> = targets.iter().map(|t| (t - shift) / scale).collect();
    let initial_loss = {
        let mut m = model.clone();
        m.fold_output(shift, scale);
        full_loss(&m, x, targets)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..n).collect();
    let mut bx = Vec::with_capacity(config.batch_size * dim);
    let mut by = Vec::with_capacity(config.batch_size);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&x[i * dim..(i + 1) * dim]);
                by.push(scaled[i]);
            }
            let loss = model.loss_and_gradient(&bx, &by, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                    loss,
                });
            }
            epoch_loss += loss;
            adam.step(&mut model.params, &grad);
        }
        epoch_losses.push(epoch_loss);
    }
    model.fold_output(shift, scale);
    let final_loss = full_loss(&model, x, targets);
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            batch: 0,
            loss: final_loss,
        });
    }
    Ok(MlpFit {
        model,
        initial_loss,
        final_loss,
        epoch_losses,
    })
}

/// Mean and population standard deviation, with unit scale for constant
/// targets.
fn target_scale(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-12 && std.is_finite() {
        (mean, std)
    } else {
        (mean, 1.0)
    }
}

/// `½ Σ (t − g(x))²` over the whole data set.
pub fn full_loss(model: &MlpModel, x: &[f64], targets: &[f64]) -> f64 {
    let mut out = vec![0.0; targets.len()];
    model.predict_batch(x, targets.len(), &mut out);
    out.iter()
        .zip(targets)
        .map(|(g, t)| 0.5 * (t - g) * (t - g))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_step_leaves_weights() {
        let mut adam = Adam::new(4, 0.001, 0.9, 0.999, 1e-8);
        let mut p = vec![0.3, -1.0, 2.0, 0.0];
        let before = p.clone();
        adam.step(&mut p, &[0.0; 4]);
        assert_eq!(p, before);
    }

    #[test]
    fn single_weight_first_step() {
        // loss ½(1 − w·1)², gradient at w = 0 is −1
        let mut adam = Adam::new(1, 0.001, 0.9, 0.999, 1e-8);
        let mut w = [0.0];
        let x = 1.0;
        let t = 1.0;
        let g = -(t - w[0] * x) * x;
        adam.step(&mut w, &[g]);
        let m_hat = ((1.0 - 0.9) * g) / (1.0 - 0.9f64);
        let v_hat = ((1.0 - 0.999) * g * g) / (1.0 - 0.999f64);
        assert_eq!((m_hat, v_hat), (-1.0, 1.0));
        let want = 0.0 - 0.001 * m_hat / (v_hat.sqrt() + 1e-8);
        assert_eq!(w[0], want);
        assert_eq!(want, 0.001 / (1.0 + 1e-8));
        assert!((w[0] - 0.001).abs() < 1e-10);
    }

    #[test]
    fn zero_output_layer_returns_bias() {
        let mut m = MlpModel::init(vec![6, 50, 50, 50, 50, 50, 1], Activation::Relu, 3);
        let off = m.offset(5);
        for p in &mut m.params[off..off + 50] {
            *p = 0.0;
        }
        m.params[off + 50] = 7.25;
        assert_eq!(m.predict(&[1.0, -2.0, 3.0, 0.5, 9.0, -1.0]), 7.25);
        assert_eq!(m.predict(&[0.0; 6]), 7.25);
    }

    #[test]
    fn shapes_match_architecture() {
        let m = MlpModel::init(vec![6, 50, 50, 50, 50, 50, 1], Activation::Relu, 0);
        assert_eq!(m.params.len(), 6 * 50 + 50 + 4 * (50 * 50 + 50) + 50 + 1);
        assert_eq!(m.layer(0).0.len(), 300);
        assert_eq!(m.layer(5).0.len(), 50);
        assert_eq!(m.layer(5).1.len(), 1);
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = MlpConfig {
            hidden: vec![4],
            epochs: 50,
            learning_rate: 1e300,
            ..MlpConfig::default()
        };
        let x = [1.0e200, -1.0e200, 3.0e200, 2.0e200];
        let err = fit_mlp(&x, 2, &[1.0e300, -1.0e300], &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let cfg = MlpConfig {
            hidden: vec![8, 8],
            epochs: 5,
            batch_size: 3,
            seed: 11,
            ..MlpConfig::default()
        };
        let a = fit_mlp(&x, 6, &y, &cfg).unwrap();
        let b = fit_mlp(&x, 6, &y, &cfg).unwrap();
        assert_eq!(a.model, b.model);
    }
}
