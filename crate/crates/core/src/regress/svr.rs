//! ε-insensitive support vector regression with a Gaussian RBF kernel.
//!
//! The dual is solved in the doubled-variable form: for `n` training rows
//! there are `2n` multipliers `α` with signs `y = (+1…, −1…)` and linear term
//! `p = (ε − R, ε + R)`, minimizing `½ αᵀQα + pᵀα` subject to `yᵀα = 0` and
//! `0 ≤ α ≤ C`, where `Q_ij = y_i y_j K(x_i, x_j)`. Pairs are chosen by
//! maximal violation with second-order gain and updated analytically until the
//! KKT gap drops below the tolerance. The regression coefficients are
//! `β_i = α_i − α_{i+n}`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (dim · var(X))`, with `var` pooled over every feature entry.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: Gamma,
    /// Stop once the maximal KKT violation falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Larger training sets are subsampled uniformly to this many rows.
    pub subsample_cap: usize,
    pub seed: u64,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            epsilon: 0.1,
            gamma: Gamma::Auto,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
            subsample_cap: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub dim: usize,
    /// Row-major `support_count × dim`.
    pub support_vectors: Vec<f64>,
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
}

impl SvrModel {
    pub fn support_count(&self) -> usize {
        self.dual_coeffs.len()
    }

    /// `Σ β_i exp(−γ‖v − sv_i‖²) + b`
    pub fn predict(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        let mut acc = 0.0;
        for (sv, coef) in self.support_vectors.chunks_exact(self.dim).zip(&self.dual_coeffs) {
            let d2: f64 = sv.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            acc += coef * (-self.gamma * d2).exp();
        }
        acc + self.bias
    }
}

#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: SvrModel,
    pub converged: bool,
    pub iterations: usize,
    /// Final dual objective `½ αᵀQα + pᵀα` (minimization form).
    pub objective: f64,
    /// Rows actually used after subsampling, ascending.
    pub rows_used: Vec<usize>,
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Resolves [`Gamma::Auto`] against the training rows.
pub fn resolve_gamma<R: AsRef<[f64]>>(gamma: Gamma, rows: &[R]) -> f64 {
    match gamma {
        Gamma::Fixed(g) => g,
        Gamma::Auto => {
            let dim = rows.first().map_or(1, |r| r.as_ref().len()).max(1);
            let all = rows.iter().flat_map(|r| r.as_ref().iter().copied());
            let (mut n, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
            for x in all {
                n += 1;
                let d = x - mean;
                mean += d / n as f64;
                m2 += d * (x - mean);
            }
            let var = if n > 0 { m2 / n as f64 } else { 0.0 };
            if var > 0.0 {
                1.0 / (dim as f64 * var)
            } else {
                1.0 / dim as f64
            }
        }
    }
}

/// Fits an ε-SVR. Non-convergence within `max_iterations` is reported
/// through [`SvrFit::converged`] rather than as an error.
pub fn fit_svr<R: AsRef<[f64]>>(rows: &[R], targets: &[f64], config: &SvrConfig) -> Result<SvrFit> {
    if rows.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "SVR needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    if rows.len() != targets.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    if !(config.c > 0.0 && config.epsilon >= 0.0 && config.tolerance > 0.0) {
        return Err(Error::InvalidParameter(
            "SVR requires C > 0, epsilon >= 0 and tolerance > 0".into(),
        ));
    }
    let dim = rows[0].as_ref().len();
    if rows.iter().any(|r| r.as_ref().len() != dim) {
        return Err(Error::InvalidParameter("ragged SVR feature rows".into()));
    }

    let rows_used: Vec<usize> = if rows.len() > config.subsample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut picked = sample(&mut rng, rows.len(), config.subsample_cap).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..rows.len()).collect()
    };
    let x: Vec<&[f64]> = rows_used.iter().map(|&i| rows[i].as_ref()).collect();
    let r: Vec<f64> = rows_used.iter().map(|&i| targets[i]).collect();
    if r.iter().chain(x.iter().flat_map(|v| v.iter())).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite SVR training value".into()));
    }
    let gamma = resolve_gamma(config.gamma, &x);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("RBF gamma must be positive, got {gamma}")));
    }

    let n = x.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let k = rbf(x[i], x[j], gamma);
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let sol = solve_dual(&kernel, n, &r, config);

    let mut support_vectors = Vec::new();
    let mut dual_coeffs = Vec::new();
    for i in 0..n {
        let beta = sol.alpha[i] - sol.alpha[i + n];
        if beta != 0.0 {
            support_vectors.extend_from_slice(x[i]);
            dual_coeffs.push(beta);
        }
    }
    if dual_coeffs.is_empty() {
        // keep one (inert) support vector so the model shape is never empty
        support_vectors.extend_from_slice(x[0]);
        dual_coeffs.push(0.0);
    }

    Ok(SvrFit {
        model: SvrModel {
            dim,
            support_vectors,
            dual_coeffs,
            bias: -sol.rho,
            gamma,
            c: config.c,
            epsilon: config.epsilon,
        },
        converged: sol.converged,
        iterations: sol.iterations,
        objective: sol.objective,
        rows_used,
    })
}

pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Pairwise (SMO) solver over the doubled dual. `kernel` is the dense
/// row-major `n × n` Gram matrix.
pub(crate) fn solve_dual(kernel: &[f64], n: usize, r: &[f64], cfg: &SvrConfig) -> DualSolution {
    let l = 2 * n;
    let c = cfg.c;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let k = |a: usize, b: usize| kernel[(a % n) * n + b % n];
    let p: Vec<f64> = (0..l)
        .map(|t| if t < n { cfg.epsilon - r[t] } else { cfg.epsilon + r[t - n] })
        .collect();
    let mut alpha = vec![0.0; l];
    let mut grad = p.clone();
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..l {
            let yt = sign(t);
            if yt > 0.0 {
                if !at_upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = t;
                }
            } else if !at_lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = t;
            }
        }
        // j: best second-order gain in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_sel != usize::MAX {
            let kii = k(i_sel, i_sel);
            for t in 0..l {
                let yt = sign(t);
                let kit = k(i_sel, t);
                let (grad_diff, quad) = if yt > 0.0 {
                    if at_lower(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(grad[t]);
                    (gmax + grad[t], kii + k(t, t) - 2.0 * kit)
                } else {
                    if at_upper(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(-grad[t]);
                    (gmax - grad[t], kii + k(t, t) - 2.0 * kit)
                };
                if grad_diff > 0.0 {
                    let q = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / q;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
        }
        if gmax + gmax2 < cfg.tolerance || j_sel == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (yi, yj) = (sign(i), sign(j));
        let qij = yi * yj * k(i, j);
        let (qii, qjj) = (k(i, i), k(j, j));
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if yi != yj {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        let (ri, rj) = (i % n, j % n);
        for t in 0..l {
            let yt = sign(t);
            let tt = t % n;
            grad[t] += yt * (yi * kernel[ri * n + tt] * dai + yj * kernel[rj * n + tt] * daj);
        }
    }

    // bias from free multipliers, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut nr_free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yt = sign(t);
        let yg = yt * grad[t];
        if at_upper(alpha[t]) {
            if yt < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if yt > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nr_free += 1;
            sum_free += yg;
        }
    }
    let rho = if nr_free > 0 {
        sum_free / nr_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = 0.5 * (0..l).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>();

    DualSolution {
        alpha,
        rho,
        objective,
        converged,
        iterations,
    }
}

/// Dual objective of coefficients `β` in compact form:
/// `½ βᵀKβ − Σ R_i β_i + ε Σ |β_i|`.
pub fn dual_objective(kernel: &[f64], n: usize, r: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let mut quad = 0.0;
    for i in 0..n {
        let row = &kernel[i * n..(i + 1) * n];
        quad += beta[i] * row.iter().zip(beta).map(|(k, b)| k * b).sum::<f64>();
    }
    0.5 * quad - r.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
        + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
}
