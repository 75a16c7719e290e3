//! Dense least squares via column-pivoted Householder QR.
//!
//! Rank-deficient systems get the minimum-norm solution through a complete
//! orthogonal decomposition: after pivoted QR, the leading `r` rows
//! `[R11 R12]` are factored again from the right so the null-space component
//! can be dropped.

/// Column-major dense matrix.
#[derive(Debug, Clone)]
struct ColMajor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMajor {
    fn from_row_major(rows: usize, cols: usize, a: &[f64]) -> Self {
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j * rows + i] = a[i * cols + j];
            }
        }
        ColMajor { rows, cols, data }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }
}

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    pub rank: usize,
}

/// Builds the Householder vector for `x` in place. Returns `(beta, alpha)`
/// where the reflector is `I - beta v vᵀ` and it maps `x` to `alpha e1`.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let alpha = if x[0] > 0.0 { -norm } else { norm };
    x[0] -= alpha;
    let vtv = x.iter().map(|v| v * v).sum::<f64>();
    (2.0 / vtv, alpha)
}

#[inline]
fn reflect(v: &[f64], beta: f64, y: &mut [f64]) {
    let dot: f64 = v.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
    let s = beta * dot;
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= s * vi;
    }
}

/// Minimizes `‖b − A x‖²` for row-major `A` (`rows × cols`).
pub fn lstsq(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> LstsqSolution {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    let mut m = ColMajor::from_row_major(rows, cols, a);
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let steps = rows.min(cols);
    let mut diag = Vec::with_capacity(steps);

    for k in 0..steps {
        // pivot on the largest remaining column norm
        let (p, _) = (k..cols)
            .map(|j| (j, m.col(j)[k..].iter().map(|v| v * v).sum::<f64>()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != k {
            for i in 0..rows {
                m.data.swap(k * rows + i, p * rows + i);
            }
            perm.swap(k, p);
        }
        let mut v = m.col(k)[k..].to_vec();
        let (beta, alpha) = householder(&mut v);
        if beta == 0.0 {
            diag.push(0.0);
            continue;
        }
        for j in k + 1..cols {
            reflect(&v, beta, &mut m.data[j * rows + k..(j + 1) * rows]);
        }
        reflect(&v, beta, &mut rhs[k..]);
        let ck = &mut m.data[k * rows..(k + 1) * rows];
        ck[k] = alpha;
        for x in &mut ck[k + 1..] {
            *x = 0.0;
        }
        diag.push(alpha);
    }

    let r00 = diag.first().map_or(0.0, |d| d.abs());
    let tol = r00 * f64::EPSILON * rows.max(cols) as f64 * 10.0;
    let rank = diag.iter().take_while(|d| d.abs() > tol && r00 > 0.0).count();

    let mut z = vec![0.0; cols];
    if rank == cols {
        for i in (0..cols).rev() {
            let mut s = rhs[i];
            for j in i + 1..cols {
                s -= m.at(i, j) * z[j];
            }
            z[i] = s / m.at(i, i);
        }
    } else if rank > 0 {
        z = min_norm_trapezoid(&m, rank, &rhs[..rank]);
    }

    let mut x = vec![0.0; cols];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = z[k];
    }
    LstsqSolution { x, rank }
}

/// Minimum-norm solution of `[R11 R12] z = c` for the leading `r` rows of
/// the upper-trapezoidal factor stored in `m`.
fn min_norm_trapezoid(m: &ColMajor, r: usize, c: &[f64]) -> Vec<f64> {
    let n = m.cols;
    // Tt holds [R11 R12]ᵀ (n × r), column-major
    let mut tt = vec![0.0; n * r];
    for i in 0..r {
        for j in i..n {
            tt[i * n + j] = m.at(i, j);
        }
    }
    // QR of Tt: Tt = Z T with T upper r × r
    let mut vs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(r);
    for k in 0..r {
        let mut v = tt[k * n + k..(k + 1) * n].to_vec();
        let (beta, alpha) = householder(&mut v);
        for j in k + 1..r {
            reflect(&v, beta, &mut tt[j * n + k..(j + 1) * n]);
        }
        tt[k * n + k] = alpha;
        vs.push((v, beta));
    }
    // Tᵀ y = c, forward substitution (T[i][j] = tt[j*n + i] for i <= j)
    let mut y = vec![0.0; n];
    for i in 0..r {
        let mut s = c[i];
        for (j, yj) in y.iter().enumerate().take(i) {
            s -= tt[i * n + j] * yj;
        }
        y[i] = s / tt[i * n + i];
    }
    // z = Z [y; 0]
    for k in (0..r).rev() {
        let (v, beta) = &vs[k];
        reflect(v, *beta, &mut y[k..]);
    }
    y
}
