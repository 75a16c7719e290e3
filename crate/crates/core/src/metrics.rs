//! Distortion, PSNR and a rank correlation helper.

use crate::error::Result;
use crate::image::{GroundTruthImage, Reconstruction};

/// PSNR reported when the reconstruction is exact.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak intensity used by [`psnr`].
pub const PEAK: f64 = 255.0;

/// Sum of absolute pixel differences, accumulated in row-major order.
pub fn distortion(truth: &GroundTruthImage, estimate: &Reconstruction) -> Result<f64> {
    truth.dims().ensure_same(estimate.dims())?;
    Ok(abs_diff_sum(truth.values(), estimate.values()))
}

pub(crate) fn abs_diff_sum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub fn mse(truth: &GroundTruthImage, estimate: &Reconstruction) -> Result<f64> {
    truth.dims().ensure_same(estimate.dims())?;
    let n = truth.values().len() as f64;
    let sq: f64 = truth
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sq / n)
}

/// `10·log10(255² / MSE)`, capped at [`PSNR_CAP_DB`] when MSE is zero.
pub fn psnr(truth: &GroundTruthImage, estimate: &Reconstruction) -> Result<f64> {
    Ok(psnr_from_mse(mse(truth, estimate)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if saa == sbb { 1.0 } else { 0.0 };
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Dims;
    use rand::{Rng, SeedableRng};

    fn pair(x: Vec<f64>, y: Vec<f64>, w: usize, h: usize) -> (GroundTruthImage, Reconstruction) {
        (
            GroundTruthImage::new(w, h, x).unwrap(),
            Reconstruction::from_parts(Dims::new(w, h), y),
        )
    }

    #[test]
    fn distortion_examples() {
        let (x, y) = pair(vec![10., 20., 30., 40.], vec![10., 20., 30., 40.], 2, 2);
        assert_eq!(distortion(&x, &y).unwrap(), 0.0);
        let (x, y) = pair(vec![10., 20., 30., 40.], vec![10., 20., 30., 44.], 2, 2);
        assert_eq!(distortion(&x, &y).unwrap(), 4.0);
    }

    #[test]
    fn distortion_matches_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..255.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.random_range(-10.0..265.0)).collect();
        let (x, y) = pair(a.clone(), b.clone(), 8, 8);
        let mut acc = 0.0f64;
        for i in 0..64 {
            let d = a[i] - b[i];
            acc += if d < 0.0 { -d } else { d };
        }
        assert_eq!(distortion(&x, &y).unwrap().to_bits(), acc.to_bits());
    }

    #[test]
    fn dimension_mismatch() {
        let x = GroundTruthImage::new(2, 2, vec![0.; 4]).unwrap();
        let y = Reconstruction::from_parts(Dims::new(4, 1), vec![0.; 4]);
        assert!(distortion(&x, &y).is_err());
        assert!(psnr(&x, &y).is_err());
    }

    #[test]
    fn psnr_examples() {
        let (x, y) = pair(vec![1., 2., 3., 4.], vec![1., 2., 3., 4.], 2, 2);
        assert_eq!(psnr(&x, &y).unwrap(), 99.0);
        // abs errors (0,0,0,4): MSE = 16/4 = 4; 10*log10(65025/4) = 42.1102...
        let (x, y) = pair(vec![1., 2., 3., 4.], vec![1., 2., 3., 8.], 2, 2);
        assert!((psnr(&x, &y).unwrap() - 42.110_203_695_399_7).abs() < 1e-9);
        // MSE 1: 10*log10(65025) = 48.1308...
        let (x, y) = pair(vec![1., 2., 3., 4.], vec![2., 3., 4., 5.], 2, 2);
        assert!((psnr(&x, &y).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreasing_in_mse() {
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let p = psnr_from_mse(k as f64 * 0.37);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1., 2., 3.], &[10., 20., 35.]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1., 2., 3.], &[3., 2., 1.]) + 1.0).abs() < 1e-12);
        // ties get average ranks
        let r = ranks(&[5., 1., 5., 2.]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
    }
}
