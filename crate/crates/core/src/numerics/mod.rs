//! Dense linear algebra, seeded randomness, elementwise nonlinearities and PCA.

mod matrix;
mod pca;
mod rng;

pub use matrix::Matrix;
pub use pca::{pca_project, Pca};
pub use rng::Rng;

use crate::error::{Error, Result};

/// Numerically stable softmax of one row (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_inplace(&mut out);
    out
}

pub fn softmax_inplace(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_inplace(out.row_mut(r));
    }
    out
}

#[inline]
pub fn leaky_relu_scalar(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu(x: &Matrix, slope: f64) -> Matrix {
    x.map(|v| leaky_relu_scalar(v, slope))
}

/// I.i.d. `N(0, sigma²)` entries.
pub fn gaussian_noise(rows: usize, cols: usize, sigma: f64, rng: &mut Rng) -> Result<Matrix> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    Ok(Matrix::from_fn(rows, cols, |_, _| {
        sigma * rng.standard_normal()
    }))
}

#[cfg(test)]
mod tests {
    use super::Rng;
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn softmax_uniform_on_equal_logits() {
        for p in softmax(&[0.0, 0.0, 0.0]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_large_logits() {
        // 1/(1+e^-1000) == 1 and e^-1000/(1+e^-1000) ~ 5.08e-435 underflow to 0 in f64
        let p = softmax(&[1000.0, 0.0]);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.0);
        assert!(p.iter().all(|v| v.is_finite()));
        let p = softmax(&[1000.0, 999.0]);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn leaky_relu_cases() {
        let x = Matrix::from_rows(&[[5.0, -2.0, 0.0]]).unwrap();
        let y = leaky_relu(&x, 0.1);
        assert_eq!(y.get(0, 0), 5.0);
        assert!((y.get(0, 1) + 0.2).abs() < 1e-15);
        assert_eq!(y.get(0, 2), 0.0);
    }

    #[test]
    fn gaussian_noise_contract() {
        let mut rng = Rng::new(0);
        assert_eq!(
            gaussian_noise(3, 4, 0.0, &mut rng).unwrap(),
            Matrix::zeros(3, 4)
        );
        assert!(gaussian_noise(1, 1, -0.1, &mut rng).is_err());
        let a = gaussian_noise(4, 4, 1.0, &mut Rng::new(9)).unwrap();
        let b = gaussian_noise(4, 4, 1.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_noise_moments() {
        let m = gaussian_noise(1000, 1000, 1.0, &mut Rng::new(11)).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn softmax_sums_to_one_on_random_rows() {
        let mut rng = Rng::new(5);
        for _ in 0..10_000 {
            let k = 2 + rng.below(9);
            let scale = [1.0, 10.0, 100.0, 1000.0][rng.below(4)];
            let row: Vec<f64> = (0..k).map(|_| rng.uniform_range(-scale, scale)).collect();
            let p = softmax(&row);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0));
        }
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -500.0f64..500.0) {
            let p = softmax(&[a, b]);
            let q = softmax(&[a + c, b + c]);
            prop_assert!((p[0] - q[0]).abs() < 1e-12);
            prop_assert!((p[1] - q[1]).abs() < 1e-12);
        }
    }
}
