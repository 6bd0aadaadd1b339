use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    variance(xs).sqrt()
}

/// Two-sided Student-t tail probability `P(|T| ≥ |t|)` with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(0.5 * dof, 0.5, x).clamp(0.0, 1.0)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "Welch's t-test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        // both groups constant
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                dof: na + nb - 2.0,
                p: 1.0,
            }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                dof: na + nb - 2.0,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        dof,
        p: student_t_two_sided(t, dof),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists() {
        let xs = [1.0, 2.0, 4.0, 3.5];
        let r = welch_t_test(&xs, &xs).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        let c = [2.0, 2.0, 2.0];
        assert_eq!(welch_t_test(&c, &c).unwrap().p, 1.0);
        assert_eq!(welch_t_test(&c, &[3.0, 3.0]).unwrap().p, 0.0);
    }

    #[test]
    fn larger_gap_smaller_p() {
        let base = [10.0, 11.0, 9.5, 10.5, 10.2];
        let mut last = 1.0;
        for shift in [0.2, 0.5, 1.0, 2.0, 4.0] {
            let other: Vec<f64> = base.iter().map(|v| v + shift).collect();
            let p = welch_t_test(&base, &other).unwrap().p;
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            welch_t_test(&[1.0], &[1.0, 2.0]),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn known_value() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [
            27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7,
            21.4,
        ];
        let b = [
            27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5,
            24.4,
        ];
        let r = welch_t_test(&a, &b).unwrap();
        assert!((r.t - (-2.455356398286006)).abs() < 1e-12, "{}", r.t);
        assert!((r.dof - 24.988529290231416).abs() < 1e-10, "{}", r.dof);
        assert!((r.p - 0.021378001462866985).abs() < 1e-10, "{}", r.p);
    }
}
