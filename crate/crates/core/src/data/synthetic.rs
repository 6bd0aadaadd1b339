use std::f64::consts::{FRAC_PI_2, PI};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Angle at which every spiral arm starts.
const SPIN_START: f64 = FRAC_PI_2;
/// Angular extent of each arm (1.5 turns).
const SPIN_SWEEP: f64 = 3.0 * PI;
/// Radius reached at the end of an arm when no noise is added.
pub const FOUR_SPINS_MAX_RADIUS: f64 = 1.0;

fn evenly_spaced(count: usize, start: f64, end: f64) -> impl Iterator<Item = f64> {
    let step = if count > 1 {
        (end - start) / (count - 1) as f64
    } else {
        0.0
    };
    (0..count).map(move |j| start + step * j as f64)
}

fn check_noise(noise_sd: f64) -> Result<()> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and >= 0, got {noise_sd}"
        )));
    }
    Ok(())
}

/// Two interleaving half circles in the plane.
///
/// Class 0 is the upper unit arc `(cos θ, sin θ)`, class 1 the mirrored arc
/// `(1 − cos θ, 0.5 − sin θ)`, with θ evenly spaced over `[0, π]`.
pub fn gen_two_moons(n: usize, noise_sd: f64, rng: &mut Rng) -> Result<Dataset> {
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "two moons needs a positive even point count, got {n}"
        )));
    }
    check_noise(noise_sd)?;
    let half = n / 2;
    let mut features = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for (j, theta) in evenly_spaced(half, 0.0, PI).enumerate() {
        features
            .row_mut(j)
            .copy_from_slice(&[theta.cos(), theta.sin()]);
        features
            .row_mut(half + j)
            .copy_from_slice(&[1.0 - theta.cos(), 0.5 - theta.sin()]);
    }
    labels.extend(std::iter::repeat_n(0, half));
    labels.extend(std::iter::repeat_n(1, half));
    add_noise(&mut features, noise_sd, rng);
    Dataset::new(features, labels, 2)
}

/// Four Archimedean spiral arms rotated 90° apart.
///
/// Arm `k` is `r(θ)·(cos(θ + kπ/2), sin(θ + kπ/2))` with radius growing linearly in θ
/// over 1.5 turns, up to [`FOUR_SPINS_MAX_RADIUS`].
pub fn gen_four_spins(n: usize, noise_sd: f64, rng: &mut Rng) -> Result<Dataset> {
    if !n.is_multiple_of(4) || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "four spins needs a positive point count divisible by 4, got {n}"
        )));
    }
    check_noise(noise_sd)?;
    let per_arm = n / 4;
    let end = SPIN_START + SPIN_SWEEP;
    let mut features = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for arm in 0..4 {
        let offset = arm as f64 * FRAC_PI_2;
        for (j, theta) in evenly_spaced(per_arm, SPIN_START, end).enumerate() {
            let r = FOUR_SPINS_MAX_RADIUS * theta / end;
            let angle = theta + offset;
            features
                .row_mut(arm * per_arm + j)
                .copy_from_slice(&[r * angle.cos(), r * angle.sin()]);
            labels.push(arm);
        }
    }
    add_noise(&mut features, noise_sd, rng);
    Dataset::new(features, labels, 4)
}

fn add_noise(features: &mut Matrix, noise_sd: f64, rng: &mut Rng) {
    if noise_sd > 0.0 {
        for v in features.as_mut_slice() {
            *v += noise_sd * rng.standard_normal();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_shape_and_balance() {
        let ds = gen_two_moons(6000, 0.1, &mut Rng::new(0)).unwrap();
        assert_eq!(ds.len(), 6000);
        assert_eq!(ds.num_classes, 2);
        assert_eq!(ds.class_counts(), vec![3000, 3000]);
        assert_eq!(ds.num_labeled(), 6000);
    }

    #[test]
    fn noiseless_moon_on_arc() {
        let ds = gen_two_moons(200, 0.0, &mut Rng::new(0)).unwrap();
        for i in 0..ds.len() {
            let (x, y) = (ds.features.get(i, 0), ds.features.get(i, 1));
            if ds.labels[i] == 0 {
                assert!((x * x + y * y - 1.0).abs() < 1e-12);
                assert!(y >= -1e-12);
            } else {
                assert!(((1.0 - x).powi(2) + (0.5 - y).powi(2) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spins_rotate_onto_each_other() {
        let ds = gen_four_spins(400, 0.0, &mut Rng::new(0)).unwrap();
        let per_arm = 100;
        for arm in 0..4 {
            let next = (arm + 1) % 4;
            for j in 0..per_arm {
                let p = ds.features.row(arm * per_arm + j);
                let q = ds.features.row(next * per_arm + j);
                // rotation by +90°: (x, y) -> (-y, x)
                assert!((-p[1] - q[0]).abs() < 1e-9);
                assert!((p[0] - q[1]).abs() < 1e-9);
            }
        }
        for row in ds.features.iter_rows() {
            assert!(row[0].hypot(row[1]) <= FOUR_SPINS_MAX_RADIUS + 1e-12);
        }
        assert_eq!(ds.class_counts(), vec![100; 4]);
    }

    #[test]
    fn generators_reject_bad_counts() {
        assert!(gen_two_moons(7, 0.1, &mut Rng::new(0)).is_err());
        assert!(gen_four_spins(6002, 0.1, &mut Rng::new(0)).is_err());
        assert!(gen_two_moons(10, -1.0, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = gen_four_spins(6000, 0.05, &mut Rng::new(17)).unwrap();
        let b = gen_four_spins(6000, 0.05, &mut Rng::new(17)).unwrap();
        assert_eq!(a, b);
        let c = gen_two_moons(6000, 0.05, &mut Rng::new(17)).unwrap();
        let d = gen_two_moons(6000, 0.05, &mut Rng::new(17)).unwrap();
        assert_eq!(c, d);
    }
}
