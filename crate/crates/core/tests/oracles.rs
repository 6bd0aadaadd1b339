//! Numerical routines checked against independent references.

mod support;

use nalgebra::{DMatrix, SymmetricEigen};
use sntg_core::numerics::{softmax, Matrix, Pca, Rng};
use sntg_core::trainer::welch_t_test;

#[test]
fn softmax_matches_high_precision_values() {
    // mpmath at 50 digits
    let expected = [
        0.284_939_588_994_633_1,
        0.047_100_197_271_128_67,
        0.603_217_114_635_247,
        0.063_578_616_125_000_26,
        0.001_164_482_973_990_956_8,
    ];
    let got = softmax(&[1.5, -0.3, 2.25, 0.0, -4.0]);
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() < 1e-15, "{g} vs {e}");
    }
    let wide = softmax(&[1.5, -0.3, 2.25, 0.0, -4.0, 700.125]);
    assert_eq!(wide[5], 1.0);
    assert!((wide[2] - 8.255_406_096_699_35e-304).abs() < 1e-316);
}

#[test]
fn pca_matches_symmetric_eigendecomposition() {
    let mut rng = Rng::new(8);
    let mix = [
        [2.0, 0.3, -0.4, 0.0],
        [0.0, 1.0, 0.5, 0.2],
        [0.0, 0.0, 0.4, -0.1],
        [0.0, 0.0, 0.0, 0.05],
    ];
    let z = Matrix::from_fn(200, 4, |_, _| rng.standard_normal());
    let data = z.matmul(&Matrix::from_rows(&mix).unwrap()).unwrap();
    let pca = Pca::fit(&data, 3).unwrap();

    let means = data.column_means();
    let centered = DMatrix::from_fn(200, 4, |r, c| data.get(r, c) - means[c]);
    let cov = centered.transpose() * &centered / 199.0;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    for (d, &idx) in order.iter().take(3).enumerate() {
        let lambda = eig.eigenvalues[idx];
        assert!(
            (pca.explained_variance[d] - lambda).abs() < 1e-9 * lambda,
            "axis {d}"
        );
        // eigenvectors agree up to sign
        let dot: f64 = (0..4)
            .map(|r| pca.components.get(d, r) * eig.eigenvectors[(r, idx)])
            .sum();
        assert!(
            (dot.abs() - 1.0).abs() < 1e-9,
            "axis {d}: |dot| = {}",
            dot.abs()
        );
    }

    let scores = pca.transform(&data).unwrap();
    let expected = centered * eig.eigenvectors.select_columns(&order[..3]);
    for r in 0..200 {
        for d in 0..3 {
            assert!((scores.get(r, d).abs() - expected[(r, d)].abs()).abs() < 1e-9);
        }
    }
}

#[test]
fn welch_matches_numerical_integration() {
    let cases = support::welch_cases();
    assert_eq!(cases.len(), 20);
    for c in &cases {
        let r = welch_t_test(&c.a, &c.b).unwrap();
        assert!(
            (r.t - c.t).abs() < 1e-9 * c.t.abs().max(1.0),
            "t {} vs {}",
            r.t,
            c.t
        );
        assert!(
            (r.dof - c.dof).abs() < 1e-9 * c.dof,
            "dof {} vs {}",
            r.dof,
            c.dof
        );
        assert!((r.p - c.p).abs() < 1e-6, "p {} vs {}", r.p, c.p);
    }
}
