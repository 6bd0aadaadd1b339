use super::Matrix;
use crate::error::{Error, Result};

/// Principal axes of a point cloud, from a Jacobi eigendecomposition of the covariance.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `dims × p`, one unit-length axis per row, by decreasing explained variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(points: &Matrix, dims: usize) -> Result<Self> {
        let (n, p) = points.shape();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "PCA needs at least 2 points, got {n}"
            )));
        }
        if dims > p {
            return Err(Error::InvalidArgument(format!(
                "cannot project {p}-dimensional data onto {dims} components"
            )));
        }
        let mean = points.column_means();
        let mut centered = points.clone();
        for r in 0..n {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let cov = centered.t_matmul(&centered)?.scale(1.0 / (n - 1) as f64);
        let (values, vectors) = symmetric_eigen(&cov);

        let mut order: Vec<usize> = (0..p).collect();
        // stable sort keeps index order among equal eigenvalues
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

        let mut components = Matrix::zeros(dims, p);
        let mut explained_variance = Vec::with_capacity(dims);
        for (d, &idx) in order.iter().take(dims).enumerate() {
            let mut axis: Vec<f64> = (0..p).map(|r| vectors.get(r, idx)).collect();
            if let Some(first) = axis.iter().find(|v| v.abs() > 1e-12) {
                if *first < 0.0 {
                    axis.iter_mut().for_each(|v| *v = -*v);
                }
            }
            components.row_mut(d).copy_from_slice(&axis);
            explained_variance.push(values[idx].max(0.0));
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn transform(&self, points: &Matrix) -> Result<Matrix> {
        if points.cols() != self.mean.len() {
            return Err(Error::shape(
                "Pca::transform",
                self.mean.len(),
                points.cols(),
            ));
        }
        let mut centered = points.clone();
        for r in 0..centered.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        let mut projected = centered.matmul_t(&self.components)?;
        // zero-variance axes are arbitrary directions; their scores are rounding noise
        for (d, var) in self.explained_variance.iter().enumerate() {
            if *var <= 1e-300 {
                for r in 0..projected.rows() {
                    projected.set(r, d, 0.0);
                }
            }
        }
        Ok(projected)
    }

    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix> {
        let mut out = scores.matmul(&self.components)?;
        for r in 0..out.rows() {
            for (v, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Projects `points` (N×p) onto their top `dims` principal axes.
pub fn pca_project(points: &Matrix, dims: usize) -> Result<Matrix> {
    Pca::fit(points, dims)?.transform(points)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues and a matrix whose columns are the eigenvectors.
fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Matrix::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 });
    let scale = a.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return (vec![0.0; n], v);
    }

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a.get(r, c).powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn jacobi_diagonalizes() {
        let m = Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&m);
        for (i, lambda) in vals.iter().enumerate() {
            let col: Vec<f64> = (0..3).map(|r| vecs.get(r, i)).collect();
            for r in 0..3 {
                let mv: f64 = (0..3).map(|c| m.get(r, c) * col[c]).sum();
                assert!((mv - lambda * col[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn line_in_3d_has_rank_one_projection() {
        let pts = Matrix::from_fn(20, 3, |r, c| (r as f64 - 7.0) * [1.0, -2.0, 0.5][c] + 3.0);
        let proj = pca_project(&pts, 2).unwrap();
        for r in 0..20 {
            assert!(proj.get(r, 1).abs() < 1e-9);
        }
    }

    #[test]
    fn translation_invariant() {
        let mut rng = Rng::new(3);
        let pts = Matrix::from_fn(30, 4, |_, _| rng.standard_normal());
        let shifted = pts.map(|v| v + 12.5);
        let a = pca_project(&pts, 2).unwrap();
        let b = pca_project(&shifted, 2).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_convention_first_loading_positive() {
        let mut rng = Rng::new(8);
        let pts = Matrix::from_fn(40, 3, |_, c| rng.standard_normal() * (c + 1) as f64);
        let pca = Pca::fit(&pts, 3).unwrap();
        for d in 0..3 {
            let first = pca
                .components
                .row(d)
                .iter()
                .find(|v| v.abs() > 1e-12)
                .unwrap();
            assert!(*first > 0.0);
        }
        assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_two_reconstruction() {
        let mut rng = Rng::new(4);
        let basis = [[1.0, 0.5, -0.3, 2.0], [0.0, 1.0, 1.0, -1.0]];
        let pts = Matrix::from_fn(25, 4, |_, _| 0.0);
        let mut pts = pts;
        for r in 0..25 {
            let (a, b) = (rng.standard_normal(), rng.standard_normal());
            for (c, (u, v)) in basis[0].iter().zip(&basis[1]).enumerate() {
                pts.set(r, c, 1.5 + a * u + b * v);
            }
        }
        let pca = Pca::fit(&pts, 2).unwrap();
        let back = pca
            .inverse_transform(&pca.transform(&pts).unwrap())
            .unwrap();
        for (x, y) in pts.as_slice().iter().zip(back.as_slice()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn degenerate_data_projects_to_zero() {
        let pts = Matrix::filled(5, 3, 2.0);
        let proj = pca_project(&pts, 2).unwrap();
        assert!(proj.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(pca_project(&Matrix::zeros(1, 3), 1).is_err());
        assert!(pca_project(&Matrix::zeros(4, 2), 3).is_err());
    }
}
