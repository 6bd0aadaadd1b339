use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Probabilities below this are clamped before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub value: f64,
    /// Labeled rows whose true-class probability hit the log clamp.
    pub saturated: usize,
}

/// `−(1/|B|) Σ_{labeled i} log F[i, y_i]`, normalized by the full batch size.
pub fn cross_entropy(probs: &Matrix, targets: &[Option<usize>]) -> Result<CrossEntropy> {
    check_targets(probs, targets)?;
    let n = probs.rows();
    if n == 0 {
        return Ok(CrossEntropy {
            value: 0.0,
            saturated: 0,
        });
    }
    let mut total = 0.0;
    let mut saturated = 0;
    for (i, target) in targets.iter().enumerate() {
        if let Some(y) = *target {
            let p = probs.get(i, y);
            if p < LOG_CLAMP {
                saturated += 1;
            }
            total -= p.max(LOG_CLAMP).ln();
        }
    }
    Ok(CrossEntropy {
        value: total / n as f64,
        saturated,
    })
}

/// Supervised loss over the rows of a batch whose `mask` entry is set.
pub fn supervised_loss(probs: &Matrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    if labels.len() != mask.len() {
        return Err(Error::shape(
            "supervised_loss mask",
            labels.len(),
            mask.len(),
        ));
    }
    let targets: Vec<Option<usize>> = labels
        .iter()
        .zip(mask)
        .map(|(&y, &m)| m.then_some(y))
        .collect();
    Ok(cross_entropy(probs, &targets)?.value)
}

/// Derivative of [`cross_entropy`] with respect to the logits: `(F_i − onehot(y_i)) / |B|`
/// on labeled rows, zero elsewhere.
pub fn cross_entropy_grad(probs: &Matrix, targets: &[Option<usize>]) -> Result<Matrix> {
    check_targets(probs, targets)?;
    let n = probs.rows().max(1) as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (i, target) in targets.iter().enumerate() {
        if let Some(y) = *target {
            let row = grad.row_mut(i);
            row.copy_from_slice(probs.row(i));
            row[y] -= 1.0;
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
    Ok(grad)
}

fn check_targets(probs: &Matrix, targets: &[Option<usize>]) -> Result<()> {
    if targets.len() != probs.rows() {
        return Err(Error::shape(
            "cross_entropy targets",
            probs.rows(),
            targets.len(),
        ));
    }
    if let Some(y) = targets.iter().flatten().find(|&&y| y >= probs.cols()) {
        return Err(Error::InvalidArgument(format!(
            "label {y} outside 0..{}",
            probs.cols()
        )));
    }
    Ok(())
}

/// Mean row entropy `−Σ_k F_ik ln F_ik`, with `0·ln 0 = 0`.
pub fn entropy_loss(probs: &Matrix) -> f64 {
    if probs.rows() == 0 {
        return 0.0;
    }
    let total: f64 = probs.iter_rows().map(row_entropy).sum();
    total / probs.rows() as f64
}

fn row_entropy(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Derivative of [`entropy_loss`] with respect to the logits:
/// `−p_j (ln p_j + H_i) / n` for each row `i`.
pub fn entropy_grad(probs: &Matrix) -> Matrix {
    let n = probs.rows().max(1) as f64;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (i, row) in probs.iter_rows().enumerate() {
        let h = row_entropy(row);
        for (g, &p) in grad.row_mut(i).iter_mut().zip(row) {
            if p > 0.0 {
                *g = -p * (p.ln() + h) / n;
            }
        }
    }
    grad
}

/// Pulls a gradient with respect to softmax outputs back to the logits:
/// `dz_j = p_j (g_j − Σ_k p_k g_k)`.
pub fn softmax_backward(probs: &Matrix, d_probs: &Matrix) -> Result<Matrix> {
    if probs.shape() != d_probs.shape() {
        return Err(Error::shape(
            "softmax_backward",
            format!("{:?}", probs.shape()),
            format!("{:?}", d_probs.shape()),
        ));
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let p = probs.row(i);
        let g = d_probs.row(i);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for ((o, &pj), &gj) in out.row_mut(i).iter_mut().zip(p).zip(g) {
            *o = pj * (gj - dot);
        }
    }
    Ok(out)
}
