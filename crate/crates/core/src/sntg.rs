//! Teacher-graph smoothness regularizer.
//!
//! Hard targets from the teacher define a 0-1 graph (`W_ij = 1` iff both samples get
//! the same predicted class). A contrastive margin loss on the feature map `h` then
//! pulls graph neighbors together and pushes non-neighbors at least `m` apart. The loss
//! is estimated on `s` pairs drawn uniformly from each minibatch.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::numerics::{Matrix, Rng};

/// Per-row argmax; ties go to the lowest class index.
pub fn hard_targets(probs: &Matrix) -> Vec<usize> {
    probs
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// `W_ij`: 1 when the hard targets agree, else 0.
#[inline]
pub fn pair_weight(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Soft similarity `exp(−½[KL(p‖q) + KL(q‖p)])` between two predicted distributions.
pub fn soft_pair_weight(p: &[f64], q: &[f64]) -> f64 {
    const FLOOR: f64 = 1e-12;
    let sym: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let (a, b) = (a.max(FLOOR), b.max(FLOOR));
            (a - b) * (a.ln() - b.ln())
        })
        .sum();
    (-0.5 * sym).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Sub-sampled pairs of batch rows with their graph weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairBatch {
    pub pairs: Vec<Pair>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_weights(mut self, weight: impl Fn(usize, usize) -> f64) -> Self {
        for p in &mut self.pairs {
            p.weight = weight(p.i, p.j);
        }
        self
    }

    pub fn neighbor_fraction(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().map(|p| p.weight).sum::<f64>() / self.pairs.len() as f64
    }

    /// CSV rows `i,j,w` with batch rows mapped through `indices`.
    pub fn write_csv<W: Write>(&self, mut out: W, indices: &[usize]) -> Result<()> {
        for p in &self.pairs {
            writeln!(out, "{},{},{}", indices[p.i], indices[p.j], p.weight)?;
        }
        Ok(())
    }
}

/// `s` ordered pairs `(i, j)`, `i ≠ j`, drawn i.i.d. uniformly from a batch of `n`.
/// Weights are left at zero.
pub fn sample_pairs(n: usize, s: usize, rng: &mut Rng) -> Result<PairBatch> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pair sampling needs a batch of at least 2, got {n}"
        )));
    }
    let pairs = (0..s)
        .map(|_| {
            let i = rng.below(n);
            let mut j = rng.below(n - 1);
            if j >= i {
                j += 1;
            }
            Pair { i, j, weight: 0.0 }
        })
        .collect();
    Ok(PairBatch { pairs })
}

/// Contrastive margin loss for one pair, given the squared per-dimension-averaged
/// distance `d2 = ‖h_i − h_j‖² / p`.
#[inline]
pub fn pair_loss(d2: f64, weight: f64, margin: f64) -> f64 {
    let hinge = (margin - d2.sqrt()).max(0.0);
    weight * d2 + (1.0 - weight) * hinge * hinge
}

fn scaled_sq_distance(h: &Matrix, i: usize, j: usize) -> f64 {
    let p = h.cols() as f64;
    h.row(i)
        .iter()
        .zip(h.row(j))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / p
}

fn check_margin(margin: f64) -> Result<()> {
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "margin must be > 0, got {margin}"
        )));
    }
    Ok(())
}

/// Mean pair loss over `pairs`.
pub fn sntg_loss(h: &Matrix, pairs: &PairBatch, margin: f64) -> Result<f64> {
    check_margin(margin)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pairs
        .pairs
        .iter()
        .map(|p| pair_loss(scaled_sq_distance(h, p.i, p.j), p.weight, margin))
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Derivative of [`sntg_loss`] with respect to `h`.
pub fn sntg_grad(h: &Matrix, pairs: &PairBatch, margin: f64) -> Result<Matrix> {
    check_margin(margin)?;
    let mut grad = Matrix::zeros(h.rows(), h.cols());
    if pairs.is_empty() {
        return Ok(grad);
    }
    let p = h.cols() as f64;
    let s = pairs.len() as f64;
    let mut diff = vec![0.0; h.cols()];
    for pair in &pairs.pairs {
        for ((d, a), b) in diff.iter_mut().zip(h.row(pair.i)).zip(h.row(pair.j)) {
            *d = a - b;
        }
        let d2 = diff.iter().map(|d| d * d).sum::<f64>() / p;
        let dist = d2.sqrt();
        // dℓ/d(h_i) = coef · (h_i − h_j)
        let mut coef = 2.0 * pair.weight / p;
        if pair.weight < 1.0 && dist < margin && dist > 0.0 {
            coef -= 2.0 * (1.0 - pair.weight) * (margin - dist) / (p * dist);
        }
        coef /= s;
        if coef == 0.0 {
            continue;
        }
        for (g, d) in grad.row_mut(pair.i).iter_mut().zip(&diff) {
            *g += coef * d;
        }
        for (g, d) in grad.row_mut(pair.j).iter_mut().zip(&diff) {
            *g -= coef * d;
        }
    }
    Ok(grad)
}

/// Exact mean of the pair loss over all `n(n−1)` ordered pairs, with weights from
/// hard `labels`. This is the quantity [`sample_pairs`] + [`sntg_loss`] estimates.
pub fn all_pairs_loss(h: &Matrix, labels: &[usize], margin: f64) -> Result<f64> {
    check_margin(margin)?;
    let n = h.rows();
    if labels.len() != n {
        return Err(Error::shape("all_pairs_loss labels", n, labels.len()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two rows".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += pair_loss(
                    scaled_sq_distance(h, i, j),
                    pair_weight(labels[i], labels[j]),
                    margin,
                );
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMode {
    /// Hard targets of the current teacher.
    #[default]
    Teacher,
    /// Fixed k-nearest-neighbor graph in input space.
    Knn,
    /// Fixed hard targets of a separately trained model.
    Frozen,
    /// Symmetric-KL similarity of the teacher's soft predictions.
    Soft,
}

/// Directed k-NN adjacency: `neighbors[i]` lists the `k` nearest rows to `i`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    pub fn is_neighbor(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }
}

/// Euclidean k-nearest neighbors in input space; distance ties go to the lower index.
pub fn fixed_knn_graph(x: &Matrix, k: usize) -> Result<KnnGraph> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k-NN graph needs 0 < k < {n}, got k = {k}"
        )));
    }
    let norms: Vec<f64> = x
        .iter_rows()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect();
    let mut neighbors = Vec::with_capacity(n);
    const BLOCK: usize = 256;
    let mut start = 0;
    while start < n {
        let end = (start + BLOCK).min(n);
        let rows: Vec<usize> = (start..end).collect();
        let block = x.select_rows(&rows);
        let dots = block.matmul_t(x)?;
        for (b, i) in (start..end).enumerate() {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((norms[i] + norms[j] - 2.0 * dots.get(b, j)).max(0.0), j))
                .collect();
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut nearest: Vec<usize> = cand[..k].iter().map(|c| c.1).collect();
            nearest.sort_unstable();
            neighbors.push(nearest);
        }
        start = end;
    }
    Ok(KnnGraph { k, neighbors })
}

/// Hard targets of `frozen` over every row of `x`, from a noise-free pass.
pub fn frozen_prediction_graph(frozen: &Mlp, x: &Matrix) -> Result<Vec<usize>> {
    Ok(hard_targets(&frozen.predict(x)?.probs))
}

/// Where pair weights come from during training.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Teacher,
    Soft,
    Knn(KnnGraph),
    Frozen(Vec<usize>),
}

impl GraphSource {
    pub fn mode(&self) -> GraphMode {
        match self {
            GraphSource::Teacher => GraphMode::Teacher,
            GraphSource::Soft => GraphMode::Soft,
            GraphSource::Knn(_) => GraphMode::Knn,
            GraphSource::Frozen(_) => GraphMode::Frozen,
        }
    }

    /// Fills in weights for `pairs`, whose endpoints are rows of a batch drawn from
    /// dataset rows `indices`; `teacher_probs` are the teacher's batch predictions.
    pub fn weigh(&self, pairs: PairBatch, indices: &[usize], teacher_probs: &Matrix) -> PairBatch {
        match self {
            GraphSource::Teacher => {
                let hard = hard_targets(teacher_probs);
                pairs.with_weights(|i, j| pair_weight(hard[i], hard[j]))
            }
            GraphSource::Soft => pairs
                .with_weights(|i, j| soft_pair_weight(teacher_probs.row(i), teacher_probs.row(j))),
            GraphSource::Knn(graph) => pairs.with_weights(|i, j| {
                f64::from(u8::from(graph.is_neighbor(indices[i], indices[j])))
            }),
            GraphSource::Frozen(targets) => {
                pairs.with_weights(|i, j| pair_weight(targets[indices[i]], targets[indices[j]]))
            }
        }
    }
}
