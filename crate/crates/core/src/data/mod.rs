//! Datasets: synthetic generators, MNIST ingestion, label splitting and corruption.

mod mnist;
mod synthetic;

use std::io::Write;
use std::path::Path;

pub use mnist::{load_mnist, load_mnist_raw, read_idx_images, read_idx_labels, Standardizer};
pub use synthetic::{gen_four_spins, gen_two_moons, FOUR_SPINS_MAX_RADIUS};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Feature matrix with per-row ground truth and a labeled/unlabeled partition.
///
/// Ground truth is kept for every row so error rates can be measured over the
/// whole set; training code must only read labels through [`Dataset::visible_label`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    /// Training labels, possibly corrupted by [`corrupt_labels`].
    pub labels: Vec<usize>,
    pub labeled_mask: Vec<bool>,
    pub num_classes: usize,
    /// Labels before corruption, kept for auditing and evaluation.
    pub clean_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::shape("Dataset::new", features.rows(), labels.len()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        let n = labels.len();
        Ok(Self {
            features,
            labels,
            labeled_mask: vec![true; n],
            num_classes,
            clean_labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled_mask.iter().filter(|&&m| m).count()
    }

    /// The training label of row `i`, if that row is in the labeled partition.
    pub fn visible_label(&self, i: usize) -> Option<usize> {
        self.labeled_mask[i].then(|| self.labels[i])
    }

    /// Uncorrupted labels for evaluation.
    pub fn ground_truth(&self) -> &[usize] {
        self.clean_labels.as_deref().unwrap_or(&self.labels)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            labeled_mask: indices.iter().map(|&i| self.labeled_mask[i]).collect(),
            num_classes: self.num_classes,
            clean_labels: self
                .clean_labels
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in self.ground_truth() {
            counts[y] += 1;
        }
        counts
    }

    /// CSV with header `x0,...,x{d-1},label,labeled`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|c| format!("x{c}")).collect();
        writeln!(out, "{},label,labeled", header.join(","))?;
        for i in 0..self.len() {
            for v in self.features.row(i) {
                write!(out, "{v},")?;
            }
            writeln!(out, "{},{}", self.labels[i], u8::from(self.labeled_mask[i]))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }
}

/// Keeps exactly `num_labeled` rows labeled; `balanced` picks `num_labeled / K` per class.
pub fn split_labeled(
    ds: &Dataset,
    num_labeled: usize,
    rng: &mut Rng,
    balanced: bool,
) -> Result<Dataset> {
    let n = ds.len();
    if num_labeled > n {
        return Err(Error::InvalidArgument(format!(
            "cannot label {num_labeled} of {n} rows"
        )));
    }
    let mut mask = vec![false; n];
    if balanced {
        let k = ds.num_classes;
        if !num_labeled.is_multiple_of(k) {
            return Err(Error::InvalidArgument(format!(
                "balanced split needs a label count divisible by {k}, got {num_labeled}"
            )));
        }
        let per_class = num_labeled / k;
        let order = rng.permutation(n);
        let mut taken = vec![0usize; k];
        for &i in &order {
            let y = ds.ground_truth()[i];
            if taken[y] < per_class {
                taken[y] += 1;
                mask[i] = true;
            }
        }
        if let Some(class) = taken.iter().position(|&t| t < per_class) {
            return Err(Error::InvalidArgument(format!(
                "class {class} has only {} rows, {per_class} requested",
                taken[class]
            )));
        }
    } else {
        for i in rng.permutation(n).into_iter().take(num_labeled) {
            mask[i] = true;
        }
    }
    let mut out = ds.clone();
    out.labeled_mask = mask;
    Ok(out)
}

/// Replaces the labels of `⌊fraction·N⌋` uniformly chosen rows with uniform random classes.
pub fn corrupt_labels(ds: &Dataset, fraction: f64, rng: &mut Rng) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "corruption fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if ds.labeled_mask.iter().any(|&m| !m) {
        return Err(Error::InvalidArgument(
            "label corruption applies to fully labeled datasets".into(),
        ));
    }
    let count = (fraction * ds.len() as f64).floor() as usize;
    let mut out = ds.clone();
    if out.clean_labels.is_none() {
        out.clean_labels = Some(ds.labels.clone());
    }
    for i in rng.permutation(ds.len()).into_iter().take(count) {
        out.labels[i] = rng.below(ds.num_classes);
    }
    Ok(out)
}
