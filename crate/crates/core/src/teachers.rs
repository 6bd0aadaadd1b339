//! Target generators for the three self-ensembling variants.
//!
//! * [`Teacher::SharedNoisy`] (Π model): a second perturbed pass through the student.
//! * [`Teacher::TemporalEnsemble`]: a per-example EMA of past student predictions,
//!   updated once per epoch and debiased by `1 − αᵗ`.
//! * [`Teacher::MeanTeacher`]: a perturbed pass through an EMA of the student's
//!   parameters, updated after every optimizer step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mlp, NamedArray, Perturbation};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeacherKind {
    #[serde(alias = "pi")]
    SharedNoisy,
    #[serde(alias = "tempens")]
    TemporalEnsemble,
    #[serde(alias = "mt")]
    MeanTeacher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalEnsemble {
    /// EMA accumulator `F̃`, one row per training example.
    pub accumulator: Matrix,
    pub momentum: f64,
    /// Number of completed epoch updates `t`.
    pub epoch: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanTeacher {
    pub params: Mlp,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Teacher {
    SharedNoisy,
    TemporalEnsemble(TemporalEnsemble),
    MeanTeacher(MeanTeacher),
}

/// Teacher predictions for one batch.
#[derive(Debug, Clone)]
pub struct Targets {
    pub probs: Matrix,
    /// Set when the teacher has no history yet and returned uniform rows.
    pub warm_up: bool,
}

fn check_momentum(momentum: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&momentum) {
        return Err(Error::InvalidArgument(format!(
            "EMA momentum must lie in [0, 1], got {momentum}"
        )));
    }
    Ok(())
}

impl Teacher {
    pub fn new(
        kind: TeacherKind,
        student: &Mlp,
        num_examples: usize,
        momentum: f64,
    ) -> Result<Self> {
        Ok(match kind {
            TeacherKind::SharedNoisy => Teacher::SharedNoisy,
            TeacherKind::TemporalEnsemble => {
                Teacher::temporal_ensemble(num_examples, student.num_classes(), momentum)?
            }
            TeacherKind::MeanTeacher => Teacher::mean_teacher(student, momentum)?,
        })
    }

    pub fn temporal_ensemble(
        num_examples: usize,
        num_classes: usize,
        momentum: f64,
    ) -> Result<Self> {
        check_momentum(momentum)?;
        if momentum >= 1.0 {
            return Err(Error::InvalidArgument(
                "temporal ensemble momentum must be < 1".into(),
            ));
        }
        Ok(Teacher::TemporalEnsemble(TemporalEnsemble {
            accumulator: Matrix::zeros(num_examples, num_classes),
            momentum,
            epoch: 0,
        }))
    }

    pub fn mean_teacher(student: &Mlp, momentum: f64) -> Result<Self> {
        check_momentum(momentum)?;
        Ok(Teacher::MeanTeacher(MeanTeacher {
            params: student.clone(),
            momentum,
        }))
    }

    pub fn kind(&self) -> TeacherKind {
        match self {
            Teacher::SharedNoisy => TeacherKind::SharedNoisy,
            Teacher::TemporalEnsemble(_) => TeacherKind::TemporalEnsemble,
            Teacher::MeanTeacher(_) => TeacherKind::MeanTeacher,
        }
    }

    /// Targets `f̃` for the batch `x_batch`, whose rows are dataset rows `indices`.
    pub fn targets(
        &self,
        student: &Mlp,
        x_batch: &Matrix,
        indices: &[usize],
        pert: &Perturbation,
        rng: &Rng,
    ) -> Result<Targets> {
        if indices.len() != x_batch.rows() {
            return Err(Error::shape(
                "Teacher::targets indices",
                x_batch.rows(),
                indices.len(),
            ));
        }
        match self {
            Teacher::SharedNoisy => Ok(Targets {
                probs: student.predict_perturbed(x_batch, pert, rng)?,
                warm_up: false,
            }),
            Teacher::MeanTeacher(mt) => Ok(Targets {
                probs: mt.params.predict_perturbed(x_batch, pert, rng)?,
                warm_up: false,
            }),
            Teacher::TemporalEnsemble(te) => {
                let k = te.accumulator.cols();
                if let Some(&bad) = indices.iter().find(|&&i| i >= te.accumulator.rows()) {
                    return Err(Error::InvalidArgument(format!(
                        "row index {bad} outside the {}-row ensemble",
                        te.accumulator.rows()
                    )));
                }
                if te.epoch == 0 {
                    return Ok(Targets {
                        probs: Matrix::filled(indices.len(), k, 1.0 / k as f64),
                        warm_up: true,
                    });
                }
                let debias = 1.0 - te.momentum.powi(te.epoch as i32);
                let mut probs = te.accumulator.select_rows(indices);
                probs.scale_inplace(1.0 / debias);
                Ok(Targets {
                    probs,
                    warm_up: false,
                })
            }
        }
    }

    /// `F̃ ← α·F̃ + (1−α)·predictions; t ← t+1`. No-op for other variants.
    pub fn epoch_update(&mut self, predictions: &Matrix) -> Result<()> {
        if let Teacher::TemporalEnsemble(te) = self {
            if predictions.shape() != te.accumulator.shape() {
                return Err(Error::shape(
                    "temporal ensemble update",
                    format!("{:?}", te.accumulator.shape()),
                    format!("{:?}", predictions.shape()),
                ));
            }
            let alpha = te.momentum;
            te.accumulator.scale_inplace(alpha);
            te.accumulator.axpy(1.0 - alpha, predictions)?;
            te.epoch += 1;
        }
        Ok(())
    }

    /// `θ′ ← α·θ′ + (1−α)·θ`. No-op for other variants.
    pub fn parameter_update(&mut self, student: &Mlp, momentum: f64) -> Result<()> {
        if let Teacher::MeanTeacher(mt) = self {
            check_momentum(momentum)?;
            mt.momentum = momentum;
            mt.params.ema_update(student, momentum)?;
        }
        Ok(())
    }

    pub fn to_arrays(&self) -> Vec<NamedArray> {
        match self {
            Teacher::SharedNoisy => vec![NamedArray::scalar("teacher.kind", 0.0)],
            Teacher::TemporalEnsemble(te) => vec![
                NamedArray::scalar("teacher.kind", 1.0),
                NamedArray::scalar("teacher.momentum", te.momentum),
                NamedArray::scalar("teacher.epoch", f64::from(te.epoch)),
                NamedArray::new("teacher.accumulator", te.accumulator.clone()),
            ],
            Teacher::MeanTeacher(mt) => {
                let mut arrays = vec![
                    NamedArray::scalar("teacher.kind", 2.0),
                    NamedArray::scalar("teacher.momentum", mt.momentum),
                ];
                arrays.extend(mt.params.to_arrays("teacher."));
                arrays
            }
        }
    }

    pub fn from_arrays(arrays: &[NamedArray]) -> Result<Self> {
        let scalar = |name: &str| {
            arrays
                .iter()
                .find(|a| a.name == name)
                .map(|a| a.values.get(0, 0))
                .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))
        };
        match scalar("teacher.kind")? as u32 {
            0 => Ok(Teacher::SharedNoisy),
            1 => {
                let accumulator = arrays
                    .iter()
                    .find(|a| a.name == "teacher.accumulator")
                    .ok_or_else(|| Error::Checkpoint("missing teacher.accumulator".into()))?
                    .values
                    .clone();
                Ok(Teacher::TemporalEnsemble(TemporalEnsemble {
                    accumulator,
                    momentum: scalar("teacher.momentum")?,
                    epoch: scalar("teacher.epoch")? as u32,
                }))
            }
            2 => Ok(Teacher::MeanTeacher(MeanTeacher {
                params: Mlp::from_arrays(arrays, "teacher.")?,
                momentum: scalar("teacher.momentum")?,
            })),
            other => Err(Error::Checkpoint(format!("unknown teacher kind {other}"))),
        }
    }
}

impl Mlp {
    /// Class probabilities from a perturbed pass, without recording intermediates.
    pub fn predict_perturbed(&self, x: &Matrix, pert: &Perturbation, rng: &Rng) -> Result<Matrix> {
        Ok(self.forward(x, pert, rng)?.probs)
    }
}

/// `(1/|B|) Σ_i ‖f̃_i − f_i‖² / K` when `per_class` is set, otherwise without the `1/K`.
pub fn consistency_loss(targets: &Matrix, probs: &Matrix, per_class: bool) -> Result<f64> {
    check_pair(targets, probs)?;
    if probs.rows() == 0 {
        return Ok(0.0);
    }
    let sq: f64 = targets
        .as_slice()
        .iter()
        .zip(probs.as_slice())
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok(sq / normalizer(probs, per_class))
}

/// Derivative of [`consistency_loss`] with respect to the student probabilities;
/// the targets are constants.
pub fn consistency_grad(targets: &Matrix, probs: &Matrix, per_class: bool) -> Result<Matrix> {
    check_pair(targets, probs)?;
    let scale = 2.0 / normalizer(probs, per_class);
    probs.zip_with(targets, "consistency_grad", |p, t| scale * (p - t))
}

fn normalizer(probs: &Matrix, per_class: bool) -> f64 {
    let n = probs.rows().max(1) as f64;
    if per_class {
        n * probs.cols() as f64
    } else {
        n
    }
}

fn check_pair(targets: &Matrix, probs: &Matrix) -> Result<()> {
    if targets.shape() != probs.shape() {
        return Err(Error::shape(
            "consistency loss",
            format!("{:?}", probs.shape()),
            format!("{:?}", targets.shape()),
        ));
    }
    Ok(())
}
