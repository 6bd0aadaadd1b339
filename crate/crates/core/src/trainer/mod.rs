//! Mini-batch training loop: student pass, teacher targets, pair graph, composite loss,
//! Adam step, teacher update; plus evaluation, metrics and embedding export.

mod config;
mod schedule;
mod stats;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub use config::TrainConfig;
pub use schedule::{rampdown_factor, rampup_weight};
pub use stats::{mean, std_dev, student_t_two_sided, variance, welch_t_test, TTest};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    adam_step, cross_entropy, cross_entropy_grad, entropy_grad, entropy_loss, softmax_backward,
    AdamState, Mlp, Perturbation,
};
use crate::numerics::{pca_project, Matrix, Rng};
use crate::sntg::{
    fixed_knn_graph, hard_targets, pair_weight, sample_pairs, sntg_grad, sntg_loss, GraphMode,
    GraphSource,
};
use crate::teachers::{consistency_grad, consistency_loss, Teacher, TeacherKind};

/// Independent RNG streams forked from the master generator.
mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const STUDENT_NOISE: u64 = 3;
    pub const TEACHER_NOISE: u64 = 4;
    pub const PAIRS: u64 = 5;
}

/// Loss components of one optimizer step and the weights they were combined with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub supervised: f64,
    pub consistency: f64,
    pub sntg: f64,
    pub entropy: f64,
    pub unsup_weight: f64,
    pub consistency_weight: f64,
    /// Zero while the teacher is warming up.
    pub sntg_weight: f64,
    pub entropy_weight: f64,
    pub total: f64,
    pub neighbor_fraction: f64,
    pub warm_up: bool,
    pub saturated: usize,
}

impl StepLosses {
    /// `supervised + w·(λ₁·consistency + λ₂·sntg) + β·entropy`, from the recorded parts.
    pub fn recompose(&self) -> f64 {
        self.supervised
            + self.unsup_weight
                * (self.consistency_weight * self.consistency + self.sntg_weight * self.sntg)
            + self.entropy_weight * self.entropy
    }
}

/// Per-epoch record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    pub unsup_weight: f64,
    pub supervised: f64,
    pub consistency: f64,
    pub sntg: f64,
    pub entropy: f64,
    pub total: f64,
    /// Error (%) over all training rows against ground truth.
    pub train_error: f64,
    /// Error (%) over the evaluation set.
    pub test_error: f64,
    pub neighbor_fraction: f64,
    pub teacher_warm_up: bool,
    pub saturated: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainMetrics {
    pub epochs: Vec<EpochMetrics>,
}

pub const METRICS_HEADER: &str = "epoch,learning_rate,unsup_weight,supervised,consistency,sntg,entropy,total,train_error,test_error,neighbor_fraction,teacher_warm_up,saturated";

impl TrainMetrics {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn final_test_error(&self) -> f64 {
        self.last().map_or(f64::NAN, |m| m.test_error)
    }

    /// Deterministic metrics CSV; wall-clock times go to [`TrainMetrics::write_timings`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{METRICS_HEADER}")?;
        for m in &self.epochs {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{},{}",
                m.epoch,
                m.learning_rate,
                m.unsup_weight,
                m.supervised,
                m.consistency,
                m.sntg,
                m.entropy,
                m.total,
                m.train_error,
                m.test_error,
                m.neighbor_fraction,
                u8::from(m.teacher_warm_up),
                m.saturated
            )?;
        }
        Ok(())
    }

    pub fn write_timings<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,seconds")?;
        for m in &self.epochs {
            writeln!(out, "{},{:.6}", m.epoch, m.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub teacher: Teacher,
    pub metrics: TrainMetrics,
}

/// Resolves the graph source a config asks for. Frozen graphs need targets from a
/// separately trained model and must be built with
/// [`crate::sntg::frozen_prediction_graph`].
pub fn graph_source_for(config: &TrainConfig, train: &Dataset) -> Result<GraphSource> {
    match config.graph {
        GraphMode::Teacher => Ok(GraphSource::Teacher),
        GraphMode::Soft => Ok(GraphSource::Soft),
        GraphMode::Knn => Ok(GraphSource::Knn(fixed_knn_graph(
            &train.features,
            config.knn_k,
        )?)),
        GraphMode::Frozen => Err(Error::InvalidArgument(
            "a frozen-prediction graph needs a pre-trained model".into(),
        )),
    }
}

/// Stateful training run over one dataset.
pub struct Trainer<'a> {
    config: TrainConfig,
    train: &'a Dataset,
    eval: Option<&'a Dataset>,
    graph: GraphSource,
    pert: Perturbation,
    rng: Rng,
    pub model: Mlp,
    pub teacher: Teacher,
    adam: AdamState,
    step: u64,
    unsup_scale: f64,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: &TrainConfig,
        train: &'a Dataset,
        eval: Option<&'a Dataset>,
        graph: GraphSource,
        rng: &Rng,
    ) -> Result<Self> {
        config.validate()?;
        if train.len() < 2 {
            return Err(Error::InvalidArgument(
                "training set needs at least 2 rows".into(),
            ));
        }
        if let Some(e) = eval {
            if e.dim() != train.dim() {
                return Err(Error::shape("evaluation set", train.dim(), e.dim()));
            }
        }
        if let GraphSource::Frozen(t) = &graph {
            if t.len() != train.len() {
                return Err(Error::shape("frozen graph targets", train.len(), t.len()));
            }
        }
        let mut widths = vec![train.dim()];
        widths.extend(&config.hidden);
        widths.push(train.num_classes);
        let model = Mlp::new(&widths, config.leaky_slope, &mut rng.fork(streams::INIT))?;
        let momentum = match config.teacher {
            TeacherKind::TemporalEnsemble => config.tempens_momentum,
            _ => config.ema_decay,
        };
        let teacher = Teacher::new(config.teacher, &model, train.len(), momentum)?;
        let adam = AdamState::with_betas(&model, config.adam_beta1, config.adam_beta2);
        let unsup_scale = if config.scale_by_label_fraction {
            train.num_labeled() as f64 / train.len() as f64
        } else {
            1.0
        };
        Ok(Self {
            config: config.clone(),
            train,
            eval,
            graph,
            pert: config.perturbation()?,
            rng: rng.clone(),
            model,
            teacher,
            adam,
            step: 0,
            unsup_scale,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let c = &self.config;
        let up = if c.lr_rampup {
            rampup_weight(epoch, c.rampup_length)
        } else {
            1.0
        };
        c.max_lr * up * rampdown_factor(epoch, c.epochs, c.rampdown_length)
    }

    fn ema_momentum(&self, epoch: usize) -> f64 {
        let c = &self.config;
        let target = if epoch < c.rampup_length {
            c.ema_decay
        } else {
            c.ema_decay_late
        };
        // early steps average over the short history available
        target.min(1.0 - 1.0 / (self.step as f64 + 1.0))
    }

    /// One optimizer step on the dataset rows `indices`. Returns the loss components and
    /// the student's probabilities for the batch.
    pub fn step(
        &mut self,
        epoch: usize,
        batch: usize,
        indices: &[usize],
    ) -> Result<(StepLosses, Matrix)> {
        let c = &self.config;
        let x = self.train.features.select_rows(indices);
        let n = indices.len();

        let student_rng = self
            .rng
            .fork(streams::STUDENT_NOISE)
            .fork(epoch as u64)
            .fork(batch as u64);
        let teacher_rng = self
            .rng
            .fork(streams::TEACHER_NOISE)
            .fork(epoch as u64)
            .fork(batch as u64);
        let mut pair_rng = self
            .rng
            .fork(streams::PAIRS)
            .fork(epoch as u64)
            .fork(batch as u64);

        let pass = self.model.forward(&x, &self.pert, &student_rng)?;
        let targets = self
            .teacher
            .targets(&self.model, &x, indices, &self.pert, &teacher_rng)?;

        let labels: Vec<Option<usize>> = indices
            .iter()
            .map(|&i| self.train.visible_label(i))
            .collect();
        let pairs = if n >= 2 {
            let skeleton = sample_pairs(n, c.pair_count(), &mut pair_rng)?;
            if c.graph_true_labels && self.graph.mode() == GraphMode::Teacher {
                let mut hard = hard_targets(&targets.probs);
                for (h, l) in hard.iter_mut().zip(&labels) {
                    if let Some(y) = l {
                        *h = *y;
                    }
                }
                skeleton.with_weights(|i, j| pair_weight(hard[i], hard[j]))
            } else {
                self.graph.weigh(skeleton, indices, &targets.probs)
            }
        } else {
            Default::default()
        };

        let w = rampup_weight(epoch, c.rampup_length);
        let lambda1 = c.consistency_weight() * self.unsup_scale;
        // a warming-up teacher has no predictions to build a graph from
        let teacher_graph = matches!(self.graph.mode(), GraphMode::Teacher | GraphMode::Soft);
        let lambda2 = if targets.warm_up && teacher_graph {
            0.0
        } else {
            c.sntg_weight() * self.unsup_scale
        };
        let beta = c.entropy_weight * if c.entropy_ramped { w } else { 1.0 };

        let ce = cross_entropy(&pass.probs, &labels)?;
        let cons = consistency_loss(&targets.probs, &pass.probs, c.consistency_per_class)?;
        let graph_loss = sntg_loss(&pass.features, &pairs, c.margin)?;
        let ent = entropy_loss(&pass.probs);
        let mut losses = StepLosses {
            supervised: ce.value,
            consistency: cons,
            sntg: graph_loss,
            entropy: ent,
            unsup_weight: w,
            consistency_weight: lambda1,
            sntg_weight: lambda2,
            entropy_weight: beta,
            total: 0.0,
            neighbor_fraction: pairs.neighbor_fraction(),
            warm_up: targets.warm_up,
            saturated: ce.saturated,
        };
        losses.total = losses.recompose();
        if !losses.total.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss at epoch {epoch}, batch {batch}"
            )));
        }

        let mut d_logits = cross_entropy_grad(&pass.probs, &labels)?;
        if w * lambda1 != 0.0 {
            let mut d_probs =
                consistency_grad(&targets.probs, &pass.probs, c.consistency_per_class)?;
            d_probs.scale_inplace(w * lambda1);
            d_logits.add_assign(&softmax_backward(&pass.probs, &d_probs)?)?;
        }
        if beta != 0.0 {
            d_logits.axpy(beta, &entropy_grad(&pass.probs))?;
        }
        let d_features = if w * lambda2 != 0.0 {
            let mut g = sntg_grad(&pass.features, &pairs, c.margin)?;
            g.scale_inplace(w * lambda2);
            Some(g)
        } else {
            None
        };
        let grads = self.model.backward(&pass, &d_logits, d_features.as_ref())?;
        let lr = self.learning_rate(epoch);
        adam_step(&mut self.model, &grads, &mut self.adam, lr).map_err(|e| match e {
            Error::NonFinite(what) => {
                Error::NonFinite(format!("{what} at epoch {epoch}, batch {batch}"))
            }
            other => other,
        })?;
        self.step += 1;
        let momentum = self.ema_momentum(epoch);
        self.teacher.parameter_update(&self.model, momentum)?;
        Ok((losses, pass.probs))
    }

    /// Runs one full epoch and returns its metrics.
    pub fn run_epoch(&mut self, epoch: usize) -> Result<EpochMetrics> {
        let started = Instant::now();
        let n = self.train.len();
        let order = self
            .rng
            .fork(streams::SHUFFLE)
            .fork(epoch as u64)
            .permutation(n);
        let record = self.teacher.kind() == TeacherKind::TemporalEnsemble;
        let mut epoch_predictions = if record {
            Matrix::zeros(n, self.train.num_classes)
        } else {
            Matrix::zeros(0, 0)
        };

        let mut sums = [0.0f64; 6];
        let mut batches = 0usize;
        let mut warm_up = false;
        let mut saturated = 0;
        for (b, indices) in order.chunks(self.config.batch_size).enumerate() {
            let (losses, probs) = self.step(epoch, b, indices)?;
            for (s, v) in sums.iter_mut().zip([
                losses.supervised,
                losses.consistency,
                losses.sntg,
                losses.entropy,
                losses.total,
                losses.neighbor_fraction,
            ]) {
                *s += v;
            }
            warm_up |= losses.warm_up;
            saturated += losses.saturated;
            batches += 1;
            if record {
                for (r, &i) in indices.iter().enumerate() {
                    epoch_predictions.row_mut(i).copy_from_slice(probs.row(r));
                }
            }
        }
        if record {
            self.teacher.epoch_update(&epoch_predictions)?;
        }

        let train_error = evaluate(&self.model, self.train)?;
        let test_error = match self.eval {
            Some(e) => evaluate(&self.model, e)?,
            None => train_error,
        };
        let b = batches as f64;
        Ok(EpochMetrics {
            epoch,
            learning_rate: self.learning_rate(epoch),
            unsup_weight: rampup_weight(epoch, self.config.rampup_length),
            supervised: sums[0] / b,
            consistency: sums[1] / b,
            sntg: sums[2] / b,
            entropy: sums[3] / b,
            total: sums[4] / b,
            train_error,
            test_error,
            neighbor_fraction: sums[5] / b,
            teacher_warm_up: warm_up,
            saturated,
            seconds: started.elapsed().as_secs_f64(),
        })
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut metrics = TrainMetrics::default();
        for epoch in 0..self.config.epochs {
            metrics.epochs.push(self.run_epoch(epoch)?);
        }
        Ok(TrainOutcome {
            model: self.model,
            teacher: self.teacher,
            metrics,
        })
    }
}

/// Trains on `dataset`, reporting error over the same rows (the transductive setting).
pub fn train(config: &TrainConfig, dataset: &Dataset, rng: &Rng) -> Result<TrainOutcome> {
    let graph = graph_source_for(config, dataset)?;
    Trainer::new(config, dataset, None, graph, rng)?.run()
}

/// Trains with an explicit graph source and optional held-out evaluation set.
pub fn train_with(
    config: &TrainConfig,
    dataset: &Dataset,
    eval: Option<&Dataset>,
    graph: GraphSource,
    rng: &Rng,
) -> Result<TrainOutcome> {
    Trainer::new(config, dataset, eval, graph, rng)?.run()
}

/// Misclassification rate (%) of a noise-free pass against ground-truth labels.
pub fn evaluate(model: &Mlp, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let predicted = predict_labels(model, &dataset.features)?;
    let wrong = predicted
        .iter()
        .zip(dataset.ground_truth())
        .filter(|(p, y)| p != y)
        .count();
    Ok(100.0 * wrong as f64 / dataset.len() as f64)
}

pub fn predict_labels(model: &Mlp, x: &Matrix) -> Result<Vec<usize>> {
    const CHUNK: usize = 2048;
    let mut out = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + CHUNK).min(x.rows());
        let rows: Vec<usize> = (start..end).collect();
        out.extend(hard_targets(&model.predict(&x.select_rows(&rows))?.probs));
        start = end;
    }
    Ok(out)
}

/// Rows of `index,label,pc1,pc2`: the 2-D PCA projection of `h(x)` for every row.
pub fn embedding_rows(model: &Mlp, dataset: &Dataset) -> Result<Vec<(usize, usize, f64, f64)>> {
    let features = model.predict(&dataset.features)?.features;
    let proj = pca_project(&features, 2)?;
    Ok((0..dataset.len())
        .map(|i| (i, dataset.ground_truth()[i], proj.get(i, 0), proj.get(i, 1)))
        .collect())
}

pub fn export_embeddings(model: &Mlp, dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "index,label,pc1,pc2")?;
    for (i, y, a, b) in embedding_rows(model, dataset)? {
        writeln!(out, "{i},{y},{a},{b}")?;
    }
    out.flush()?;
    Ok(())
}

/// Mean pairwise Euclidean distance between same-class points of a 2-D embedding,
/// averaged over classes.
pub fn within_class_spread(rows: &[(usize, usize, f64, f64)], num_classes: usize) -> f64 {
    let mut total = 0.0;
    let mut classes = 0;
    for k in 0..num_classes {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.1 == k)
            .map(|r| (r.2, r.3))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                sum += (pts[a].0 - pts[b].0).hypot(pts[a].1 - pts[b].1);
                count += 1;
            }
        }
        total += sum / count as f64;
        classes += 1;
    }
    total / classes.max(1) as f64
}
