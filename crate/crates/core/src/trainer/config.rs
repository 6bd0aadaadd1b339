use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Perturbation;
use crate::sntg::GraphMode;
use crate::teachers::TeacherKind;

/// Every knob of a training run. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub teacher: TeacherKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_lr: f64,
    /// Consistency weight `λ₁`.
    pub lambda1: f64,
    /// `λ₂ = k_ratio · λ₁`.
    pub k_ratio: f64,
    /// Include the consistency term `R_C`.
    pub consistency: bool,
    /// Include the graph term `R_S`.
    pub sntg: bool,
    /// Multiply both unsupervised weights by the labeled fraction `L/N`.
    pub scale_by_label_fraction: bool,
    pub margin: f64,
    /// Pairs sampled per batch; defaults to half the batch size.
    pub pairs: Option<usize>,
    pub rampup_length: usize,
    pub rampdown_length: usize,
    /// Ramp the learning rate up together with the unsupervised weight.
    pub lr_rampup: bool,
    pub input_noise: f64,
    pub layer_noise: f64,
    pub dropout: f64,
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
    pub entropy_weight: f64,
    /// Multiply the entropy term by the ramp-up weight `w(t)`.
    pub entropy_ramped: bool,
    /// Divide the squared consistency distance by the class count.
    pub consistency_per_class: bool,
    pub tempens_momentum: f64,
    /// Mean-teacher EMA decay during ramp-up, and after it.
    pub ema_decay: f64,
    pub ema_decay_late: f64,
    pub graph: GraphMode,
    pub knn_k: usize,
    /// Use known labels instead of teacher targets for labeled rows of the graph.
    pub graph_true_labels: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            teacher: TeacherKind::SharedNoisy,
            epochs: 500,
            batch_size: 100,
            max_lr: 0.001,
            lambda1: 100.0,
            k_ratio: 0.4,
            consistency: true,
            sntg: true,
            scale_by_label_fraction: false,
            margin: 1.0,
            pairs: None,
            rampup_length: 80,
            rampdown_length: 50,
            lr_rampup: true,
            input_noise: 0.15,
            layer_noise: 0.0,
            dropout: 0.0,
            hidden: vec![100, 100, 100],
            leaky_slope: 0.1,
            entropy_weight: 0.0,
            entropy_ramped: true,
            consistency_per_class: true,
            tempens_momentum: 0.6,
            ema_decay: 0.99,
            ema_decay_late: 0.999,
            graph: GraphMode::Teacher,
            knn_k: 10,
            graph_true_labels: false,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
        }
    }
}

impl TrainConfig {
    /// Effective consistency weight (0 when the term is switched off).
    pub fn consistency_weight(&self) -> f64 {
        if self.consistency {
            self.lambda1
        } else {
            0.0
        }
    }

    /// Effective graph weight `λ₂ = k·λ₁` (0 when the term is switched off).
    pub fn sntg_weight(&self) -> f64 {
        if self.sntg {
            self.k_ratio * self.lambda1
        } else {
            0.0
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.unwrap_or((self.batch_size / 2).max(1))
    }

    pub fn perturbation(&self) -> Result<Perturbation> {
        Perturbation::new(self.input_noise, self.layer_noise, self.dropout)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.epochs == 0 {
            return fail("epochs must be positive".into());
        }
        if self.batch_size < 2 {
            return fail(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            ));
        }
        if self.rampup_length + self.rampdown_length > self.epochs {
            return fail(format!(
                "rampup_length + rampdown_length ({} + {}) exceeds epochs ({})",
                self.rampup_length, self.rampdown_length, self.epochs
            ));
        }
        for (name, v) in [
            ("max_lr", self.max_lr),
            ("lambda1", self.lambda1),
            ("k_ratio", self.k_ratio),
            ("entropy_weight", self.entropy_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.margin.is_nan() || self.margin <= 0.0 {
            return fail(format!("margin must be > 0, got {}", self.margin));
        }
        if self.pair_count() == 0 {
            return fail("pairs must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("hidden must list at least one positive width".into());
        }
        for (name, v) in [
            ("tempens_momentum", self.tempens_momentum),
            ("ema_decay", self.ema_decay),
            ("ema_decay_late", self.ema_decay_late),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.tempens_momentum >= 1.0 {
            return fail("tempens_momentum must be < 1".into());
        }
        if self.graph == GraphMode::Knn && self.knn_k == 0 {
            return fail("knn_k must be positive".into());
        }
        self.perturbation()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_settings() {
        let c = TrainConfig::default();
        assert_eq!(c.lambda1, 100.0);
        assert_eq!(c.k_ratio, 0.4);
        assert!((c.sntg_weight() - 40.0).abs() < 1e-12);
        assert_eq!(c.pair_count(), 50);
        assert_eq!((c.adam_beta1, c.adam_beta2), (0.9, 0.999));
        assert_eq!(c.hidden, vec![100, 100, 100]);
        c.validate().unwrap();
    }

    #[test]
    fn switches_zero_the_weights() {
        let c = TrainConfig {
            consistency: false,
            sntg: false,
            ..TrainConfig::default()
        };
        assert_eq!(c.consistency_weight(), 0.0);
        assert_eq!(c.sntg_weight(), 0.0);
    }

    #[test]
    fn validation_catches_bad_ramps() {
        let c = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            dropout: 1.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
