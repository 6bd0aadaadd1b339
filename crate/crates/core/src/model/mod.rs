//! The student network `f = g ∘ h`: a leaky-ReLU MLP whose penultimate activation
//! is the feature map `h` and whose softmax head is the classifier `g`.

mod adam;
mod checkpoint;
mod loss;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_arrays, write_arrays, NamedArray};
pub use loss::{
    cross_entropy, cross_entropy_grad, entropy_grad, entropy_loss, softmax_backward,
    supervised_loss, CrossEntropy, LOG_CLAMP,
};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_noise, leaky_relu_scalar, softmax_rows, Matrix, Rng};

/// One affine map `x ↦ x·W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.fan_in(), self.fan_out())
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.weights.shape() == other.weights.shape() && self.bias.len() == other.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.as_slice().iter().chain(self.bias.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .as_mut_slice()
            .iter_mut()
            .chain(self.bias.iter_mut())
    }
}

/// Parameter-shaped gradient container, one entry per layer.
pub type Gradients = Vec<Layer>;

/// Stochastic perturbations `ξ` applied during a training-time forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub input_noise_sd: f64,
    pub layer_noise_sd: f64,
    pub dropout_rate: f64,
    pub enabled: bool,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        input_noise_sd: 0.0,
        layer_noise_sd: 0.0,
        dropout_rate: 0.0,
        enabled: false,
    };

    pub fn new(input_noise_sd: f64, layer_noise_sd: f64, dropout_rate: f64) -> Result<Self> {
        if !(input_noise_sd >= 0.0 && layer_noise_sd >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise standard deviations must be >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {dropout_rate}"
            )));
        }
        Ok(Self {
            input_noise_sd,
            layer_noise_sd,
            dropout_rate,
            enabled: true,
        })
    }

    fn active(&self) -> bool {
        self.enabled
            && (self.input_noise_sd > 0.0 || self.layer_noise_sd > 0.0 || self.dropout_rate > 0.0)
    }
}

#[derive(Debug, Clone)]
struct HiddenRecord {
    input: Matrix,
    pre_activation: Matrix,
    /// Inverted-dropout multipliers (0 or 1/(1−rate)); absent when no dropout ran.
    mask: Option<Matrix>,
}

/// Outputs of one forward pass plus the intermediates backpropagation needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `h(x)`: the input to the final affine map, `n × p`.
    pub features: Matrix,
    pub logits: Matrix,
    /// `f(x)`: softmax class probabilities, `n × K`.
    pub probs: Matrix,
    records: Option<Vec<HiddenRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub leaky_slope: f64,
}

impl Mlp {
    /// `widths` lists every layer width from input to classes, e.g. `[2, 100, 100, 100, 2]`.
    /// Weights use He-style uniform initialization for leaky ReLU; biases are uniform in
    /// `±1/√fan_in`, so hidden units do not all switch at the origin.
    pub fn new(widths: &[usize], leaky_slope: f64, rng: &mut Rng) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidArgument(
                "an MLP needs an input width, at least one hidden width and a class count".into(),
            ));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&leaky_slope) {
            return Err(Error::InvalidArgument(format!(
                "leaky slope must lie in [0, 1), got {leaky_slope}"
            )));
        }
        let gain = 2.0 / (1.0 + leaky_slope * leaky_slope);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (3.0 * gain / w[0] as f64).sqrt();
                let weights = Matrix::from_fn(w[0], w[1], |_, _| rng.uniform_range(-bound, bound));
                let bias_bound = 1.0 / (w[0] as f64).sqrt();
                let bias = (0..w[1])
                    .map(|_| rng.uniform_range(-bias_bound, bias_bound))
                    .collect();
                Layer { weights, bias }
            })
            .collect();
        Ok(Self {
            layers,
            leaky_slope,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, leaky_slope: f64) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least two layers".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    pair[0].fan_out(),
                    format!("layer {} input {}", i + 1, pair[1].fan_in()),
                ));
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    layer.fan_out(),
                    layer.bias.len(),
                ));
            }
        }
        Ok(Self {
            layers,
            leaky_slope,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    /// Width `p` of the feature map `h`.
    pub fn feature_dim(&self) -> usize {
        self.layers.last().expect("non-empty").fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("non-empty").fan_out()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.values().count()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn zero_gradients(&self) -> Gradients {
        self.layers.iter().map(Layer::zeros_like).collect()
    }

    /// Forward pass recording intermediates. With `pert` enabled, input noise is added
    /// to `x`, and every hidden activation receives Gaussian noise followed by inverted
    /// dropout. Each perturbation source draws from its own fork of `rng`.
    pub fn forward(&self, x: &Matrix, pert: &Perturbation, rng: &Rng) -> Result<ForwardPass> {
        self.run(x, pert, rng, true)
    }

    /// Deterministic forward pass without perturbations or recorded intermediates.
    pub fn predict(&self, x: &Matrix) -> Result<ForwardPass> {
        self.run(x, &Perturbation::NONE, &Rng::new(0), false)
    }

    fn run(&self, x: &Matrix, pert: &Perturbation, rng: &Rng, record: bool) -> Result<ForwardPass> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("Mlp::forward", self.input_dim(), x.cols()));
        }
        let perturb = pert.active();
        let n = x.rows();
        let mut activation = if perturb && pert.input_noise_sd > 0.0 {
            x.add(&gaussian_noise(
                n,
                x.cols(),
                pert.input_noise_sd,
                &mut rng.fork(0),
            )?)?
        } else {
            x.clone()
        };

        let (hidden, head) = self.layers.split_at(self.layers.len() - 1);
        let mut records = Vec::with_capacity(if record { hidden.len() } else { 0 });
        for (l, layer) in hidden.iter().enumerate() {
            let mut pre = activation.matmul(&layer.weights)?;
            pre.add_row_vector(&layer.bias)?;
            let slope = self.leaky_slope;
            let mut out = pre.map(|v| leaky_relu_scalar(v, slope));
            let mut mask = None;
            if perturb {
                let mut layer_rng = rng.fork(l as u64 + 1);
                if pert.layer_noise_sd > 0.0 {
                    let noise = gaussian_noise(n, out.cols(), pert.layer_noise_sd, &mut layer_rng)?;
                    out.add_assign(&noise)?;
                }
                if pert.dropout_rate > 0.0 {
                    let keep = 1.0 - pert.dropout_rate;
                    let m = Matrix::from_fn(n, out.cols(), |_, _| {
                        if layer_rng.uniform() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out = out.hadamard(&m)?;
                    mask = Some(m);
                }
            }
            if record {
                records.push(HiddenRecord {
                    input: activation,
                    pre_activation: pre,
                    mask,
                });
            }
            activation = out;
        }

        let head = &head[0];
        let mut logits = activation.matmul(&head.weights)?;
        logits.add_row_vector(&head.bias)?;
        let probs = softmax_rows(&logits);
        Ok(ForwardPass {
            features: activation,
            logits,
            probs,
            records: record.then_some(records),
        })
    }

    /// Gradients of a scalar loss given its partial derivatives with respect to the
    /// logits and (optionally) the features `h`. Perturbation realizations recorded in
    /// `pass` are held fixed.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        d_logits: &Matrix,
        d_features: Option<&Matrix>,
    ) -> Result<Gradients> {
        let records = pass.records.as_ref().ok_or(Error::MissingIntermediates)?;
        if d_logits.shape() != pass.logits.shape() {
            return Err(Error::shape(
                "Mlp::backward logits",
                format!("{:?}", pass.logits.shape()),
                format!("{:?}", d_logits.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let head = self.layers.last().expect("non-empty");
        grads.push(Layer {
            weights: pass.features.t_matmul(d_logits)?,
            bias: d_logits.column_sums(),
        });
        let mut d_act = d_logits.matmul_t(&head.weights)?;
        if let Some(df) = d_features {
            d_act.add_assign(df)?;
        }

        let slope = self.leaky_slope;
        for (layer, rec) in self.layers[..self.layers.len() - 1]
            .iter()
            .zip(records)
            .rev()
        {
            if let Some(mask) = &rec.mask {
                d_act = d_act.hadamard(mask)?;
            }
            let d_pre = d_act.zip_with(&rec.pre_activation, "leaky backward", |g, z| {
                if z >= 0.0 {
                    g
                } else {
                    slope * g
                }
            })?;
            grads.push(Layer {
                weights: rec.input.t_matmul(&d_pre)?,
                bias: d_pre.column_sums(),
            });
            d_act = d_pre.matmul_t(&layer.weights)?;
        }
        grads.reverse();
        Ok(grads)
    }

    /// `self ← α·self + (1−α)·other`, elementwise over every parameter.
    pub fn ema_update(&mut self, other: &Mlp, alpha: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "Mlp::ema_update",
                "matching layer shapes",
                "different shapes",
            ));
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in mine.values_mut().zip(theirs.values()) {
                *a = alpha * *a + (1.0 - alpha) * b;
            }
        }
        Ok(())
    }

    /// Flattened parameters in layer order (weights row-major, then bias).
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.values().copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::shape(
                "Mlp::set_flat_parameters",
                self.num_parameters(),
                values.len(),
            ));
        }
        let mut it = values.iter();
        for layer in &mut self.layers {
            for v in layer.values_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

pub fn flatten_gradients(grads: &Gradients) -> Vec<f64> {
    grads.iter().flat_map(|l| l.values().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(seed: u64) -> Mlp {
        Mlp::new(&[3, 5, 4, 2], 0.1, &mut Rng::new(seed)).unwrap()
    }

    fn inputs() -> Matrix {
        Matrix::from_fn(6, 3, |r, c| ((r * 3 + c) as f64 * 0.7).sin())
    }

    #[test]
    fn shapes_chain() {
        let m = toy(0);
        assert_eq!(m.input_dim(), 3);
        assert_eq!(m.feature_dim(), 4);
        assert_eq!(m.num_classes(), 2);
        assert_eq!(m.num_parameters(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        assert!(Mlp::new(&[3, 2], 0.1, &mut Rng::new(0)).is_err());
        assert!(Mlp::from_layers(vec![Layer::zeros(3, 4), Layer::zeros(5, 2)], 0.1).is_err());
    }

    #[test]
    fn deterministic_without_perturbation() {
        let m = toy(1);
        let a = m
            .forward(&inputs(), &Perturbation::NONE, &Rng::new(1))
            .unwrap();
        let b = m
            .forward(&inputs(), &Perturbation::NONE, &Rng::new(2))
            .unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.probs, b.probs);
        for row in a.probs.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_pass_reproducible_per_seed() {
        let m = toy(1);
        let pert = Perturbation::new(0.1, 0.2, 0.3).unwrap();
        let a = m.forward(&inputs(), &pert, &Rng::new(5)).unwrap();
        let b = m.forward(&inputs(), &pert, &Rng::new(5)).unwrap();
        let c = m.forward(&inputs(), &pert, &Rng::new(6)).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_ne!(a.probs, c.probs);
    }

    #[test]
    fn zero_head_gives_uniform() {
        let mut m = toy(2);
        let last = m.layers.len() - 1;
        m.layers[last] = Layer::zeros(4, 2);
        let out = m.predict(&inputs()).unwrap();
        assert!(out.probs.as_slice().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn predict_has_no_intermediates() {
        let m = toy(3);
        let pass = m.predict(&inputs()).unwrap();
        let err = m.backward(&pass, &Matrix::zeros(6, 2), None).unwrap_err();
        assert!(matches!(err, Error::MissingIntermediates));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        assert!(toy(0).predict(&Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        // single hidden unit; the head's input is the dropped-out activation
        let layers = vec![
            Layer {
                weights: Matrix::from_rows(&[[1.0]]).unwrap(),
                bias: vec![0.0],
            },
            Layer::zeros(1, 2),
        ];
        let m = Mlp::from_layers(layers, 0.1).unwrap();
        let x = Matrix::filled(100_000, 1, 2.0);
        let pert = Perturbation::new(0.0, 0.0, 0.5).unwrap();
        let pass = m.forward(&x, &pert, &Rng::new(12)).unwrap();
        let mean = pass.features.sum() / 100_000.0;
        assert!((mean - 2.0).abs() / 2.0 < 0.01, "mean {mean}");
    }

    #[test]
    fn ema_limits() {
        let student = toy(4);
        let mut frozen = toy(5);
        let original = frozen.clone();
        frozen.ema_update(&student, 1.0).unwrap();
        assert_eq!(frozen, original);
        frozen.ema_update(&student, 0.0).unwrap();
        assert_eq!(frozen, student);
        let other = Mlp::new(&[3, 6, 2], 0.1, &mut Rng::new(0)).unwrap();
        assert!(frozen.ema_update(&other, 0.5).is_err());
    }

    #[test]
    fn flat_roundtrip() {
        let m = toy(6);
        let mut z = toy(7);
        z.set_flat_parameters(&m.flat_parameters()).unwrap();
        assert_eq!(z, m);
    }
}
