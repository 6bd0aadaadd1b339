//! Measurements shared by the integration tests and the acceptance report.
//! Each function returns the quantity it measures; callers decide the verdict.

#![allow(dead_code)]

use sntg_core::model::{
    cross_entropy, cross_entropy_grad, entropy_grad, entropy_loss, flatten_gradients,
    softmax_backward, Mlp, Perturbation,
};
use sntg_core::numerics::{softmax_rows, Matrix, Rng};
use sntg_core::sntg::{
    all_pairs_loss, hard_targets, pair_weight, sample_pairs, sntg_grad, sntg_loss, PairBatch,
};
use sntg_core::teachers::{consistency_grad, consistency_loss, Teacher};
use sntg_core::trainer::welch_t_test;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct Weights {
    pub supervised: f64,
    pub consistency: f64,
    pub sntg: f64,
    pub entropy: f64,
}

impl Weights {
    pub const SUPERVISED: Self = Self {
        supervised: 1.0,
        consistency: 0.0,
        sntg: 0.0,
        entropy: 0.0,
    };
    pub const CONSISTENCY: Self = Self {
        supervised: 0.0,
        consistency: 1.0,
        sntg: 0.0,
        entropy: 0.0,
    };
    pub const SNTG: Self = Self {
        supervised: 0.0,
        consistency: 0.0,
        sntg: 1.0,
        entropy: 0.0,
    };
    pub const ENTROPY: Self = Self {
        supervised: 0.0,
        consistency: 0.0,
        sntg: 0.0,
        entropy: 1.0,
    };
    pub const MIXED: Self = Self {
        supervised: 1.0,
        consistency: 3.7,
        sntg: 1.48,
        entropy: 0.25,
    };

    pub const ALL: [(&'static str, Self); 5] = [
        ("supervised", Self::SUPERVISED),
        ("consistency", Self::CONSISTENCY),
        ("sntg", Self::SNTG),
        ("entropy", Self::ENTROPY),
        ("weighted sum", Self::MIXED),
    ];
}

struct Problem {
    x: Matrix,
    labels: Vec<Option<usize>>,
    targets: Matrix,
    pairs: PairBatch,
    pert: Perturbation,
    noise: Rng,
    margin: f64,
}

fn problem(model: &Mlp) -> Problem {
    let mut rng = Rng::new(17);
    let n = 12;
    let x = Matrix::from_fn(n, model.input_dim(), |_, _| rng.standard_normal());
    let labels = (0..n)
        .map(|i| (i % 3 != 0).then_some(i % model.num_classes()))
        .collect();
    let targets = model.predict(&x.map(|v| v * 1.3 + 0.2)).unwrap().probs;
    let hard = hard_targets(&targets);
    let pairs = sample_pairs(n, 20, &mut rng)
        .unwrap()
        .with_weights(|i, j| pair_weight(hard[i], hard[j]));
    Problem {
        x,
        labels,
        targets,
        pairs,
        pert: Perturbation::new(0.1, 0.05, 0.2).unwrap(),
        noise: Rng::new(99),
        margin: 0.5,
    }
}

fn loss(model: &Mlp, p: &Problem, w: Weights) -> f64 {
    let pass = model.forward(&p.x, &p.pert, &p.noise).unwrap();
    w.supervised * cross_entropy(&pass.probs, &p.labels).unwrap().value
        + w.consistency * consistency_loss(&p.targets, &pass.probs, true).unwrap()
        + w.sntg * sntg_loss(&pass.features, &p.pairs, p.margin).unwrap()
        + w.entropy * entropy_loss(&pass.probs)
}

fn analytic(model: &Mlp, p: &Problem, w: Weights) -> Vec<f64> {
    let pass = model.forward(&p.x, &p.pert, &p.noise).unwrap();
    let mut d_logits = cross_entropy_grad(&pass.probs, &p.labels).unwrap();
    d_logits.scale_inplace(w.supervised);
    let mut d_probs = consistency_grad(&p.targets, &pass.probs, true).unwrap();
    d_probs.scale_inplace(w.consistency);
    d_logits
        .add_assign(&softmax_backward(&pass.probs, &d_probs).unwrap())
        .unwrap();
    d_logits
        .axpy(w.entropy, &entropy_grad(&pass.probs))
        .unwrap();
    let mut d_h = sntg_grad(&pass.features, &p.pairs, p.margin).unwrap();
    d_h.scale_inplace(w.sntg);
    flatten_gradients(&model.backward(&pass, &d_logits, Some(&d_h)).unwrap())
}

fn numeric(model: &Mlp, p: &Problem, w: Weights) -> Vec<f64> {
    let theta = model.flat_parameters();
    let mut probe = model.clone();
    (0..theta.len())
        .map(|k| {
            let mut t = theta.clone();
            t[k] = theta[k] + FD_STEP;
            probe.set_flat_parameters(&t).unwrap();
            let up = loss(&probe, p, w);
            t[k] = theta[k] - FD_STEP;
            probe.set_flat_parameters(&t).unwrap();
            let down = loss(&probe, p, w);
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)` between analytic and central-difference gradients
/// on a two-hidden-layer net, plus the analytic gradient norm.
pub fn gradient_error(w: Weights) -> (f64, f64) {
    let model = Mlp::new(&[3, 7, 5, 4], 0.1, &mut Rng::new(4)).unwrap();
    let p = problem(&model);
    let a = analytic(&model, &p, w);
    let n = numeric(&model, &p, w);
    let diff: Vec<f64> = a.iter().zip(&n).map(|(x, y)| x - y).collect();
    (
        norm(&diff) / norm(&a).max(norm(&n)).max(f64::MIN_POSITIVE),
        norm(&a),
    )
}

pub const VARIANCE_DRAWS: u64 = 100_000;

/// Monte-Carlo mean of `Σ‖f(x;ξ′) − f(x;ξ)‖²` and, from an independent stream,
/// the summed per-output variance of `f(x;ξ)`, at fixed θ.
pub fn shared_noise_variance() -> (f64, f64) {
    let model = Mlp::new(&[2, 6, 3], 0.1, &mut Rng::new(3)).unwrap();
    let x = Matrix::from_rows(&[[0.3, -0.8], [1.2, 0.4], [-0.5, 0.9]]).unwrap();
    let pert = Perturbation::new(0.3, 0.2, 0.1).unwrap();
    let pair_stream = Rng::new(1);
    let var_stream = Rng::new(2);

    let mut consistency = 0.0;
    for d in 0..VARIANCE_DRAWS {
        let draw = pair_stream.fork(d);
        let a = model.forward(&x, &pert, &draw.fork(0)).unwrap().probs;
        let b = model.forward(&x, &pert, &draw.fork(1)).unwrap().probs;
        consistency += a
            .sub(&b)
            .unwrap()
            .as_slice()
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
    }
    consistency /= VARIANCE_DRAWS as f64;

    let cells = x.rows() * model.num_classes();
    let mut sum = vec![0.0; cells];
    let mut sum_sq = vec![0.0; cells];
    for d in 0..VARIANCE_DRAWS {
        let f = model.forward(&x, &pert, &var_stream.fork(d)).unwrap().probs;
        for (k, &v) in f.as_slice().iter().enumerate() {
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = VARIANCE_DRAWS as f64;
    let variance = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| (q - s * s / n) / (n - 1.0))
        .sum();
    (consistency, variance)
}

pub const PAIR_DRAWS: usize = 10_000;

/// Mean of the sub-sampled graph loss (n=32, p=8, s=16) and the exact all-pairs value.
pub fn pair_subsampling() -> (f64, f64) {
    let (n, p, s) = (32, 8, 16);
    let mut rng = Rng::new(21);
    let h = Matrix::from_fn(n, p, |_, _| 0.5 * rng.standard_normal());
    let labels: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
    let exact = all_pairs_loss(&h, &labels, 1.0).unwrap();
    let mut total = 0.0;
    for _ in 0..PAIR_DRAWS {
        let pairs = sample_pairs(n, s, &mut rng)
            .unwrap()
            .with_weights(|i, j| pair_weight(labels[i], labels[j]));
        total += sntg_loss(&h, &pairs, 1.0).unwrap();
    }
    (total / PAIR_DRAWS as f64, exact)
}

/// Largest deviation between first-epoch debiased ensemble targets and the predictions.
pub fn debias_error(alpha: f64) -> f64 {
    let mut rng = Rng::new(6);
    let preds = softmax_rows(&Matrix::from_fn(50, 4, |_, _| rng.uniform()));
    let idx: Vec<usize> = (0..50).collect();
    let student = Mlp::new(&[2, 3, 4], 0.1, &mut Rng::new(0)).unwrap();
    let x = Matrix::zeros(50, 2);
    let mut teacher = Teacher::temporal_ensemble(50, 4, alpha).unwrap();
    teacher.epoch_update(&preds).unwrap();
    let t = teacher
        .targets(&student, &x, &idx, &Perturbation::NONE, &Rng::new(1))
        .unwrap();
    assert!(!t.warm_up);
    t.probs
        .as_slice()
        .iter()
        .zip(preds.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub struct WelchCase {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    pub dof: f64,
    pub p: f64,
}

/// Reference rows: two samples with t, dof and p from high-precision quadrature.
pub fn welch_cases() -> Vec<WelchCase> {
    let parse = |s: &str| -> Vec<f64> { s.split(',').map(|v| v.parse().unwrap()).collect() };
    include_str!("../data/welch_oracle.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(';').collect();
            WelchCase {
                a: parse(f[0]),
                b: parse(f[1]),
                t: f[2].parse().unwrap(),
                dof: f[3].parse().unwrap(),
                p: f[4].parse().unwrap(),
            }
        })
        .collect()
}

/// Largest absolute p-value deviation from the reference table and the row count.
pub fn welch_p_error() -> (f64, usize) {
    let cases = welch_cases();
    let worst = cases
        .iter()
        .map(|c| (welch_t_test(&c.a, &c.b).unwrap().p - c.p).abs())
        .fold(0.0, f64::max);
    (worst, cases.len())
}
