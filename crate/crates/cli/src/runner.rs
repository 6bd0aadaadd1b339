//! Seeded execution of experiment variants and their on-disk artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use sntg_core::data::{
    corrupt_labels, gen_four_spins, gen_two_moons, load_mnist_raw, split_labeled, Standardizer,
};
use sntg_core::model::{read_arrays, write_arrays};
use sntg_core::sntg::{fixed_knn_graph, frozen_prediction_graph, GraphMode, GraphSource};
use sntg_core::trainer::{embedding_rows, mean, predict_labels, std_dev, TrainMetrics};
use sntg_core::{train_with, Dataset, Mlp, Rng, TrainConfig};

use crate::error::{CliError, CliResult};
use crate::preset::{DatasetKind, DatasetSpec, Experiment, Variant};
use crate::summary::{Summary, SummaryRow};
use crate::svg;

pub const MNIST_DIR_VAR: &str = "SNTG_MNIST_DIR";
pub const DEFAULT_MNIST_DIR: &str = "data/mnist-5k";

const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Streams forked from a run's seed.
mod streams {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const CORRUPT: u64 = 3;
    pub const TRAIN: u64 = 4;
}

pub fn mnist_dir() -> PathBuf {
    std::env::var_os(MNIST_DIR_VAR).map_or_else(|| PathBuf::from(DEFAULT_MNIST_DIR), PathBuf::from)
}

/// Training set (with labeled mask) and, for MNIST, the held-out test set.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

fn limit(ds: Dataset, rows: Option<usize>) -> Dataset {
    match rows {
        Some(r) if r < ds.len() => ds.subset(&(0..r).collect::<Vec<_>>()),
        _ => ds,
    }
}

fn load_mnist_split(dir: &Path, images: &str, labels: &str) -> CliResult<Dataset> {
    let (img, lab) = (dir.join(images), dir.join(labels));
    for p in [&img, &lab] {
        if !p.exists() {
            return Err(CliError::Data(format!(
                "missing MNIST file {}. Place the four IDX files ({TRAIN_IMAGES}, {TRAIN_LABELS}, \
                 {TEST_IMAGES}, {TEST_LABELS}, uncompressed) in that directory, e.g. from \
                 http://yann.lecun.com/exdb/mnist/, or point {MNIST_DIR_VAR} at them",
                p.display()
            )));
        }
    }
    Ok(load_mnist_raw(img, lab)?)
}

pub fn prepare_data(spec: &DatasetSpec, seed: u64, mnist_dir: &Path) -> CliResult<PreparedData> {
    let master = Rng::new(seed);
    let (full, test) = match spec.kind {
        DatasetKind::TwoMoons => (
            gen_two_moons(spec.points, spec.noise, &mut master.fork(streams::DATA))?,
            None,
        ),
        DatasetKind::FourSpins => (
            gen_four_spins(spec.points, spec.noise, &mut master.fork(streams::DATA))?,
            None,
        ),
        DatasetKind::Mnist => {
            let mut train = limit(
                load_mnist_split(mnist_dir, TRAIN_IMAGES, TRAIN_LABELS)?,
                spec.train_limit,
            );
            let mut test = limit(
                load_mnist_split(mnist_dir, TEST_IMAGES, TEST_LABELS)?,
                spec.test_limit,
            );
            let scaler = Standardizer::fit(&train.features);
            scaler.apply(&mut train.features);
            scaler.apply(&mut test.features);
            (train, Some(test))
        }
    };
    let corrupted = if spec.corrupt > 0.0 {
        corrupt_labels(&full, spec.corrupt, &mut master.fork(streams::CORRUPT))?
    } else {
        full
    };
    let train = match spec.labels {
        Some(l) if l < corrupted.len() => split_labeled(
            &corrupted,
            l,
            &mut master.fork(streams::SPLIT),
            spec.balanced,
        )?,
        _ => corrupted,
    };
    Ok(PreparedData { train, test })
}

/// Baseline whose predictions seed a frozen graph: the same run with the graph term off.
pub fn pretraining_config(config: &TrainConfig) -> TrainConfig {
    TrainConfig {
        sntg: false,
        graph: GraphMode::Teacher,
        ..config.clone()
    }
}

/// Training stream of a run; the frozen graph's pre-training run uses the same one.
pub fn train_rng(seed: u64) -> Rng {
    Rng::new(seed).fork(streams::TRAIN)
}

pub fn graph_source(
    config: &TrainConfig,
    data: &PreparedData,
    seed: u64,
) -> CliResult<GraphSource> {
    Ok(match config.graph {
        GraphMode::Teacher => GraphSource::Teacher,
        GraphMode::Soft => GraphSource::Soft,
        GraphMode::Knn => GraphSource::Knn(fixed_knn_graph(&data.train.features, config.knn_k)?),
        GraphMode::Frozen => {
            let pre = train_with(
                &pretraining_config(config),
                &data.train,
                data.test.as_ref(),
                GraphSource::Teacher,
                &train_rng(seed),
            )?;
            GraphSource::Frozen(frozen_prediction_graph(&pre.model, &data.train.features)?)
        }
    })
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub model: Mlp,
    pub metrics: TrainMetrics,
    /// Final error (%) on the evaluation set.
    pub error: f64,
}

pub fn train_seed(variant: &Variant, seed: u64, data: &PreparedData) -> CliResult<SeedRun> {
    let graph = graph_source(&variant.train, data, seed)?;
    train_seed_with(variant, seed, data, graph)
}

/// Like [`train_seed`] with an already built graph source.
pub fn train_seed_with(
    variant: &Variant,
    seed: u64,
    data: &PreparedData,
    graph: GraphSource,
) -> CliResult<SeedRun> {
    let out = train_with(
        &variant.train,
        &data.train,
        data.test.as_ref(),
        graph,
        &train_rng(seed),
    )?;
    Ok(SeedRun {
        seed,
        error: out.metrics.final_test_error(),
        model: out.model,
        metrics: out.metrics,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn seed_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(variant).join(format!("seed-{seed}"))
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RunRecord {
    seed: u64,
    variant: Variant,
}

/// Writes metrics, timings, checkpoint, resolved config, embeddings and plots.
pub fn write_artifacts(
    dir: &Path,
    variant: &Variant,
    run: &SeedRun,
    data: &PreparedData,
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut buf = Vec::new();
    run.metrics.write_csv(&mut buf)?;
    write_file(&dir.join("metrics.csv"), &buf)?;
    buf.clear();
    run.metrics.write_timings(&mut buf)?;
    write_file(&dir.join("timings.csv"), &buf)?;
    buf.clear();
    write_arrays(&mut buf, &run.model.to_arrays("student"))?;
    write_file(&dir.join("model.ckpt"), &buf)?;
    let record = RunRecord {
        seed: run.seed,
        variant: variant.clone(),
    };
    write_file(
        &dir.join("run.toml"),
        toml::to_string(&record).expect("serializable").as_bytes(),
    )?;

    let eval = data.test.as_ref().unwrap_or(&data.train);
    let rows = embedding_rows(&run.model, eval)?;
    write_file(
        &dir.join("embeddings.csv"),
        embeddings_csv(&rows).as_bytes(),
    )?;
    let classes = eval.num_classes;
    let emb_points: Vec<svg::Point> = rows
        .iter()
        .map(|&(_, label, x, y)| svg::Point {
            x,
            y,
            class: label,
            marked: false,
        })
        .collect();
    write_file(
        &dir.join("embeddings.svg"),
        svg::scatter(&emb_points, classes, None).as_bytes(),
    )?;

    if data.train.dim() == 2 {
        let predicted = predict_labels(&run.model, &data.train.features)?;
        let points: Vec<svg::Point> = (0..data.train.len())
            .map(|i| svg::Point {
                x: data.train.features.get(i, 0),
                y: data.train.features.get(i, 1),
                class: predicted[i],
                marked: data.train.labeled_mask[i],
            })
            .collect();
        write_file(
            &dir.join("predictions.svg"),
            svg::scatter(&points, classes, None).as_bytes(),
        )?;
        let regions = svg::decision_grid(&run.model, &points, svg::GRID)?;
        write_file(
            &dir.join("regions.svg"),
            svg::scatter(&points, classes, Some(&regions)).as_bytes(),
        )?;
    }
    Ok(())
}

pub fn embeddings_csv(rows: &[(usize, usize, f64, f64)]) -> String {
    let mut s = String::from("index,label,pc1,pc2\n");
    for (i, y, a, b) in rows {
        s.push_str(&format!("{i},{y},{a},{b}\n"));
    }
    s
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub mnist_dir: PathBuf,
    /// Overrides the experiment's seed list.
    pub seeds: Option<Vec<u64>>,
    /// Print one progress line per finished run.
    pub verbose: bool,
}

/// Runs every variant over every seed, writing artifacts and `summary.csv` under `out`.
pub fn run_experiment(exp: &Experiment, opts: &RunOptions) -> CliResult<Summary> {
    let seeds = opts.seeds.clone().unwrap_or_else(|| exp.seeds());
    fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    let mut rows = Vec::with_capacity(exp.variants.len());
    for variant in &exp.variants {
        let mut errors = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let data = prepare_data(&variant.dataset, seed, &opts.mnist_dir)?;
            let run = train_seed(variant, seed, &data)?;
            write_artifacts(
                &seed_dir(&opts.out, &variant.name, seed),
                variant,
                &run,
                &data,
            )?;
            if opts.verbose {
                eprintln!("{} seed {}: error {:.2}%", variant.name, seed, run.error);
            }
            errors.push(run.error);
        }
        rows.push(SummaryRow {
            variant: variant.name.clone(),
            mean_error: mean(&errors),
            std_error: std_dev(&errors),
            seeds: seeds.clone(),
            errors,
        });
    }
    let summary = Summary { rows };
    let path = opts.out.join("summary.csv");
    write_file(&path, summary.to_csv().as_bytes())?;
    Ok(summary)
}

/// Recomputes the embedding CSV of a finished run from its directory.
pub fn export_run_embeddings(run_dir: &Path, mnist_dir: &Path) -> CliResult<String> {
    let record_path = run_dir.join("run.toml");
    let text = fs::read_to_string(&record_path).map_err(|e| CliError::io(&record_path, e))?;
    let record: RunRecord = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", record_path.display(), e.message())))?;
    let ckpt = run_dir.join("model.ckpt");
    let file = fs::File::open(&ckpt).map_err(|e| CliError::io(&ckpt, e))?;
    let model = Mlp::from_arrays(&read_arrays(std::io::BufReader::new(file))?, "student")?;
    let data = prepare_data(&record.variant.dataset, record.seed, mnist_dir)?;
    let eval = data.test.as_ref().unwrap_or(&data.train);
    Ok(embeddings_csv(&embedding_rows(&model, eval)?))
}
