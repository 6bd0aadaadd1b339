//! Experiment files: a `[dataset]` and `[train]` section plus optional
//! `[[variants]]` that override keys of either. Built-in presets use the same format.

use serde::{Deserialize, Serialize};
use sntg_core::TrainConfig;
use toml::Table;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    TwoMoons,
    FourSpins,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Synthetic point count.
    pub points: usize,
    /// Synthetic coordinate noise.
    pub noise: f64,
    /// Labeled rows kept; absent means fully labeled.
    pub labels: Option<usize>,
    pub balanced: bool,
    /// Fraction of labels replaced with random classes (fully labeled sets only).
    pub corrupt: f64,
    /// Use only the first rows of the MNIST training / test files.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::TwoMoons,
            points: 6000,
            noise: 0.1,
            labels: None,
            balanced: true,
            corrupt: 0.0,
            train_limit: None,
            test_limit: None,
        }
    }
}

/// One fully resolved configuration of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub description: String,
    pub repeats: usize,
    /// First seed; run `r` uses `seed + r`.
    pub seed: u64,
    pub variants: Vec<Variant>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default = "default_repeats")]
    repeats: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    dataset: Table,
    #[serde(default)]
    train: Table,
    #[serde(default)]
    variants: Vec<RawVariant>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariant {
    name: String,
    #[serde(default)]
    dataset: Table,
    #[serde(default)]
    train: Table,
}

fn default_repeats() -> usize {
    5
}

fn merged(base: &Table, overrides: &Table) -> Table {
    let mut out = base.clone();
    for (k, v) in overrides {
        out.insert(k.clone(), v.clone());
    }
    out
}

fn section<T: serde::de::DeserializeOwned>(
    table: Table,
    variant: &str,
    name: &str,
) -> CliResult<T> {
    table.try_into().map_err(|e: toml::de::Error| {
        CliError::Config(format!("variant `{variant}`, [{name}]: {}", e.message()))
    })
}

impl Experiment {
    pub fn parse(text: &str) -> CliResult<Self> {
        let raw: RawExperiment =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        if raw.repeats == 0 {
            return Err(CliError::Config("repeats must be positive".into()));
        }
        let raw_variants = if raw.variants.is_empty() {
            vec![RawVariant {
                name: raw.name.clone(),
                dataset: Table::new(),
                train: Table::new(),
            }]
        } else {
            raw.variants
        };
        let mut variants = Vec::with_capacity(raw_variants.len());
        for v in raw_variants {
            if v.name.is_empty()
                || v.name.contains([',', ';', ':', '/', '\\'])
                || v.name.starts_with('.')
            {
                return Err(CliError::Config(format!(
                    "invalid variant name `{}`",
                    v.name
                )));
            }
            if variants.iter().any(|o: &Variant| o.name == v.name) {
                return Err(CliError::Config(format!(
                    "duplicate variant name `{}`",
                    v.name
                )));
            }
            let dataset: DatasetSpec =
                section(merged(&raw.dataset, &v.dataset), &v.name, "dataset")?;
            let train: TrainConfig = section(merged(&raw.train, &v.train), &v.name, "train")?;
            train
                .validate()
                .map_err(|e| CliError::Config(format!("variant `{}`: {e}", v.name)))?;
            variants.push(Variant {
                name: v.name,
                dataset,
                train,
            });
        }
        Ok(Self {
            name: raw.name,
            description: raw.description,
            repeats: raw.repeats,
            seed: raw.seed,
            variants,
        })
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.seed + r).collect()
    }

    pub fn variant(&self, name: &str) -> CliResult<&Variant> {
        self.variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| {
                let known: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
                CliError::Config(format!("no variant `{name}` (have: {})", known.join(", ")))
            })
    }

    /// Resolved configuration of every variant, as TOML.
    pub fn resolved_toml(&self) -> String {
        #[derive(Serialize)]
        struct Resolved<'a> {
            name: &'a str,
            repeats: usize,
            seed: u64,
            variants: &'a [Variant],
        }
        toml::to_string(&Resolved {
            name: &self.name,
            repeats: self.repeats,
            seed: self.seed,
            variants: &self.variants,
        })
        .expect("config serializes")
    }
}

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "two-moons-sntg",
        text: include_str!("../presets/two-moons-sntg.toml"),
    },
    Preset {
        name: "four-spins-sntg",
        text: include_str!("../presets/four-spins-sntg.toml"),
    },
    Preset {
        name: "mnist-labels",
        text: include_str!("../presets/mnist-labels.toml"),
    },
    Preset {
        name: "ablation",
        text: include_str!("../presets/ablation.toml"),
    },
    Preset {
        name: "noisy-labels",
        text: include_str!("../presets/noisy-labels.toml"),
    },
    Preset {
        name: "graph-source",
        text: include_str!("../presets/graph-source.toml"),
    },
];

pub fn preset(name: &str) -> CliResult<Experiment> {
    let p = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!(
            "unknown preset `{name}` (have: {})",
            known.join(", ")
        ))
    })?;
    Experiment::parse(p.text)
}
