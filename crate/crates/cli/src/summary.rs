//! `summary.csv` reading/writing and the two-sample significance report.

use std::fmt::Write as _;
use std::path::Path;

use sntg_core::trainer::{mean, std_dev, welch_t_test, TTest};

use crate::error::{CliError, CliResult};

pub const SUMMARY_HEADER: &str = "variant,runs,mean_error,std_error,seeds,errors";
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub mean_error: f64,
    pub std_error: f64,
    pub seeds: Vec<u64>,
    /// Final error (%) per seed.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split<T: std::str::FromStr>(field: &str, what: &str) -> CliResult<Vec<T>> {
    field
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Data(format!("bad {what} value `{s}`")))
        })
        .collect()
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SUMMARY_HEADER}\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                r.variant,
                r.errors.len(),
                r.mean_error,
                r.std_error,
                join(&r.seeds),
                join(&r.errors)
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(SUMMARY_HEADER) {
            return Err(CliError::Data(format!(
                "summary must start with `{SUMMARY_HEADER}`"
            )));
        }
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(CliError::Data(format!(
                    "summary row has {} fields: `{line}`",
                    f.len()
                )));
            }
            let errors: Vec<f64> = split(f[5], "error")?;
            let runs: usize = f[1]
                .parse()
                .map_err(|_| CliError::Data(format!("bad run count `{}`", f[1])))?;
            if runs != errors.len() {
                return Err(CliError::Data(format!(
                    "variant `{}` lists {runs} runs but {} errors",
                    f[0],
                    errors.len()
                )));
            }
            rows.push(SummaryRow {
                variant: f[0].to_string(),
                mean_error: mean(&errors),
                std_error: std_dev(&errors),
                seeds: split(f[4], "seed")?,
                errors,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn row(&self, variant: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// `variant` may be omitted when the summary has exactly one row.
    pub fn select(&self, variant: Option<&str>) -> CliResult<&SummaryRow> {
        let names = || {
            self.rows
                .iter()
                .map(|r| r.variant.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        };
        match variant {
            Some(v) => self.row(v).ok_or_else(|| {
                CliError::Data(format!("no variant `{v}` in summary (have: {})", names()))
            }),
            None if self.rows.len() == 1 => Ok(&self.rows[0]),
            None => Err(CliError::Data(format!(
                "summary has several variants; pick one of: {}",
                names()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: SummaryRow,
    pub b: SummaryRow,
    pub test: TTest,
}

impl Comparison {
    pub fn new(a: &SummaryRow, b: &SummaryRow) -> CliResult<Self> {
        let test = welch_t_test(&a.errors, &b.errors).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            test,
        })
    }

    pub fn significant(&self) -> bool {
        self.test.p < SIGNIFICANCE_LEVEL
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        for (tag, r) in [("A", &self.a), ("B", &self.b)] {
            writeln!(
                s,
                "{tag}: {:<20} runs {:>2}  mean error {:.4}%  std {:.4}",
                r.variant,
                r.errors.len(),
                r.mean_error,
                r.std_error
            )
            .unwrap();
        }
        writeln!(
            s,
            "Welch t = {:.4}, dof = {:.2}, p = {:.6}",
            self.test.t, self.test.dof, self.test.p
        )
        .unwrap();
        let verdict = if self.significant() {
            "significant"
        } else {
            "not significant"
        };
        writeln!(s, "{verdict} at alpha = {SIGNIFICANCE_LEVEL}").unwrap();
        s
    }
}
