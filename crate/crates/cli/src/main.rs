use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sntg_cli::runner::{export_run_embeddings, mnist_dir};
use sntg_cli::{
    preset, run_experiment, CliError, CliResult, Comparison, Experiment, RunOptions, Summary,
    PRESETS,
};

#[derive(Parser)]
#[command(
    name = "sntg",
    version,
    about = "Self-ensembling semi-supervised training with teacher-graph regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or config file over its seeds.
    Run(RunArgs),
    /// Welch t-test between two summary rows, given as `summary.csv[:variant]`.
    Compare { a: String, b: String },
    /// Rewrite the embedding CSV of a finished run directory.
    ExportEmbeddings {
        /// A `<out>/<variant>/seed-<n>` directory written by `run`.
        run_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List built-in presets.
    ListPresets,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in preset name (see `list-presets`).
    preset: Option<String>,
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// First seed; overrides the experiment's.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Only run this variant.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

fn load(args: &RunArgs) -> CliResult<Experiment> {
    let mut exp = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => Experiment::load(path)?,
        _ => {
            return Err(CliError::Config(
                "give a preset name or --config <file>".into(),
            ))
        }
    };
    if let Some(s) = args.seed {
        exp.seed = s;
    }
    if let Some(r) = args.repeats {
        if r == 0 {
            return Err(CliError::Config("--repeats must be positive".into()));
        }
        exp.repeats = r;
    }
    if let Some(v) = &args.variant {
        exp.variants = vec![exp.variant(v)?.clone()];
    }
    Ok(exp)
}

fn split_target(target: &str) -> (PathBuf, Option<&str>) {
    match target.rsplit_once(':') {
        Some((path, variant)) if !variant.is_empty() && !variant.contains('/') => {
            (PathBuf::from(path), Some(variant))
        }
        _ => (PathBuf::from(target), None),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let exp = load(&args)?;
            if args.dry_run {
                print!("{}", exp.resolved_toml());
                return Ok(());
            }
            let opts = RunOptions {
                out: args.out.join(&exp.name),
                mnist_dir: mnist_dir(),
                seeds: None,
                verbose: true,
            };
            let summary = run_experiment(&exp, &opts)?;
            print!("{}", summary.to_csv());
            eprintln!("artifacts in {}", opts.out.display());
        }
        Command::Compare { a, b } => {
            let (pa, va) = split_target(&a);
            let (pb, vb) = split_target(&b);
            let (sa, sb) = (Summary::load(&pa)?, Summary::load(&pb)?);
            print!(
                "{}",
                Comparison::new(sa.select(va)?, sb.select(vb)?)?.report()
            );
        }
        Command::ExportEmbeddings { run_dir, out } => {
            let csv = export_run_embeddings(&run_dir, &mnist_dir())?;
            std::fs::write(&out, csv).map_err(|e| CliError::io(&out, e))?;
        }
        Command::ListPresets => {
            for p in PRESETS {
                let exp = Experiment::parse(p.text)?;
                let names: Vec<&str> = exp.variants.iter().map(|v| v.name.as_str()).collect();
                println!("{:<16} {} [{}]", p.name, exp.description, names.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
