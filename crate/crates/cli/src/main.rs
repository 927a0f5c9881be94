use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use valuelab::conditioning::{
    chain_condition_bound, condition_from_eigen, msbe_hessian, msbe_minimizer_and_value_error,
};
use valuelab::harness::{
    aggregate_series, plot_emit, read_series, run_experiment, write_records, AggregateCurve,
    Aggregation, ExperimentConfig, Manifest,
};
use valuelab::{FeatureMap, MarkovChain};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "valuelab",
    version,
    about = "Value-estimation experiments and MSBE conditioning analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mean,
    Median,
    Topfrac,
}

#[derive(Subcommand)]
enum Command {
    /// Condition number and bounds of a chain's MSBE.
    Cond {
        chain: PathBuf,
        /// Feature matrix CSV, one row per state.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Run every seed of an experiment and store its curves.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cartesian product of a parameter grid over a base config.
    Sweep {
        config: PathBuf,
        /// JSON object mapping dotted config paths to value lists.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Fold the runs of every experiment in a directory into one curve each.
    Aggregate {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        mode: Mode,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
    },
    /// Draw aggregate (or single-run) CSV curves into an SVG.
    Plot {
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        logy: bool,
    },
}

enum Outcome {
    Done,
    AllDiverged,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AllDiverged) => ExitCode::from(EXIT_DIVERGED),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    use valuelab::Error as E;
    e.chain().any(|c| {
        matches!(
            c.downcast_ref::<E>(),
            Some(
                E::Config(_)
                    | E::Json(_)
                    | E::Parse(_)
                    | E::InvalidParameter(_)
                    | E::InvalidProbability(_)
                    | E::Dimension(_)
            )
        ) || c.downcast_ref::<serde_json::Error>().is_some()
    })
}

fn dispatch(cmd: Command) -> anyhow::Result<Outcome> {
    match cmd {
        Command::Cond { chain, features } => cond(&chain, features.as_deref()),
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            run(&cfg, &out)
        }
        Command::Sweep { config, grid, out } => sweep(&config, &grid, &out),
        Command::Aggregate {
            dir,
            mode,
            fraction,
        } => {
            let mode = match mode {
                Mode::Mean => Aggregation::Mean,
                Mode::Median => Aggregation::Median,
                Mode::Topfrac => Aggregation::Topfrac { fraction },
            };
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(valuelab::Error::Config(format!(
                    "top fraction {fraction} outside (0,1]"
                ))
                .into());
            }
            aggregate_dir(&dir, mode)
        }
        Command::Plot { curves, out, logy } => {
            let curves = curves
                .iter()
                .map(|p| {
                    AggregateCurve::load(p).with_context(|| format!("reading {}", p.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            plot_emit(&curves, &out, logy)?;
            println!("{}", out.display());
            Ok(Outcome::Done)
        }
    }
}

fn cond(chain: &Path, features: Option<&Path>) -> anyhow::Result<Outcome> {
    let chain = MarkovChain::load(chain).with_context(|| format!("loading {}", chain.display()))?;
    let phi = features.map(FeatureMap::load).transpose()?;
    let form = msbe_hessian(&chain, phi.as_ref())?;
    let eig = form.eigen()?;
    let c = condition_from_eigen(&eig);
    let truth = chain.true_values()?;
    let (_, value_error) = msbe_minimizer_and_value_error(&chain, phi.as_ref(), &truth)?;
    // the lower bound is a statement about tabular representations
    let bound_a = if phi.is_none() {
        json!(chain_condition_bound(&chain))
    } else {
        Value::Null
    };
    let report = json!({
        "condition_number": finite_or_inf(c),
        "bound_a": bound_a,
        "l": finite_or_inf(chain.average_episode_length()),
        "h": chain.self_loop_probability(),
        "value_error": value_error,
        "lambda_min": eig.min(),
        "lambda_max": eig.max(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Outcome::Done)
}

fn finite_or_inf(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

fn run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let records = run_experiment(cfg)?;
    let paths = write_records(out, cfg, &records)?;
    let mut diverged = 0;
    for (rec, path) in records.iter().zip(&paths) {
        match rec.diverged_at {
            Some(step) => {
                diverged += 1;
                log::warn!("seed {} diverged at step {step}", rec.seed);
                println!("{}\tdiverged at {step}", path.display());
            }
            None => println!(
                "{}\tfinal {}",
                path.display(),
                rec.final_value().unwrap_or(f64::NAN)
            ),
        }
    }
    Ok(if diverged == records.len() {
        Outcome::AllDiverged
    } else {
        Outcome::Done
    })
}

fn set_path(doc: &mut Value, path: &str, v: Value) -> anyhow::Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            valuelab::Error::Config(format!("grid path {path} does not name an object field"))
        })?;
        if i + 1 == parts.len() {
            obj.insert((*key).to_string(), v);
            return Ok(());
        }
        cur = obj.entry(*key).or_insert_with(|| json!({}));
    }
    Ok(())
}

fn sweep(config: &Path, grid: &Path, out: &Path) -> anyhow::Result<Outcome> {
    let base: Value = serde_json::from_str(&std::fs::read_to_string(config)?)?;
    let grid: Value = serde_json::from_str(&std::fs::read_to_string(grid)?)?;
    let axes: Vec<(String, Vec<Value>)> = grid
        .as_object()
        .ok_or_else(|| valuelab::Error::Config("grid must be a JSON object".into()))?
        .iter()
        .map(|(k, v)| match v {
            Value::Array(vals) if !vals.is_empty() => Ok((k.clone(), vals.clone())),
            _ => Err(valuelab::Error::Config(format!(
                "grid axis {k} must be a non-empty list"
            ))),
        })
        .collect::<Result<_, _>>()?;
    let mut variants = vec![base];
    for (path, vals) in &axes {
        let mut next = Vec::with_capacity(variants.len() * vals.len());
        for v in &variants {
            for x in vals {
                let mut doc = v.clone();
                set_path(&mut doc, path, x.clone())?;
                next.push(doc);
            }
        }
        variants = next;
    }
    let mut any_ok = false;
    for doc in variants {
        let cfg = ExperimentConfig::from_json_str(&doc.to_string())?;
        println!("# {}", cfg.hash());
        any_ok |= matches!(run(&cfg, out)?, Outcome::Done);
    }
    Ok(if any_ok {
        Outcome::Done
    } else {
        Outcome::AllDiverged
    })
}

fn aggregate_dir(dir: &Path, mode: Aggregation) -> anyhow::Result<Outcome> {
    let manifest = Manifest::load(dir)?;
    if manifest.experiments.is_empty() {
        anyhow::bail!("no experiments recorded in {}", dir.display());
    }
    let tag = match mode {
        Aggregation::Mean => "mean",
        Aggregation::Median => "median",
        Aggregation::Topfrac { .. } => "topfrac",
    };
    let mut written = 0;
    for (hash, entry) in &manifest.experiments {
        let series = entry
            .runs
            .iter()
            .map(|r| read_series(dir.join(&r.file)))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&[(u64, f64)]> = series.iter().map(Vec::as_slice).collect();
        let curve = match aggregate_series(&entry.config.display_name(), &refs, mode) {
            Ok(c) => c,
            Err(e) => {
                // runs cut short by divergence have shorter grids
                eprintln!("skipping {hash}: {e}");
                continue;
            }
        };
        written += 1;
        let path = dir.join(format!("{}.{hash}.{tag}.csv", entry.config.display_name()));
        std::fs::write(&path, curve.to_csv()?)?;
        println!("{}", path.display());
    }
    if written == 0 {
        anyhow::bail!("no experiment in {} has aligned runs", dir.display());
    }
    Ok(Outcome::Done)
}
