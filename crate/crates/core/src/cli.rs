//! Batch runner: JSON run configs, single solves, one-axis sweeps and the
//! builtin problem listing.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::domain::{AxisRole, SamplingStrategy};
use crate::error::{Error, Result};
use crate::problems::{builtin, list_problems, CustomProblem, ProblemSpec};
use crate::solver::{run, EvalGrid, LsOptions, NetworkSpec, NonlinearConfig, SamplingConfig, Solution, SolveSetup};
use crate::training::TrainingConfig;

/// Environment variable bounding the worker threads.
pub const WORKERS_ENV: &str = "DDSNN_WORKERS";

/// A builtin name or `{"custom": {...}}`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemRef {
    Builtin(String),
    Custom(Box<CustomProblem>),
}

impl<'de> Deserialize<'de> for ProblemRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ProblemRef;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a builtin problem name or {\"custom\": {...}}")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ProblemRef, E> {
                Ok(ProblemRef::Builtin(v.to_string()))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<ProblemRef, A::Error> {
                let key: String = map
                    .next_key()?
                    .ok_or_else(|| de::Error::custom("expected the key `custom`"))?;
                if key != "custom" {
                    return Err(de::Error::unknown_field(&key, &["custom"]));
                }
                let custom: CustomProblem = map.next_value()?;
                if let Some(extra) = map.next_key::<String>()? {
                    return Err(de::Error::unknown_field(&extra, &["custom"]));
                }
                Ok(ProblemRef::Custom(Box::new(custom)))
            }
        }
        d.deserialize_any(V)
    }
}

impl ProblemRef {
    pub fn build(&self) -> Result<ProblemSpec> {
        match self {
            ProblemRef::Builtin(name) => builtin(name).map_err(|_| {
                Error::config("problem", format!("unknown problem `{name}`; see `list-problems`"))
            }),
            ProblemRef::Custom(c) => c.build(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub counts: Vec<usize>,
    #[serde(default)]
    pub continuity: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Scale rows to unit 2-norm before the least-squares solve.
    pub equilibrate: bool,
    /// Relative singular-value cutoff of the least-squares solve.
    pub rcond: f64,
    /// Write the linear system to `system.csv` (nonlinear terms zero).
    pub dump_system: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let ls = LsOptions::default();
        SolverOptions {
            equilibrate: ls.equilibrate,
            rcond: ls.rcond,
            dump_system: false,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub training_log: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_out(),
            training_log: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRef,
    pub partition: PartitionConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub nonlinear: Option<NonlinearConfig>,
    #[serde(default)]
    pub eval: EvalGrid,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        de.end().map_err(|e| Error::config("", e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text)
    }

    /// Builds and validates the solve setup.
    pub fn setup(&self) -> Result<SolveSetup> {
        let problem = self.problem.build()?;
        let setup = SolveSetup {
            problem,
            counts: self.partition.counts.clone(),
            continuity: self.partition.continuity.clone(),
            sampling: self.sampling.clone(),
            network: self.network.clone(),
            training: self.training.clone(),
            nonlinear: self.nonlinear.clone(),
            eval: self.eval.clone(),
            ls: LsOptions {
                equilibrate: self.solver.equilibrate,
                rcond: self.solver.rcond,
            },
        };
        setup.validate()?;
        Ok(setup)
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn coordinate_names(problem: &ProblemSpec) -> Vec<String> {
    let spatial = ["x", "y", "z"];
    let mut next = 0;
    problem
        .domain
        .axes()
        .iter()
        .map(|a| match a.role {
            AxisRole::Temporal => "t".to_string(),
            AxisRole::Spatial => {
                let name = spatial.get(next).map_or_else(|| format!("x{next}"), |s| s.to_string());
                next += 1;
                name
            }
        })
        .collect()
}

/// Writes `report.json`, `solution.csv` and optionally `training_log.csv`.
pub fn write_outputs(dir: &Path, setup: &SolveSetup, sol: &Solution, training_log: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(&sol.report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;

    let mut w = csv::Writer::from_path(dir.join("solution.csv"))?;
    let mut header = coordinate_names(&setup.problem);
    header.extend(["u_numeric", "u_exact", "error"].map(String::from));
    w.write_record(&header)?;
    for (i, p) in sol.grid.iter().enumerate() {
        let mut rec: Vec<String> = p.iter().map(|&v| fmt_f(v)).collect();
        rec.push(fmt_f(sol.numeric[i]));
        match &sol.exact {
            Some(e) => {
                rec.push(fmt_f(e[i]));
                rec.push(fmt_f(sol.numeric[i] - e[i]));
            }
            None => rec.extend([String::new(), String::new()]),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let log_path = dir.join("training_log.csv");
    if training_log && sol.training_logs.iter().any(|l| !l.is_empty()) {
        let mut w = csv::Writer::from_path(&log_path)?;
        w.write_record(["subdomain", "epoch", "loss"])?;
        for (k, log) in sol.training_logs.iter().enumerate() {
            for &(e, l) in log {
                w.write_record([k.to_string(), e.to_string(), fmt_f(l)])?;
            }
        }
        w.flush()?;
    } else if log_path.exists() {
        std::fs::remove_file(log_path)?;
    }
    Ok(())
}

pub fn summary_line(sol: &Solution) -> String {
    let r = &sol.report;
    let (l2_rel, linf) = match &r.norms {
        Some(n) => (n.l2_rel.map_or("-".to_string(), |v| format!("{v:.3e}")), format!("{:.3e}", n.linf)),
        None => ("-".to_string(), "-".to_string()),
    };
    format!(
        "{} N_k={} M={} l2_rel={} linf={} epochs_mean={:.1} iters={} time={:.2}s",
        r.problem, r.num_subdomains, r.subspace_dim, l2_rel, linf, r.epochs_mean, r.nonlinear_iters, r.wall_times.total
    )
}

/// Runs one config and writes its outputs under `out`.
pub fn solve_command(config: &RunConfig, out: &Path) -> Result<Solution> {
    let setup = config.setup()?;
    if config.solver.dump_system {
        let prepared = crate::solver::prepare(&setup)?;
        std::fs::create_dir_all(out)?;
        prepared.disc.system(None)?.write_csv(&out.join("system.csv"))?;
    }
    let sol = run(&setup)?;
    write_outputs(out, &setup, &sol, config.output.training_log)?;
    Ok(sol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    SubspaceDim,
    Subdomains,
    HiddenLayers,
    Sampling,
    Seed,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepAxis::SubspaceDim => "subspace_dim",
            SweepAxis::Subdomains => "subdomains",
            SweepAxis::HiddenLayers => "hidden_layers",
            SweepAxis::Sampling => "sampling",
            SweepAxis::Seed => "seed",
        };
        f.write_str(s)
    }
}

fn parse_usize(axis: SweepAxis, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("--values[{axis}]"), format!("`{v}` is not a non-negative integer")))
}

/// Per-axis list from `AxB...` or a single integer repeated on every axis.
fn parse_per_axis(axis: SweepAxis, v: &str, dim: usize) -> Result<Vec<usize>> {
    let parts: Vec<usize> = v.split('x').map(|p| parse_usize(axis, p)).collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; dim]),
        n if n == dim => Ok(parts),
        n => Err(Error::config(
            format!("--values[{axis}]"),
            format!("`{v}` has {n} entries but the domain has {dim} axes"),
        )),
    }
}

/// Config with one sweep value applied.
pub fn apply_sweep_value(config: &RunConfig, axis: SweepAxis, value: &str, dim: usize) -> Result<RunConfig> {
    let mut c = config.clone();
    match axis {
        SweepAxis::SubspaceDim => c.network.subspace_dim = parse_usize(axis, value)?,
        SweepAxis::Subdomains => c.partition.counts = parse_per_axis(axis, value, dim)?,
        SweepAxis::HiddenLayers => {
            c.network.hidden = if value.contains('x') {
                value.split('x').map(|p| parse_usize(axis, p)).collect::<Result<_>>()?
            } else {
                let width = config.network.hidden.first().copied().unwrap_or(100);
                vec![width; parse_usize(axis, value)?]
            }
        }
        SweepAxis::Sampling => match value.trim().parse::<SamplingStrategy>() {
            Ok(s) => c.sampling.strategy = s,
            Err(_) => c.sampling.interior = parse_per_axis(axis, value, dim)?,
        },
        SweepAxis::Seed => c.training.seed = value.trim().parse().map_err(|_| {
            Error::config(format!("--values[{axis}]"), format!("`{value}` is not a seed"))
        })?,
    }
    Ok(c)
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: String,
    pub outcome: std::result::Result<Solution, String>,
    pub seconds: f64,
}

/// Runs one solve per value (concurrently on the current rayon pool) and
/// writes `sweep.csv` plus each cell's outputs under `out/<axis>_<value>`.
pub fn sweep_command(config: &RunConfig, axis: SweepAxis, values: &[String], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("--values", "at least one value is required"));
    }
    let base = config.setup()?;
    let dim = base.problem.dim();
    // Reject malformed values before running anything.
    let configs = values
        .iter()
        .map(|v| apply_sweep_value(config, axis, v, dim))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .zip(configs.par_iter())
        .map(|(v, c)| {
            let t = Instant::now();
            let cell_dir = out.join(format!("{axis}_{}", v.trim()));
            let outcome = solve_command(c, &cell_dir).map_err(|e| e.to_string());
            SweepRow {
                value: v.trim().to_string(),
                outcome,
                seconds: t.elapsed().as_secs_f64(),
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["value", "l2_abs", "l2_rel", "linf", "epochs", "iters", "seconds", "status"])?;
    for row in &rows {
        let rec: Vec<String> = match &row.outcome {
            Ok(sol) => {
                let r = &sol.report;
                let (a, rel, inf) = match &r.norms {
                    Some(n) => (fmt_f(n.l2_abs), n.l2_rel.map(fmt_f).unwrap_or_default(), fmt_f(n.linf)),
                    None => Default::default(),
                };
                vec![
                    row.value.clone(),
                    a,
                    rel,
                    inf,
                    fmt_f(r.epochs_mean),
                    r.nonlinear_iters.to_string(),
                    fmt_f(row.seconds),
                    if r.converged { "ok" } else { "not_converged" }.to_string(),
                ]
            }
            Err(msg) => {
                let mut rec = vec![row.value.clone()];
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.push(fmt_f(row.seconds));
                rec.push(format!("failed: {msg}"));
                rec
            }
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Parser, Debug)]
#[command(name = "ddsnn", version, about = "Domain-decomposed subspace neural network PDE solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configured solve.
    Solve {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one solve per value of a single hyperparameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin problems.
    ListProblems,
}

/// Worker count from the environment, if set and valid.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Executes a parsed command; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::ListProblems => {
            print!("{}", list_problems());
            Ok(())
        }
        Command::Solve { config, out } => RunConfig::load(&config).and_then(|c| {
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            solve_command(&c, &dir).map(|sol| println!("{}", summary_line(&sol)))
        }),
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => RunConfig::load(&config).and_then(|c| {
            let dir = out.unwrap_or_else(|| c.output.dir.clone());
            sweep_command(&c, axis, &values, &dir).map(|rows| {
                for row in rows {
                    match &row.outcome {
                        Ok(sol) => println!("{axis}={}: {}", row.value, summary_line(sol)),
                        Err(e) => println!("{axis}={}: failed: {e}", row.value),
                    }
                }
            })
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) if e.is_config() => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            3
        }
    }
}

#[cfg(test)]
mod tests;
