use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::attack::SearchConfig;
use crate::error::{Error, Result};
use crate::qp::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "knn-certify", version, about = "Minimum adversarial perturbations for K-NN classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Exact minimum perturbation for 1-NN (l2 via QPs, linf/l1 via LPs).
    Exact(RunArgs),
    /// Certified lower bound for K-NN.
    Verify(RunArgs),
    /// Upper bound from an attack method.
    Attack(RunArgs),
    /// Compare all methods on a sampled query set.
    Bench(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Exact,
    Verify,
    Attack,
    Bench,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    L2,
    Linf,
    L1,
}

impl NormArg {
    pub fn name(self) -> &'static str {
        match self {
            NormArg::L2 => "l2",
            NormArg::Linf => "linf",
            NormArg::L1 => "l1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    /// Truncated QP search over the `--m` nearest targets (1-NN).
    Qp,
    /// Greedy target-set search for any odd K.
    QpGreedy,
    /// Line search toward the `--m` nearest other-class points or clusters.
    Naive,
    /// Line search toward the nearest other-class mean.
    Mean,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    /// Training set CSV: `label,f1,...,fd`.
    #[arg(long = "data")]
    pub data_path: PathBuf,
    /// Query CSV in the same format; the label is the true label.
    #[arg(long = "queries")]
    pub query_path: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    pub norm: NormArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Qp)]
    pub method: MethodArg,
    /// Truncation count for `qp`, number of tries for `naive`.
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 8)]
    pub n_scr: usize,
    /// Projected-gradient stopping tolerance of the dual solver.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long = "output")]
    pub output_path: Option<PathBuf>,
    /// Include perturbation vectors in the report.
    #[arg(long)]
    pub emit_deltas: bool,
    /// Evaluate a seeded uniform sample of this many correctly classified
    /// queries (bench defaults to 100).
    #[arg(long)]
    pub sample: Option<usize>,
    /// Runs per method; bench reports the mean runtime.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Zero every timing field so reports are reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    /// Visit targets in file order instead of by distance.
    #[arg(long)]
    pub no_sort: bool,
    /// Bench: also run the exact search at each of these screening sizes.
    #[arg(long, value_delimiter = ',')]
    pub sweep_n_scr: Vec<usize>,
    /// Bench: also run the exact search without sorting.
    #[arg(long)]
    pub sort_ablation: bool,
    /// Bench: write the comparison table as CSV.
    #[arg(long)]
    pub table_csv: Option<PathBuf>,
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub data_path: PathBuf,
    pub query_path: PathBuf,
    pub k: usize,
    pub norm: NormArg,
    pub method: MethodArg,
    pub m: usize,
    pub n_scr: usize,
    pub tolerance: f64,
    pub workers: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub emit_deltas: bool,
    pub sample: Option<usize>,
    pub repeats: usize,
    pub no_timing: bool,
    pub no_sort: bool,
    pub sweep_n_scr: Vec<usize>,
    pub sort_ablation: bool,
    pub table_csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_args(command: Command, a: RunArgs) -> Result<Self> {
        let cfg = Self {
            command,
            data_path: a.data_path,
            query_path: a.query_path,
            k: a.k,
            norm: a.norm,
            method: a.method,
            m: a.m,
            n_scr: a.n_scr,
            tolerance: a.tolerance,
            workers: a.workers,
            seed: a.seed,
            output_path: a.output_path,
            emit_deltas: a.emit_deltas,
            sample: a.sample,
            repeats: a.repeats,
            no_timing: a.no_timing,
            no_sort: a.no_sort,
            sweep_n_scr: a.sweep_n_scr,
            sort_ablation: a.sort_ablation,
            table_csv: a.table_csv,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.k == 0 || self.k.is_multiple_of(2) {
            return bad("--k must be odd");
        }
        if self.m == 0 {
            return bad("--m must be at least 1");
        }
        if self.n_scr == 0 || self.sweep_n_scr.contains(&0) {
            return bad("--n-scr must be at least 1");
        }
        if self.workers == 0 {
            return bad("--workers must be at least 1");
        }
        if self.repeats == 0 {
            return bad("--repeats must be at least 1");
        }
        if self.sample == Some(0) {
            return bad("--sample must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("--tolerance must be positive");
        }
        if self.norm != NormArg::L2 && self.command != Command::Exact {
            return bad("only `exact` supports --norm linf and l1");
        }
        match self.command {
            Command::Exact if self.k != 1 => {
                bad("exact search covers 1-NN; use `attack --method qp-greedy` and `verify` for K > 1")
            }
            Command::Attack if self.method == MethodArg::Qp && self.k != 1 => {
                bad("--method qp covers 1-NN; use qp-greedy for K > 1")
            }
            _ => Ok(()),
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            solver: SolverConfig {
                tolerance: self.tolerance,
                ..SolverConfig::default()
            },
            n_scr: self.n_scr,
            sort_candidates: !self.no_sort,
            ..SearchConfig::default()
        }
    }
}
