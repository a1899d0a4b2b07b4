use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use guardcert::gmm::CovarianceKind;

/// Seed used when neither `--seed` nor `GUARDCERT_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "guardcert", version, about = "Certify guardrail classifier heads over activation-space specifications")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Specification construction.
    #[command(subcommand)]
    Spec(SpecCommand),
    /// Certify a head against a specification. Exit 2 on SAT or a failed coverage gate.
    Verify(VerifyArgs),
    /// ROC analysis of a `score,label` table.
    Thresholds(ThresholdsArgs),
    /// Precision and recall of a specification on holdout sets.
    Fidelity(FidelityArgs),
    /// Rebuild a specification over a parameter grid and score each one.
    Sweep(SweepArgs),
    /// Score activations with a head, writing a `score,label` table.
    Score(ScoreArgs),
    /// Write a synthetic labelled fixture (AVEC files and a head).
    Fixture(FixtureArgs),
}

#[derive(Debug, Subcommand)]
pub enum SpecCommand {
    /// Build a specification from construction activations.
    Build(BuildArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    SingleRect,
    MultiRect,
    Gmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMethodArg {
    MultiRect,
    Gmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceArg {
    Full,
    Diag,
}

impl From<CovarianceArg> for CovarianceKind {
    fn from(c: CovarianceArg) -> Self {
        match c {
            CovarianceArg::Full => CovarianceKind::Full,
            CovarianceArg::Diag => CovarianceKind::Diag,
        }
    }
}

/// Activation input: AVEC, or CSV for small fixtures (by `.csv` extension).
#[derive(Debug, Args)]
pub struct ActivationInput {
    #[arg(long)]
    pub activations: PathBuf,
    /// Labels file; defaults to `<activations>.labels` when present.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Keep only rows with this label.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub select_label: Option<u8>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub input: ActivationInput,
    /// HDBSCAN minimum cluster size (multi-rect).
    #[arg(long, required_if_eq("method", "multi-rect"))]
    pub min_cluster_size: Option<usize>,
    /// Number of mixture components (gmm).
    #[arg(long, required_if_eq("method", "gmm"))]
    pub components: Option<usize>,
    #[arg(long, value_enum, default_value = "full")]
    pub covariance: CovarianceArg,
    #[arg(long, env = "GUARDCERT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauArg {
    Literal(f64),
    Star,
    Pess,
}

impl FromStr for TauArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "star" => Ok(TauArg::Star),
            "pess" => Ok(TauArg::Pess),
            _ => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| format!("expected a number in (0, 1), `star` or `pess`, got {s:?}"))?;
                if v > 0.0 && v < 1.0 {
                    Ok(TauArg::Literal(v))
                } else {
                    Err(format!("threshold {v} is outside (0, 1)"))
                }
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    /// A number in (0, 1), or `star`/`pess` to use the head file's thresholds.
    #[arg(long)]
    pub tau: TauArg,
    /// Required total coverage for mixture specifications.
    #[arg(long)]
    pub min_coverage: Option<f64>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThresholdsArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Head file to update with the computed thresholds.
    #[arg(long)]
    pub update_head: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub harmful: PathBuf,
    #[arg(long)]
    pub benign: PathBuf,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub method: SweepMethodArg,
    #[command(flatten)]
    pub input: ActivationInput,
    #[arg(long)]
    pub harmful: PathBuf,
    #[arg(long)]
    pub benign: PathBuf,
    /// Comma-separated minimum cluster sizes or component counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, value_enum, default_value = "full")]
    pub covariance: CovarianceArg,
    #[arg(long, env = "GUARDCERT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: ActivationInput,
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Points per class in each split.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, env = "GUARDCERT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}
