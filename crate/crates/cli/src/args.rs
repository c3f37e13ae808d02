//! Command-line surface. Most numeric options are optional here and
//! resolved against an optional config file and built-in defaults, in
//! that order of precedence.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "osbm",
    about = "Fit ordered and unordered degree-corrected block models to directed networks",
    version,
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model variant by description-length minimization.
    Fit(FitArgs),
    /// Fit all four variants and compare their description lengths.
    Compare(CompareArgs),
    /// Sample the posterior and collect per-node rank marginals.
    Marginals(MarginalsArgs),
    /// Generate synthetic networks.
    Generate(GenerateArgs),
    /// Rank nodes from a fit report; optionally correlate with degree
    /// imbalance.
    Rank(RankArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

/// Options shared by every inference command.
#[derive(Debug, Args, Clone)]
pub struct InferenceOpts {
    /// Model variant: sbm, dc-sbm, osbm, dc-osbm.
    #[arg(long)]
    pub model: Option<String>,
    /// RNG seed; runs are deterministic for a fixed seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweeps per restart (fit/compare) or recorded sweeps (marginals).
    #[arg(long)]
    pub sweeps: Option<u64>,
    /// Burn-in sweeps discarded before recording.
    #[arg(long = "burn-in")]
    pub burn_in: Option<u64>,
    /// Record every n-th sweep.
    #[arg(long = "thin")]
    pub thinning: Option<u64>,
    /// Random restarts for the MAP search.
    #[arg(long)]
    pub restarts: Option<u32>,
    /// Inverse temperature: a positive number or "inf".
    #[arg(long)]
    pub beta: Option<String>,
    /// Finite-temperature exploration sweeps before each greedy phase.
    #[arg(long)]
    pub explore: Option<u64>,
    /// Override the variant's degree-correction flag.
    #[arg(long = "degree-correction")]
    pub degree_correction: Option<Toggle>,
    /// Cap on the restricted-partition table (degree-corrected priors).
    #[arg(long = "q-cap")]
    pub q_cap: Option<u64>,
    /// Probability of edge-guided move targets, in [0, 1).
    #[arg(long = "edge-guided")]
    pub edge_guided: Option<f64>,
    /// Merge-split proposals per sweep.
    #[arg(long = "merge-split")]
    pub merge_split: Option<u32>,
    /// Group relocation proposals per sweep (ordered variants).
    #[arg(long)]
    pub relocate: Option<u32>,
    /// Restricted Gibbs refinement sweeps inside split proposals.
    #[arg(long = "gibbs-scans")]
    pub gibbs_scans: Option<u32>,
    /// Treat node ids as integers used directly as indices.
    #[arg(long = "integer-ids")]
    pub integer_ids: bool,
    /// Flat key=value config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// json (default) or tsv (partition / rank dump).
    #[arg(long)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Edge-list file ("source target [multiplicity]", # comments).
    pub graph: PathBuf,
    #[command(flatten)]
    pub opts: InferenceOpts,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub graph: PathBuf,
    /// Comma-separated variants to compare (default: all four).
    #[arg(long)]
    pub models: Option<String>,
    #[command(flatten)]
    pub opts: InferenceOpts,
}

#[derive(Debug, Args)]
pub struct MarginalsArgs {
    pub graph: PathBuf,
    #[command(flatten)]
    pub opts: InferenceOpts,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Imbalanced-degree null model: N nodes, total degree K each.
    #[arg(long, num_args = 2, value_names = ["N", "K"])]
    pub imbalanced: Option<Vec<u64>>,
    /// Add extra coherent edges among the first M nodes.
    #[arg(long = "perturb-nodes", requires = "perturb_edges")]
    pub perturb_nodes: Option<usize>,
    /// Number of extra edges for the perturbation.
    #[arg(long = "perturb-edges", requires = "perturb_nodes")]
    pub perturb_edges: Option<u64>,
    /// JSON generator spec: {"labels": [...], "affinities": [[...]],
    /// "out_degrees": [...], "in_degrees": [...]} (degrees optional).
    #[arg(long, conflicts_with = "imbalanced")]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the edge list here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    pub graph: PathBuf,
    /// Fit report (JSON from `osbm fit`) supplying the MAP ranks.
    #[arg(long)]
    pub fit: PathBuf,
    /// Marginals report (JSON from `osbm marginals`) supplying mean ranks.
    #[arg(long)]
    pub marginals: Option<PathBuf>,
    /// Correlate ranks with degree imbalance (Kendall tau-b).
    #[arg(long)]
    pub tau: bool,
    /// Use mean ranks from --marginals for the correlation.
    #[arg(long = "use-mean-rank", requires = "marginals")]
    pub use_mean_rank: bool,
    /// Emit the node order sorted by (rank, degree imbalance).
    #[arg(long)]
    pub lex: bool,
    #[arg(long = "integer-ids")]
    pub integer_ids: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<OutputFormat>,
}
