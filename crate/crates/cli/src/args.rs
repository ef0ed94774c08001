use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "equifwer", version, about = "Family-wise error rates under one-factor equicorrelation")]
pub struct Cli {
    /// Output format. Defaults to csv for `table`, json elsewhere.
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,

    /// Relative accuracy target for quadrature.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    /// Random seed for simulations.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (1 runs sequentially; default uses every core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid of exact Bonferroni error rates over (rho, n).
    Table(TableArgs),
    /// Exact error rate, Holm any-rejection probability and AnyPwr for one model.
    Exact(ExactArgs),
    /// Lower and upper bounds with the exact value.
    Bounds(BoundsArgs),
    /// Monte Carlo estimates for one or more procedures on shared panels.
    Simulate(SimulateArgs),
    /// Limit-ratio sequence and zero-limit condition checks.
    Diagnose(DiagnoseArgs),
    /// Marginal quantiles and the Bonferroni cutoff.
    Quantile(QuantileArgs),
    /// Checks a cutoff vector against Holm's cutoffs.
    GordonCheck(GordonArgs),
    /// Applies a procedure to a column of p-values.
    Apply(ApplyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    Table1,
    Table2,
    Custom,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(value_enum)]
    pub table: TableKind,
    /// One row per rho, one column per n.
    #[arg(long)]
    pub wide: bool,
    /// Comma-separated rho grid (custom tables).
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Comma-separated n grid (custom tables).
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Distribution JSON for F, e.g. '{"kind":"laplace"}'.
    #[arg(long)]
    pub f: Option<String>,
    /// Distribution JSON for G.
    #[arg(long)]
    pub g: Option<String>,
    /// Write the table here; failed cells go to `<out>.diagnostics.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model JSON, inline or a file path.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Fixed split point in (0, 1).
    #[arg(long, conflicts_with = "optimize_d")]
    pub d: Option<f64>,
    /// Minimize the upper bound over the split point (the default).
    #[arg(long)]
    pub optimize_d: bool,
    /// Skip the exact value.
    #[arg(long)]
    pub no_exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureName {
    Bonferroni,
    Holm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimandName {
    #[value(name = "any_rejection", alias = "any-rejection")]
    AnyRejection,
    Fwer,
    Anypwr,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// One-factor model JSON, or a general model with a `dependence` key.
    #[command(flatten)]
    pub model: ModelArg,
    /// Procedures evaluated on the same panels.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bonferroni")]
    pub procedure: Vec<ProcedureName>,
    /// Hypothesis count for a global-null model.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100_000)]
    pub replications: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fwer")]
    pub estimand: Vec<EstimandName>,
    #[arg(long, default_value_t = 4096)]
    pub batch_size: u64,
    /// Append the rows to this results file (format from --output).
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000,1000000")]
    pub n_grid: Vec<usize>,
    /// Shifts b for the density-ratio check.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub b_grid: Vec<f64>,
    /// Levels a for the common-factor tail check.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5")]
    pub a_grid: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Upper-tail probability q: returns v with P(X > v) = q.
    #[arg(long)]
    pub upper: Option<f64>,
    /// Lower-tail probability p: returns v with P(X <= v) = p.
    #[arg(long)]
    pub lower: Option<f64>,
    /// Bonferroni cutoff at this level for the model's n.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GordonArgs {
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', required_unless_present = "holm")]
    pub cutoffs: Option<Vec<f64>>,
    /// Check Holm's own cutoffs for this n.
    #[arg(long)]
    pub holm: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub pvalues: PathBuf,
    /// Column holding the p-values.
    #[arg(long, default_value = "p")]
    pub column: String,
    #[arg(long, value_enum, default_value = "holm")]
    pub procedure: ProcedureName,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}
