use clap::{Args, Parser, Subcommand};
use specconv::train::{Architecture, BiasInit, MaskKind, ModelVariant, Ranks};
use specconv::verify::Suite;
use specconv::{BasisSpec, GraphMatrixKind, TrainConfig};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "specconv", version, about = "Spectral graph convolutions with decomposed coefficient tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on an SGCD dataset and write a metrics document.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Run the built-in property suites.
    Verify(VerifyArgs),
    /// Time propagation and one training step.
    Bench(BenchArgs),
}

fn parse_variant(s: &str) -> Result<ModelVariant, String> {
    ModelVariant::parse(s).map_err(|e| e.to_string())
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    Architecture::parse(s).map_err(|e| e.to_string())
}

fn parse_bias_init(s: &str) -> Result<BiasInit, String> {
    BiasInit::parse(s).map_err(|e| e.to_string())
}

fn parse_mask(s: &str) -> Result<MaskKind, String> {
    MaskKind::parse(s).map_err(|e| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::parse(s).map_err(|e| e.to_string())
}

const BASES: [&str; 5] = ["monomial", "chebyshev", "bernstein", "jacobi", "favard"];
const GRAPH_MATRICES: [&str; 6] = ["adj-norm", "lap", "lap-shifted", "lap-scaled", "adj-renorm", "lap-half"];

/// `GROUP=VALUE`.
fn parse_group_value(s: &str) -> Result<(String, f64), String> {
    let (group, value) = s.split_once('=').ok_or_else(|| format!("expected GROUP=VALUE, got '{s}'"))?;
    let value = value.parse::<f64>().map_err(|e| format!("bad value in '{s}': {e}"))?;
    Ok((group.to_string(), value))
}

/// Model shape flags, shared by train, eval and bench.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_parser = parse_variant, default_value = "cp")]
    pub model: ModelVariant,
    #[arg(long, value_parser = parse_arch, default_value = "linear")]
    pub arch: Architecture,
    #[arg(long, value_parser = BASES, default_value = "jacobi")]
    pub basis: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub jacobi_a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub jacobi_b: f64,
    #[arg(long, value_parser = GRAPH_MATRICES, default_value = "adj-norm")]
    pub graph_matrix: String,
    /// Largest eigenvalue used by lap-scaled.
    #[arg(long, default_value_t = 2.0)]
    pub lambda_star: f64,
    /// Polynomial order.
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    /// CP rank, or the Tucker M-mode rank.
    #[arg(long = "R", default_value_t = 32)]
    pub r: usize,
    /// Tucker C-mode rank.
    #[arg(long = "P", default_value_t = 32)]
    pub p: usize,
    /// Tucker P-mode rank.
    #[arg(long = "Q", default_value_t = 32)]
    pub q: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// APPNP teleport probability.
    #[arg(long, default_value_t = 0.1)]
    pub teleport: f64,
    /// Per-output variant propagates its bias with the signal.
    #[arg(long)]
    pub strict_per_output: bool,
    #[arg(long, value_parser = parse_bias_init, default_value = "uniform")]
    pub bias_init: BiasInit,
}

impl ModelArgs {
    pub fn apply(&self, config: &mut TrainConfig) -> anyhow::Result<()> {
        config.variant = self.model;
        config.architecture = self.arch;
        config.basis = BasisSpec::parse(&self.basis, self.jacobi_a, self.jacobi_b)?;
        config.graph_matrix = GraphMatrixKind::parse(&self.graph_matrix, self.lambda_star)?;
        config.k = self.k;
        config.ranks = Ranks { r: self.r, p_dim: self.p, q: self.q };
        config.hidden_dim = self.hidden;
        config.teleport = self.teleport;
        config.strict_per_output = self.strict_per_output;
        config.bias_init = self.bias_init;
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// SGCD dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub runs: u64,
    /// First seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train seeds on separate threads.
    #[arg(long)]
    pub parallel: bool,
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
    /// Write best-validation parameters here (suffixed per seed when runs > 1).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Per-group learning rate, GROUP=VALUE; repeatable.
    #[arg(long = "lr-group", value_parser = parse_group_value)]
    pub lr_group: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0.0)]
    pub wd: f64,
    /// Per-group weight decay, GROUP=VALUE; repeatable.
    #[arg(long = "wd-group", value_parser = parse_group_value)]
    pub wd_group: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0.0)]
    pub dropout_features: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout_signals: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout_after_c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout_after_g: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout_z: f64,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 200)]
    pub patience: usize,
    /// Scale each feature row to unit L1 norm.
    #[arg(long)]
    pub row_normalize: bool,
    /// Leave wall-clock fields at zero so repeated runs give identical files.
    #[arg(long)]
    pub no_timing: bool,
}

impl TrainArgs {
    pub fn config(&self) -> anyhow::Result<TrainConfig> {
        let mut config = TrainConfig::default();
        self.model.apply(&mut config)?;
        config.seed = self.seed;
        config.learning_rate.default = self.lr;
        for (g, v) in &self.lr_group {
            config.learning_rate.set(g, *v)?;
        }
        config.weight_decay.default = self.wd;
        for (g, v) in &self.wd_group {
            config.weight_decay.set(g, *v)?;
        }
        config.dropout.features = self.dropout_features;
        config.dropout.signals = self.dropout_signals;
        config.dropout.after_c = self.dropout_after_c;
        config.dropout.after_g = self.dropout_after_g;
        config.dropout.on_z = self.dropout_z;
        config.epochs = self.epochs;
        config.patience = self.patience;
        config.row_normalize = self.row_normalize;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// SGCD dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// SGCP checkpoint written by train.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = parse_mask, default_value = "test")]
    pub mask: MaskKind,
    /// Checked against the checkpoint when given.
    #[arg(long, value_parser = parse_variant)]
    pub model: Option<ModelVariant>,
    /// Checked against the checkpoint when given.
    #[arg(long, value_parser = BASES)]
    pub basis: Option<String>,
    /// Checked against the checkpoint when given.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Checked against the checkpoint when given.
    #[arg(long, value_parser = GRAPH_MATRICES)]
    pub graph_matrix: Option<String>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these suites; repeatable.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Vec<Suite>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// SGCD dataset; a synthetic graph is used when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Synthetic graph size.
    #[arg(long, default_value_t = 2000)]
    pub nodes: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
}
