//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{CpPriorKind, RunConfig, VariancePriorKind};

#[derive(Debug, Parser)]
#[command(name = "pgmm", version, about = "Bayesian piecewise growth mixture models with random changepoints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a long-format CSV panel.
    Fit(FitArgs),
    /// Generate a dataset and its truth record from a named scenario.
    Simulate(SimulateArgs),
    /// Run a batch of simulate-and-fit replications and score recovery.
    Replicate(ReplicateArgs),
    /// Re-summarize the raw chain archives written by `fit`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Maximum number of changepoints per class.
    #[arg(long)]
    pub max_cp: Option<usize>,
    /// Number of latent classes.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Prior on the number of changepoints.
    #[arg(long, value_enum)]
    pub cp_prior: Option<CpPriorKind>,
    /// Success probability of the binomial count prior.
    #[arg(long)]
    pub cp_prior_p: Option<f64>,
    /// Dirichlet concentration of the mixing proportions.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Prior family for the random-effect standard deviations.
    #[arg(long, value_enum)]
    pub variance_prior: Option<VariancePriorKind>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Number of chains.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, burn-in included.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Burn-in iterations (default: half of --iters).
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Keep every n-th post-burn-in draw.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Iterations of the restricted initialization stage.
    #[arg(long)]
    pub stage1_iters: Option<usize>,
    /// Exit with status 3 when the chains have not converged.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario name: main, appendixA, appendixB, appendixC, appendixD, or a
    /// full registry entry such as `appendixA(3,0.5)`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// True number of changepoints (appendixA).
    #[arg(long)]
    pub k_true: Option<usize>,
    /// Changepoint standard deviation (appendixA).
    #[arg(long)]
    pub sigma_lambda: Option<f64>,
    /// Proportion of class 1 (main).
    #[arg(long)]
    pub nu1: Option<f64>,
    /// Number of subjects.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of occasions (main).
    #[arg(long)]
    pub m: Option<usize>,
    /// True number of changepoints in class 2 (main).
    #[arg(long)]
    pub k2: Option<usize>,
    /// Number of classes present (appendixB).
    #[arg(long)]
    pub classes_present: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Long-format CSV with columns subject, time, value.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Number of replications (default: the scenario's).
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory of an earlier `fit`.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Data the draws were fitted to (default: the path recorded by `fit`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Exit with status 3 when the chains have not converged.
    #[arg(long)]
    pub strict: bool,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.out = self.out.clone();
        cfg.seed = self.seed;
    }
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.max_cp = self.max_cp;
        cfg.classes = self.classes;
        cfg.cp_prior = self.cp_prior;
        cfg.cp_prior_p = self.cp_prior_p;
        cfg.alpha = self.alpha;
        cfg.variance_prior = self.variance_prior;
    }
}

impl SamplerArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.chains = self.chains;
        cfg.iters = self.iters;
        cfg.burnin = self.burnin;
        cfg.thin = self.thin;
        cfg.stage1_iters = self.stage1_iters;
        cfg.strict = flag(self.strict);
    }
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.scenario = self.scenario.clone();
        cfg.k_true = self.k_true;
        cfg.sigma_lambda = self.sigma_lambda;
        cfg.nu1 = self.nu1;
        cfg.n = self.n;
        cfg.m = self.m;
        cfg.k2 = self.k2;
        cfg.classes_present = self.classes_present;
    }
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Fit(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Replicate(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }

    /// The settings given on the command line, every unset flag left empty.
    pub fn flags(&self) -> RunConfig {
        let mut cfg = RunConfig::default();
        self.common().apply(&mut cfg);
        match self {
            Command::Fit(a) => {
                cfg.data = a.data.clone();
                a.model.apply(&mut cfg);
                a.sampler.apply(&mut cfg);
            }
            Command::Simulate(a) => a.scenario.apply(&mut cfg),
            Command::Replicate(a) => {
                a.scenario.apply(&mut cfg);
                cfg.reps = a.reps;
                a.model.apply(&mut cfg);
                a.sampler.apply(&mut cfg);
            }
            Command::Report(a) => {
                cfg.draws = a.draws.clone();
                cfg.data = a.data.clone();
                cfg.strict = flag(a.strict);
            }
        }
        cfg
    }
}
