//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use pgmm_core::fit::FitSettings;
use pgmm_core::priors::{CountPrior, PriorOptions, VariancePriorFamily};
use pgmm_core::sampler::SamplerConfig;
use pgmm_core::simulator::{self, Scenario};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CpPriorKind {
    Uniform,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VariancePriorKind {
    Uniform,
    HalfCauchy,
}

/// Every setting a command may read. Unset fields take command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub draws: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub stage1_iters: Option<usize>,
    pub max_cp: Option<usize>,
    pub classes: Option<usize>,
    pub cp_prior: Option<CpPriorKind>,
    pub cp_prior_p: Option<f64>,
    pub alpha: Option<f64>,
    pub variance_prior: Option<VariancePriorKind>,
    pub strict: Option<bool>,
    pub scenario: Option<String>,
    pub k_true: Option<usize>,
    pub sigma_lambda: Option<f64>,
    pub nu1: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub k2: Option<usize>,
    pub classes_present: Option<usize>,
    pub reps: Option<usize>,
}

macro_rules! overlay_fields {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

pub const DEFAULT_MAX_CHANGEPOINTS: usize = 2;
pub const DEFAULT_CLASSES: usize = 2;
pub const DEFAULT_BINOMIAL_P: f64 = 0.5;

impl RunConfig {
    /// Read a config file. Relative input paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.draws, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay_fields!(self, other;
            data, draws, out, seed, chains, iters, burnin, thin, stage1_iters,
            max_cp, classes, cp_prior, cp_prior_p, alpha, variance_prior, strict,
            scenario, k_true, sigma_lambda, nu1, n, m, k2, classes_present, reps,
        );
    }

    pub fn out_dir(&self) -> CliResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::validation("an output directory is required (--out)"))
    }

    pub fn strict(&self) -> bool {
        self.strict.unwrap_or(false)
    }

    /// Sampler settings; burn-in defaults to half the iterations.
    pub fn sampler(&self) -> CliResult<SamplerConfig> {
        let mut cfg = SamplerConfig::default();
        if let Some(n) = self.iters {
            cfg.n_iter = n;
            cfg.burn_in = n / 2;
        }
        if let Some(b) = self.burnin {
            cfg.burn_in = b;
        }
        if let Some(c) = self.chains {
            cfg.n_chains = c;
        }
        if let Some(t) = self.thin {
            cfg.thin = t;
        }
        if let Some(s) = self.stage1_iters {
            cfg.stage1_iters = s;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Prior options starting from `base`.
    pub fn priors(&self, base: PriorOptions) -> CliResult<PriorOptions> {
        let mut out = base;
        out.count = match (self.cp_prior, self.cp_prior_p) {
            (Some(CpPriorKind::Uniform), Some(_)) => {
                return Err(CliError::validation("--cp-prior-p applies only to the binomial count prior"))
            }
            (Some(CpPriorKind::Uniform), None) => CountPrior::Uniform,
            (Some(CpPriorKind::Binomial), p) => CountPrior::Binomial {
                p: p.unwrap_or(DEFAULT_BINOMIAL_P),
            },
            (None, Some(p)) => match base.count {
                CountPrior::Binomial { .. } => CountPrior::Binomial { p },
                _ => return Err(CliError::validation("--cp-prior-p requires --cp-prior binomial")),
            },
            (None, None) => base.count,
        };
        if let CountPrior::Binomial { p } = out.count {
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::validation(format!("binomial count probability {p} must lie in (0,1)")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(CliError::validation(format!("Dirichlet concentration {a} must be positive")));
            }
            out.dirichlet_alpha = a;
        }
        if let Some(v) = self.variance_prior {
            out.variance_family = match v {
                VariancePriorKind::Uniform => VariancePriorFamily::Uniform,
                VariancePriorKind::HalfCauchy => VariancePriorFamily::ScaledHalfCauchy,
            };
        }
        Ok(out)
    }

    /// Model and prior settings for a fit, starting from `base`.
    pub fn fit_settings(&self, base: &FitSettings) -> CliResult<FitSettings> {
        let settings = FitSettings {
            max_changepoints: self.max_cp.unwrap_or(base.max_changepoints),
            n_classes: self.classes.unwrap_or(base.n_classes),
            priors: self.priors(base.priors)?,
        };
        settings.model()?;
        Ok(settings)
    }

    /// Scenario from the registry. A name with arguments, such as
    /// `appendixA(3,0.5)`, is used as is; a bare name takes its arguments
    /// from the scenario flags.
    pub fn scenario(&self) -> CliResult<Scenario> {
        let name = self
            .scenario
            .as_deref()
            .ok_or_else(|| CliError::validation("a scenario name is required (--scenario)"))?
            .trim();
        let flagged = self.k_true.is_some()
            || self.sigma_lambda.is_some()
            || self.nu1.is_some()
            || self.m.is_some()
            || self.k2.is_some()
            || self.classes_present.is_some();
        let mut s = if name.contains('(') {
            if flagged {
                return Err(CliError::validation(
                    "scenario arguments given both in the name and as flags",
                ));
            }
            simulator::builtin_scenario(name)?
        } else {
            match name {
                "main" => simulator::main_scenario(
                    self.n.unwrap_or(60),
                    self.m.unwrap_or(50),
                    self.nu1.unwrap_or(0.8),
                    self.k2.unwrap_or(2),
                )?,
                "appendixA" => simulator::appendix_a(self.k_true.unwrap_or(2), self.sigma_lambda.unwrap_or(0.2))?,
                "appendixB" => simulator::appendix_b(self.classes_present.unwrap_or(4))?,
                _ => simulator::builtin_scenario(name)?,
            }
        };
        if let Some(n) = self.n {
            if n == 0 {
                return Err(CliError::validation("at least one subject is required"));
            }
            s.design.n_subjects = n;
        }
        if let Some(seed) = self.seed {
            s.design.seed = seed;
        }
        s.design.validate()?;
        Ok(s)
    }
}
