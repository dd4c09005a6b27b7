//! Markov chain Monte Carlo over the full posterior.

mod birth;
mod draws;
mod init;
mod reallocate;
mod sweep;

pub use birth::{update_birth_death, ComponentMode};
pub use draws::{ChainDraws, DrawLayout};
pub use init::{initialize_two_stage, restricted_sweep};
pub use reallocate::update_membership_collapsed;
pub use sweep::{
    draw_sd, gibbs_sweep, refresh_inactive, update_beta_means, update_cp_means, update_indicators,
    update_membership, update_mixing, update_resid_var, update_sds, update_subject_betas,
    update_subject_changepoints, SweepContext, SweepStats,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{PgmmError, Result};
use crate::model::{ModelConfig, MAX_HINGES};
use crate::priors::PriorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub n_chains: usize,
    pub master_seed: u64,
    pub thin: usize,
    pub stage1_iters: usize,
    /// Slice width for changepoints, as a fraction of the prior support.
    pub slice_width_fraction: f64,
    /// Follow every sweep with the birth, death and relocation moves and the
    /// collapsed class moves.
    #[serde(default = "default_true")]
    pub count_moves: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 50_000,
            burn_in: 25_000,
            n_chains: 3,
            master_seed: 1,
            thin: 1,
            stage1_iters: 1000,
            slice_width_fraction: 0.1,
            count_moves: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter <= self.burn_in {
            return Err(PgmmError::validation(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.n_iter, self.burn_in
            )));
        }
        if self.n_chains == 0 {
            return Err(PgmmError::validation("at least one chain is required"));
        }
        if self.thin == 0 {
            return Err(PgmmError::validation("thinning interval must be at least 1"));
        }
        if !(self.slice_width_fraction > 0.0 && self.slice_width_fraction.is_finite()) {
            return Err(PgmmError::validation("slice width fraction must be positive"));
        }
        Ok(())
    }

    /// Random stream owned by one chain.
    pub fn chain_rng(&self, chain_id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(chain_id as u64);
        rng
    }
}

fn validate_inputs(d: &Dataset, model: &ModelConfig, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if model.max_changepoints > MAX_HINGES {
        return Err(PgmmError::validation(format!(
            "at most {MAX_HINGES} changepoints are supported"
        )));
    }
    if d.n_subjects() == 0 {
        return Err(PgmmError::validation("dataset has no subjects"));
    }
    Ok(())
}

pub fn run_chain(
    d: &Dataset,
    spec: &PriorSpec,
    model: &ModelConfig,
    cfg: &SamplerConfig,
    chain_id: usize,
) -> Result<ChainDraws> {
    validate_inputs(d, model, cfg)?;
    let ctx = SweepContext::new(d, spec, model.max_changepoints, cfg.slice_width_fraction);
    let mut rng = cfg.chain_rng(chain_id);
    let mut stats = SweepStats::default();
    let mut state = initialize_two_stage(&ctx, model, cfg.stage1_iters, &mut rng, &mut stats);
    let mut stats = SweepStats::default();
    let mut out = ChainDraws::new(DrawLayout::new(model, d.n_subjects()), chain_id, cfg.master_seed);
    for t in 1..=cfg.n_iter {
        gibbs_sweep(&mut state, &ctx, &mut rng, &mut stats);
        if cfg.count_moves {
            update_birth_death(&mut state, &ctx, &mut rng, &mut stats, ComponentMode::Full);
            update_membership_collapsed(&mut state, &ctx, &mut rng, &mut stats);
        }
        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            out.push_state(&state);
        }
    }
    out.stats = stats;
    Ok(out)
}

/// Independent chains run on the rayon pool; results are ordered by chain id.
pub fn run_chains_parallel(
    d: &Dataset,
    spec: &PriorSpec,
    model: &ModelConfig,
    cfg: &SamplerConfig,
) -> Result<Vec<ChainDraws>> {
    validate_inputs(d, model, cfg)?;
    (0..cfg.n_chains)
        .into_par_iter()
        .map(|id| run_chain(d, spec, model, cfg, id))
        .collect()
}

pub fn run_chains_sequential(
    d: &Dataset,
    spec: &PriorSpec,
    model: &ModelConfig,
    cfg: &SamplerConfig,
) -> Result<Vec<ChainDraws>> {
    (0..cfg.n_chains).map(|id| run_chain(d, spec, model, cfg, id)).collect()
}
