//! End-to-end fit of a dataset: time shift, default priors, chains,
//! label repair and summaries.

use serde::{Deserialize, Serialize};

use crate::data::{empirical_stats, shift_time_origin, Dataset};
use crate::error::Result;
use crate::model::ModelConfig;
use crate::postprocess::{postprocess_chains, summarize, PosteriorSummary};
use crate::priors::{build_default_priors, PriorOptions, PriorSpec};
use crate::sampler::{run_chains_parallel, ChainDraws, SamplerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub max_changepoints: usize,
    pub n_classes: usize,
    pub priors: PriorOptions,
}

impl FitSettings {
    pub fn model(&self) -> Result<ModelConfig> {
        ModelConfig::new(self.max_changepoints, self.n_classes)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Data on the shifted time axis actually used for sampling.
    pub data: Dataset,
    pub spec: PriorSpec,
    pub raw_chains: Vec<ChainDraws>,
    pub chains: Vec<ChainDraws>,
    pub summary: PosteriorSummary,
}

pub fn fit(d: &Dataset, settings: &FitSettings, cfg: &SamplerConfig) -> Result<FitResult> {
    let model = settings.model()?;
    let data = shift_time_origin(d);
    let stats = empirical_stats(&data)?;
    let spec = build_default_priors(&stats, &model, &settings.priors)?;
    let raw_chains = run_chains_parallel(&data, &spec, &model, cfg)?;
    let chains = postprocess_chains(&raw_chains);
    let summary = summarize(&chains, &data)?;
    Ok(FitResult {
        data,
        spec,
        raw_chains,
        chains,
        summary,
    })
}
