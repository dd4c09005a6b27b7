//! Command implementations. Each returns whether the run converged.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pgmm_core::data::{load_long_csv, shift_time_origin, write_long_csv, Dataset};
use pgmm_core::fit::{fit, FitSettings};
use pgmm_core::postprocess::{postprocess_chains, summarize};
use pgmm_core::priors::{PriorOptions, PriorSpec};
use pgmm_core::sampler::{ChainDraws, SamplerConfig};
use pgmm_core::simulator::{
    aggregate, class_sizes, replication_dataset, run_replications, write_replication_csv, AggregateMetrics, Scenario,
    TruthRecord,
};

use crate::config::{RunConfig, DEFAULT_CLASSES, DEFAULT_MAX_CHANGEPOINTS};
use crate::error::{CliError, CliResult};
use crate::output::{write_chains, write_summary_outputs, OutDir, RAW_CHAIN_DIR};

/// Settings actually used by `fit`, written as `run_config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub data: PathBuf,
    pub n_subjects: usize,
    pub time_shift: f64,
    pub settings: FitSettings,
    pub sampler: SamplerConfig,
    pub priors: PriorSpec,
}

#[derive(Debug, Serialize)]
struct TruthFile<'a> {
    scenario: &'a Scenario,
    class_sizes: Vec<usize>,
    record: &'a TruthRecord,
}

#[derive(Debug, Serialize)]
struct ReplicateRecord<'a> {
    scenario: &'a Scenario,
    n_reps: usize,
    sampler: &'a SamplerConfig,
}

#[derive(Debug, Serialize)]
struct AggregateFile<'a> {
    scenario: &'a str,
    n_reps: usize,
    /// Means over converged replications only.
    converged: AggregateMetrics,
    /// Means over every replication.
    all: AggregateMetrics,
}

pub fn load_data(path: &Path) -> CliResult<Dataset> {
    if !path.is_file() {
        return Err(CliError::validation(format!("data file {} not found", path.display())));
    }
    load_long_csv(path).map_err(|e| CliError::validation(format!("invalid data file {}: {e}", path.display())))
}

fn default_fit() -> FitSettings {
    FitSettings {
        max_changepoints: DEFAULT_MAX_CHANGEPOINTS,
        n_classes: DEFAULT_CLASSES,
        priors: PriorOptions::default(),
    }
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<bool> {
    let data_path = cfg
        .data
        .as_deref()
        .ok_or_else(|| CliError::validation("a data file is required (--data)"))?;
    let d = load_data(data_path)?;
    let settings = cfg.fit_settings(&default_fit())?;
    let sampler = cfg.sampler()?;
    let out = OutDir::create(cfg.out_dir()?)?;

    let result = fit(&d, &settings, &sampler)?;
    write_chains(&out, RAW_CHAIN_DIR, &result.raw_chains)?;
    write_summary_outputs(&out, &result.data, &result.chains, &result.summary)?;
    let stats: Vec<_> = result.raw_chains.iter().map(|c| &c.stats).collect();
    out.write_json("sampler_stats.json", &stats)?;
    out.write_json(
        "run_config.json",
        &FitRecord {
            data: data_path.to_path_buf(),
            n_subjects: d.n_subjects(),
            time_shift: result.data.time_shift,
            settings,
            sampler,
            priors: result.spec,
        },
    )?;
    print!("{}", result.summary.render_table());
    Ok(result.summary.is_converged())
}

fn chain_files(dir: &Path) -> CliResult<Vec<(usize, PathBuf)>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::validation(format!("cannot read draws in {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::runtime)?.path();
        let id = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("chain_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(id) = id {
            files.push((id, path));
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::validation(format!("no chain archives in {}", dir.display())));
    }
    Ok(files)
}

pub fn cmd_report(cfg: &RunConfig) -> CliResult<bool> {
    let draws = cfg
        .draws
        .as_deref()
        .ok_or_else(|| CliError::validation("a fit output directory is required (--draws)"))?;
    let record_path = draws.join("run_config.json");
    let record: Option<FitRecord> = match std::fs::read_to_string(&record_path) {
        Ok(text) => Some(
            serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("invalid {}: {e}", record_path.display())))?,
        ),
        Err(_) => None,
    };
    let data_path = match (&cfg.data, &record) {
        (Some(p), _) => p.clone(),
        (None, Some(r)) => r.data.clone(),
        (None, None) => return Err(CliError::validation("a data file is required (--data)")),
    };
    let data = shift_time_origin(&load_data(&data_path)?);
    let seed = record.as_ref().map_or(0, |r| r.sampler.master_seed);
    let out = OutDir::create(cfg.out_dir()?)?;

    let raw = chain_files(&draws.join(RAW_CHAIN_DIR))?
        .into_iter()
        .map(|(id, path)| {
            ChainDraws::load_csv(&path, id, seed)
                .map_err(|e| CliError::validation(format!("invalid chain archive {}: {e}", path.display())))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let chains = postprocess_chains(&raw);
    let summary = summarize(&chains, &data)?;
    write_summary_outputs(&out, &data, &chains, &summary)?;
    print!("{}", summary.render_table());
    Ok(summary.is_converged())
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<bool> {
    let scenario = cfg.scenario()?;
    let out = OutDir::create(cfg.out_dir()?)?;
    let (d, record) = replication_dataset(&scenario, 0);
    let mut buf = Vec::new();
    write_long_csv(&d, &mut buf)?;
    out.write("data.csv", buf)?;
    let mut sizes = vec![0; scenario.truth.classes.len()];
    for &c in &record.membership {
        sizes[c] += 1;
    }
    debug_assert_eq!(sizes, class_sizes(&scenario.truth.mixing, d.n_subjects()));
    out.write_json(
        "truth.json",
        &TruthFile {
            scenario: &scenario,
            class_sizes: sizes,
            record: &record,
        },
    )?;
    eprintln!("{}: {} subjects, {} occasions", scenario.name, d.n_subjects(), scenario.design.times.len());
    Ok(true)
}

pub fn cmd_replicate(cfg: &RunConfig) -> CliResult<bool> {
    let mut scenario = cfg.scenario()?;
    scenario.fit = cfg.fit_settings(&scenario.fit)?;
    let n_reps = cfg.reps.unwrap_or(scenario.design.n_reps);
    if n_reps == 0 {
        return Err(CliError::validation("at least one replication is required"));
    }
    let sampler = cfg.sampler()?;
    let out = OutDir::create(cfg.out_dir()?)?;

    let records = run_replications(&scenario, n_reps, &sampler)?;
    let mut buf = Vec::new();
    write_replication_csv(&records, &mut buf)?;
    out.write("replications.csv", buf)?;
    let agg = AggregateFile {
        scenario: &scenario.name,
        n_reps,
        converged: aggregate(&records, true),
        all: aggregate(&records, false),
    };
    out.write_json("aggregate.json", &agg)?;
    out.write_json(
        "run_config.json",
        &ReplicateRecord {
            scenario: &scenario,
            n_reps,
            sampler: &sampler,
        },
    )?;
    eprintln!(
        "{}: {} replications, convergence rate {:.2}, misclassification {:.3}",
        scenario.name, n_reps, agg.all.convergence_rate, agg.converged.misclassification
    );
    Ok(records.iter().all(|r| r.metrics.converged))
}
