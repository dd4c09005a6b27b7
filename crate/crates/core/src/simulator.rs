//! Synthetic data from the generative model, scenario registry and
//! recovery scoring against the generating truth.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubjectSeries};
use crate::dist;
use crate::error::{PgmmError, Result};
use crate::fit::{fit, FitSettings};
use crate::model::{ClassParams, SubjectEffects, Trajectory};
use crate::postprocess::{permutations, Estimate, ParamSummary, PosteriorSummary};
use crate::priors::{CountPrior, PriorOptions, VariancePriorFamily};
use crate::sampler::SamplerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub resid_sd: f64,
    pub classes: Vec<ClassParams>,
    pub mixing: Vec<f64>,
}

impl TrueParams {
    pub fn max_changepoints(&self) -> usize {
        self.classes[0].cp_means.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDesign {
    pub n_subjects: usize,
    pub times: Vec<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

impl ScenarioDesign {
    pub fn validate(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(PgmmError::validation("a design needs at least two occasions"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PgmmError::validation("design times must be strictly increasing"));
        }
        Ok(())
    }
}

/// Generated memberships and subject effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub membership: Vec<usize>,
    pub effects: Vec<SubjectEffects>,
}

/// Class sizes proportional to the mixing weights, rounded by largest remainder.
pub fn class_sizes(mixing: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = mixing.iter().map(|w| w * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..mixing.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - sizes.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[c] += 1;
        left -= 1;
    }
    sizes
}

pub fn simulate_dataset<R: Rng + ?Sized>(p: &TrueParams, design: &ScenarioDesign, rng: &mut R) -> (Dataset, TruthRecord) {
    let sizes = class_sizes(&p.mixing, design.n_subjects);
    let membership: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let width = design.n_subjects.to_string().len();
    let mut subjects = Vec::with_capacity(design.n_subjects);
    let mut effects = Vec::with_capacity(design.n_subjects);
    for (i, &c) in membership.iter().enumerate() {
        let class = &p.classes[c];
        let e = crate::priors::sample_subject_effects(rng, class);
        let traj = Trajectory::new(&e, class.n_active);
        let outcomes = design
            .times
            .iter()
            .map(|&x| traj.eval(x) + dist::normal(rng, 0.0, p.resid_sd))
            .collect();
        subjects.push(
            SubjectSeries::new(format!("s{:0width$}", i + 1), design.times.clone(), outcomes)
                .expect("design validated"),
        );
        effects.push(e);
    }
    let d = Dataset::new(subjects).expect("simulated dataset is well formed");
    (d, TruthRecord { membership, effects })
}

fn class(beta_means: &[f64], beta_sds: &[f64], cp_means: &[f64], cp_sds: &[f64], n_active: usize) -> ClassParams {
    ClassParams {
        beta_means: beta_means.to_vec(),
        beta_sds: beta_sds.to_vec(),
        cp_means: cp_means.to_vec(),
        cp_sds: cp_sds.to_vec(),
        n_active,
    }
}

/// A named entry of the scenario registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub truth: TrueParams,
    pub design: ScenarioDesign,
    pub fit: FitSettings,
}

fn main_truth(nu1: f64, k2: usize) -> Result<TrueParams> {
    if !(0.0..=1.0).contains(&nu1) {
        return Err(PgmmError::validation("nu1 must lie in [0,1]"));
    }
    if k2 > 2 {
        return Err(PgmmError::validation("class 2 has at most 2 changepoints"));
    }
    Ok(TrueParams {
        resid_sd: 3.16,
        classes: vec![
            class(&[0.003, -0.002, 0.194, -0.171], &[0.020, 0.010, 0.064, 0.079], &[362.0, 643.0], &[93.6, 149.0], 2),
            class(&[0.000, -0.005, 0.060, 0.081], &[0.019, 0.008, 0.027, 0.068], &[321.0, 726.0], &[132.0, 128.0], k2),
        ],
        mixing: vec![nu1, 1.0 - nu1],
    })
}

fn main_design(n: usize, m: usize) -> Result<ScenarioDesign> {
    let step = match m {
        25 => 40.0,
        50 => 20.0,
        _ => {
            if m < 2 {
                return Err(PgmmError::validation("at least two occasions are required"));
            }
            1000.0 / m as f64
        }
    };
    Ok(ScenarioDesign {
        n_subjects: n,
        times: (1..=m).map(|j| step * j as f64).collect(),
        n_reps: 100,
        seed: 1,
    })
}

fn main_fit(priors: PriorOptions) -> FitSettings {
    FitSettings {
        max_changepoints: 2,
        n_classes: 2,
        priors,
    }
}

pub fn main_scenario(n: usize, m: usize, nu1: f64, k2: usize) -> Result<Scenario> {
    Ok(Scenario {
        name: format!("main({n},{m},{nu1},{k2})"),
        truth: main_truth(nu1, k2)?,
        design: main_design(n, m)?,
        fit: main_fit(PriorOptions::default()),
    })
}

pub fn appendix_a(k_true: usize, sigma_lambda: f64) -> Result<Scenario> {
    if k_true > 5 {
        return Err(PgmmError::validation("at most 5 changepoints in this scenario"));
    }
    let sd = 0.05f64.sqrt();
    Ok(Scenario {
        name: format!("appendixA({k_true},{sigma_lambda})"),
        truth: TrueParams {
            resid_sd: 0.5f64.sqrt(),
            classes: vec![class(
                &[0.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
                &[sd; 7],
                &[3.0, 6.0, 9.0, 12.0, 15.0],
                &[sigma_lambda; 5],
                k_true,
            )],
            mixing: vec![1.0],
        },
        design: ScenarioDesign {
            n_subjects: 30,
            times: (0..20).map(|x| x as f64).collect(),
            n_reps: 30,
            seed: 1,
        },
        fit: FitSettings {
            max_changepoints: 5,
            n_classes: 1,
            priors: PriorOptions {
                count: CountPrior::Binomial { p: 0.5 },
                ..PriorOptions::default()
            },
        },
    })
}

pub fn appendix_b(n_classes_present: usize) -> Result<Scenario> {
    if !(1..=4).contains(&n_classes_present) {
        return Err(PgmmError::validation("between 1 and 4 classes may be present"));
    }
    let classes = (0..n_classes_present)
        .map(|c| {
            let mut beta = vec![0.0, 1.0, 0.0, 0.0, 0.0];
            let mut cps = vec![0.0; 3];
            for j in 0..c {
                beta[j + 2] = if j % 2 == 0 { -1.0 } else { 1.0 };
                cps[j] = 9.0 * (j + 1) as f64 / (c + 1) as f64;
            }
            for j in c..3 {
                cps[j] = 9.0 * (j + 1) as f64 / 4.0;
            }
            class(&beta, &[0.1, 0.05, 0.05, 0.05, 0.05], &cps, &[0.3; 3], c)
        })
        .collect();
    Ok(Scenario {
        name: format!("appendixB({n_classes_present})"),
        truth: TrueParams {
            resid_sd: 0.3,
            classes,
            mixing: vec![1.0 / n_classes_present as f64; n_classes_present],
        },
        design: ScenarioDesign {
            n_subjects: 10 * n_classes_present,
            times: (0..10).map(|x| x as f64).collect(),
            n_reps: 10,
            seed: 1,
        },
        fit: FitSettings {
            max_changepoints: 3,
            n_classes: 4,
            priors: PriorOptions::default(),
        },
    })
}

pub fn appendix_c(alpha: f64) -> Result<Scenario> {
    if !(alpha > 0.0) {
        return Err(PgmmError::validation("alpha must be positive"));
    }
    let mut s = main_scenario(60, 50, 0.8, 2)?;
    s.name = format!("appendixC({alpha})");
    s.fit.priors.dirichlet_alpha = alpha;
    Ok(s)
}

pub fn appendix_d(family: VariancePriorFamily) -> Result<Scenario> {
    let mut s = main_scenario(60, 50, 0.8, 2)?;
    let tag = match family {
        VariancePriorFamily::Uniform => "uniform".to_string(),
        VariancePriorFamily::ScaledHalfCauchy => "scaled".to_string(),
        VariancePriorFamily::UnscaledHalfCauchy { scale } => format!("unscaled:{scale}"),
    };
    s.name = format!("appendixD({tag})");
    s.fit.priors.variance_family = family;
    Ok(s)
}

fn parse_family(s: &str) -> Result<VariancePriorFamily> {
    match s {
        "uniform" => Ok(VariancePriorFamily::Uniform),
        "scaled" | "half-cauchy" | "scaled-half-cauchy" => Ok(VariancePriorFamily::ScaledHalfCauchy),
        "unscaled" => Ok(VariancePriorFamily::UnscaledHalfCauchy { scale: 25.0 }),
        other => match other.strip_prefix("unscaled:") {
            Some(v) => Ok(VariancePriorFamily::UnscaledHalfCauchy {
                scale: v.parse().map_err(|_| PgmmError::UnknownScenario(s.to_string()))?,
            }),
            None => Err(PgmmError::UnknownScenario(s.to_string())),
        },
    }
}

/// Look up a scenario such as `main(60,50,0.8,2)`, `appendixA(2,0.2)`,
/// `appendixB(4)`, `appendixC(0.5)` or `appendixD(scaled)`. Arguments may be
/// omitted to take the registry defaults.
pub fn builtin_scenario(spec: &str) -> Result<Scenario> {
    let spec = spec.trim();
    let unknown = || PgmmError::UnknownScenario(spec.to_string());
    let (name, args) = match spec.find('(') {
        Some(open) => {
            let close = spec.strip_suffix(')').ok_or_else(unknown)?;
            (&spec[..open], close[open + 1..].split(',').map(str::trim).filter(|a| !a.is_empty()).collect::<Vec<_>>())
        }
        None => (spec, Vec::new()),
    };
    let num = |i: usize, default: f64| -> Result<f64> {
        match args.get(i) {
            Some(a) => a.parse().map_err(|_| unknown()),
            None => Ok(default),
        }
    };
    let int = |i: usize, default: usize| -> Result<usize> {
        match args.get(i) {
            Some(a) => a.parse().map_err(|_| unknown()),
            None => Ok(default),
        }
    };
    let max_args = match name {
        "main" => 4,
        "appendixA" => 2,
        "appendixB" | "appendixC" | "appendixD" => 1,
        _ => return Err(unknown()),
    };
    if args.len() > max_args {
        return Err(unknown());
    }
    match name {
        "main" => main_scenario(int(0, 60)?, int(1, 50)?, num(2, 0.8)?, int(3, 2)?),
        "appendixA" => appendix_a(int(0, 2)?, num(1, 0.2)?),
        "appendixB" => appendix_b(int(0, 4)?),
        "appendixC" => appendix_c(num(0, 1.0)?),
        _ => appendix_d(parse_family(args.first().copied().unwrap_or("scaled"))?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecovery {
    pub name: String,
    pub truth: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub misclassification: f64,
    /// Fitted class matched to each true class.
    pub class_match: Vec<Option<usize>>,
    /// Posterior probability of the true changepoint count, per true class.
    pub true_count_prob: Vec<f64>,
    pub under_prob: Vec<f64>,
    pub over_prob: Vec<f64>,
    pub params: Vec<ParamRecovery>,
    pub converged: bool,
    pub mean_psrf: Option<f64>,
}

fn active_estimate(v: Option<&Vec<ParamSummary>>, j: usize) -> Option<&Estimate> {
    v.and_then(|v| v.get(j)).and_then(|p| p.active.as_ref())
}

/// Score a fit against the generating truth. Fitted classes are matched to
/// true classes by the permutation with the largest membership agreement.
pub fn evaluate_recovery(fit: &PosteriorSummary, truth: &TrueParams, record: &TruthRecord) -> RecoveryMetrics {
    let c_true = truth.classes.len();
    let c_fit = fit.n_classes;
    let size = c_true.max(c_fit);
    let mut agree = vec![vec![0usize; size]; size];
    for (s, &t) in fit.subjects.iter().zip(&record.membership) {
        agree[s.modal_class][t] += 1;
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for perm in permutations(size) {
        let score: usize = (0..size).map(|f| agree[f][perm[f]]).sum();
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, perm));
        }
    }
    let (score, perm) = best.expect("at least one permutation");
    let n = record.membership.len().max(1);
    let misclassification = 1.0 - score as f64 / n as f64;

    let class_match: Vec<Option<usize>> = (0..c_true)
        .map(|t| (0..c_fit).find(|&f| perm[f] == t))
        .collect();

    let mut params = Vec::new();
    let mut push = |name: String, truth: f64, est: Option<&Estimate>| {
        let (estimate, lower, upper) = est.map_or((f64::NAN, f64::NAN, f64::NAN), |e| (e.mean, e.lower, e.upper));
        params.push(ParamRecovery {
            name,
            truth,
            estimate,
            lower,
            upper,
            covered: lower <= truth && truth <= upper,
        });
    };
    push("sigma_eps".into(), truth.resid_sd, Some(fit.sigma_eps.reported()));

    let mut true_count_prob = Vec::with_capacity(c_true);
    let mut under_prob = Vec::with_capacity(c_true);
    let mut over_prob = Vec::with_capacity(c_true);
    for (t, tc) in truth.classes.iter().enumerate() {
        let fc = class_match[t].map(|f| &fit.classes[f]);
        let k = tc.n_active;
        match fc {
            Some(fc) => {
                let probs = &fc.count_probs;
                true_count_prob.push(probs.get(k).copied().unwrap_or(0.0));
                under_prob.push(probs.iter().take(k).fold(0.0, |a, b| a + b));
                over_prob.push(probs.iter().skip(k + 1).fold(0.0, |a, b| a + b));
            }
            None => {
                true_count_prob.push(0.0);
                under_prob.push(1.0);
                over_prob.push(0.0);
            }
        }
        let c1 = t + 1;
        for j in 1..k + 2 {
            push(format!("beta_mean.{c1}.{j}"), tc.beta_means[j], active_estimate(fc.map(|f| &f.intercept_and_slopes), j));
            push(format!("sigma_beta.{c1}.{j}"), tc.beta_sds[j], active_estimate(fc.map(|f| &f.beta_sds), j));
        }
        for j in 0..k {
            push(format!("lambda_mean.{c1}.{}", j + 1), tc.cp_means[j], active_estimate(fc.map(|f| &f.cp_means), j));
            push(format!("sigma_lambda.{c1}.{}", j + 1), tc.cp_sds[j], active_estimate(fc.map(|f| &f.cp_sds), j));
        }
        if c_true > 1 {
            push(format!("nu.{c1}"), truth.mixing[t], fc.map(|f| f.mixing.reported()));
        }
    }

    RecoveryMetrics {
        misclassification,
        class_match,
        true_count_prob,
        under_prob,
        over_prob,
        params,
        converged: fit.is_converged(),
        mean_psrf: fit.convergence.as_ref().and_then(|c| c.mean_psrf),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    pub rep: usize,
    pub seed: u64,
    pub metrics: RecoveryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamAggregate {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    /// Signed (mean - truth) / sd across replications.
    pub z_bias: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub n_reps: usize,
    pub n_used: usize,
    pub convergence_rate: f64,
    pub misclassification: f64,
    pub true_count_prob: Vec<f64>,
    pub under_prob: Vec<f64>,
    pub over_prob: Vec<f64>,
    pub params: Vec<ParamAggregate>,
}

/// Z-standardized bias as reported in recovery tables.
pub fn z_bias(mean: f64, truth: f64, sd: f64) -> f64 {
    (mean - truth) / sd
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Average replication records. With `converged_only`, replications that
/// failed the convergence check are left out of every mean.
pub fn aggregate(records: &[ReplicationRecord], converged_only: bool) -> AggregateMetrics {
    let n_reps = records.len();
    let converged = records.iter().filter(|r| r.metrics.converged).count();
    let used: Vec<&RecoveryMetrics> = records
        .iter()
        .map(|r| &r.metrics)
        .filter(|m| !converged_only || m.converged)
        .collect();
    let per_class = |f: &dyn Fn(&RecoveryMetrics) -> &Vec<f64>| -> Vec<f64> {
        let Some(first) = used.first() else { return Vec::new() };
        (0..f(first).len()).map(|c| mean(&used.iter().map(|m| f(m)[c]).collect::<Vec<_>>())).collect()
    };
    let mut params = Vec::new();
    if let Some(first) = used.first() {
        for (j, p) in first.params.iter().enumerate() {
            let ests: Vec<f64> = used.iter().filter_map(|m| m.params.get(j)).map(|q| q.estimate).filter(|v| v.is_finite()).collect();
            let cover: Vec<f64> = used
                .iter()
                .filter_map(|m| m.params.get(j))
                .map(|q| if q.covered { 1.0 } else { 0.0 })
                .collect();
            let (m, sd) = if ests.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let m = mean(&ests);
                let sd = if ests.len() > 1 {
                    (ests.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (ests.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                (m, sd)
            };
            params.push(ParamAggregate {
                name: p.name.clone(),
                truth: p.truth,
                mean: m,
                sd,
                z_bias: z_bias(m, p.truth, sd),
                coverage: mean(&cover),
            });
        }
    }
    AggregateMetrics {
        n_reps,
        n_used: used.len(),
        convergence_rate: if n_reps == 0 { 0.0 } else { converged as f64 / n_reps as f64 },
        misclassification: mean(&used.iter().map(|m| m.misclassification).collect::<Vec<_>>()),
        true_count_prob: per_class(&|m| &m.true_count_prob),
        under_prob: per_class(&|m| &m.under_prob),
        over_prob: per_class(&|m| &m.over_prob),
        params,
    }
}

/// Seed used for replication `rep` of a scenario with base seed `seed`.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Dataset of one replication; the simulation stream is separate from
/// every chain stream.
pub fn replication_dataset(scenario: &Scenario, rep: usize) -> (Dataset, TruthRecord) {
    let seed = replication_seed(scenario.design.seed, rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    simulate_dataset(&scenario.truth, &scenario.design, &mut rng)
}

pub fn run_replication(scenario: &Scenario, rep: usize, cfg: &SamplerConfig) -> Result<ReplicationRecord> {
    scenario.design.validate()?;
    let (d, record) = replication_dataset(scenario, rep);
    let seed = replication_seed(scenario.design.seed, rep);
    let cfg = SamplerConfig {
        master_seed: seed,
        ..cfg.clone()
    };
    let result = fit(&d, &scenario.fit, &cfg)?;
    Ok(ReplicationRecord {
        scenario: scenario.name.clone(),
        rep,
        seed,
        metrics: evaluate_recovery(&result.summary, &scenario.truth, &record),
    })
}

pub fn run_replications(scenario: &Scenario, n_reps: usize, cfg: &SamplerConfig) -> Result<Vec<ReplicationRecord>> {
    (0..n_reps).into_par_iter().map(|rep| run_replication(scenario, rep, cfg)).collect()
}

/// One CSV row per replication.
pub fn write_replication_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = ["scenario", "rep", "seed", "converged", "mean_psrf", "misclassification"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for c in 1..=first.metrics.true_count_prob.len() {
        header.push(format!("p_true_K.{c}"));
        header.push(format!("p_under_K.{c}"));
        header.push(format!("p_over_K.{c}"));
    }
    for p in &first.metrics.params {
        header.push(format!("{}.estimate", p.name));
        header.push(format!("{}.covered", p.name));
    }
    w.write_record(&header)?;
    for r in records {
        let m = &r.metrics;
        let mut row = vec![
            r.scenario.clone(),
            r.rep.to_string(),
            r.seed.to_string(),
            m.converged.to_string(),
            m.mean_psrf.map_or(String::new(), |v| v.to_string()),
            m.misclassification.to_string(),
        ];
        for c in 0..m.true_count_prob.len() {
            row.push(m.true_count_prob[c].to_string());
            row.push(m.under_prob[c].to_string());
            row.push(m.over_prob[c].to_string());
        }
        for p in &m.params {
            row.push(p.estimate.to_string());
            row.push(p.covered.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
