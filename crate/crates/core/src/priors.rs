//! Default empirical prior system, prior densities and prior sampling.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::EmpiricalStats;
use crate::dist;
use crate::error::{PgmmError, Result};
use crate::model::{normal_ln_pdf, ClassParams, CountRule, ModelConfig, ModelState, SubjectEffects};

/// Prior on the number of active changepoints per class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CountPrior {
    /// Uniform over `{0, ..., K}` through sequential Bernoulli indicators.
    Uniform,
    /// Binomial(K, p) through independent Bernoulli indicators.
    Binomial { p: f64 },
    /// Count pinned at a value; indicators are never updated.
    Fixed { count: usize },
}

impl CountPrior {
    pub fn count_rule(&self) -> CountRule {
        match self {
            CountPrior::Binomial { .. } => CountRule::Total,
            _ => CountRule::LeadingOnes,
        }
    }
}

/// Family used for the standard deviations of the random effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariancePriorFamily {
    /// Uniform(0, bound) on each sd.
    Uniform,
    /// Half-Cauchy whose 90th percentile equals the uniform bound.
    ScaledHalfCauchy,
    /// Half-Cauchy with one common scale for every sd. Performs poorly; kept
    /// for comparison runs only.
    UnscaledHalfCauchy { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SdPrior {
    Uniform { upper: f64 },
    HalfCauchy { scale: f64 },
    /// Point mass; used for restricted or test models.
    Fixed { value: f64 },
}

impl SdPrior {
    pub fn ln_pdf(&self, sd: f64) -> f64 {
        match *self {
            SdPrior::Uniform { upper } => {
                if sd >= 0.0 && sd <= upper && upper > 0.0 {
                    -upper.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SdPrior::HalfCauchy { scale } => dist::half_cauchy_ln_pdf(sd, scale),
            SdPrior::Fixed { value } => {
                if sd == value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SdPrior::Uniform { upper } => dist::uniform(rng, 0.0, upper),
            SdPrior::HalfCauchy { scale } => dist::half_cauchy(rng, scale),
            SdPrior::Fixed { value } => value,
        }
    }

    /// Typical scale of the prior, used to size slice-sampler steps.
    pub fn width_hint(&self) -> f64 {
        match *self {
            SdPrior::Uniform { upper } => upper / 10.0,
            SdPrior::HalfCauchy { scale } => scale * (0.45 * PI).tan() / 10.0,
            SdPrior::Fixed { .. } => 0.0,
        }
    }

    /// Value used to start the full model after the restricted stage.
    pub fn initial_value(&self) -> f64 {
        match *self {
            SdPrior::Uniform { upper } => 0.5 * upper,
            SdPrior::HalfCauchy { scale } => scale,
            SdPrior::Fixed { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub var: f64,
}

impl NormalPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.var > 0.0 {
            normal_ln_pdf(x, self.mean, self.var)
        } else if x == self.mean {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        dist::normal(rng, self.mean, self.var.max(0.0).sqrt())
    }
}

/// Inverse gamma with density proportional to `x^(-shape-1) exp(-rate/x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl InverseGammaPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * x.ln() - self.rate / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPrior {
    pub lower: f64,
    pub upper: f64,
}

impl UniformPrior {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x >= self.lower && x <= self.upper && self.upper > self.lower {
            -(self.upper - self.lower).ln()
        } else if self.upper == self.lower && x == self.lower {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub resid_var: InverseGammaPrior,
    pub intercept_mean: NormalPrior,
    pub slope_mean: NormalPrior,
    pub cp_mean: UniformPrior,
    pub intercept_sd: SdPrior,
    pub slope_sd: SdPrior,
    pub cp_sd: SdPrior,
    pub count: CountPrior,
    pub dirichlet_alpha: f64,
    pub variance_family: VariancePriorFamily,
}

impl PriorSpec {
    pub fn count_rule(&self) -> CountRule {
        self.count.count_rule()
    }

    /// Prior on the mean of coefficient `k` (0 = intercept).
    pub fn beta_mean_prior(&self, k: usize) -> &NormalPrior {
        if k == 0 {
            &self.intercept_mean
        } else {
            &self.slope_mean
        }
    }

    pub fn beta_sd_prior(&self, k: usize) -> &SdPrior {
        if k == 0 {
            &self.intercept_sd
        } else {
            &self.slope_sd
        }
    }

    pub fn indicator_scheme(&self, max_changepoints: usize) -> IndicatorScheme {
        indicator_probs(max_changepoints, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorOptions {
    pub count: CountPrior,
    pub dirichlet_alpha: f64,
    pub variance_family: VariancePriorFamily,
}

impl Default for PriorOptions {
    fn default() -> Self {
        PriorOptions {
            count: CountPrior::Uniform,
            dirichlet_alpha: 1.0,
            variance_family: VariancePriorFamily::Uniform,
        }
    }
}

/// Scale of a half-Cauchy whose 90th percentile is `upper_bound`.
///
/// Inverts `F(x) = (2 / pi) atan(x / scale)` at 0.9.
pub fn half_cauchy_scale_for(upper_bound: f64) -> Result<f64> {
    if !(upper_bound > 0.0) || !upper_bound.is_finite() {
        return Err(PgmmError::Domain(format!(
            "half-Cauchy bound must be positive, got {upper_bound}"
        )));
    }
    Ok(upper_bound / (0.45 * PI).tan())
}

fn sd_prior_for(bound: f64, family: VariancePriorFamily) -> Result<SdPrior> {
    Ok(match family {
        VariancePriorFamily::Uniform => SdPrior::Uniform { upper: bound },
        VariancePriorFamily::ScaledHalfCauchy => SdPrior::HalfCauchy {
            scale: half_cauchy_scale_for(bound)?,
        },
        VariancePriorFamily::UnscaledHalfCauchy { scale } => SdPrior::HalfCauchy { scale },
    })
}

pub fn build_default_priors(
    stats: &EmpiricalStats,
    cfg: &ModelConfig,
    options: &PriorOptions,
) -> Result<PriorSpec> {
    let fields = [
        stats.mean_y_first,
        stats.var_y_first,
        stats.sd_y_first,
        stats.sd_x,
        stats.sd_y,
        stats.slope_scale,
        stats.cp_lower,
        stats.cp_upper,
        stats.cp_sd_bound,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(PgmmError::validation("non-finite empirical statistics"));
    }
    for (name, v) in [
        ("var(y at first time)", stats.var_y_first),
        ("sd(Y)/sd(X)", stats.slope_scale),
        ("changepoint sd bound", stats.cp_sd_bound),
    ] {
        if !(v > 0.0) {
            return Err(PgmmError::validation(format!(
                "{name} must be positive to build default priors, got {v}"
            )));
        }
    }
    if !(stats.cp_upper > stats.cp_lower) {
        return Err(PgmmError::validation("changepoint bounds are empty"));
    }
    if !(options.dirichlet_alpha > 0.0) {
        return Err(PgmmError::validation("Dirichlet concentration must be positive"));
    }
    match options.count {
        CountPrior::Binomial { p } if !(p > 0.0 && p < 1.0) => {
            return Err(PgmmError::validation(format!("binomial p must lie in (0,1), got {p}")))
        }
        CountPrior::Fixed { count } if count > cfg.max_changepoints => {
            return Err(PgmmError::validation("fixed count exceeds the maximum"))
        }
        _ => {}
    }
    let family = options.variance_family;
    Ok(PriorSpec {
        resid_var: InverseGammaPrior {
            shape: 0.001,
            rate: 0.001,
        },
        intercept_mean: NormalPrior {
            mean: stats.mean_y_first,
            var: stats.var_y_first,
        },
        slope_mean: NormalPrior {
            mean: 0.0,
            var: stats.slope_scale * stats.slope_scale,
        },
        cp_mean: UniformPrior {
            lower: stats.cp_lower,
            upper: stats.cp_upper,
        },
        intercept_sd: sd_prior_for(stats.sd_y_first, family)?,
        slope_sd: sd_prior_for(stats.slope_scale, family)?,
        cp_sd: sd_prior_for(stats.cp_sd_bound, family)?,
        count: options.count,
        dirichlet_alpha: options.dirichlet_alpha,
        variance_family: family,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndicatorKind {
    SequentialUniform,
    IndependentBinomial,
    Fixed,
}

/// Success probabilities of the auxiliary changepoint indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorScheme {
    pub kind: IndicatorKind,
    pub probs: Vec<f64>,
}

impl IndicatorScheme {
    pub fn count_rule(&self) -> CountRule {
        match self.kind {
            IndicatorKind::IndependentBinomial => CountRule::Total,
            _ => CountRule::LeadingOnes,
        }
    }

    pub fn log_odds(&self, k: usize) -> f64 {
        let p = self.probs[k];
        (p / (1.0 - p)).ln()
    }
}

pub fn indicator_probs(max_changepoints: usize, count: CountPrior) -> IndicatorScheme {
    let big_k = max_changepoints as f64;
    match count {
        CountPrior::Uniform => IndicatorScheme {
            kind: IndicatorKind::SequentialUniform,
            probs: (1..=max_changepoints)
                .map(|k| {
                    let k = k as f64;
                    (big_k - k + 1.0) / (big_k - k + 2.0)
                })
                .collect(),
        },
        CountPrior::Binomial { p } => IndicatorScheme {
            kind: IndicatorKind::IndependentBinomial,
            probs: vec![p; max_changepoints],
        },
        CountPrior::Fixed { count } => IndicatorScheme {
            kind: IndicatorKind::Fixed,
            probs: (0..max_changepoints).map(|k| if k < count { 1.0 } else { 0.0 }).collect(),
        },
    }
}

/// Exact prior mass of each changepoint count, by enumerating every
/// indicator configuration.
pub fn cp_count_distribution(scheme: &IndicatorScheme) -> Vec<f64> {
    let k = scheme.probs.len();
    assert!(k < 30, "enumeration over 2^{k} configurations");
    let rule = scheme.count_rule();
    let mut out = vec![0.0; k + 1];
    let mut ind = vec![false; k];
    for mask in 0u64..(1u64 << k) {
        let mut p = 1.0;
        for (j, slot) in ind.iter_mut().enumerate() {
            *slot = mask >> j & 1 == 1;
            p *= if *slot { scheme.probs[j] } else { 1.0 - scheme.probs[j] };
        }
        out[rule.count(&ind)] += p;
    }
    out
}

fn ln_dirichlet(x: &[f64], alpha: f64) -> f64 {
    let c = x.len();
    if c == 1 {
        return if x[0] == 1.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x.iter().any(|&v| v < 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = ln_gamma(alpha * c as f64) - c as f64 * ln_gamma(alpha);
    if alpha != 1.0 {
        for &v in x {
            lp += (alpha - 1.0) * v.ln();
        }
    }
    lp
}

fn ln_effect(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        normal_ln_pdf(x, mean, sd * sd)
    } else if x == mean {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Log prior density of a full state: every class-level block, the
/// memberships, and the subject effects given their class.
pub fn log_prior(state: &ModelState, spec: &PriorSpec) -> f64 {
    let cfg = state.config();
    let scheme = spec.indicator_scheme(cfg.max_changepoints);
    let mut lp = spec.resid_var.ln_pdf(state.resid_var);

    for (c, class) in state.classes.iter().enumerate() {
        for (k, (&m, &s)) in class.beta_means.iter().zip(&class.beta_sds).enumerate() {
            lp += spec.beta_mean_prior(k).ln_pdf(m);
            lp += spec.beta_sd_prior(k).ln_pdf(s);
        }
        for (&m, &s) in class.cp_means.iter().zip(&class.cp_sds) {
            lp += spec.cp_mean.ln_pdf(m);
            lp += spec.cp_sd.ln_pdf(s);
        }
        let ind = &state.indicators[c];
        match scheme.kind {
            IndicatorKind::Fixed => {
                let expected = scheme.probs.iter().map(|&p| p == 1.0);
                if !ind.iter().copied().eq(expected) {
                    lp = f64::NEG_INFINITY;
                }
            }
            _ => {
                for (&on, &p) in ind.iter().zip(&scheme.probs) {
                    lp += if on { p.ln() } else { (1.0 - p).ln() };
                }
            }
        }
        if class.n_active != scheme.count_rule().count(ind) {
            lp = f64::NEG_INFINITY;
        }
    }

    lp += ln_dirichlet(&state.mixing, spec.dirichlet_alpha);
    for (e, &c) in state.effects.iter().zip(&state.membership) {
        lp += state.mixing[c].ln();
        let class = &state.classes[c];
        for k in 0..e.beta.len() {
            lp += ln_effect(e.beta[k], class.beta_means[k], class.beta_sds[k]);
        }
        for k in 0..e.lambda.len() {
            lp += ln_effect(e.lambda[k], class.cp_means[k], class.cp_sds[k]);
        }
    }
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

/// Draw subject effects for one subject from its class distribution.
pub fn sample_subject_effects<R: Rng + ?Sized>(rng: &mut R, class: &ClassParams) -> SubjectEffects {
    SubjectEffects {
        beta: class
            .beta_means
            .iter()
            .zip(&class.beta_sds)
            .map(|(&m, &s)| dist::normal(rng, m, s))
            .collect(),
        lambda: class
            .cp_means
            .iter()
            .zip(&class.cp_sds)
            .map(|(&m, &s)| dist::normal(rng, m, s))
            .collect(),
    }
}

/// Draw the class-level parameters of one class from their priors.
pub fn sample_class_prior<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &PriorSpec,
    scheme: &IndicatorScheme,
    max_changepoints: usize,
) -> (ClassParams, Vec<bool>) {
    let mut class = ClassParams::zeros(max_changepoints);
    for k in 0..max_changepoints + 2 {
        class.beta_means[k] = spec.beta_mean_prior(k).sample(rng);
        class.beta_sds[k] = spec.beta_sd_prior(k).sample(rng);
    }
    for k in 0..max_changepoints {
        class.cp_means[k] = dist::uniform(rng, spec.cp_mean.lower, spec.cp_mean.upper);
        class.cp_sds[k] = spec.cp_sd.sample(rng);
    }
    let indicators: Vec<bool> = scheme
        .probs
        .iter()
        .map(|&p| if p >= 1.0 { true } else if p <= 0.0 { false } else { rng.random::<f64>() < p })
        .collect();
    class.n_active = scheme.count_rule().count(&indicators);
    (class, indicators)
}

/// Independent draw of every block from the prior.
pub fn sample_prior<R: Rng + ?Sized>(
    spec: &PriorSpec,
    cfg: &ModelConfig,
    n_subjects: usize,
    rng: &mut R,
) -> ModelState {
    let scheme = spec.indicator_scheme(cfg.max_changepoints);
    let mut state = ModelState::zeros(cfg, n_subjects);
    // the vague inverse-gamma routinely under/overflows; keep the draw representable
    state.resid_var = dist::inverse_gamma(rng, spec.resid_var.shape, spec.resid_var.rate)
        .clamp(f64::MIN_POSITIVE, f64::MAX);
    for c in 0..cfg.n_classes {
        let (class, ind) = sample_class_prior(rng, spec, &scheme, cfg.max_changepoints);
        state.classes[c] = class;
        state.indicators[c] = ind;
    }
    state.mixing = dist::dirichlet(rng, &vec![spec.dirichlet_alpha; cfg.n_classes]);
    let log_mix: Vec<f64> = state.mixing.iter().map(|v| v.ln()).collect();
    for i in 0..n_subjects {
        let c = dist::categorical_from_log(rng, &log_mix);
        state.membership[i] = c;
        state.effects[i] = sample_subject_effects(rng, &state.classes[c]);
    }
    state
}
