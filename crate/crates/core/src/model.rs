//! Parameter state of the piecewise growth mixture model and its Gaussian
//! likelihood.
//!
//! A subject trajectory is
//!
//! ```text
//! mu(x) = b0 + b1 x + sum_{k <= n_active} b_{k+1} (x - lambda_k)^+
//! ```
//!
//! where `n_active` is the changepoint count of the subject's class. Storage is
//! always sized by the maximum number of changepoints; components past
//! `n_active` keep their values but do not enter the mean.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubjectSeries};
use crate::error::{PgmmError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum number of changepoints per class.
    pub max_changepoints: usize,
    /// Number of latent classes.
    pub n_classes: usize,
}

impl ModelConfig {
    pub fn new(max_changepoints: usize, n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(PgmmError::validation("at least one class is required"));
        }
        Ok(ModelConfig {
            max_changepoints,
            n_classes,
        })
    }

    /// Number of regression coefficients per subject, `K + 2`.
    pub fn n_coefficients(&self) -> usize {
        self.max_changepoints + 2
    }
}

/// How the changepoint count of a class is read off its indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountRule {
    /// Number of leading ones: `sum_k prod_{k' <= k} I_k'`.
    LeadingOnes,
    /// Total number of ones: `sum_k I_k`.
    Total,
}

impl CountRule {
    pub fn count(self, indicators: &[bool]) -> usize {
        match self {
            CountRule::LeadingOnes => indicators.iter().take_while(|&&b| b).count(),
            CountRule::Total => indicators.iter().filter(|&&b| b).count(),
        }
    }
}

/// Subject-level random effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEffects {
    /// `beta[0]` is the intercept, `beta[1]` the initial slope and
    /// `beta[k + 1]` the slope change at changepoint `k`.
    pub beta: Vec<f64>,
    /// Changepoint locations, one per potential changepoint.
    pub lambda: Vec<f64>,
}

impl SubjectEffects {
    pub fn zeros(max_changepoints: usize) -> Self {
        SubjectEffects {
            beta: vec![0.0; max_changepoints + 2],
            lambda: vec![0.0; max_changepoints],
        }
    }

    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    pub fn slope_changes(&self) -> &[f64] {
        &self.beta[1..]
    }

    pub fn max_changepoints(&self) -> usize {
        self.lambda.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub beta_means: Vec<f64>,
    pub beta_sds: Vec<f64>,
    pub cp_means: Vec<f64>,
    pub cp_sds: Vec<f64>,
    pub n_active: usize,
}

impl ClassParams {
    pub fn zeros(max_changepoints: usize) -> Self {
        ClassParams {
            beta_means: vec![0.0; max_changepoints + 2],
            beta_sds: vec![0.0; max_changepoints + 2],
            cp_means: vec![0.0; max_changepoints],
            cp_sds: vec![0.0; max_changepoints],
            n_active: 0,
        }
    }

    /// The class mean trajectory as a set of subject effects.
    pub fn mean_effects(&self) -> SubjectEffects {
        SubjectEffects {
            beta: self.beta_means.clone(),
            lambda: self.cp_means.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub resid_var: f64,
    pub classes: Vec<ClassParams>,
    pub mixing: Vec<f64>,
    /// Zero-based class label of each subject.
    pub membership: Vec<usize>,
    pub effects: Vec<SubjectEffects>,
    /// `indicators[c][k]` for class `c` and potential changepoint `k`.
    pub indicators: Vec<Vec<bool>>,
}

impl ModelState {
    pub fn zeros(cfg: &ModelConfig, n_subjects: usize) -> Self {
        let k = cfg.max_changepoints;
        let c = cfg.n_classes;
        ModelState {
            resid_var: 1.0,
            classes: vec![ClassParams::zeros(k); c],
            mixing: vec![1.0 / c as f64; c],
            membership: vec![0; n_subjects],
            effects: vec![SubjectEffects::zeros(k); n_subjects],
            indicators: vec![vec![false; k]; c],
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            max_changepoints: self.indicators.first().map_or(0, |v| v.len()),
            n_classes: self.classes.len(),
        }
    }

    pub fn n_subjects(&self) -> usize {
        self.membership.len()
    }

    /// Recompute every class's `n_active` from its indicators.
    pub fn sync_counts(&mut self, rule: CountRule) {
        for (class, ind) in self.classes.iter_mut().zip(&self.indicators) {
            class.n_active = rule.count(ind);
        }
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &c in &self.membership {
            counts[c] += 1;
        }
        counts
    }

    /// Check the structural invariants; used by tests and when reading archives.
    pub fn check(&self, rule: CountRule) -> Result<()> {
        let cfg = self.config();
        let fail = |m: String| Err(PgmmError::validation(m));
        if !(self.resid_var > 0.0) || !self.resid_var.is_finite() {
            return fail(format!("residual variance {} not positive", self.resid_var));
        }
        if self.mixing.len() != cfg.n_classes || self.indicators.len() != cfg.n_classes {
            return fail("class dimension mismatch".into());
        }
        let total: f64 = self.mixing.iter().sum();
        if (total - 1.0).abs() > 1e-9 || self.mixing.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return fail(format!("mixing weights {:?} not on the simplex", self.mixing));
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.beta_means.len() != cfg.n_coefficients()
                || class.cp_means.len() != cfg.max_changepoints
            {
                return fail(format!("class {c} dimension mismatch"));
            }
            if class.beta_sds.iter().chain(&class.cp_sds).any(|&s| !(s >= 0.0)) {
                return fail(format!("class {c} has a negative sd"));
            }
            if class.n_active != rule.count(&self.indicators[c]) {
                return fail(format!("class {c} count inconsistent with indicators"));
            }
        }
        if self.membership.iter().any(|&c| c >= cfg.n_classes) {
            return fail("membership label out of range".into());
        }
        if self.effects.len() != self.membership.len() {
            return fail("effects/membership length mismatch".into());
        }
        for e in &self.effects {
            if e.beta.iter().chain(&e.lambda).any(|v| !v.is_finite()) {
                return fail("non-finite subject effect".into());
            }
        }
        Ok(())
    }
}

#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Piecewise-linear curve with its active hinges in a canonical order.
///
/// Hinges are summed in ascending changepoint order, so the value does not
/// depend on how the components happen to be labelled.
#[derive(Debug, Clone)]
pub struct Trajectory {
    intercept: f64,
    slope: f64,
    hinges: [(f64, f64); MAX_HINGES],
    n_hinges: usize,
}

/// Upper bound on the number of changepoints the evaluator supports.
pub const MAX_HINGES: usize = 16;

impl Trajectory {
    pub fn new(effects: &SubjectEffects, n_active: usize) -> Self {
        Self::from_parts(&effects.beta, &effects.lambda, n_active)
    }

    pub fn from_parts(beta: &[f64], lambda: &[f64], n_active: usize) -> Self {
        assert!(n_active <= lambda.len() && n_active <= MAX_HINGES);
        let mut hinges = [(0.0, 0.0); MAX_HINGES];
        for k in 0..n_active {
            hinges[k] = (lambda[k], beta[k + 2]);
        }
        hinges[..n_active].sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Trajectory {
            intercept: beta[0],
            slope: beta[1],
            hinges,
            n_hinges: n_active,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let mut y = self.intercept + self.slope * x;
        for &(l, b) in &self.hinges[..self.n_hinges] {
            y += b * positive_part(x - l);
        }
        y
    }

    /// Sum of squared residuals against a subject's series.
    pub fn rss(&self, s: &SubjectSeries) -> f64 {
        s.times
            .iter()
            .zip(&s.outcomes)
            .map(|(&x, &y)| {
                let r = y - self.eval(x);
                r * r
            })
            .sum()
    }
}

pub fn mean_trajectory(e: &SubjectEffects, n_active: usize, x: f64) -> f64 {
    Trajectory::new(e, n_active).eval(x)
}

/// Gaussian log-likelihood of one subject's series given a residual sum of squares.
#[inline]
pub fn gaussian_loglik_from_rss(rss: f64, n: usize, resid_var: f64) -> f64 {
    -0.5 * n as f64 * (LN_2PI + resid_var.ln()) - 0.5 * rss / resid_var
}

pub fn subject_log_likelihood(
    s: &SubjectSeries,
    e: &SubjectEffects,
    n_active: usize,
    resid_var: f64,
) -> f64 {
    let rss = Trajectory::new(e, n_active).rss(s);
    gaussian_loglik_from_rss(rss, s.len(), resid_var)
}

/// Total log-likelihood of the data given subject effects, memberships and
/// class changepoint counts.
pub fn log_likelihood(state: &ModelState, d: &Dataset) -> Result<f64> {
    if !(state.resid_var > 0.0) {
        return Err(PgmmError::Domain(format!(
            "residual variance must be positive, got {}",
            state.resid_var
        )));
    }
    if state.n_subjects() != d.n_subjects() {
        return Err(PgmmError::Domain(format!(
            "state has {} subjects, dataset has {}",
            state.n_subjects(),
            d.n_subjects()
        )));
    }
    Ok(d
        .subjects
        .iter()
        .zip(&state.effects)
        .zip(&state.membership)
        .map(|((s, e), &c)| subject_log_likelihood(s, e, state.classes[c].n_active, state.resid_var))
        .sum())
}

/// Log density of a normal with the given mean and variance.
#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}
