//! Full-conditional updates of the complete model.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SubjectSeries};
use crate::dist::{self, SliceSampler};
use crate::model::{gaussian_loglik_from_rss, normal_ln_pdf, positive_part, ModelState, Trajectory};
use crate::priors::{IndicatorKind, IndicatorScheme, PriorSpec, SdPrior};

/// Counters describing how the non-conjugate updates behaved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub sweeps: u64,
    pub cp_slice_updates: u64,
    pub cp_slice_evals: u64,
    pub sd_slice_updates: u64,
    pub sd_slice_evals: u64,
    pub switch_proposals: u64,
    pub switch_accepts: u64,
    pub indicator_updates: u64,
    pub indicator_flips: u64,
    pub birth_proposals: u64,
    pub birth_accepts: u64,
    pub death_proposals: u64,
    pub death_accepts: u64,
    pub relocate_proposals: u64,
    pub relocate_accepts: u64,
    pub reallocate_proposals: u64,
    pub reallocate_accepts: u64,
}

impl SweepStats {
    pub fn merge(&mut self, o: &SweepStats) {
        self.sweeps += o.sweeps;
        self.cp_slice_updates += o.cp_slice_updates;
        self.cp_slice_evals += o.cp_slice_evals;
        self.sd_slice_updates += o.sd_slice_updates;
        self.sd_slice_evals += o.sd_slice_evals;
        self.switch_proposals += o.switch_proposals;
        self.switch_accepts += o.switch_accepts;
        self.indicator_updates += o.indicator_updates;
        self.indicator_flips += o.indicator_flips;
        self.birth_proposals += o.birth_proposals;
        self.birth_accepts += o.birth_accepts;
        self.death_proposals += o.death_proposals;
        self.death_accepts += o.death_accepts;
        self.relocate_proposals += o.relocate_proposals;
        self.relocate_accepts += o.relocate_accepts;
        self.reallocate_proposals += o.reallocate_proposals;
        self.reallocate_accepts += o.reallocate_accepts;
    }

    pub fn switch_acceptance_rate(&self) -> f64 {
        self.switch_accepts as f64 / self.switch_proposals.max(1) as f64
    }

    pub fn indicator_flip_rate(&self) -> f64 {
        self.indicator_flips as f64 / self.indicator_updates.max(1) as f64
    }

    pub fn birth_acceptance_rate(&self) -> f64 {
        self.birth_accepts as f64 / self.birth_proposals.max(1) as f64
    }

    pub fn death_acceptance_rate(&self) -> f64 {
        self.death_accepts as f64 / self.death_proposals.max(1) as f64
    }

    pub fn relocate_acceptance_rate(&self) -> f64 {
        self.relocate_accepts as f64 / self.relocate_proposals.max(1) as f64
    }

    pub fn reallocate_acceptance_rate(&self) -> f64 {
        self.reallocate_accepts as f64 / self.reallocate_proposals.max(1) as f64
    }

    pub fn mean_cp_slice_evals(&self) -> f64 {
        self.cp_slice_evals as f64 / self.cp_slice_updates.max(1) as f64
    }
}

/// Read-only inputs shared by every update.
#[derive(Debug, Clone)]
pub struct SweepContext<'a> {
    pub data: &'a Dataset,
    pub spec: &'a PriorSpec,
    pub scheme: IndicatorScheme,
    pub n_obs: usize,
    /// Initial slice width for changepoint locations.
    pub cp_width: f64,
}

impl<'a> SweepContext<'a> {
    pub fn new(data: &'a Dataset, spec: &'a PriorSpec, max_changepoints: usize, width_fraction: f64) -> Self {
        SweepContext {
            data,
            spec,
            scheme: spec.indicator_scheme(max_changepoints),
            n_obs: data.n_observations(),
            cp_width: width_fraction * spec.cp_mean.width(),
        }
    }
}

pub(crate) fn members_of(state: &ModelState) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); state.classes.len()];
    for (i, &c) in state.membership.iter().enumerate() {
        m[c].push(i);
    }
    m
}

pub(crate) fn ln_effect(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        normal_ln_pdf(x, mean, sd * sd)
    } else if x == mean {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn subject_rss(s: &SubjectSeries, beta: &[f64], lambda: &[f64], n_active: usize) -> f64 {
    Trajectory::from_parts(beta, lambda, n_active).rss(s)
}

/// (a) Conjugate inverse-gamma draw of the residual variance.
pub fn update_resid_var<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    let rss: f64 = ctx
        .data
        .subjects
        .iter()
        .zip(&state.effects)
        .zip(&state.membership)
        .map(|((s, e), &c)| subject_rss(s, &e.beta, &e.lambda, state.classes[c].n_active))
        .sum();
    let shape = ctx.spec.resid_var.shape + 0.5 * ctx.n_obs as f64;
    let rate = ctx.spec.resid_var.rate + 0.5 * rss;
    state.resid_var = dist::inverse_gamma(rng, shape, rate);
}

/// Draw coefficients from a Gaussian linear-model conditional with
/// independent normal priors. Coefficients whose prior sd is zero are held
/// at their prior mean.
pub(crate) fn draw_linear_coefficients<R: Rng + ?Sized>(
    rng: &mut R,
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    resid_var: f64,
    prior_mean: &[f64],
    prior_var: &[f64],
) -> Option<Vec<f64>> {
    let p = prior_mean.len();
    let free: Vec<usize> = (0..p).filter(|&j| prior_var[j] > 0.0).collect();
    let mut out = prior_mean.to_vec();
    if free.is_empty() {
        return Some(out);
    }
    let q = free.len();
    let mut prec = DMatrix::zeros(q, q);
    let mut rhs = DVector::zeros(q);
    for (a, &ja) in free.iter().enumerate() {
        let mut r = xty[ja];
        for j in 0..p {
            if prior_var[j] <= 0.0 {
                r -= xtx[(ja, j)] * prior_mean[j];
            }
        }
        rhs[a] = r / resid_var + prior_mean[ja] / prior_var[ja];
        for (b, &jb) in free.iter().enumerate() {
            prec[(a, b)] = xtx[(ja, jb)] / resid_var;
        }
        prec[(a, a)] += 1.0 / prior_var[ja];
    }
    let chol = Cholesky::new(prec)?;
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(q, |_, _| dist::std_normal(rng));
    let dev = chol.l().transpose().solve_upper_triangular(&z)?;
    for (a, &ja) in free.iter().enumerate() {
        out[ja] = mean[a] + dev[a];
    }
    Some(out)
}

/// Accumulate the cross products of the design `[1, x, (x - lambda_k)+ ...]`.
pub(crate) fn accumulate_design(
    s: &SubjectSeries,
    lambda: &[f64],
    n_active: usize,
    xtx: &mut DMatrix<f64>,
    xty: &mut DVector<f64>,
) {
    let p = n_active + 2;
    let mut row = [0.0; crate::model::MAX_HINGES + 2];
    for (&x, &y) in s.times.iter().zip(&s.outcomes) {
        row[0] = 1.0;
        row[1] = x;
        for k in 0..n_active {
            row[k + 2] = positive_part(x - lambda[k]);
        }
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in a..p {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
}

/// (b) Joint Gaussian draw of each subject's active coefficients.
pub fn update_subject_betas<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    for i in 0..state.n_subjects() {
        let c = state.membership[i];
        let class = &state.classes[c];
        let p = class.n_active + 2;
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        accumulate_design(&ctx.data.subjects[i], &state.effects[i].lambda, class.n_active, &mut xtx, &mut xty);
        let var: Vec<f64> = class.beta_sds[..p].iter().map(|s| s * s).collect();
        if let Some(b) = draw_linear_coefficients(rng, &xtx, &xty, state.resid_var, &class.beta_means[..p], &var) {
            state.effects[i].beta[..p].copy_from_slice(&b);
        }
    }
}

/// (c) Slice-sampling update of each subject's active changepoints.
pub fn update_subject_changepoints<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let slice = SliceSampler::new(ctx.cp_width);
    let var = state.resid_var;
    for i in 0..state.n_subjects() {
        let c = state.membership[i];
        let n_active = state.classes[c].n_active;
        let s = &ctx.data.subjects[i];
        for k in 0..n_active {
            let (m, sd) = (state.classes[c].cp_means[k], state.classes[c].cp_sds[k]);
            if !(sd > 0.0) {
                state.effects[i].lambda[k] = m;
                continue;
            }
            let e = &state.effects[i];
            let mut lam = e.lambda.clone();
            let beta = &e.beta;
            let x0 = lam[k];
            let (x, evals) = slice.step(rng, x0, |v| {
                lam[k] = v;
                -0.5 * subject_rss(s, beta, &lam, n_active) / var + normal_ln_pdf(v, m, sd * sd)
            });
            state.effects[i].lambda[k] = x;
            stats.cp_slice_updates += 1;
            stats.cp_slice_evals += evals as u64;
        }
    }
}

/// (d) Conjugate normal draw of the active coefficient means.
pub fn update_beta_means<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    let members = members_of(state);
    for (c, mem) in members.iter().enumerate() {
        let p = state.classes[c].n_active + 2;
        for k in 0..p {
            let prior = ctx.spec.beta_mean_prior(k);
            let sd = state.classes[c].beta_sds[k];
            let sum: f64 = mem.iter().map(|&i| state.effects[i].beta[k]).sum();
            state.classes[c].beta_means[k] = conjugate_mean(rng, prior.mean, prior.var, sum, mem.len(), sd);
        }
    }
}

fn conjugate_mean<R: Rng + ?Sized>(rng: &mut R, m0: f64, v0: f64, sum: f64, n: usize, sd: f64) -> f64 {
    if !(v0 > 0.0) {
        return m0;
    }
    if n == 0 {
        return dist::normal(rng, m0, v0.sqrt());
    }
    if !(sd > 0.0) {
        return sum / n as f64;
    }
    let prec = 1.0 / v0 + n as f64 / (sd * sd);
    let mean = (m0 / v0 + sum / (sd * sd)) / prec;
    dist::normal(rng, mean, prec.recip().sqrt())
}

/// (e) Truncated normal draw of the active changepoint means.
pub fn update_cp_means<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    let members = members_of(state);
    let (lo, hi) = (ctx.spec.cp_mean.lower, ctx.spec.cp_mean.upper);
    for (c, mem) in members.iter().enumerate() {
        for k in 0..state.classes[c].n_active {
            let sd = state.classes[c].cp_sds[k];
            let n = mem.len();
            let v = if n == 0 {
                dist::uniform(rng, lo, hi)
            } else {
                let mean = mem.iter().map(|&i| state.effects[i].lambda[k]).sum::<f64>() / n as f64;
                if sd > 0.0 {
                    dist::truncated_normal(rng, mean, sd / (n as f64).sqrt(), lo, hi)
                } else {
                    mean.clamp(lo, hi)
                }
            };
            state.classes[c].cp_means[k] = v;
        }
    }
}

/// Draw a random-effect sd given `n` effects with summed squared deviation `ss`.
pub fn draw_sd<R: Rng + ?Sized>(
    rng: &mut R,
    prior: &SdPrior,
    current: f64,
    ss: f64,
    n: usize,
    stats: &mut SweepStats,
) -> f64 {
    match *prior {
        SdPrior::Fixed { value } => value,
        SdPrior::Uniform { upper } => {
            if n == 0 {
                return dist::uniform(rng, 0.0, upper);
            }
            if n >= 2 && ss > 0.0 {
                let tau = dist::lower_truncated_gamma(rng, 0.5 * (n as f64 - 1.0), 0.5 * ss, 1.0 / (upper * upper));
                return tau.sqrt().recip().min(upper);
            }
            let start = if current > 0.0 && current < upper { current } else { 0.5 * upper };
            let ss = ss.max(f64::MIN_POSITIVE);
            let (x, evals) = SliceSampler::new(0.1 * upper).step(rng, start, |s| {
                if s > 0.0 && s < upper {
                    -(n as f64) * s.ln() - 0.5 * ss / (s * s)
                } else {
                    f64::NEG_INFINITY
                }
            });
            stats.sd_slice_updates += 1;
            stats.sd_slice_evals += evals as u64;
            x
        }
        SdPrior::HalfCauchy { scale } => {
            if n == 0 {
                return dist::half_cauchy(rng, scale);
            }
            let start = if current > 0.0 { current } else { scale };
            let ss = ss.max(f64::MIN_POSITIVE);
            let (x, evals) = SliceSampler::new(scale).step(rng, start, |s| {
                if s > 0.0 {
                    -(n as f64) * s.ln() - 0.5 * ss / (s * s) + dist::half_cauchy_ln_pdf(s, scale)
                } else {
                    f64::NEG_INFINITY
                }
            });
            stats.sd_slice_updates += 1;
            stats.sd_slice_evals += evals as u64;
            x
        }
    }
}

/// (f) Random-effect sds of the active components.
pub fn update_sds<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R, stats: &mut SweepStats) {
    let members = members_of(state);
    for (c, mem) in members.iter().enumerate() {
        let n_active = state.classes[c].n_active;
        for k in 0..n_active + 2 {
            let m = state.classes[c].beta_means[k];
            let ss: f64 = mem.iter().map(|&i| (state.effects[i].beta[k] - m).powi(2)).sum();
            let cur = state.classes[c].beta_sds[k];
            state.classes[c].beta_sds[k] = draw_sd(rng, ctx.spec.beta_sd_prior(k), cur, ss, mem.len(), stats);
        }
        for k in 0..n_active {
            let m = state.classes[c].cp_means[k];
            let ss: f64 = mem.iter().map(|&i| (state.effects[i].lambda[k] - m).powi(2)).sum();
            let cur = state.classes[c].cp_sds[k];
            state.classes[c].cp_sds[k] = draw_sd(rng, &ctx.spec.cp_sd, cur, ss, mem.len(), stats);
        }
    }
}

/// Joint draw of every inactive component from its prior: class-level
/// parameters from the hyperpriors, then members' effects given them.
pub fn refresh_inactive<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    let members = members_of(state);
    let spec = ctx.spec;
    for (c, mem) in members.iter().enumerate() {
        let n_active = state.classes[c].n_active;
        let max_k = state.classes[c].cp_means.len();
        for k in n_active..max_k {
            let class = &mut state.classes[c];
            class.beta_means[k + 2] = spec.slope_mean.sample(rng);
            class.beta_sds[k + 2] = spec.slope_sd.sample(rng);
            class.cp_means[k] = dist::uniform(rng, spec.cp_mean.lower, spec.cp_mean.upper);
            class.cp_sds[k] = spec.cp_sd.sample(rng);
            let (bm, bs, lm, ls) = (class.beta_means[k + 2], class.beta_sds[k + 2], class.cp_means[k], class.cp_sds[k]);
            for &i in mem {
                state.effects[i].beta[k + 2] = dist::normal(rng, bm, bs);
                state.effects[i].lambda[k] = dist::normal(rng, lm, ls);
            }
        }
    }
}

/// Log density of subject `i`'s effects under class `c`, restricted to
/// components below `upto` (coefficients `0..upto+2`, changepoints `0..upto`).
fn effect_density(state: &ModelState, i: usize, c: usize, upto: usize) -> f64 {
    let e = &state.effects[i];
    let class = &state.classes[c];
    let mut lp = 0.0;
    for k in 0..upto + 2 {
        lp += ln_effect(e.beta[k], class.beta_means[k], class.beta_sds[k]);
    }
    for k in 0..upto {
        lp += ln_effect(e.lambda[k], class.cp_means[k], class.cp_sds[k]);
    }
    lp
}

/// (g) Class memberships: an exact categorical draw, followed by a
/// Metropolis-Hastings move that proposes another class together with
/// fresh values for the components inactive under both classes.
pub fn update_membership<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let n_classes = state.classes.len();
    if n_classes == 1 {
        return;
    }
    let max_k = state.classes[0].cp_means.len();
    let mut lw = vec![0.0; n_classes];
    let mut ll_cache = vec![f64::NAN; max_k + 1];
    for i in 0..state.n_subjects() {
        let s = &ctx.data.subjects[i];
        ll_cache.iter_mut().for_each(|v| *v = f64::NAN);
        let mut ll = |state: &ModelState, m: usize| {
            if ll_cache[m].is_nan() {
                let e = &state.effects[i];
                ll_cache[m] = gaussian_loglik_from_rss(subject_rss(s, &e.beta, &e.lambda, m), s.len(), state.resid_var);
            }
            ll_cache[m]
        };
        for c in 0..n_classes {
            lw[c] = state.mixing[c].ln() + effect_density(state, i, c, max_k) + ll(state, state.classes[c].n_active);
        }
        if lw.iter().any(|v| v.is_finite()) {
            state.membership[i] = dist::categorical_from_log(rng, &lw);
        }

        let c = state.membership[i];
        let mut other = rng.random_range(0..n_classes - 1);
        if other >= c {
            other += 1;
        }
        let shared = state.classes[c].n_active.max(state.classes[other].n_active);
        let cur = state.mixing[c].ln() + effect_density(state, i, c, shared) + ll(state, state.classes[c].n_active);
        let prop = state.mixing[other].ln()
            + effect_density(state, i, other, shared)
            + ll(state, state.classes[other].n_active);
        stats.switch_proposals += 1;
        let log_u = dist::open01(rng).ln();
        if prop.is_finite() && log_u < prop - cur {
            let class = &state.classes[other];
            for k in shared..max_k {
                state.effects[i].beta[k + 2] = dist::normal(rng, class.beta_means[k + 2], class.beta_sds[k + 2]);
                state.effects[i].lambda[k] = dist::normal(rng, class.cp_means[k], class.cp_sds[k]);
            }
            state.membership[i] = other;
            stats.switch_accepts += 1;
        }
    }
}

/// (h) Conjugate Dirichlet draw of the mixing weights.
pub fn update_mixing<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R) {
    let alpha: Vec<f64> = state
        .class_sizes()
        .iter()
        .map(|&n| ctx.spec.dirichlet_alpha + n as f64)
        .collect();
    state.mixing = dist::dirichlet(rng, &alpha);
}

/// Summed log-likelihood of a set of subjects for every candidate count.
pub(crate) fn class_loglik_by_count(
    state: &ModelState,
    ctx: &SweepContext,
    mem: &[usize],
    effects_of: impl Fn(usize) -> (Vec<f64>, Vec<f64>),
) -> Vec<f64> {
    let max_k = state.classes[0].cp_means.len();
    let mut out = vec![0.0; max_k + 1];
    for &i in mem {
        let s = &ctx.data.subjects[i];
        let (beta, lambda) = effects_of(i);
        for (m, slot) in out.iter_mut().enumerate() {
            *slot += gaussian_loglik_from_rss(subject_rss(s, &beta, &lambda, m), s.len(), state.resid_var);
        }
    }
    out
}

/// Bernoulli full conditionals of the indicators of one class, given the
/// class log-likelihood for each possible count.
pub(crate) fn update_class_indicators<R: Rng + ?Sized>(
    indicators: &mut [bool],
    scheme: &IndicatorScheme,
    ll: &[f64],
    rng: &mut R,
    stats: &mut SweepStats,
) -> usize {
    let rule = scheme.count_rule();
    for k in 0..indicators.len() {
        let old = indicators[k];
        indicators[k] = true;
        let on = rule.count(indicators);
        indicators[k] = false;
        let off = rule.count(indicators);
        let lo = scheme.log_odds(k) + ll[on] - ll[off];
        indicators[k] = dist::bernoulli_from_log_odds(rng, lo);
        stats.indicator_updates += 1;
        if indicators[k] != old {
            stats.indicator_flips += 1;
        }
    }
    rule.count(indicators)
}

/// (i) Changepoint indicators.
pub fn update_indicators<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    if ctx.scheme.kind == IndicatorKind::Fixed {
        return;
    }
    let members = members_of(state);
    for (c, mem) in members.iter().enumerate() {
        let ll = class_loglik_by_count(state, ctx, mem, |i| {
            (state.effects[i].beta.clone(), state.effects[i].lambda.clone())
        });
        let mut ind = std::mem::take(&mut state.indicators[c]);
        let n = update_class_indicators(&mut ind, &ctx.scheme, &ll, rng, stats);
        state.indicators[c] = ind;
        state.classes[c].n_active = n;
    }
}

/// One full sweep over every block in a fixed order.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SweepContext, rng: &mut R, stats: &mut SweepStats) {
    update_resid_var(state, ctx, rng);
    update_subject_betas(state, ctx, rng);
    update_subject_changepoints(state, ctx, rng, stats);
    update_beta_means(state, ctx, rng);
    update_cp_means(state, ctx, rng);
    update_sds(state, ctx, rng, stats);
    refresh_inactive(state, ctx, rng);
    update_membership(state, ctx, rng, stats);
    update_mixing(state, ctx, rng);
    update_indicators(state, ctx, rng, stats);
    stats.sweeps += 1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::priors::{
        sample_prior, CountPrior, InverseGammaPrior, NormalPrior, UniformPrior, VariancePriorFamily,
    };
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DRAWS: usize = 100_000;

    fn spec(count: CountPrior) -> PriorSpec {
        PriorSpec {
            resid_var: InverseGammaPrior { shape: 0.001, rate: 0.001 },
            intercept_mean: NormalPrior { mean: 1.0, var: 4.0 },
            slope_mean: NormalPrior { mean: 0.0, var: 9.0 },
            cp_mean: UniformPrior { lower: 1.0, upper: 8.0 },
            intercept_sd: SdPrior::Uniform { upper: 2.0 },
            slope_sd: SdPrior::Uniform { upper: 3.0 },
            cp_sd: SdPrior::Uniform { upper: 2.0 },
            count,
            dirichlet_alpha: 1.0,
            variance_family: VariancePriorFamily::Uniform,
        }
    }

    fn constant_panel(n_subjects: usize, m: usize, value: f64) -> Dataset {
        let times: Vec<f64> = (0..m).map(|t| t as f64).collect();
        let subjects = (0..n_subjects)
            .map(|i| SubjectSeries::new(format!("s{i}"), times.clone(), vec![value; m]).unwrap())
            .collect();
        Dataset::new(subjects).unwrap()
    }

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    fn rel_close(got: f64, want: f64, tol: f64) -> bool {
        ((got - want) / want).abs() < tol
    }

    #[test]
    fn resid_var_is_inverse_gamma() {
        // ten observations of sqrt(2) against a zero trajectory give RSS = 20
        let d = constant_panel(2, 5, 2f64.sqrt());
        let sp = spec(CountPrior::Fixed { count: 0 });
        let ctx = SweepContext::new(&d, &sp, 0, 0.1);
        let mut state = ModelState::zeros(&ModelConfig::new(0, 1).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..DRAWS)
            .map(|_| {
                update_resid_var(&mut state, &ctx, &mut rng);
                state.resid_var
            })
            .collect();
        let (m, _) = moments(&xs);
        assert!(rel_close(m, 10.001 / 4.001, 0.02), "mean {m}");
    }

    #[test]
    fn beta_means_are_conjugate_normal() {
        let d = constant_panel(4, 3, 0.0);
        let sp = spec(CountPrior::Fixed { count: 0 });
        let ctx = SweepContext::new(&d, &sp, 0, 0.1);
        let mut state = ModelState::zeros(&ModelConfig::new(0, 1).unwrap(), 4);
        let b0 = [2.0, 3.0, 2.5, 3.5];
        for (e, b) in state.effects.iter_mut().zip(b0) {
            e.beta[0] = b;
        }
        state.classes[0].beta_sds[0] = 0.8;
        let prec = 1.0 / 4.0 + 4.0 / 0.64;
        let want_mean = (1.0 / 4.0 + 11.0 / 0.64) / prec;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..DRAWS)
            .map(|_| {
                update_beta_means(&mut state, &ctx, &mut rng);
                state.classes[0].beta_means[0]
            })
            .collect();
        let (m, v) = moments(&xs);
        assert!(rel_close(m, want_mean, 0.02), "mean {m} vs {want_mean}");
        assert!(rel_close(v, 1.0 / prec, 0.02), "variance {v} vs {}", 1.0 / prec);
    }

    #[test]
    fn cp_means_are_truncated_normal() {
        let d = constant_panel(3, 3, 0.0);
        let sp = spec(CountPrior::Fixed { count: 1 });
        let ctx = SweepContext::new(&d, &sp, 1, 0.1);
        let mut state = ModelState::zeros(&ModelConfig::new(1, 1).unwrap(), 3);
        state.indicators[0][0] = true;
        state.classes[0].n_active = 1;
        state.classes[0].cp_sds[0] = 1.2;
        for (e, l) in state.effects.iter_mut().zip([7.0, 8.5, 7.9]) {
            e.lambda[0] = l;
        }
        let (mu, s) = (7.8, 1.2 / 3f64.sqrt());
        let (a, b) = ((1.0 - mu) / s, (8.0 - mu) / s);
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let z = crate::dist::normal_cdf(b) - crate::dist::normal_cdf(a);
        let shift = (phi(a) - phi(b)) / z;
        let want_mean = mu + s * shift;
        let want_var = s * s * (1.0 + (a * phi(a) - b * phi(b)) / z - shift * shift);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..DRAWS)
            .map(|_| {
                update_cp_means(&mut state, &ctx, &mut rng);
                state.classes[0].cp_means[0]
            })
            .collect();
        assert!(xs.iter().all(|&x| (1.0..=8.0).contains(&x)));
        let (m, v) = moments(&xs);
        assert!(rel_close(m, want_mean, 0.02), "mean {m} vs {want_mean}");
        assert!(rel_close(v, want_var, 0.02), "variance {v} vs {want_var}");
    }

    #[test]
    fn mixing_is_dirichlet() {
        let d = constant_panel(4, 3, 0.0);
        let sp = spec(CountPrior::Fixed { count: 0 });
        let ctx = SweepContext::new(&d, &sp, 0, 0.1);
        let mut state = ModelState::zeros(&ModelConfig::new(0, 2).unwrap(), 4);
        state.membership = vec![0, 0, 0, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..DRAWS)
            .map(|_| {
                update_mixing(&mut state, &ctx, &mut rng);
                state.mixing[0]
            })
            .collect();
        let (m, v) = moments(&xs);
        assert!(rel_close(m, 2.0 / 3.0, 0.02), "mean {m}");
        assert!(rel_close(v, 8.0 / 252.0, 0.02), "variance {v}");
    }

    #[test]
    fn identical_classes_follow_mixing() {
        let d = constant_panel(5, 4, 0.3);
        let sp = spec(CountPrior::Fixed { count: 1 });
        let cfg = ModelConfig::new(1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = sample_prior(&sp, &cfg, 5, &mut rng);
        state.classes[1] = state.classes[0].clone();
        state.mixing = vec![0.3, 0.7];
        let ctx = SweepContext::new(&d, &sp, 1, 0.1);
        let mut stats = SweepStats::default();
        let mut in_first = 0usize;
        let reps = 20_000;
        for _ in 0..reps {
            update_membership(&mut state, &ctx, &mut rng, &mut stats);
            in_first += state.membership.iter().filter(|&&c| c == 0).count();
        }
        let f = in_first as f64 / (reps * 5) as f64;
        assert!((f - 0.3).abs() < 0.01, "frequency {f}");
    }

    #[test]
    fn sd_draws_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut stats = SweepStats::default();
        let prior = SdPrior::Uniform { upper: 0.5 };
        for (ss, n) in [(0.0, 1), (1e-12, 3), (50.0, 4), (0.3, 1)] {
            for _ in 0..200 {
                let s = draw_sd(&mut rng, &prior, 0.2, ss, n, &mut stats);
                assert!(s > 0.0 && s <= 0.5, "{s}");
            }
        }
    }

    #[test]
    fn inactive_refresh_draws_from_prior() {
        let d = constant_panel(2, 3, 0.0);
        let sp = spec(CountPrior::Uniform);
        let ctx = SweepContext::new(&d, &sp, 2, 0.1);
        let mut state = ModelState::zeros(&ModelConfig::new(2, 1).unwrap(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                refresh_inactive(&mut state, &ctx, &mut rng);
                state.classes[0].cp_means[1]
            })
            .collect();
        let (m, v) = moments(&xs);
        assert!((m - 4.5).abs() < 0.05 && (v - 49.0 / 12.0).abs() < 0.1, "{m} {v}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sweeps_respect_support(seed in 0u64..1_000, binomial in proptest::bool::ANY, classes in 1usize..4) {
            let count = if binomial { CountPrior::Binomial { p: 0.4 } } else { CountPrior::Uniform };
            let sp = spec(count);
            let times: Vec<f64> = (0..10).map(|t| t as f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let subjects = (0..6)
                .map(|i| {
                    let y = times.iter().map(|&x| 0.5 * x - (x - 4.0).max(0.0) + crate::dist::normal(&mut rng, 0.0, 0.3)).collect();
                    SubjectSeries::new(format!("s{i}"), times.clone(), y).unwrap()
                })
                .collect();
            let d = Dataset::new(subjects).unwrap();
            let cfg = ModelConfig::new(3, classes).unwrap();
            let ctx = SweepContext::new(&d, &sp, 3, 0.1);
            let mut state = sample_prior(&sp, &cfg, 6, &mut rng);
            let mut stats = SweepStats::default();
            for _ in 0..30 {
                gibbs_sweep(&mut state, &ctx, &mut rng, &mut stats);
                prop_assert!(state.check(sp.count_rule()).is_ok());
                for class in &state.classes {
                    prop_assert!(class.n_active <= 3);
                    prop_assert!(class.cp_means.iter().all(|&l| l > 1.0 && l < 8.0));
                    prop_assert!(class.cp_sds.iter().all(|&s| (0.0..=2.0).contains(&s)));
                    prop_assert!(class.beta_sds[0] <= 2.0);
                    prop_assert!(class.beta_sds[1..].iter().all(|&s| (0.0..=3.0).contains(&s)));
                }
            }
        }
    }
}
