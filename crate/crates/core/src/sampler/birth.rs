//! Metropolis-Hastings moves that add, remove or relocate changepoint
//! components.
//!
//! Every move acts on the fixed-dimension indicator space. The linear
//! coefficients (class means and subject effects) are integrated out in the
//! acceptance ratio and redrawn from their joint conditional when a move is
//! accepted. The other component parameters are proposed from a
//! residual-driven density on the way in and from the prior on the way out.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::sweep::{accumulate_design, draw_linear_coefficients, members_of, SweepContext, SweepStats};
use crate::dist;
use crate::model::{positive_part, ModelState, Trajectory};
use crate::priors::{IndicatorKind, SdPrior};

const GRID_CELLS: usize = 40;

/// Which parameters a component carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentMode {
    /// Class means, sds and member effects.
    Full,
    /// Class means only; members follow the class mean.
    Restricted,
}

/// Exchange components `a` and `b` of class `c`, members' effects included.
pub(crate) fn swap_components(state: &mut ModelState, c: usize, mem: &[usize], a: usize, b: usize) {
    if a == b {
        return;
    }
    let class = &mut state.classes[c];
    class.beta_means.swap(a + 2, b + 2);
    class.beta_sds.swap(a + 2, b + 2);
    class.cp_means.swap(a, b);
    class.cp_sds.swap(a, b);
    for &i in mem {
        state.effects[i].beta.swap(a + 2, b + 2);
        state.effects[i].lambda.swap(a, b);
    }
}

/// The linear coefficients of one class integrated out, given every
/// changepoint, sd and the residual variance.
struct Collapsed {
    /// Log marginal likelihood up to a constant that depends only on the
    /// members' observation counts.
    log_marginal: f64,
    mean: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    free: Vec<usize>,
    fixed: Vec<f64>,
}

impl Collapsed {
    fn new(state: &ModelState, ctx: &SweepContext, c: usize, mem: &[usize], mode: ComponentMode) -> Option<Self> {
        let class = &state.classes[c];
        let n_active = class.n_active;
        let p = n_active + 2;
        let var = state.resid_var;
        let sds: Vec<f64> = match mode {
            ComponentMode::Full => class.beta_sds[..p].to_vec(),
            ComponentMode::Restricted => vec![0.0; p],
        };
        let rand: Vec<usize> = (0..p).filter(|&j| sds[j] > 0.0).collect();

        let mut a_tot = DMatrix::<f64>::zeros(p, p);
        let mut b_tot = DVector::<f64>::zeros(p);
        let (mut c_tot, mut ld_tot) = (0.0, 0.0);
        for &i in mem {
            let s = &ctx.data.subjects[i];
            let lambda = match mode {
                ComponentMode::Full => &state.effects[i].lambda,
                ComponentMode::Restricted => &class.cp_means,
            };
            let mut xtx = DMatrix::zeros(p, p);
            let mut xty = DVector::zeros(p);
            accumulate_design(s, lambda, n_active, &mut xtx, &mut xty);
            let yty: f64 = s.outcomes.iter().map(|y| y * y).sum();
            let mut ld = s.len() as f64 * var.ln();
            let (mut a, mut b, mut cc) = (xtx.clone(), xty.clone(), yty);
            if !rand.is_empty() {
                let q = rand.len();
                let mut g = DMatrix::from_fn(q, q, |u, v| xtx[(rand[u], rand[v])]);
                for (u, &j) in rand.iter().enumerate() {
                    let d = sds[j] * sds[j];
                    g[(u, u)] += var / d;
                    ld += d.ln() - var.ln();
                }
                let chol = Cholesky::new(g)?;
                ld += 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let xf = DMatrix::from_fn(p, q, |r, v| xtx[(r, rand[v])]);
                let fy = DVector::from_fn(q, |v, _| xty[rand[v]]);
                let g_xf = chol.solve(&xf.transpose());
                let g_fy = chol.solve(&fy);
                a -= &xf * &g_xf;
                b -= &xf * &g_fy;
                cc -= fy.dot(&g_fy);
            }
            a_tot += a / var;
            b_tot += b / var;
            c_tot += cc / var;
            ld_tot += ld;
        }

        let prior: Vec<_> = (0..p).map(|j| *ctx.spec.beta_mean_prior(j)).collect();
        let free: Vec<usize> = (0..p).filter(|&j| prior[j].var > 0.0).collect();
        let pinned: Vec<usize> = (0..p).filter(|&j| !(prior[j].var > 0.0)).collect();
        let fixed: Vec<f64> = prior.iter().map(|n| n.mean).collect();
        let mut c_adj = c_tot;
        for &f in &pinned {
            c_adj -= 2.0 * fixed[f] * b_tot[f];
            for &g in &pinned {
                c_adj += fixed[f] * a_tot[(f, g)] * fixed[g];
            }
        }
        let q = free.len();
        let mut h = DMatrix::from_fn(q, q, |u, v| a_tot[(free[u], free[v])]);
        let mut bt = DVector::from_fn(q, |u, _| {
            let j = free[u];
            b_tot[j] - pinned.iter().map(|&f| a_tot[(j, f)] * fixed[f]).sum::<f64>()
        });
        let mut log_m = -0.5 * c_adj - 0.5 * ld_tot;
        for (u, &j) in free.iter().enumerate() {
            h[(u, u)] += 1.0 / prior[j].var;
            bt[u] += prior[j].mean / prior[j].var;
            log_m -= 0.5 * (prior[j].var.ln() + prior[j].mean * prior[j].mean / prior[j].var);
        }
        if q == 0 {
            return Some(Collapsed {
                log_marginal: log_m,
                mean: DVector::zeros(0),
                chol: None,
                free,
                fixed,
            });
        }
        let chol = Cholesky::new(h)?;
        let mean = chol.solve(&bt);
        log_m += 0.5 * bt.dot(&mean) - chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(Collapsed {
            log_marginal: log_m,
            mean,
            chol: Some(chol),
            free,
            fixed,
        })
    }

    /// Draw the class coefficient means from their conditional.
    fn draw_means<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = self.fixed.clone();
        if let Some(chol) = &self.chol {
            let z = DVector::from_fn(self.free.len(), |_, _| dist::std_normal(rng));
            let dev = chol.l().transpose().solve_upper_triangular(&z).unwrap_or(z);
            for (u, &j) in self.free.iter().enumerate() {
                out[j] = self.mean[u] + dev[u];
            }
        }
        out
    }
}

/// Redraw the class coefficient means, then the members' coefficients.
fn redraw_linear<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    col: &Collapsed,
    mode: ComponentMode,
    rng: &mut R,
) {
    let means = col.draw_means(rng);
    let p = means.len();
    state.classes[c].beta_means[..p].copy_from_slice(&means);
    if mode == ComponentMode::Restricted {
        return;
    }
    let var: Vec<f64> = state.classes[c].beta_sds[..p].iter().map(|s| s * s).collect();
    for &i in mem {
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        accumulate_design(&ctx.data.subjects[i], &state.effects[i].lambda, p - 2, &mut xtx, &mut xty);
        if let Some(b) = draw_linear_coefficients(rng, &xtx, &xty, state.resid_var, &means, &var) {
            state.effects[i].beta[..p].copy_from_slice(&b);
        }
    }
}

/// Proposal for an sd: half from a narrow uniform, half from the prior.
fn sd_proposal_ln_pdf(prior: &SdPrior, sd: f64) -> f64 {
    if matches!(prior, SdPrior::Fixed { .. }) {
        return 0.0;
    }
    let narrow = prior.width_hint();
    let near = if sd >= 0.0 && sd <= narrow { 1.0 / narrow } else { 0.0 };
    (0.5 * near + 0.5 * prior.ln_pdf(sd).exp()).ln()
}

fn sd_proposal_sample<R: Rng + ?Sized>(rng: &mut R, prior: &SdPrior) -> f64 {
    match *prior {
        SdPrior::Fixed { value } => value,
        _ if rng.random::<f64>() < 0.5 => dist::uniform(rng, 0.0, prior.width_hint()),
        _ => prior.sample(rng),
    }
}

fn sd_prior_ln_pdf(prior: &SdPrior, sd: f64) -> f64 {
    if matches!(prior, SdPrior::Fixed { .. }) {
        0.0
    } else {
        prior.ln_pdf(sd)
    }
}

/// Changepoint-mean proposal: a grid over the prior support weighted by how
/// much one pooled hinge reduces the residual sum of squares around the
/// class mean trajectory, mixed half and half with the uniform.
struct CpProposal {
    lo: f64,
    cell: f64,
    ln_cell_prob: Vec<f64>,
}

impl CpProposal {
    fn new(ctx: &SweepContext, mem: &[usize], beta: &[f64], lambda: &[f64], n_active: usize, var: f64) -> Self {
        let t = Trajectory::from_parts(beta, lambda, n_active);
        let (lo, hi) = (ctx.spec.cp_mean.lower, ctx.spec.cp_mean.upper);
        let cell = (hi - lo) / GRID_CELLS as f64;
        let mut sh = vec![0.0; GRID_CELLS];
        let mut shr = vec![0.0; GRID_CELLS];
        for &i in mem {
            let s = &ctx.data.subjects[i];
            for (&x, &y) in s.times.iter().zip(&s.outcomes) {
                let r = y - t.eval(x);
                for g in 0..GRID_CELLS {
                    let h = positive_part(x - (lo + (g as f64 + 0.5) * cell));
                    sh[g] += h * h;
                    shr[g] += h * r;
                }
            }
        }
        let gains: Vec<f64> = (0..GRID_CELLS)
            .map(|g| if sh[g] > 0.0 { 0.5 * shr[g] * shr[g] / (sh[g] * var) } else { 0.0 })
            .collect();
        let top = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = gains.iter().map(|g| (g - top).exp()).sum();
        let ln_cell_prob = gains
            .iter()
            .map(|g| (0.5 / GRID_CELLS as f64 + 0.5 * (g - top).exp() / total).ln())
            .collect();
        CpProposal { lo, cell, ln_cell_prob }
    }

    fn ln_pdf(&self, v: f64) -> f64 {
        let g = ((v - self.lo) / self.cell).floor();
        if !(g >= 0.0 && g < GRID_CELLS as f64) {
            return f64::NEG_INFINITY;
        }
        self.ln_cell_prob[g as usize] - self.cell.ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = dist::categorical_from_log(rng, &self.ln_cell_prob);
        self.lo + (g as f64 + dist::open01(rng)) * self.cell
    }
}

/// Changepoint proposal built from a fresh conditional draw of the class
/// means under the first `n_base` components. The draw ignores the component
/// being moved, so both directions of a move share its distribution.
fn auxiliary_proposal<R: Rng + ?Sized>(
    state: &ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    n_base: usize,
    mode: ComponentMode,
    rng: &mut R,
) -> Option<CpProposal> {
    let mut base = state.clone();
    base.classes[c].n_active = n_base;
    let col = Collapsed::new(&base, ctx, c, mem, mode)?;
    let beta = col.draw_means(rng);
    Some(CpProposal::new(ctx, mem, &beta, &state.classes[c].cp_means, n_base, state.resid_var))
}

/// Log prior minus log proposal of component `k`'s changepoint mean and
/// sds. Members' changepoints follow their prior under both densities and
/// cancel.
fn ln_prior_over_proposal(
    ctx: &SweepContext,
    cp: &CpProposal,
    state: &ModelState,
    c: usize,
    k: usize,
    mode: ComponentMode,
) -> f64 {
    let class = &state.classes[c];
    let spec = ctx.spec;
    let mut v = spec.cp_mean.ln_pdf(class.cp_means[k]) - cp.ln_pdf(class.cp_means[k]);
    if mode == ComponentMode::Full {
        v += sd_prior_ln_pdf(&spec.cp_sd, class.cp_sds[k]) - sd_proposal_ln_pdf(&spec.cp_sd, class.cp_sds[k]);
        v += sd_prior_ln_pdf(&spec.slope_sd, class.beta_sds[k + 2])
            - sd_proposal_ln_pdf(&spec.slope_sd, class.beta_sds[k + 2]);
    }
    v
}

/// Write a proposed component at index `k`, linear coefficients excluded.
#[allow(clippy::too_many_arguments)]
fn propose_component<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    cp: &CpProposal,
    c: usize,
    mem: &[usize],
    k: usize,
    mode: ComponentMode,
    rng: &mut R,
) {
    let spec = ctx.spec;
    let m = cp.sample(rng);
    state.classes[c].cp_means[k] = m;
    if mode == ComponentMode::Full {
        let sd = sd_proposal_sample(rng, &spec.cp_sd);
        state.classes[c].cp_sds[k] = sd;
        state.classes[c].beta_sds[k + 2] = sd_proposal_sample(rng, &spec.slope_sd);
        for &i in mem {
            state.effects[i].lambda[k] = dist::normal(rng, m, sd);
        }
    } else {
        for &i in mem {
            state.effects[i].lambda[k] = m;
        }
    }
}

/// Draw component `k` of class `c` and its members' effects from the prior.
fn prior_component<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    k: usize,
    rng: &mut R,
) {
    let spec = ctx.spec;
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

/// Indicators whose toggle to `to` moves the count by exactly one.
fn toggles(indicators: &mut [bool], ctx: &SweepContext, to: bool) -> Vec<usize> {
    let rule = ctx.scheme.count_rule();
    let m = rule.count(indicators);
    (0..indicators.len())
        .filter(|&j| {
            if indicators[j] == to {
                return false;
            }
            indicators[j] = to;
            let n = rule.count(indicators);
            indicators[j] = !to;
            if to {
                n == m + 1
            } else {
                n + 1 == m
            }
        })
        .collect()
}

fn accept<R: Rng + ?Sized>(rng: &mut R, log_a: f64) -> bool {
    !log_a.is_nan() && dist::open01(rng).ln() < log_a
}

fn birth<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    mode: ComponentMode,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let mut ind = state.indicators[c].clone();
    let m = state.classes[c].n_active;
    let ups = toggles(&mut ind, ctx, true);
    if ups.is_empty() {
        return;
    }
    stats.birth_proposals += 1;
    let j = ups[rng.random_range(0..ups.len())];
    let (Some(cp), Some(old)) = (
        auxiliary_proposal(state, ctx, c, mem, m, mode, rng),
        Collapsed::new(state, ctx, c, mem, mode),
    ) else {
        return;
    };
    let mut trial = state.clone();
    propose_component(&mut trial, ctx, &cp, c, mem, m, mode, rng);
    ind[j] = true;
    let downs = toggles(&mut ind, ctx, false);
    trial.indicators[c] = ind;
    trial.classes[c].n_active = m + 1;
    let Some(new) = Collapsed::new(&trial, ctx, c, mem, mode) else {
        return;
    };
    let log_a = ctx.scheme.log_odds(j) + new.log_marginal - old.log_marginal
        + ln_prior_over_proposal(ctx, &cp, &trial, c, m, mode)
        + (ups.len() as f64).ln()
        - (downs.len() as f64).ln();
    if accept(rng, log_a) {
        redraw_linear(&mut trial, ctx, c, mem, &new, mode, rng);
        *state = trial;
        stats.birth_accepts += 1;
    }
}

fn death<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    mode: ComponentMode,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let mut ind = state.indicators[c].clone();
    let m = state.classes[c].n_active;
    let downs = toggles(&mut ind, ctx, false);
    if downs.is_empty() || m == 0 {
        return;
    }
    stats.death_proposals += 1;
    let j = downs[rng.random_range(0..downs.len())];
    swap_components(state, c, mem, rng.random_range(0..m), m - 1);
    let (Some(cp), Some(old)) = (
        auxiliary_proposal(state, ctx, c, mem, m - 1, mode, rng),
        Collapsed::new(state, ctx, c, mem, mode),
    ) else {
        return;
    };
    let mut trial = state.clone();
    ind[j] = false;
    let ups = toggles(&mut ind, ctx, true);
    trial.indicators[c] = ind;
    trial.classes[c].n_active = m - 1;
    let Some(new) = Collapsed::new(&trial, ctx, c, mem, mode) else {
        return;
    };
    let log_a = -ctx.scheme.log_odds(j) + new.log_marginal - old.log_marginal
        - ln_prior_over_proposal(ctx, &cp, state, c, m - 1, mode)
        + (downs.len() as f64).ln()
        - (ups.len() as f64).ln();
    if accept(rng, log_a) {
        redraw_linear(&mut trial, ctx, c, mem, &new, mode, rng);
        prior_component(&mut trial, ctx, c, mem, m - 1, rng);
        *state = trial;
        stats.death_accepts += 1;
    }
}

fn relocate<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    c: usize,
    mem: &[usize],
    mode: ComponentMode,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let m = state.classes[c].n_active;
    if m == 0 {
        return;
    }
    stats.relocate_proposals += 1;
    swap_components(state, c, mem, rng.random_range(0..m), m - 1);
    let (Some(cp), Some(old)) = (
        auxiliary_proposal(state, ctx, c, mem, m - 1, mode, rng),
        Collapsed::new(state, ctx, c, mem, mode),
    ) else {
        return;
    };
    let mut trial = state.clone();
    propose_component(&mut trial, ctx, &cp, c, mem, m - 1, mode, rng);
    let Some(new) = Collapsed::new(&trial, ctx, c, mem, mode) else {
        return;
    };
    let log_a = new.log_marginal - old.log_marginal + ln_prior_over_proposal(ctx, &cp, &trial, c, m - 1, mode)
        - ln_prior_over_proposal(ctx, &cp, state, c, m - 1, mode);
    if accept(rng, log_a) {
        redraw_linear(&mut trial, ctx, c, mem, &new, mode, rng);
        *state = trial;
        stats.relocate_accepts += 1;
    }
}

/// Per class: one relocation attempt, then a birth or a death chosen with
/// probability one half each.
pub fn update_birth_death<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    rng: &mut R,
    stats: &mut SweepStats,
    mode: ComponentMode,
) {
    let members = members_of(state);
    for (c, mem) in members.iter().enumerate() {
        relocate(state, ctx, c, mem, mode, rng, stats);
        if ctx.scheme.kind == IndicatorKind::Fixed {
            continue;
        }
        if rng.random::<f64>() < 0.5 {
            birth(state, ctx, c, mem, mode, rng, stats);
        } else {
            death(state, ctx, c, mem, mode, rng, stats);
        }
    }
}
