//! Metropolis-Hastings move of one subject to another class.
//!
//! The subject's changepoints are proposed from the target class and its
//! linear coefficients are integrated out in the acceptance ratio, then
//! redrawn from their conditional when the move is accepted.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use super::sweep::{accumulate_design, draw_linear_coefficients, SweepContext, SweepStats};
use crate::data::SubjectSeries;
use crate::dist;
use crate::model::{ClassParams, ModelState};

/// Log-likelihood of one subject with its active linear coefficients
/// integrated out under the class distribution, given its changepoints.
pub(crate) fn marginal_loglik(s: &SubjectSeries, class: &ClassParams, lambda: &[f64], resid_var: f64) -> f64 {
    let n_active = class.n_active;
    let p = n_active + 2;
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    accumulate_design(s, lambda, n_active, &mut xtx, &mut xty);
    let mu = DVector::from_column_slice(&class.beta_means[..p]);
    let yty: f64 = s.outcomes.iter().map(|y| y * y).sum();
    let xtx_mu = &xtx * &mu;
    let ete = yty - 2.0 * mu.dot(&xty) + mu.dot(&xtx_mu);
    let xte = &xty - &xtx_mu;

    let free: Vec<usize> = (0..p).filter(|&j| class.beta_sds[j] > 0.0).collect();
    let n = s.len() as f64;
    let mut ll = -0.5 * n * (2.0 * std::f64::consts::PI * resid_var).ln() - 0.5 * ete / resid_var;
    if free.is_empty() {
        return ll;
    }
    let q = free.len();
    let mut prec = DMatrix::zeros(q, q);
    let mut r = DVector::zeros(q);
    for (a, &ja) in free.iter().enumerate() {
        r[a] = xte[ja] / resid_var;
        for (b, &jb) in free.iter().enumerate() {
            prec[(a, b)] = xtx[(ja, jb)] / resid_var;
        }
        let var = class.beta_sds[ja] * class.beta_sds[ja];
        prec[(a, a)] += 1.0 / var;
        ll -= 0.5 * var.ln();
    }
    let Some(chol) = Cholesky::new(prec) else {
        return f64::NEG_INFINITY;
    };
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    ll - 0.5 * log_det + 0.5 * r.dot(&chol.solve(&r))
}

/// One proposal per subject: a uniformly chosen other class, with every
/// changepoint drawn from that class and the coefficients integrated out.
pub fn update_membership_collapsed<R: Rng + ?Sized>(
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
    for i in 0..state.n_subjects() {
        let s = &ctx.data.subjects[i];
        let c = state.membership[i];
        let mut to = rng.random_range(0..n_classes - 1);
        if to >= c {
            to += 1;
        }
        let target = state.classes[to].clone();
        let lambda: Vec<f64> = (0..max_k)
            .map(|k| {
                if target.cp_sds[k] > 0.0 {
                    dist::normal(rng, target.cp_means[k], target.cp_sds[k])
                } else {
                    target.cp_means[k]
                }
            })
            .collect();
        let prop = state.mixing[to].ln() + marginal_loglik(s, &target, &lambda, state.resid_var);
        let cur = state.mixing[c].ln() + marginal_loglik(s, &state.classes[c], &state.effects[i].lambda, state.resid_var);
        stats.reallocate_proposals += 1;
        if !(prop.is_finite() && dist::open01(rng).ln() < prop - cur) {
            continue;
        }

        let p = target.n_active + 2;
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        accumulate_design(s, &lambda, target.n_active, &mut xtx, &mut xty);
        let var: Vec<f64> = target.beta_sds[..p].iter().map(|s| s * s).collect();
        let Some(active) = draw_linear_coefficients(rng, &xtx, &xty, state.resid_var, &target.beta_means[..p], &var)
        else {
            continue;
        };
        let inactive: Vec<f64> = (p..max_k + 2)
            .map(|k| dist::normal(rng, target.beta_means[k], target.beta_sds[k]))
            .collect();
        let e = &mut state.effects[i];
        e.beta[..p].copy_from_slice(&active);
        e.beta[p..].copy_from_slice(&inactive);
        e.lambda = lambda;
        state.membership[i] = to;
        stats.reallocate_accepts += 1;
    }
}
