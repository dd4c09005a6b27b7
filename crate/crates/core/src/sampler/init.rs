//! Two-stage initialization: a restricted fit without random effects,
//! whose summaries start the full model.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::birth::{update_birth_death, ComponentMode};
use super::sweep::{
    accumulate_design, class_loglik_by_count, draw_linear_coefficients, members_of, update_class_indicators,
    update_mixing, update_resid_var, SweepContext, SweepStats,
};
use crate::dist::{self, SliceSampler};
use crate::model::{gaussian_loglik_from_rss, ClassParams, ModelConfig, ModelState, Trajectory};
use crate::priors::{sample_prior, IndicatorKind};

fn sync_effects_to_means(state: &mut ModelState) {
    for (e, &c) in state.effects.iter_mut().zip(&state.membership) {
        e.beta.copy_from_slice(&state.classes[c].beta_means);
        e.lambda.copy_from_slice(&state.classes[c].cp_means);
    }
}

fn class_rss(ctx: &SweepContext, mem: &[usize], beta: &[f64], lambda: &[f64], n_active: usize) -> f64 {
    let t = Trajectory::from_parts(beta, lambda, n_active);
    mem.iter().map(|&i| t.rss(&ctx.data.subjects[i])).sum()
}

/// One sweep of the model with every random-effect sd pinned at zero.
pub fn restricted_sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    ctx: &SweepContext,
    rng: &mut R,
    stats: &mut SweepStats,
) {
    let spec = ctx.spec;
    sync_effects_to_means(state);
    update_resid_var(state, ctx, rng);

    let members = members_of(state);
    let max_k = state.classes[0].cp_means.len();
    let slice = SliceSampler::new(ctx.cp_width);
    let (lo, hi) = (spec.cp_mean.lower, spec.cp_mean.upper);
    for (c, mem) in members.iter().enumerate() {
        let n_active = state.classes[c].n_active;
        let p = n_active + 2;
        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        for &i in mem {
            accumulate_design(&ctx.data.subjects[i], &state.classes[c].cp_means, n_active, &mut xtx, &mut xty);
        }
        let m0: Vec<f64> = (0..p).map(|k| spec.beta_mean_prior(k).mean).collect();
        let v0: Vec<f64> = (0..p).map(|k| spec.beta_mean_prior(k).var).collect();
        if let Some(b) = draw_linear_coefficients(rng, &xtx, &xty, state.resid_var, &m0, &v0) {
            state.classes[c].beta_means[..p].copy_from_slice(&b);
        }

        for k in 0..n_active {
            if mem.is_empty() {
                state.classes[c].cp_means[k] = dist::uniform(rng, lo, hi);
                continue;
            }
            let beta = state.classes[c].beta_means.clone();
            let mut lam = state.classes[c].cp_means.clone();
            let var = state.resid_var;
            let (x, evals) = slice.step(rng, lam[k], |v| {
                if v < lo || v > hi {
                    return f64::NEG_INFINITY;
                }
                lam[k] = v;
                -0.5 * class_rss(ctx, mem, &beta, &lam, n_active) / var
            });
            state.classes[c].cp_means[k] = x;
            stats.cp_slice_updates += 1;
            stats.cp_slice_evals += evals as u64;
        }

        let class = &mut state.classes[c];
        for k in n_active..max_k {
            class.beta_means[k + 2] = spec.slope_mean.sample(rng);
            class.cp_means[k] = dist::uniform(rng, lo, hi);
        }
    }
    sync_effects_to_means(state);

    let n_classes = state.classes.len();
    if n_classes > 1 {
        let mut lw = vec![0.0; n_classes];
        for i in 0..state.n_subjects() {
            let s = &ctx.data.subjects[i];
            for (c, slot) in lw.iter_mut().enumerate() {
                let class = &state.classes[c];
                let rss = Trajectory::from_parts(&class.beta_means, &class.cp_means, class.n_active).rss(s);
                *slot = state.mixing[c].ln() + gaussian_loglik_from_rss(rss, s.len(), state.resid_var);
            }
            if lw.iter().any(|v| v.is_finite()) {
                state.membership[i] = dist::categorical_from_log(rng, &lw);
            }
        }
        sync_effects_to_means(state);
    }
    update_mixing(state, ctx, rng);

    if ctx.scheme.kind != IndicatorKind::Fixed {
        let members = members_of(state);
        for (c, mem) in members.iter().enumerate() {
            let class = state.classes[c].clone();
            let ll = class_loglik_by_count(state, ctx, mem, |_| (class.beta_means.clone(), class.cp_means.clone()));
            let mut ind = std::mem::take(&mut state.indicators[c]);
            let n = update_class_indicators(&mut ind, &ctx.scheme, &ll, rng, stats);
            state.indicators[c] = ind;
            state.classes[c].n_active = n;
        }
        sync_effects_to_means(state);
        update_birth_death(state, ctx, rng, stats, ComponentMode::Restricted);
        sync_effects_to_means(state);
    }
    stats.sweeps += 1;
}

/// Active components sorted by changepoint mean, slope changes carried along.
fn sorted_active(class: &ClassParams) -> (Vec<f64>, Vec<f64>) {
    let n = class.n_active;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| class.cp_means[a].total_cmp(&class.cp_means[b]));
    let mut beta = class.beta_means.clone();
    let mut lambda = class.cp_means.clone();
    for (dst, &src) in order.iter().enumerate() {
        beta[dst + 2] = class.beta_means[src + 2];
        lambda[dst] = class.cp_means[src];
    }
    (beta, lambda)
}

fn mode(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = k;
        }
    }
    best
}

/// Run the restricted stage and build the starting state of the full model.
///
/// With `stage1_iters == 0` this is a draw from the prior.
pub fn initialize_two_stage<R: Rng + ?Sized>(
    ctx: &SweepContext,
    cfg: &ModelConfig,
    stage1_iters: usize,
    rng: &mut R,
    stats: &mut SweepStats,
) -> ModelState {
    let spec = ctx.spec;
    let n = ctx.data.n_subjects();
    let mut state = sample_prior(spec, cfg, n, rng);
    if stage1_iters == 0 {
        return state;
    }
    let (kk, cc) = (cfg.max_changepoints, cfg.n_classes);
    let keep_from = stage1_iters / 2;
    let mut kept = Vec::with_capacity(stage1_iters - keep_from);
    for t in 0..stage1_iters {
        restricted_sweep(&mut state, ctx, rng, stats);
        if t >= keep_from {
            kept.push(state.clone());
        }
    }

    let mut init = ModelState::zeros(cfg, n);
    init.resid_var = kept.iter().map(|s| s.resid_var).sum::<f64>() / kept.len() as f64;

    for c in 0..cc {
        let mut count_freq = vec![0usize; kk + 1];
        for s in &kept {
            count_freq[s.classes[c].n_active] += 1;
        }
        let k_mode = mode(&count_freq);
        let mut beta = vec![0.0; kk + 2];
        let mut lambda = vec![0.0; kk];
        let mut used = 0usize;
        for s in kept.iter().filter(|s| s.classes[c].n_active == k_mode) {
            let (b, l) = sorted_active(&s.classes[c]);
            beta.iter_mut().zip(&b).for_each(|(a, v)| *a += v);
            lambda.iter_mut().zip(&l).for_each(|(a, v)| *a += v);
            used += 1;
        }
        let class = &mut init.classes[c];
        class.beta_means = beta.iter().map(|v| v / used as f64).collect();
        class.cp_means = lambda.iter().map(|v| v / used as f64).collect();
        class.n_active = k_mode;
        for k in 0..kk + 2 {
            class.beta_sds[k] = spec.beta_sd_prior(k).initial_value();
        }
        for k in 0..kk {
            class.cp_sds[k] = spec.cp_sd.initial_value();
        }
        init.indicators[c] = match ctx.scheme.kind {
            IndicatorKind::Fixed => ctx.scheme.probs.iter().map(|&p| p == 1.0).collect(),
            _ => (0..kk).map(|k| k < k_mode).collect(),
        };
        init.classes[c].n_active = ctx.scheme.count_rule().count(&init.indicators[c]);
    }

    let mut sizes = vec![0usize; cc];
    for i in 0..n {
        let mut freq = vec![0usize; cc];
        for s in &kept {
            freq[s.membership[i]] += 1;
        }
        init.membership[i] = mode(&freq);
        sizes[init.membership[i]] += 1;
    }
    let alpha = spec.dirichlet_alpha;
    let denom = n as f64 + cc as f64 * alpha;
    init.mixing = sizes.iter().map(|&m| (m as f64 + alpha) / denom).collect();
    sync_effects_to_means(&mut init);
    init
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{empirical_stats, Dataset, SubjectSeries};
    use crate::postprocess::{best_permutation, permutations};
    use crate::priors::{build_default_priors, PriorOptions, PriorSpec};
    use crate::simulator::{appendix_b, replication_dataset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_spec(d: &Dataset, model: &ModelConfig) -> PriorSpec {
        build_default_priors(&empirical_stats(d).unwrap(), model, &PriorOptions::default()).unwrap()
    }

    #[test]
    fn zero_stage_is_a_prior_draw() {
        let times: Vec<f64> = (0..5).map(|t| t as f64).collect();
        let subjects = (0..3)
            .map(|i| SubjectSeries::new(format!("s{i}"), times.clone(), times.iter().map(|x| (x + 1.0) * i as f64).collect()).unwrap())
            .collect();
        let d = Dataset::new(subjects).unwrap();
        let model = ModelConfig::new(2, 2).unwrap();
        let spec = default_spec(&d, &model);
        let ctx = SweepContext::new(&d, &spec, 2, 0.1);
        let mut stats = SweepStats::default();
        let a = initialize_two_stage(&ctx, &model, 0, &mut ChaCha8Rng::seed_from_u64(8), &mut stats);
        let b = sample_prior(&spec, &model, 3, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_eq!(stats.sweeps, 0);
    }

    #[test]
    fn linear_start_near_least_squares() {
        let times: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let subjects = (0..20)
            .map(|i| {
                let y = times.iter().map(|&x| 3.0 + 0.8 * x + 0.01 * (i % 3) as f64).collect();
                SubjectSeries::new(format!("s{i}"), times.clone(), y).unwrap()
            })
            .collect();
        let d = Dataset::new(subjects).unwrap();
        // closed-form simple regression over the pooled panel
        let xs: Vec<f64> = d.subjects.iter().flat_map(|s| s.times.clone()).collect();
        let ys: Vec<f64> = d.subjects.iter().flat_map(|s| s.outcomes.clone()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;

        let model = ModelConfig::new(0, 1).unwrap();
        let spec = default_spec(&d, &model);
        let ctx = SweepContext::new(&d, &spec, 0, 0.1);
        let mut stats = SweepStats::default();
        let s = initialize_two_stage(&ctx, &model, 400, &mut ChaCha8Rng::seed_from_u64(9), &mut stats);
        let b = &s.classes[0].beta_means;
        assert!(((b[0] - intercept) / intercept).abs() < 0.05, "{} vs {intercept}", b[0]);
        assert!(((b[1] - slope) / slope).abs() < 0.05, "{} vs {slope}", b[1]);
        assert!(s.effects.iter().all(|e| e.beta == *b));
        assert_eq!(s.classes[0].beta_sds[0], spec.intercept_sd.initial_value());
    }

    #[test]
    fn separated_classes_are_found_in_stage_one() {
        let scenario = appendix_b(2).unwrap();
        let (d, truth) = replication_dataset(&scenario, 0);
        let model = ModelConfig::new(3, 2).unwrap();
        let spec = default_spec(&d, &model);
        let ctx = SweepContext::new(&d, &spec, 3, 0.1);
        let mut stats = SweepStats::default();
        let s = initialize_two_stage(&ctx, &model, 1_000, &mut ChaCha8Rng::seed_from_u64(10), &mut stats);
        s.check(spec.count_rule()).unwrap();
        let perms = permutations(2);
        let p = &perms[best_permutation(&s.membership, &truth.membership, &perms, 2)];
        let wrong = s.membership.iter().zip(&truth.membership).filter(|(&a, &t)| p[a] != t).count();
        assert!((wrong as f64) < 0.2 * d.n_subjects() as f64, "{wrong} misclassified");
    }
}
