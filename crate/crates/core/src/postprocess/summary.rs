//! Posterior summaries of relabeled draws.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::diagnostics::{convergence_report, ConvergenceReport};
use crate::data::Dataset;
use crate::error::{PgmmError, Result};
use crate::model::{log_likelihood, ModelState};
use crate::sampler::{ChainDraws, DrawLayout};

/// Linear interpolation between order statistics of sorted data.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn from_values(values: &mut [f64]) -> Option<Estimate> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.total_cmp(b));
        Some(Estimate {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lower: percentile_sorted(values, 0.025),
            upper: percentile_sorted(values, 0.975),
        })
    }

    fn shifted(mut self, by: f64) -> Self {
        self.mean += by;
        self.lower += by;
        self.upper += by;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    /// Over every pooled draw.
    pub all: Estimate,
    /// For component parameters, over draws at the modal count (or where the
    /// component is active, if the modal count excludes it); equal to `all`
    /// for parameters that are always active. `None` if never active.
    pub active: Option<Estimate>,
}

impl ParamSummary {
    /// Estimate to report: the conditional one where it exists.
    pub fn reported(&self) -> &Estimate {
        self.active.as_ref().unwrap_or(&self.all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub intercept_and_slopes: Vec<ParamSummary>,
    pub beta_sds: Vec<ParamSummary>,
    pub cp_means: Vec<ParamSummary>,
    pub cp_sds: Vec<ParamSummary>,
    pub mixing: ParamSummary,
    /// Posterior probability of each changepoint count `0..=K`.
    pub count_probs: Vec<f64>,
    pub modal_count: usize,
    /// Names of the random effects in `correlation`.
    pub effect_names: Vec<String>,
    /// Averaged within-class sample correlations; `None` where undefined.
    pub correlation: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub id: String,
    pub membership_probs: Vec<f64>,
    pub modal_class: usize,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    pub mean_deviance: f64,
    pub deviance_at_estimate: f64,
    pub p_d: f64,
    pub dic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_draws: usize,
    pub n_chains: usize,
    pub max_changepoints: usize,
    pub n_classes: usize,
    /// Added to changepoint locations to express them on the original time axis.
    pub time_shift: f64,
    pub sigma_eps: ParamSummary,
    pub classes: Vec<ClassSummary>,
    pub subjects: Vec<SubjectSummary>,
    pub dic: Dic,
    pub convergence: Option<ConvergenceReport>,
}

fn pooled_column(chains: &[ChainDraws], col: usize) -> Vec<f64> {
    chains.iter().flat_map(|c| c.rows().map(move |r| r[col])).collect()
}

/// `gate = Some((count_col, k, modal))` marks a parameter of component `k`.
/// Its reported estimate pools the draws whose count equals the modal count
/// when that count includes the component, and the draws where it is active
/// otherwise.
fn summarize_param(chains: &[ChainDraws], name: String, col: usize, gate: Option<(usize, usize, usize)>) -> ParamSummary {
    let mut all = pooled_column(chains, col);
    let all_est = Estimate::from_values(&mut all).expect("non-empty draws");
    let active = match gate {
        None => Some(all_est.clone()),
        Some((count_col, k, modal)) => {
            let keep = |n: usize| if modal > k { n == modal } else { n > k };
            let mut vals: Vec<f64> = chains
                .iter()
                .flat_map(|c| c.rows().filter(|r| keep(r[count_col] as usize)).map(|r| r[col]))
                .collect();
            Estimate::from_values(&mut vals)
        }
    };
    ParamSummary {
        name,
        all: all_est,
        active,
    }
}

fn shift_param(p: ParamSummary, by: f64) -> ParamSummary {
    ParamSummary {
        name: p.name,
        all: p.all.shifted(by),
        active: p.active.map(|e| e.shifted(by)),
    }
}

fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx > 0.0 && syy > 0.0 {
        Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    } else {
        None
    }
}

fn class_correlations(chains: &[ChainDraws], c: usize) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let layout = chains[0].layout;
    let (kk, nb) = (layout.max_changepoints, layout.max_changepoints + 2);
    let names: Vec<String> = (0..nb)
        .map(|k| format!("beta.{k}"))
        .chain((1..=kk).map(|k| format!("lambda.{k}")))
        .collect();
    let dim = names.len();
    // effect j is active when the class count exceeds `needs[j]`
    let needs: Vec<Option<usize>> = (0..nb)
        .map(|k| if k < 2 { None } else { Some(k - 2) })
        .chain((0..kk).map(Some))
        .collect();
    let col_of = |i: usize, j: usize| if j < nb { layout.beta(i, j) } else { layout.lambda(i, j - nb) };
    let mut sums = vec![vec![0.0; dim]; dim];
    let mut counts = vec![vec![0usize; dim]; dim];
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for ch in chains {
        for row in ch.rows() {
            let members: Vec<usize> = (0..layout.n_subjects)
                .filter(|&i| row[layout.psi(i)] as usize - 1 == c)
                .collect();
            if members.len() < 3 {
                continue;
            }
            let count = row[layout.count(c)] as usize;
            for (j, col) in cols.iter_mut().enumerate() {
                col.clear();
                col.extend(members.iter().map(|&i| row[col_of(i, j)]));
            }
            for a in 0..dim {
                for b in a..dim {
                    let active = [needs[a], needs[b]].iter().all(|n| n.is_none_or(|k| count > k));
                    if !active {
                        continue;
                    }
                    if let Some(r) = correlation(&cols[a], &cols[b]) {
                        sums[a][b] += r;
                        counts[a][b] += 1;
                    }
                }
            }
        }
    }
    let mut out = vec![vec![None; dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            if counts[a][b] > 0 {
                let v = sums[a][b] / counts[a][b] as f64;
                out[a][b] = Some(v);
                out[b][a] = Some(v);
            }
        }
    }
    (names, out)
}

fn mode_of(freq: &[usize]) -> usize {
    let mut best = 0;
    for (k, &v) in freq.iter().enumerate() {
        if v > freq[best] {
            best = k;
        }
    }
    best
}

/// Plug-in state: posterior means of continuous quantities, modes of
/// memberships and changepoint counts.
pub fn plug_in_state(chains: &[ChainDraws]) -> Result<ModelState> {
    let total: usize = chains.iter().map(|c| c.n_draws()).sum();
    if total == 0 {
        return Err(PgmmError::validation("no draws to summarize"));
    }
    let layout = chains[0].layout;
    let mut acc = vec![0.0; layout.width()];
    let mut var_acc = 0.0;
    for row in chains.iter().flat_map(|c| c.rows()) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        var_acc += row[layout.sigma_eps()].powi(2);
    }
    acc.iter_mut().for_each(|a| *a /= total as f64);
    let mut state = layout.read_state(&acc_with_discrete(&acc, chains, &layout));
    state.resid_var = var_acc / total as f64;
    Ok(state)
}

fn acc_with_discrete(acc: &[f64], chains: &[ChainDraws], layout: &DrawLayout) -> Vec<f64> {
    let mut row = acc.to_vec();
    let (kk, cc) = (layout.max_changepoints, layout.n_classes);
    for c in 0..cc {
        let mut freq = vec![0usize; kk + 1];
        for r in chains.iter().flat_map(|ch| ch.rows()) {
            freq[r[layout.count(c)] as usize] += 1;
        }
        let m = mode_of(&freq);
        row[layout.count(c)] = m as f64;
        for k in 0..kk {
            row[layout.indicator(c, k)] = if k < m { 1.0 } else { 0.0 };
        }
    }
    for i in 0..layout.n_subjects {
        let mut freq = vec![0usize; cc];
        for r in chains.iter().flat_map(|ch| ch.rows()) {
            freq[r[layout.psi(i)] as usize - 1] += 1;
        }
        row[layout.psi(i)] = (mode_of(&freq) + 1) as f64;
    }
    row
}

/// Deviance information criterion with deviance `-2 log p(y | effects)`.
pub fn dic(chains: &[ChainDraws], d: &Dataset) -> Result<Dic> {
    let plug = plug_in_state(chains)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for ch in chains {
        for t in 0..ch.n_draws() {
            total += -2.0 * log_likelihood(&ch.state(t), d)?;
            n += 1;
        }
    }
    let mean_deviance = total / n as f64;
    let deviance_at_estimate = -2.0 * log_likelihood(&plug, d)?;
    let p_d = mean_deviance - deviance_at_estimate;
    Ok(Dic {
        mean_deviance,
        deviance_at_estimate,
        p_d,
        dic: mean_deviance + p_d,
    })
}

/// Summaries of chains that have already been ordered and relabeled.
pub fn summarize(chains: &[ChainDraws], d: &Dataset) -> Result<PosteriorSummary> {
    let total: usize = chains.iter().map(|c| c.n_draws()).sum();
    if total == 0 {
        return Err(PgmmError::validation("no draws to summarize"));
    }
    let layout = chains[0].layout;
    if chains.iter().any(|c| c.layout != layout) {
        return Err(PgmmError::validation("chains have different layouts"));
    }
    if layout.n_subjects != d.n_subjects() {
        return Err(PgmmError::validation("draws and dataset differ in subject count"));
    }
    let names = layout.column_names();
    let (kk, cc) = (layout.max_changepoints, layout.n_classes);
    let shift = d.time_shift;
    let sigma_eps = summarize_param(chains, "sigma_eps".into(), layout.sigma_eps(), None);

    let classes = (0..cc)
        .map(|c| {
            let cnt = layout.count(c);
            let mut freq = vec![0usize; kk + 1];
            for v in pooled_column(chains, cnt) {
                freq[v as usize] += 1;
            }
            let count_probs: Vec<f64> = freq.iter().map(|&f| f as f64 / total as f64).collect();
            let modal = mode_of(&freq);
            let beta_gate = |k: usize| if k < 2 { None } else { Some((cnt, k - 2, modal)) };
            let intercept_and_slopes = (0..kk + 2)
                .map(|k| summarize_param(chains, names[layout.beta_mean(c, k)].clone(), layout.beta_mean(c, k), beta_gate(k)))
                .collect();
            let beta_sds = (0..kk + 2)
                .map(|k| summarize_param(chains, names[layout.sigma_beta(c, k)].clone(), layout.sigma_beta(c, k), beta_gate(k)))
                .collect();
            let cp_means = (0..kk)
                .map(|k| {
                    let col = layout.lambda_mean(c, k);
                    shift_param(summarize_param(chains, names[col].clone(), col, Some((cnt, k, modal))), shift)
                })
                .collect();
            let cp_sds = (0..kk)
                .map(|k| {
                    let col = layout.sigma_lambda(c, k);
                    summarize_param(chains, names[col].clone(), col, Some((cnt, k, modal)))
                })
                .collect();
            let mixing = summarize_param(chains, names[layout.nu(c)].clone(), layout.nu(c), None);
            let (effect_names, correlation) = class_correlations(chains, c);
            ClassSummary {
                intercept_and_slopes,
                beta_sds,
                cp_means,
                cp_sds,
                mixing,
                modal_count: modal,
                count_probs,
                effect_names,
                correlation,
            }
        })
        .collect();

    let subjects = (0..layout.n_subjects)
        .map(|i| {
            let mut freq = vec![0usize; cc];
            for v in pooled_column(chains, layout.psi(i)) {
                freq[v as usize - 1] += 1;
            }
            let mean_of = |col: usize| pooled_column(chains, col).iter().sum::<f64>() / total as f64;
            SubjectSummary {
                id: d.subjects[i].id.clone(),
                membership_probs: freq.iter().map(|&f| f as f64 / total as f64).collect(),
                modal_class: mode_of(&freq),
                beta: (0..kk + 2).map(|k| mean_of(layout.beta(i, k))).collect(),
                lambda: (0..kk).map(|k| mean_of(layout.lambda(i, k)) + shift).collect(),
            }
        })
        .collect();

    let convergence = if chains.len() >= 2 && chains.iter().all(|c| c.n_draws() >= 2) {
        Some(convergence_report(chains))
    } else {
        None
    };

    Ok(PosteriorSummary {
        n_draws: total,
        n_chains: chains.len(),
        max_changepoints: kk,
        n_classes: cc,
        time_shift: shift,
        sigma_eps,
        classes,
        subjects,
        dic: dic(chains, d)?,
        convergence,
    })
}

fn fmt_estimate(e: &Estimate) -> String {
    format!("{:.3} ({:.3}, {:.3})", e.mean, e.lower, e.upper)
}

impl PosteriorSummary {
    pub fn is_converged(&self) -> bool {
        self.convergence.as_ref().is_some_and(|c| c.converged)
    }

    /// Class-by-column text table of estimates with 95% credible intervals.
    pub fn render_table(&self) -> String {
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        let per_class = |f: &dyn Fn(&ClassSummary) -> String| self.classes.iter().map(f).collect::<Vec<_>>();
        rows.push(("sigma_eps".into(), per_class(&|_| fmt_estimate(self.sigma_eps.reported()))));
        for k in 0..self.max_changepoints + 2 {
            rows.push((format!("beta_{k}"), per_class(&|c| fmt_opt(c.intercept_and_slopes[k].active.as_ref()))));
        }
        for k in 0..self.max_changepoints + 2 {
            rows.push((format!("sigma_beta_{k}"), per_class(&|c| fmt_opt(c.beta_sds[k].active.as_ref()))));
        }
        for k in 0..self.max_changepoints {
            rows.push((format!("lambda_{}", k + 1), per_class(&|c| fmt_opt(c.cp_means[k].active.as_ref()))));
            rows.push((format!("sigma_lambda_{}", k + 1), per_class(&|c| fmt_opt(c.cp_sds[k].active.as_ref()))));
        }
        rows.push(("nu".into(), per_class(&|c| fmt_estimate(c.mixing.reported()))));
        for k in 0..=self.max_changepoints {
            rows.push((format!("P(K={k})"), per_class(&|c| format!("{:.3}", c.count_probs[k]))));
        }

        let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(9);
        let col_w = rows
            .iter()
            .flat_map(|r| r.1.iter().map(|s| s.len()))
            .max()
            .unwrap_or(0)
            .max(8);
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$}", "parameter");
        for c in 0..self.n_classes {
            let _ = write!(out, "  {:<col_w$}", format!("class {}", c + 1));
        }
        out.push('\n');
        for (label, cells) in rows {
            let _ = write!(out, "{label:<label_w$}");
            for cell in cells {
                let _ = write!(out, "  {cell:<col_w$}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\nDIC {:.2} (mean deviance {:.2}, pD {:.2})", self.dic.dic, self.dic.mean_deviance, self.dic.p_d);
        if let Some(c) = &self.convergence {
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.3}"));
            let _ = writeln!(
                out,
                "mean PSRF {}, multivariate PSRF {}, converged: {}",
                show(c.mean_psrf),
                show(c.mpsrf),
                c.converged
            );
        }
        out
    }
}

fn fmt_opt(e: Option<&Estimate>) -> String {
    e.map_or_else(|| "-".to_string(), fmt_estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectSeries;
    use crate::model::{normal_ln_pdf, ModelConfig};
    use crate::postprocess::postprocess_chains;
    use crate::priors::{
        sample_prior, CountPrior, InverseGammaPrior, NormalPrior, PriorSpec, SdPrior, UniformPrior,
        VariancePriorFamily,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_data() -> Dataset {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let subjects = vec![
            SubjectSeries::new("a", times.clone(), vec![1.0, 1.4, 2.1, 2.4]).unwrap(),
            SubjectSeries::new("b", times, vec![0.5, 1.2, 1.4, 2.2]).unwrap(),
        ];
        Dataset::new(subjects).unwrap()
    }

    fn line_state(b0: f64, b1: f64, sd: f64) -> ModelState {
        let mut s = ModelState::zeros(&ModelConfig::new(0, 1).unwrap(), 2);
        s.resid_var = sd * sd;
        for e in &mut s.effects {
            e.beta = vec![b0, b1];
        }
        s
    }

    fn chain_of(states: &[ModelState], id: usize) -> ChainDraws {
        let cfg = states[0].config();
        let mut c = ChainDraws::new(DrawLayout::new(&cfg, states[0].n_subjects()), id, 0);
        for s in states {
            c.push_state(s);
        }
        c
    }

    fn deviance(d: &Dataset, b0: f64, b1: f64, var: f64) -> f64 {
        -2.0 * d
            .subjects
            .iter()
            .flat_map(|s| s.times.iter().zip(&s.outcomes))
            .map(|(&x, &y)| normal_ln_pdf(y, b0 + b1 * x, var))
            .sum::<f64>()
    }

    #[test]
    fn dic_of_constant_draws() {
        let d = line_data();
        let s = line_state(0.8, 0.5, 0.5);
        let r = dic(&[chain_of(&[s.clone(), s.clone(), s], 0)], &d).unwrap();
        assert!(r.p_d.abs() < 1e-9);
        assert!((r.dic - r.deviance_at_estimate).abs() < 1e-9);
        assert!((r.deviance_at_estimate - deviance(&d, 0.8, 0.5, 0.25)).abs() < 1e-9);
    }

    #[test]
    fn dic_of_two_draws() {
        let d = line_data();
        let (a, b) = (line_state(0.8, 0.5, 0.5), line_state(0.6, 0.6, 0.3));
        let r = dic(&[chain_of(&[a, b], 0)], &d).unwrap();
        let mean_dev = 0.5 * (deviance(&d, 0.8, 0.5, 0.25) + deviance(&d, 0.6, 0.6, 0.09));
        let at_mean = deviance(&d, 0.7, 0.55, 0.5 * (0.25 + 0.09));
        assert!((r.mean_deviance - mean_dev).abs() < 1e-9);
        assert!((r.deviance_at_estimate - at_mean).abs() < 1e-9);
        assert!((r.dic - (2.0 * mean_dev - at_mean)).abs() < 1e-9);
    }

    fn spec() -> PriorSpec {
        PriorSpec {
            resid_var: InverseGammaPrior { shape: 3.0, rate: 2.0 },
            intercept_mean: NormalPrior { mean: 0.0, var: 4.0 },
            slope_mean: NormalPrior { mean: 0.0, var: 1.0 },
            cp_mean: UniformPrior { lower: 1.0, upper: 9.0 },
            intercept_sd: SdPrior::Uniform { upper: 1.0 },
            slope_sd: SdPrior::Uniform { upper: 0.5 },
            cp_sd: SdPrior::Uniform { upper: 2.0 },
            count: CountPrior::Uniform,
            dirichlet_alpha: 1.0,
            variance_family: VariancePriorFamily::Uniform,
        }
    }

    fn random_chains() -> (Vec<ChainDraws>, Dataset) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ModelConfig::new(2, 2).unwrap();
        let times: Vec<f64> = (0..11).map(|t| t as f64).collect();
        let subjects = (0..6)
            .map(|i| SubjectSeries::new(format!("s{i}"), times.clone(), times.iter().map(|x| x * 0.1 * i as f64).collect()).unwrap())
            .collect();
        let d = Dataset::new(subjects).unwrap();
        let chains: Vec<ChainDraws> = (0..3)
            .map(|id| {
                let states: Vec<ModelState> = (0..40).map(|_| sample_prior(&spec(), &cfg, 6, &mut rng)).collect();
                chain_of(&states, id)
            })
            .collect();
        (postprocess_chains(&chains), d)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn summaries_ignore_chain_order() {
        let (chains, d) = random_chains();
        let a = summarize(&chains, &d).unwrap();
        let reversed: Vec<ChainDraws> = chains.iter().rev().cloned().collect();
        let b = summarize(&reversed, &d).unwrap();
        assert_eq!(a.sigma_eps, b.sigma_eps);
        for (ca, cb) in a.classes.iter().zip(&b.classes) {
            assert_eq!(ca.intercept_and_slopes, cb.intercept_and_slopes);
            assert_eq!(ca.cp_means, cb.cp_means);
            assert_eq!(ca.cp_sds, cb.cp_sds);
            assert_eq!(ca.count_probs, cb.count_probs);
            assert_eq!(ca.modal_count, cb.modal_count);
        }
        for (sa, sb) in a.subjects.iter().zip(&b.subjects) {
            assert_eq!(sa.membership_probs, sb.membership_probs);
            assert!(sa.beta.iter().zip(&sb.beta).all(|(x, y)| close(*x, *y)));
        }
        assert!(close(a.dic.dic, b.dic.dic));
        let (pa, pb) = (a.convergence.unwrap(), b.convergence.unwrap());
        assert!(close(pa.mean_psrf.unwrap(), pb.mean_psrf.unwrap()));
    }

    #[test]
    fn summary_invariants() {
        let (chains, d) = random_chains();
        let s = summarize(&chains, &d).unwrap();
        assert_eq!(s.n_draws, 120);
        for class in &s.classes {
            assert!((class.count_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for p in class.intercept_and_slopes.iter().chain(&class.cp_means).chain(&class.cp_sds) {
                assert!(p.all.lower <= p.all.upper);
                if let Some(e) = &p.active {
                    assert!(e.lower <= e.mean && e.mean <= e.upper);
                }
            }
            let active: Vec<f64> = class.cp_means[..class.modal_count].iter().map(|p| p.active.as_ref().unwrap().mean).collect();
            assert!(active.iter().all(|v| v.is_finite()));
        }
        for subj in &s.subjects {
            assert!((subj.membership_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let table = s.render_table();
        assert!(table.starts_with("parameter"));
        assert!(table.contains("P(K=2)"));
    }

    #[test]
    fn percentile_example() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let mut w = v.clone();
        let e = Estimate::from_values(&mut w).unwrap();
        assert_eq!(e.mean, 500.5);
        assert!((e.lower - 25.975).abs() < 1e-9);
        assert!((e.upper - 975.025).abs() < 1e-9);
        assert_eq!(percentile_sorted(&[3.0], 0.5), 3.0);
    }

    #[test]
    fn perfect_correlation() {
        let a = [1.0, 2.0, 4.0];
        assert_eq!(correlation(&a, &a), Some(1.0));
        assert_eq!(correlation(&a, &[1.0, 1.0, 1.0]), None);
    }
}
