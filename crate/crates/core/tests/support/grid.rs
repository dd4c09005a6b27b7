//! Posterior marginals of a tiny model against brute-force numerical
//! integration.
//!
//! The model has three subjects, four occasions, one always-active
//! changepoint and one class, with the random-effect standard deviations held
//! fixed. All regression coefficients enter linearly and are integrated out in
//! closed form; the residual variance and the mean changepoint are gridded and
//! each subject changepoint is integrated on a Gaussian-weighted grid.

use pgmm_core::data::{empirical_stats, Dataset, SubjectSeries};
use pgmm_core::model::ModelConfig;
use pgmm_core::priors::{build_default_priors, CountPrior, PriorOptions, PriorSpec, SdPrior};
use pgmm_core::sampler::{run_chain, SamplerConfig};

const TIMES: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
const BETA_SD: [f64; 3] = [0.4, 0.3, 0.3];
const CP_SD: f64 = 0.3;

fn dataset() -> Dataset {
    let ys = [
        [1.10, 1.45, 2.95, 4.60],
        [0.70, 1.30, 2.40, 3.75],
        [1.35, 1.80, 3.30, 5.20],
    ];
    let subjects = ys
        .iter()
        .enumerate()
        .map(|(i, y)| SubjectSeries::new(format!("s{i}"), TIMES.to_vec(), y.to_vec()).unwrap())
        .collect();
    Dataset::new(subjects).unwrap()
}

fn tiny_spec(d: &Dataset) -> PriorSpec {
    let model = ModelConfig::new(1, 1).unwrap();
    let options = PriorOptions {
        count: CountPrior::Fixed { count: 1 },
        ..PriorOptions::default()
    };
    let mut spec = build_default_priors(&empirical_stats(d).unwrap(), &model, &options).unwrap();
    spec.intercept_sd = SdPrior::Fixed { value: BETA_SD[0] };
    spec.slope_sd = SdPrior::Fixed { value: BETA_SD[1] };
    spec.cp_sd = SdPrior::Fixed { value: CP_SD };
    spec
}

type M3 = [[f64; 3]; 3];

/// Cholesky of a 3x3 positive definite matrix; returns log determinant and a
/// solver.
fn chol3(a: &M3) -> ([[f64; 3]; 3], f64) {
    let mut l = [[0.0; 3]; 3];
    let mut logdet = 0.0;
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = s.sqrt();
                logdet += 2.0 * l[i][i].ln();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    (l, logdet)
}

/// `h' A^{-1} h` from the Cholesky factor of `A`.
fn quad3(l: &M3, h: &[f64; 3]) -> f64 {
    let mut z = [0.0; 3];
    for i in 0..3 {
        let mut s = h[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    z.iter().map(|v| v * v).sum()
}

/// Per-subject terms of the marginal likelihood after integrating the
/// subject coefficients: `X' S^-1 X`, `X' S^-1 r`, `r' S^-1 r` and `log|S|`
/// where `S = s2 I + X D X'` and `r = y - X m0`.
struct SubjectTerms {
    a: M3,
    h: [f64; 3],
    q: f64,
    logdet: f64,
}

fn subject_terms(y: &[f64], lambda: f64, s2: f64, m0: &[f64; 3]) -> SubjectTerms {
    let m = y.len();
    let x: Vec<[f64; 3]> = TIMES.iter().map(|&t| [1.0, t, (t - lambda).max(0.0)]).collect();
    let mut s = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            s[a][b] = (0..3).map(|k| x[a][k] * x[b][k] * BETA_SD[k] * BETA_SD[k]).sum::<f64>();
        }
        s[a][a] += s2;
    }
    // dense Cholesky of the 4x4 covariance
    let mut l = vec![vec![0.0; m]; m];
    let mut logdet = 0.0;
    for i in 0..m {
        for j in 0..=i {
            let mut v = s[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = v.sqrt();
                logdet += 2.0 * l[i][i].ln();
            } else {
                l[i][j] = v / l[j][j];
            }
        }
    }
    let solve_lower = |b: &[f64]| {
        let mut z = vec![0.0; m];
        for i in 0..m {
            let mut v = b[i];
            for k in 0..i {
                v -= l[i][k] * z[k];
            }
            z[i] = v / l[i][i];
        }
        z
    };
    let r: Vec<f64> = (0..m).map(|a| y[a] - (0..3).map(|k| x[a][k] * m0[k]).sum::<f64>()).collect();
    let zr = solve_lower(&r);
    let zx: Vec<Vec<f64>> = (0..3).map(|k| solve_lower(&x.iter().map(|row| row[k]).collect::<Vec<_>>())).collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut a = [[0.0; 3]; 3];
    let mut h = [0.0; 3];
    for j in 0..3 {
        h[j] = dot(&zx[j], &zr);
        for k in 0..3 {
            a[j][k] = dot(&zx[j], &zx[k]);
        }
    }
    SubjectTerms { a, h, q: dot(&zr, &zr), logdet }
}

struct GridPosterior {
    /// Log-spaced residual variance nodes with their marginal density.
    s2: Vec<f64>,
    s2_density: Vec<f64>,
    /// Cell edges on the changepoint-mean axis and the mass of each cell.
    cp_edges: Vec<f64>,
    cp_mass: Vec<f64>,
}

fn grid_posterior(d: &Dataset, spec: &PriorSpec) -> GridPosterior {
    let m0 = [spec.intercept_mean.mean, spec.slope_mean.mean, spec.slope_mean.mean];
    let v0 = [spec.intercept_mean.var, spec.slope_mean.var, spec.slope_mean.var];
    let n_s2 = 160;
    let (log_lo, log_hi) = ((1e-4f64).ln(), (10.0f64).ln());
    let s2: Vec<f64> = (0..n_s2)
        .map(|j| (log_lo + (log_hi - log_lo) * j as f64 / (n_s2 - 1) as f64).exp())
        .collect();
    let n_cp = 60;
    let (lo, hi) = (spec.cp_mean.lower, spec.cp_mean.upper);
    let cp_edges: Vec<f64> = (0..=n_cp).map(|j| lo + (hi - lo) * j as f64 / n_cp as f64).collect();
    let n_z = 25;
    let z_half = 5.0;
    let dz = 2.0 * z_half / n_z as f64;
    let z: Vec<f64> = (0..n_z).map(|j| -z_half + dz * (j as f64 + 0.5)).collect();
    let wz: Vec<f64> = z.iter().map(|v| (-0.5 * v * v).exp()).collect();
    let wsum: f64 = wz.iter().sum();
    let ln_wz: Vec<f64> = wz.iter().map(|w| (w / wsum).ln()).collect();

    let mut log_post = vec![vec![0.0; n_cp]; n_s2];
    for (a, &v) in s2.iter().enumerate() {
        for c in 0..n_cp {
            let cp = 0.5 * (cp_edges[c] + cp_edges[c + 1]);
            let terms: Vec<Vec<SubjectTerms>> = d
                .subjects
                .iter()
                .map(|s| z.iter().map(|&zz| subject_terms(&s.outcomes, cp + CP_SD * zz, v, &m0)).collect())
                .collect();
            let mut logs = Vec::with_capacity(n_z * n_z * n_z);
            for j1 in 0..n_z {
                for j2 in 0..n_z {
                    for j3 in 0..n_z {
                        let t = [&terms[0][j1], &terms[1][j2], &terms[2][j3]];
                        let mut p = [[0.0; 3]; 3];
                        let mut h = [0.0; 3];
                        let mut base = ln_wz[j1] + ln_wz[j2] + ln_wz[j3];
                        for st in t {
                            base -= 0.5 * (st.logdet + st.q);
                            for r in 0..3 {
                                h[r] += st.h[r];
                                for k in 0..3 {
                                    p[r][k] += st.a[r][k];
                                }
                            }
                        }
                        for r in 0..3 {
                            p[r][r] += 1.0 / v0[r];
                        }
                        let (l, logdet_p) = chol3(&p);
                        logs.push(base - 0.5 * logdet_p + 0.5 * quad3(&l, &h));
                    }
                }
            }
            let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
            log_post[a][c] = lse + spec.resid_var.ln_pdf(v) + v.ln();
        }
    }
    let mx = log_post.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dens: Vec<Vec<f64>> = log_post
        .iter()
        .map(|row| row.iter().map(|l| (l - mx).exp()).collect())
        .collect();
    // density in log(s2) summed over cp cells, and cp cell mass summed over s2 nodes
    let s2_density: Vec<f64> = dens.iter().map(|row| row.iter().sum()).collect();
    let cp_mass: Vec<f64> = (0..n_cp).map(|c| dens.iter().map(|row| row[c]).sum()).collect();
    GridPosterior { s2, s2_density, cp_edges, cp_mass }
}

/// Piecewise-linear CDF through `(x_j, F_j)`.
fn interp_cdf(xs: &[f64], fs: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[xs.len() - 1] {
        return 1.0;
    }
    let j = xs.partition_point(|&v| v <= x);
    let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    fs[j - 1] + t * (fs[j] - fs[j - 1])
}

fn ks_distance(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|a, b| a.total_cmp(b));
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov-Smirnov distances between 20,000 sampler draws and the grid
/// posterior for the residual variance and the changepoint mean.
pub fn run_comparison() -> (f64, f64) {
    let d = dataset();
    let spec = tiny_spec(&d);
    let grid = grid_posterior(&d, &spec);

    // trapezoid rule on the log(s2) axis
    let ln_s2: Vec<f64> = grid.s2.iter().map(|v| v.ln()).collect();
    let mut s2_cdf = vec![0.0; ln_s2.len()];
    for j in 1..ln_s2.len() {
        s2_cdf[j] = s2_cdf[j - 1] + 0.5 * (grid.s2_density[j] + grid.s2_density[j - 1]) * (ln_s2[j] - ln_s2[j - 1]);
    }
    let total = s2_cdf[s2_cdf.len() - 1];
    s2_cdf.iter_mut().for_each(|v| *v /= total);
    let mut cp_cdf = vec![0.0; grid.cp_edges.len()];
    for c in 0..grid.cp_mass.len() {
        cp_cdf[c + 1] = cp_cdf[c] + grid.cp_mass[c];
    }
    let total = cp_cdf[cp_cdf.len() - 1];
    cp_cdf.iter_mut().for_each(|v| *v /= total);

    let model = ModelConfig::new(1, 1).unwrap();
    let thin = 5;
    let cfg = SamplerConfig {
        n_iter: 2_000 + 20_000 * thin,
        burn_in: 2_000,
        n_chains: 1,
        master_seed: 2024,
        thin,
        stage1_iters: 200,
        ..SamplerConfig::default()
    };
    let draws = run_chain(&d, &spec, &model, &cfg, 0).unwrap();
    assert_eq!(draws.n_draws(), 20_000);
    let s2_draws = draws.column(draws.layout.sigma_eps()).iter().map(|s| s * s).collect::<Vec<_>>();
    let cp_draws = draws.column(draws.layout.lambda_mean(0, 0));

    let ks_s2 = ks_distance(s2_draws, |x| interp_cdf(&ln_s2, &s2_cdf, x.ln()));
    let ks_cp = ks_distance(cp_draws, |x| interp_cdf(&grid.cp_edges, &cp_cdf, x));
    (ks_s2, ks_cp)
}
