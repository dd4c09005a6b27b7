//! Potential scale reduction factors across chains.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{PgmmError, Result};
use crate::sampler::{ChainDraws, DrawLayout};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn check_shape(n_chains: usize, lens: impl Iterator<Item = usize>) -> Result<usize> {
    if n_chains < 2 {
        return Err(PgmmError::Diagnostic("at least two chains are required".into()));
    }
    let lens: Vec<usize> = lens.collect();
    let n = lens[0];
    if lens.iter().any(|&l| l != n) {
        return Err(PgmmError::Diagnostic("chains differ in length".into()));
    }
    if n < 2 {
        return Err(PgmmError::Diagnostic("at least two draws per chain are required".into()));
    }
    Ok(n)
}

/// Univariate potential scale reduction factor.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_shape(chains.len(), chains.iter().map(|c| c.len()))?;
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, &m)| c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / chains.len() as f64;
    if !(w > 0.0) {
        return Err(PgmmError::Diagnostic("within-chain variance is zero".into()));
    }
    let grand = mean(&means);
    let b_over_n = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (chains.len() as f64 - 1.0);
    Ok((((nf - 1.0) / nf * w + b_over_n) / w).sqrt())
}

/// Multivariate potential scale reduction factor. `chains[j][t]` is the
/// parameter vector of chain `j` at draw `t`.
pub fn multivariate_psrf(chains: &[Vec<Vec<f64>>]) -> Result<f64> {
    let n = check_shape(chains.len(), chains.iter().map(|c| c.len()))?;
    let p = chains[0][0].len();
    if p == 0 {
        return Err(PgmmError::Diagnostic("empty parameter vector".into()));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let means: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| (0..p).map(|a| c.iter().map(|v| v[a]).sum::<f64>() / nf).collect())
        .collect();
    let mut w = DMatrix::<f64>::zeros(p, p);
    for (c, mu) in chains.iter().zip(&means) {
        for v in c {
            for a in 0..p {
                let da = v[a] - mu[a];
                for b in a..p {
                    w[(a, b)] += da * (v[b] - mu[b]);
                }
            }
        }
    }
    w /= m * (nf - 1.0);
    let grand: Vec<f64> = (0..p).map(|a| means.iter().map(|mu| mu[a]).sum::<f64>() / m).collect();
    let mut b = DMatrix::<f64>::zeros(p, p);
    for mu in &means {
        for a in 0..p {
            for bb in a..p {
                b[(a, bb)] += (mu[a] - grand[a]) * (mu[bb] - grand[bb]);
            }
        }
    }
    b /= m - 1.0;
    for a in 0..p {
        for bb in 0..a {
            w[(a, bb)] = w[(bb, a)];
            b[(a, bb)] = b[(bb, a)];
        }
    }

    let chol = match Cholesky::new(w.clone()) {
        Some(c) => c,
        None => {
            let ridge = 1e-10 * w.trace() / p as f64;
            if !(ridge > 0.0) {
                return Err(PgmmError::Diagnostic("within-chain covariance is zero".into()));
            }
            let mut wr = w;
            for a in 0..p {
                wr[(a, a)] += ridge;
            }
            Cholesky::new(wr).ok_or_else(|| PgmmError::Diagnostic("within-chain covariance is singular".into()))?
        }
    };
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&b)
        .ok_or_else(|| PgmmError::Diagnostic("triangular solve failed".into()))?;
    let mut s = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| PgmmError::Diagnostic("triangular solve failed".into()))?;
    s = (&s + s.transpose()) * 0.5;
    let lambda_max = SymmetricEigen::new(s).eigenvalues.max().max(0.0);
    Ok(((nf - 1.0) / nf + (m + 1.0) / m * lambda_max).sqrt())
}

/// Columns of the continuous class-level parameters used for convergence
/// checks: residual sd, coefficient means, changepoint means, both sds
/// families and the mixing weights.
pub fn convergence_columns(layout: &DrawLayout) -> Vec<usize> {
    let (kk, cc) = (layout.max_changepoints, layout.n_classes);
    let mut cols = vec![layout.sigma_eps()];
    for c in 0..cc {
        cols.extend((0..kk + 2).map(|k| layout.beta_mean(c, k)));
        cols.extend((0..kk).map(|k| layout.lambda_mean(c, k)));
        cols.extend((0..kk + 2).map(|k| layout.sigma_beta(c, k)));
        cols.extend((0..kk).map(|k| layout.sigma_lambda(c, k)));
        cols.push(layout.nu(c));
    }
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Per-parameter PSRF; `None` where the diagnostic is undefined.
    pub psrf: Vec<(String, Option<f64>)>,
    pub mean_psrf: Option<f64>,
    pub mpsrf: Option<f64>,
    pub converged: bool,
}

/// Threshold on the mean PSRF below which a run counts as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1.2;

pub fn convergence_report(chains: &[ChainDraws]) -> ConvergenceReport {
    let layout = chains[0].layout;
    let names = layout.column_names();
    let cols = convergence_columns(&layout);
    let mut per = Vec::with_capacity(cols.len());
    let mut defined = Vec::new();
    let mut usable = Vec::new();
    for &col in &cols {
        let series: Vec<Vec<f64>> = chains.iter().map(|ch| ch.column(col)).collect();
        let r = psrf(&series).ok().filter(|v| v.is_finite());
        if let Some(v) = r {
            defined.push(v);
            usable.push(col);
        }
        per.push((names[col].clone(), r));
    }
    let mean_psrf = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    let mpsrf = if usable.is_empty() {
        None
    } else {
        let mv: Vec<Vec<Vec<f64>>> = chains
            .iter()
            .map(|ch| ch.rows().map(|r| usable.iter().map(|&c| r[c]).collect()).collect())
            .collect();
        multivariate_psrf(&mv).ok()
    };
    ConvergenceReport {
        psrf: per,
        converged: mean_psrf.is_some_and(|v| v < CONVERGENCE_THRESHOLD),
        mean_psrf,
        mpsrf,
    }
}
