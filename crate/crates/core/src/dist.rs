//! Random variate generation used by the Gibbs kernels: truncated normals,
//! lower-truncated gammas (for truncated inverse-gamma variances), slice
//! sampling, Dirichlet and categorical draws.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma_ur;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Phi(z)`, accurate for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        mean + sd * std_normal(rng)
    } else {
        mean
    }
}

/// Uniform on the open interval `(0, 1)`.
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}

/// Standard normal truncated to `[a, b]`.
///
/// Inverse-CDF in whichever tail representation keeps precision; falls back
/// to rejection when the interval's probability underflows.
pub fn truncated_std_normal<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return a;
    }
    if a >= 0.0 {
        upper_tail_std_normal(rng, a, b)
    } else if b <= 0.0 {
        -upper_tail_std_normal(rng, -b, -a)
    } else {
        let pa = normal_cdf(a);
        let pb = normal_cdf(b);
        let u = pa + (pb - pa) * open01(rng);
        normal_quantile(u).clamp(a, b)
    }
}

fn upper_tail_std_normal<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let qa = normal_sf(a);
    let qb = normal_sf(b);
    if qa > 0.0 && (qa - qb) > 1e-12 * qa && qa > 1e-300 {
        let q = qb + (qa - qb) * open01(rng);
        let x = SQRT_2 * erfc_inv(2.0 * q);
        if x.is_finite() {
            return x.clamp(a, b);
        }
    }
    tail_rejection(rng, a, b)
}

fn tail_rejection<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    // a >= 0; density is decreasing on [a, b]
    let opt_rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a < 1.0 / opt_rate {
        loop {
            let x = uniform(rng, a, b);
            if open01(rng).ln() <= -0.5 * (x * x - a * a) {
                return x;
            }
        }
    }
    let exp = Exp::new(opt_rate).expect("positive rate");
    loop {
        let x = a + exp.sample(rng);
        if x > b {
            continue;
        }
        let d = x - opt_rate;
        if open01(rng).ln() <= -0.5 * d * d {
            return x;
        }
    }
}

/// Normal with the given mean and sd truncated to `[lo, hi]`.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if !(sd > 0.0) {
        return mean.clamp(lo, hi);
    }
    let z = truncated_std_normal(rng, (lo - mean) / sd, (hi - mean) / sd);
    (mean + sd * z).clamp(lo, hi)
}

/// Gamma(shape, rate) truncated to `[lower, inf)`. Requires `shape > 0`, `rate > 0`.
pub fn lower_truncated_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64, lower: f64) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0);
    let z0 = (rate * lower).max(0.0);
    if z0 == 0.0 {
        return gamma(rng, shape, rate);
    }
    let tail = gamma_ur(shape, z0);
    if tail > 0.05 {
        let g = Gamma::new(shape, 1.0).expect("valid gamma");
        loop {
            let z: f64 = g.sample(rng);
            if z >= z0 {
                return z / rate;
            }
        }
    }
    if tail > 1e-280 {
        let target = tail * open01(rng);
        if let Some(z) = invert_upper_gamma(shape, target, z0) {
            return z / rate;
        }
    }
    gamma_tail_rejection(rng, shape, z0) / rate
}

/// Solve `Q(shape, z) = target` for `z >= z0` by bracketing and bisection.
fn invert_upper_gamma(shape: f64, target: f64, z0: f64) -> Option<f64> {
    let mut lo = z0;
    let mut hi = z0.max(shape).max(1.0) * 2.0;
    let mut guard = 0;
    while gamma_ur(shape, hi) > target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_ur(shape, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Exact rejection sampler for the gamma(shape, 1) tail beyond `z0`.
fn gamma_tail_rejection<R: Rng + ?Sized>(rng: &mut R, shape: f64, z0: f64) -> f64 {
    // z^(a-1) <= z0^(a-1) exp((a-1)(z-z0)/z0) bounds the log-concave part for a >= 1
    let slope = if shape > 1.0 { (shape - 1.0) / z0 } else { 0.0 };
    let rate = (1.0 - slope).max(1e-3);
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = z0 + exp.sample(rng);
        let log_accept = (shape - 1.0) * (z / z0).ln() - (1.0 - rate) * (z - z0);
        if open01(rng).ln() <= log_accept {
            return z;
        }
    }
}

/// Gamma with shape and rate.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("valid gamma parameters")
        .sample(rng)
}

/// Inverse gamma with density proportional to `x^(-shape-1) exp(-rate/x)`.
pub fn inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    1.0 / gamma(rng, shape, rate)
}

pub fn half_cauchy<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    scale * (0.5 * PI * rng.random::<f64>()).tan()
}

pub fn half_cauchy_ln_pdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    (2.0 / (PI * scale)).ln() - (1.0 + r * r).ln()
}

/// Dirichlet draw through normalized gammas; a single component returns `[1]`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    loop {
        let g: Vec<f64> = alpha.iter().map(|&a| gamma(rng, a, 1.0)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 && total.is_finite() {
            return g.into_iter().map(|v| v / total).collect();
        }
    }
}

/// Index drawn with probabilities proportional to `exp(log_weights)`.
pub fn categorical_from_log<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return rng.random_range(0..log_weights.len());
    }
    let weights: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub fn bernoulli_from_log_odds<R: Rng + ?Sized>(rng: &mut R, log_odds: f64) -> bool {
    if log_odds == f64::INFINITY {
        return true;
    }
    if log_odds == f64::NEG_INFINITY || log_odds.is_nan() {
        return false;
    }
    let p = 1.0 / (1.0 + (-log_odds).exp());
    rng.random::<f64>() < p
}

/// Univariate slice sampler with stepping out and shrinkage.
#[derive(Debug, Clone, Copy)]
pub struct SliceSampler {
    pub width: f64,
    pub max_steps: u32,
}

impl SliceSampler {
    pub fn new(width: f64) -> Self {
        SliceSampler {
            width,
            max_steps: 32,
        }
    }

    /// One slice update from `x0` for the unnormalized log density `log_f`.
    /// Returns the new point and the number of density evaluations.
    pub fn step<R, F>(&self, rng: &mut R, x0: f64, mut log_f: F) -> (f64, u32)
    where
        R: Rng + ?Sized,
        F: FnMut(f64) -> f64,
    {
        let w = if self.width > 0.0 && self.width.is_finite() {
            self.width
        } else {
            1.0
        };
        let mut evals = 1;
        let fx = log_f(x0);
        if !fx.is_finite() {
            return (x0, evals);
        }
        let level = fx + open01(rng).ln();

        let mut left = x0 - w * rng.random::<f64>();
        let mut right = left + w;
        let mut j = (rng.random::<f64>() * self.max_steps as f64).floor() as u32;
        let mut k = self.max_steps.saturating_sub(1).saturating_sub(j);
        while j > 0 {
            evals += 1;
            if log_f(left) <= level {
                break;
            }
            left -= w;
            j -= 1;
        }
        while k > 0 {
            evals += 1;
            if log_f(right) <= level {
                break;
            }
            right += w;
            k -= 1;
        }

        for _ in 0..500 {
            let x1 = uniform(rng, left, right);
            evals += 1;
            if log_f(x1) > level {
                return (x1, evals);
            }
            if x1 < x0 {
                left = x1;
            } else {
                right = x1;
            }
        }
        (x0, evals)
    }
}
