//! Dyson's density on triangular matrices and the box integrals `E_ε`.
//!
//! For eigenvalues `λ_j = a_j + i b_j`, `E_ε(λ)` integrates
//! `Π_{i≠j} (|s_i - s_j|² + |t_i - t_j|²)^{1/2}` over the boxes
//! `s_j ∈ [a_j - ε, a_j + ε]`, `t_j ∈ [b_j - ε, b_j + ε]`. Everything here
//! works with logarithms: at `n = 1024` the integrand is a product of about
//! a million factors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brown::EigenvalueSequence;
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::measures::close_pair_count;
use crate::quadrature::GaussLegendre;
use crate::rng::{self, tag};
use crate::special::{ln_gamma, log_sum_exp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    /// Log of an unbiased estimate of the integral; biased low as a log.
    Unbiased,
    LowerBound,
}

/// A logarithm with its standard error. `log_value` may be `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEstimate {
    pub log_value: f64,
    pub std_error: f64,
    pub kind: EstimateKind,
}

impl LogEstimate {
    pub fn exact(log_value: f64) -> Self {
        Self { log_value, std_error: 0.0, kind: EstimateKind::Exact }
    }

    pub fn record(&self, n: usize, eps: f64, delta: Option<f64>) -> EstimateRecord {
        EstimateRecord { log_value: self.log_value, std_error: self.std_error, kind: self.kind, n, eps, delta }
    }
}

/// Serialized form of a [`LogEstimate`] with its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub log_value: f64,
    pub std_error: f64,
    pub kind: EstimateKind,
    pub n: usize,
    pub eps: f64,
    pub delta: Option<f64>,
}

/// `log C_k`, `C_k = π^{k(k-1)/2} / Π_{j=1}^k j!`.
pub fn log_ck(k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let kf = k as f64;
    kf * (kf - 1.0) / 2.0 * std::f64::consts::PI.ln() - (1..=k).map(|j| ln_gamma(j as f64 + 1.0)).sum::<f64>()
}

/// `Σ_{p<q} log |b_pp - b_qq|²` for upper triangular `b`, plus `log C_k`
/// when `include_constant` is set.
pub fn log_dyson_density(b: &ComplexMatrix, include_constant: bool) -> Result<f64> {
    let k = b.require_square("log_dyson_density")?;
    if !b.is_upper_triangular() {
        return Err(Error::NotTriangular { max_below: b.max_below_diagonal() });
    }
    let d = b.diagonal();
    let mut total = 0.0;
    for p in 0..k {
        for q in p + 1..k {
            total += 2.0 * (d[p] - d[q]).norm().ln();
        }
    }
    Ok(if include_constant { total + log_ck(k) } else { total })
}

/// `Σ_{j=0}^{n-1} [log Γ(j+2) + 2 log Γ(j+1) - log Γ(n+j+1)]`.
pub fn gamma_sum(n: usize) -> f64 {
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let j = j as f64;
            ln_gamma(j + 2.0) + 2.0 * ln_gamma(j + 1.0) - ln_gamma(nf + j + 1.0)
        })
        .sum()
}

/// `n⁻² · gamma_sum(n)`, which tends to `-2 log 2`.
pub fn gamma_product_rate(n: usize) -> f64 {
    assert!(n >= 1, "n must be at least 1");
    gamma_sum(n) / (n as f64 * n as f64)
}

/// `log ∫_{[-ε,ε]^n} Π_{i≠j} |x_i - x_j| dx` by Selberg's formula.
pub fn selberg_box_integral_log(n: usize, eps: f64) -> LogEstimate {
    assert!(n >= 1 && eps > 0.0);
    let nf = n as f64;
    LogEstimate::exact(nf * nf * (2.0 * eps).ln() + gamma_sum(n))
}

/// `1 / |log ε|`, admissible for `0 < ε < e⁻⁴`.
pub fn delta_schedule(eps: f64) -> Result<f64> {
    let limit = (-4.0f64).exp();
    if !(eps > 0.0 && eps < limit) {
        return Err(Error::Precondition(format!("delta_schedule needs 0 < eps < e^-4 = {limit:.6}, got {eps}")));
    }
    Ok(1.0 / eps.ln().abs())
}

/// `log g(s, t) = Σ_{i<j} log(|s_i - s_j|² + |t_i - t_j|²)`.
fn log_integrand(s: &[f64], t: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let ds = s[i] - s[j];
            let dt = t[i] - t[j];
            total += (ds * ds + dt * dt).ln();
        }
    }
    total
}

/// Monte Carlo estimates of `log E_ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EepsMonteCarlo {
    /// `log vol + log mean g`, jackknife standard error.
    pub unbiased: LogEstimate,
    /// `log vol + mean log g`, below `log E_ε` by Jensen's inequality.
    pub jensen: LogEstimate,
    pub trials: usize,
    /// Draws that hit `g = 0` exactly and were redrawn.
    pub resampled: u64,
}

pub fn log_e_eps_mc(lambda: &EigenvalueSequence, eps: f64, trials: usize, seed: u64) -> Result<EepsMonteCarlo> {
    if !(eps > 0.0) || trials < 100 {
        return Err(Error::Precondition(format!("need eps > 0 and trials >= 100, got eps={eps}, trials={trials}")));
    }
    let pts = lambda.values();
    let n = pts.len();
    let log_vol = 2.0 * n as f64 * (2.0 * eps).ln();

    let draws: Vec<(f64, u64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, tag::MONTE_CARLO, trial as u64);
            let mut resampled = 0;
            loop {
                let s: Vec<f64> = pts.iter().map(|z| z.re + eps * rng.random_range(-1.0..1.0)).collect();
                let t: Vec<f64> = pts.iter().map(|z| z.im + eps * rng.random_range(-1.0..1.0)).collect();
                let v = log_integrand(&s, &t);
                if v > f64::NEG_INFINITY {
                    return (v, resampled);
                }
                resampled += 1;
            }
        })
        .collect();
    let logs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let resampled = draws.iter().map(|d| d.1).sum();

    let tf = trials as f64;
    let mean = logs.iter().sum::<f64>() / tf;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tf - 1.0);
    let jensen =
        LogEstimate { log_value: log_vol + mean, std_error: (var / tf).sqrt(), kind: EstimateKind::LowerBound };

    // Jackknife over leave-one-out log-mean-exp values.
    let full = log_sum_exp(&logs);
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logs.iter().map(|x| (x - peak).exp()).sum();
    let loo: Vec<f64> = logs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let rest = total - (x - peak).exp();
            if rest > 1e-12 * total {
                peak + rest.ln() - (tf - 1.0).ln()
            } else {
                // This draw dominates the sum; recompute without it.
                let others: Vec<f64> = logs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &y)| y).collect();
                log_sum_exp(&others) - (tf - 1.0).ln()
            }
        })
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / tf;
    let jack_var = (tf - 1.0) / tf * loo.iter().map(|x| (x - loo_mean).powi(2)).sum::<f64>();
    let unbiased =
        LogEstimate { log_value: log_vol + full - tf.ln(), std_error: jack_var.sqrt(), kind: EstimateKind::Unbiased };

    Ok(EepsMonteCarlo { unbiased, jensen, trials, resampled })
}

/// `log E_ε` by tensor Gauss-Legendre quadrature with `n` nodes per axis.
///
/// For `n <= 4` points the integrand is a polynomial of degree at most
/// `2(n-1)` in each variable, so the rule is exact up to rounding.
pub fn log_e_eps_quadrature(lambda: &EigenvalueSequence, eps: f64) -> Result<LogEstimate> {
    let pts = lambda.values();
    let n = pts.len();
    if n > 4 || !(eps > 0.0) {
        return Err(Error::Precondition(format!("quadrature handles n <= 4 and eps > 0, got n={n}, eps={eps}")));
    }
    let gl = GaussLegendre::new(n.max(2));
    let m = gl.nodes().len();
    let dims = 2 * n;
    let total_points = m.pow(dims as u32);
    let mut terms = Vec::with_capacity(total_points);
    let mut idx = vec![0usize; dims];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for _ in 0..total_points {
        let mut log_w = 0.0;
        for j in 0..n {
            s[j] = pts[j].re + eps * gl.nodes()[idx[j]];
            t[j] = pts[j].im + eps * gl.nodes()[idx[n + j]];
            log_w += gl.weights()[idx[j]].ln() + gl.weights()[idx[n + j]].ln();
        }
        terms.push(log_w + log_integrand(&s, &t));
        for d in idx.iter_mut() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
    // Weights integrate over [-1, 1]; rescale each axis to length 2ε.
    Ok(LogEstimate::exact(log_sum_exp(&terms) + dims as f64 * eps.ln()))
}

/// Lower bound for `log E_ε(λ)` from the Selberg chain:
///
/// `(n² - #W) log(δ - 3ε) + 2[(n + #W) log 2ε - log n! + gamma_sum(n)]`
///
/// where `#W` counts ordered pairs `i ≠ j` with `|λ_i - λ_j| < δ`. With
/// `normalize` the value is divided by `n²`.
pub fn selberg_lower_bound_f(
    lambda: &EigenvalueSequence,
    eps: f64,
    delta: f64,
    normalize: bool,
) -> Result<LogEstimate> {
    if !(eps > 0.0 && delta > 3.0 * eps && delta <= 1.0) {
        return Err(Error::Precondition(format!("need 1 >= delta > 3 eps > 0, got eps={eps}, delta={delta}")));
    }
    let n = lambda.len();
    if n < 2 {
        return Err(Error::Precondition("the Selberg chain needs at least two points".into()));
    }
    let nf = n as f64;
    let w = close_pair_count(lambda.values(), delta) as f64;
    let bound = (nf * nf - w) * (delta - 3.0 * eps).ln()
        + 2.0 * ((nf + w) * (2.0 * eps).ln() - ln_gamma(nf + 1.0) + gamma_sum(n));
    let value = if normalize { bound / (nf * nf) } else { bound };
    Ok(LogEstimate { log_value: value, std_error: 0.0, kind: EstimateKind::LowerBound })
}
