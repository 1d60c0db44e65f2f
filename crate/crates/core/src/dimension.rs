//! Packing-number lower bounds and the `δ₀` scan.
//!
//! The volume of a neighbourhood of the microstate space at size `n = Nk`
//! is bounded below by Dyson's formula applied to block upper triangular
//! matrices whose diagonal blocks are triangularised perturbed microstates.
//! Dividing by the volume of a `6ε`-ball gives a packing bound whose
//! `n⁻² / |log ε|` scaling splits into the exact `2 - 1/N`, the Selberg lower
//! bound for `E_ε`, and a residual constant.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brown::{brown_from_eigenvalues, perturbed_microstate};
use crate::dyson::{delta_schedule, log_ck, selberg_lower_bound_f};
use crate::ensembles::{star_moments, StarWord};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::measures::CompactMeasure;
use crate::rng;
use crate::special::ln_gamma;

/// `log` of the volume of a Euclidean ball of real dimension `dim`.
pub fn log_ball_volume(dim: usize, radius: f64) -> f64 {
    assert!(dim >= 1 && radius > 0.0);
    let d = dim as f64;
    d / 2.0 * PI.ln() + d * radius.ln() - ln_gamma(d / 2.0 + 1.0)
}

/// Parameters of a microstate space `Γ(Z; m, k, γ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostateParams {
    pub m: usize,
    pub gamma: f64,
    pub k: usize,
    /// Operator-norm cap; recorded but not enforced.
    pub r_cap: Option<f64>,
}

impl MicrostateParams {
    pub fn new(m: usize, gamma: f64, k: usize) -> Result<Self> {
        if m == 0 || !(gamma > 0.0) || k == 0 {
            return Err(Error::Config(format!("need m >= 1, gamma > 0, k >= 1; got m={m}, gamma={gamma}, k={k}")));
        }
        Ok(Self { m, gamma, k, r_cap: None })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub pass: bool,
    pub max_deviation: f64,
    pub worst_word: Option<StarWord>,
}

/// Whether all *-moments of `a` of order `<= m` are within `gamma` of
/// `reference`.
pub fn microstate_membership(
    a: &ComplexMatrix,
    reference: &BTreeMap<StarWord, Complex64>,
    p: &MicrostateParams,
) -> Result<Membership> {
    if a.rows() != p.k || a.cols() != p.k {
        return Err(Error::Dimension(format!("expected a {0}x{0} matrix, got {1}x{2}", p.k, a.rows(), a.cols())));
    }
    let mut out = Membership { pass: true, max_deviation: 0.0, worst_word: None };
    for (w, v) in star_moments(std::slice::from_ref(a), p.m)? {
        let r = reference.get(&w).ok_or_else(|| Error::Config(format!("reference moments lack the word `{w}`")))?;
        let dev = (v - r).norm();
        if out.worst_word.is_none() || dev > out.max_deviation {
            out.max_deviation = dev;
            out.worst_word = Some(w);
        }
    }
    out.pass = out.max_deviation <= p.gamma;
    Ok(out)
}

/// The logarithmic terms of the packing bound at total size `n = N k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingTerms {
    /// `log C_n`.
    pub dyson_constant: f64,
    /// Un-normalized lower bound for `log E_ε` of the `n` eigenvalues.
    pub e_eps: f64,
    /// Ball of radius `sqrt(n) ε` in real dimension `N k (k - 1)`.
    pub log_vol_w: f64,
    /// `(k² N (N-1) / 2)(log N + 2 ω)` with `ω` the log-volume of the
    /// circular approximants per real dimension.
    pub log_vol_h: f64,
    /// `log Γ(n² + 1) - n² log(π (6 sqrt(n) ε)²)`, the inverse `6ε`-ball.
    pub inverse_ball: f64,
}

impl PackingTerms {
    pub fn total(&self) -> f64 {
        self.dyson_constant + self.e_eps + self.log_vol_w + self.log_vol_h + self.inverse_ball
    }
}

pub fn packing_terms(eps: f64, big_n: usize, k: usize, f_lb_total: f64, log_vol_omega_per_dim: f64) -> PackingTerms {
    assert!(eps > 0.0 && big_n >= 1 && k >= 1);
    let (nf, kf) = (big_n as f64, k as f64);
    let n = big_n * k;
    let size = n as f64;
    let w_dim = big_n * k * (k - 1);
    let log_vol_w = if w_dim == 0 { 0.0 } else { log_ball_volume(w_dim, size.sqrt() * eps) };
    let log_vol_h = kf * kf * nf * (nf - 1.0) / 2.0 * (nf.ln() + 2.0 * log_vol_omega_per_dim);
    let inverse_ball = ln_gamma(size * size + 1.0) - size * size * (PI * (6.0 * size.sqrt() * eps).powi(2)).ln();
    PackingTerms { dyson_constant: log_ck(n), e_eps: f_lb_total, log_vol_w, log_vol_h, inverse_ball }
}

/// `log P_ε` lower bound; the sum of [`packing_terms`].
pub fn packing_lower_bound_log(eps: f64, big_n: usize, k: usize, f_lb_total: f64, log_vol_omega_per_dim: f64) -> f64 {
    packing_terms(eps, big_n, k, f_lb_total, log_vol_omega_per_dim).total()
}

/// Default `ω`: the `k^{-1/2}` scale of an entry of a `k x k` circular
/// approximant, per real dimension.
pub fn default_log_vol_omega(k: usize) -> f64 {
    -0.5 * (k as f64).ln()
}

/// One `ε` of the scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub eps: f64,
    pub delta: f64,
    #[serde(rename = "bigN")]
    pub big_n: usize,
    pub k: usize,
    /// `n⁻²` times the Selberg lower bound for `log E_ε`.
    pub f_lb_norm: f64,
    /// Residual `n⁻² log P / |log ε| - (2 - 1/N) - f_lb_norm / |log ε|`,
    /// times `|log ε|`, with the offset left out.
    pub const_term: f64,
    pub log_packing_lb: f64,
    pub chi_offset: f64,
    pub delta_hat: f64,
}

impl ScanRow {
    /// Builds a row from the packing terms, with `const_term` defined so
    /// that `delta_hat = (2 - 1/N) + (f_lb_norm + const_term + chi_offset / n²) / |log ε|`.
    pub fn assemble(eps: f64, delta: f64, big_n: usize, k: usize, terms: &PackingTerms, chi_offset: f64) -> Self {
        let n2 = ((big_n * k) as f64).powi(2);
        let log_eps = eps.ln().abs();
        let f_lb_norm = terms.e_eps / n2;
        let leading = 2.0 - 1.0 / big_n as f64;
        let const_term = terms.total() / n2 - leading * log_eps - f_lb_norm;
        let delta_hat = leading + (f_lb_norm + const_term + chi_offset / n2) / log_eps;
        Self {
            eps,
            delta,
            big_n,
            k,
            f_lb_norm,
            const_term,
            log_packing_lb: terms.total() + chi_offset,
            chi_offset,
            delta_hat,
        }
    }
}

pub const SCAN_CSV_HEADER: &str = "eps,delta,bigN,k,f_lb_norm,const_term,delta_hat";

pub fn write_scan_csv(rows: &[ScanRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{SCAN_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.eps, r.delta, r.big_n, r.k, r.f_lb_norm, r.const_term, r.delta_hat)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSkip {
    pub eps: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub skipped: Vec<ScanSkip>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub mu: CompactMeasure,
    pub c: f64,
    #[serde(rename = "bigN")]
    pub big_n: usize,
    pub k: usize,
    pub eps_grid: Vec<f64>,
    pub chi_offset: f64,
    /// Defaults to [`default_log_vol_omega`].
    pub log_vol_omega: Option<f64>,
    pub seed: u64,
}

fn scan_row(cfg: &ScanConfig, eps: f64, seed: u64) -> Result<ScanRow> {
    let delta = delta_schedule(eps)?;
    let block_c = cfg.c / (cfg.big_n as f64).sqrt();
    let micro = perturbed_microstate(&cfg.mu, block_c, eps, cfg.k, seed)?;
    let lambda = brown_from_eigenvalues(&micro.z)?.tiled(cfg.big_n);
    let f_lb = selberg_lower_bound_f(&lambda, eps, delta, false)?.log_value;
    let omega = cfg.log_vol_omega.unwrap_or_else(|| default_log_vol_omega(cfg.k));
    let terms = packing_terms(eps, cfg.big_n, cfg.k, f_lb, omega);
    Ok(ScanRow::assemble(eps, delta, cfg.big_n, cfg.k, &terms, cfg.chi_offset))
}

/// Runs the scan over `cfg.eps_grid`. An `ε` whose row cannot be built is
/// skipped and its reason recorded; rows keep the grid order.
pub fn dimension_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    if cfg.big_n < 2 {
        return Err(Error::Precondition(format!("bigN must be at least 2, got {}", cfg.big_n)));
    }
    let results: Vec<(f64, Result<ScanRow>)> = cfg
        .eps_grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| (eps, scan_row(cfg, eps, rng::child_seed(cfg.seed, i as u64))))
        .collect();
    let mut report = ScanReport::default();
    for (eps, r) in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => report.skipped.push(ScanSkip { eps, reason: e.to_string() }),
        }
    }
    Ok(report)
}

/// Whether `values` never drops by more than `slack` from one entry to the
/// next.
pub fn is_non_decreasing_within(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - slack)
}
