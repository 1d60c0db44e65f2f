//! Random-matrix models.
//!
//! The DT model is `Z = D + c T`: `D` diagonal with spectral measure close to
//! `μ`, `T` strictly upper triangular with independent standard complex
//! Gaussian entries of variance `1/k`, so that `tr_k(T^* T) → 1/2`. Every
//! sampler is a pure function of its parameters and seed.

mod moments;

pub use moments::{all_words, freeness_check, star_moment, star_moments, FreenessReport, FreenessWitness, StarWord};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::measures::{sample_measure, CompactMeasure, SampleMode};
use crate::rng::{self, tag};

/// Parameters of a `DT(μ, c)` matrix model of size `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DTParams {
    pub mu: CompactMeasure,
    pub c: f64,
    pub k: usize,
    pub seed: u64,
}

impl DTParams {
    pub fn new(mu: CompactMeasure, c: f64, k: usize, seed: u64) -> Result<Self> {
        let p = Self { mu, c, k, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Precondition(format!("c must be positive, got {}", self.c)));
        }
        if self.k == 0 {
            return Err(Error::Precondition("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fills a row-major buffer with complex Gaussians of `E|z|^2 = variance`.
/// Rows come from independent streams so they can be drawn in parallel.
fn gaussian_rows(
    k: usize,
    variance: f64,
    seed: u64,
    stream_tag: u64,
    keep: impl Fn(usize, usize) -> bool + Sync,
) -> Vec<Complex64> {
    let sigma = (variance / 2.0).sqrt();
    let mut data = vec![Complex64::new(0.0, 0.0); k * k];
    data.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
        let mut rng = rng::stream(seed, stream_tag, i as u64);
        for (j, z) in row.iter_mut().enumerate() {
            if keep(i, j) {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z = Complex64::new(re * sigma, im * sigma);
            }
        }
    });
    data
}

/// Ginibre matrix: i.i.d. centred complex Gaussians with `E|a_ij|^2 = variance`.
pub fn sample_ginibre(k: usize, variance: f64, seed: u64) -> ComplexMatrix {
    assert!(k >= 1, "k must be at least 1");
    let data = gaussian_rows(k, variance, seed, tag::GINIBRE, |_, _| true);
    ComplexMatrix::from_vec(k, k, data).expect("finite entries")
}

/// Strictly upper triangular Gaussian matrix with `E|t_ij|^2 = c^2 / k`.
///
/// The entries are unit-scale Gaussians multiplied by `c`, so the output
/// for `2c` is exactly twice the output for `c` under the same seed.
pub fn sample_strict_upper(k: usize, c: f64, seed: u64) -> ComplexMatrix {
    assert!(k >= 1, "k must be at least 1");
    let mut data = gaussian_rows(k, 1.0 / k as f64, seed, tag::STRICT_UPPER, |i, j| j > i);
    data.iter_mut().for_each(|z| *z *= c);
    ComplexMatrix::from_vec(k, k, data).expect("finite entries")
}

/// Diagonal matrix whose spectral measure approximates `mu`.
pub fn sample_diagonal(mu: &CompactMeasure, k: usize, mode: SampleMode, seed: u64) -> ComplexMatrix {
    let diag = sample_measure(mu, k, mode, rng::child_seed(seed, tag::DIAGONAL));
    ComplexMatrix::from_diagonal(&diag)
}

/// `D + c T` with a quantile-mode diagonal.
pub fn sample_dt(p: &DTParams) -> Result<ComplexMatrix> {
    p.validate()?;
    let d = sample_diagonal(&p.mu, p.k, SampleMode::Quantile, p.seed);
    let t = sample_strict_upper(p.k, p.c, p.seed);
    d.add(&t)
}

/// `bigN x bigN` block upper triangular model of `DT(μ, c)` at total size
/// `bigN * k`.
///
/// Diagonal blocks are independent `DT(μ, c / sqrt(bigN))` samples and the
/// blocks above the diagonal are independent Ginibre matrices with
/// `E tr_k(B^* B) = c^2 / bigN`.
pub fn assemble_block_dt(mu: &CompactMeasure, c: f64, big_n: usize, k: usize, seed: u64) -> Result<ComplexMatrix> {
    if big_n < 2 {
        return Err(Error::Precondition(format!("bigN must be at least 2, got {big_n}")));
    }
    let block_c = c / (big_n as f64).sqrt();
    let size = big_n * k;
    let mut out = ComplexMatrix::zeros(size, size);
    for bi in 0..big_n {
        for bj in bi..big_n {
            let block_seed = rng::child_seed(seed, (tag::BLOCK << 16) | (bi * big_n + bj) as u64);
            let block = if bi == bj {
                sample_dt(&DTParams::new(mu.clone(), block_c, k, block_seed)?)?
            } else {
                sample_ginibre(k, c * c / (big_n * k) as f64, block_seed)
            };
            for i in 0..k {
                let dst = (bi * k + i) * size + bj * k;
                out.as_mut_slice()[dst..dst + k].copy_from_slice(block.row(i));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, normalized_trace};

    fn dirac0() -> CompactMeasure {
        CompactMeasure::dirac(Complex64::new(0.0, 0.0))
    }

    #[test]
    fn ginibre_normalisation_and_determinism() {
        let g = sample_ginibre(1024, 1.0 / 1024.0, 11);
        assert!((norm2(&g).unwrap() - 1.0).abs() < 0.05);
        assert_eq!(g, sample_ginibre(1024, 1.0 / 1024.0, 11));
        assert_ne!(g, sample_ginibre(1024, 1.0 / 1024.0, 12));
    }

    #[test]
    fn strict_upper_shape_and_scale() {
        let t = sample_strict_upper(64, 1.0, 3);
        for i in 0..64 {
            for j in 0..=i {
                assert_eq!(t[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
        let t1 = sample_strict_upper(1024, 1.0, 5);
        assert!((norm2(&t1).unwrap().powi(2) - 0.5).abs() < 0.02);
        let t2 = sample_strict_upper(1024, 2.0, 5);
        assert!((norm2(&t2).unwrap().powi(2) - 2.0).abs() < 0.08);
        assert_eq!(t2, t1.scale(2.0));
    }

    #[test]
    fn diagonal_examples() {
        let z = sample_diagonal(&dirac0(), 9, SampleMode::Quantile, 0);
        assert_eq!(z, ComplexMatrix::zeros(9, 9));
        let two =
            CompactMeasure::from_atoms(&[(Complex64::new(0.0, 0.0), 0.5), (Complex64::new(1.0, 0.0), 0.5)]).unwrap();
        let d = sample_diagonal(&two, 10, SampleMode::Quantile, 0).diagonal();
        let re: Vec<f64> = d.iter().map(|z| z.re).collect();
        assert_eq!(re, [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn dt_examples() {
        let p = DTParams::new(dirac0(), 1.0, 1024, 9).unwrap();
        let z = sample_dt(&p).unwrap();
        assert_eq!(z, sample_strict_upper(1024, 1.0, 9));
        assert!(z.is_upper_triangular());

        let w = Complex64::new(0.3, -0.7);
        let p = DTParams::new(CompactMeasure::dirac(w), 1e-12, 16, 1).unwrap();
        let z = sample_dt(&p).unwrap();
        assert!(z.sub(&ComplexMatrix::from_diagonal(&[w; 16])).unwrap().frobenius() < 1e-10);

        let pm =
            CompactMeasure::from_atoms(&[(Complex64::new(-1.0, 0.0), 0.5), (Complex64::new(1.0, 0.0), 0.5)]).unwrap();
        let z = sample_dt(&DTParams::new(pm, 1.0, 1024, 4).unwrap()).unwrap();
        assert!(normalized_trace(&z).unwrap().norm() < 1e-12);
        assert!((norm2(&z).unwrap().powi(2) - 1.5).abs() < 0.05);
    }

    #[test]
    fn dt_scaling_covariance() {
        let pm =
            CompactMeasure::from_atoms(&[(Complex64::new(-1.0, 0.0), 0.5), (Complex64::new(1.0, 0.0), 0.5)]).unwrap();
        let a = sample_dt(&DTParams::new(pm.clone(), 0.7, 50, 2).unwrap()).unwrap();
        let b = sample_dt(&DTParams::new(pm, 1.4, 50, 2).unwrap()).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                if j > i {
                    assert_eq!(b[(i, j)], a[(i, j)] * 2.0);
                } else {
                    assert_eq!(b[(i, j)], a[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn block_model_bookkeeping() {
        let z = assemble_block_dt(&dirac0(), 1.0, 2, 512, 3).unwrap();
        assert_eq!(z.rows(), 1024);
        assert!(z.is_upper_triangular());
        assert!(normalized_trace(&z).unwrap().norm() < 1e-12);
        let z = assemble_block_dt(&dirac0(), 1.0, 4, 256, 3).unwrap();
        assert!((norm2(&z).unwrap().powi(2) - 0.5).abs() < 0.03);
        assert!(assemble_block_dt(&dirac0(), 1.0, 1, 8, 0).is_err());
    }
}
