//! Distances between planar point clouds and reference radial laws.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::special::ln_gamma;

/// Exact 1-D Wasserstein-1 distance between two empirical measures.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "empty sample");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    // Integrate |F_a - F_b| between consecutive breakpoints of the merge.
    let (mut i, mut j) = (0, 0);
    let mut last = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - last);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        last = x;
    }
    total
}

fn projected_distances<'a>(
    a: &'a [Complex64],
    b: &'a [Complex64],
    directions: usize,
) -> impl Iterator<Item = f64> + 'a {
    assert!(directions >= 1);
    (0..directions).map(move |d| {
        let theta = PI * d as f64 / directions as f64;
        let u = Complex64::from_polar(1.0, -theta);
        let pa: Vec<f64> = a.iter().map(|z| (z * u).re).collect();
        let pb: Vec<f64> = b.iter().map(|z| (z * u).re).collect();
        wasserstein1_1d(&pa, &pb)
    })
}

/// Largest 1-D Wasserstein-1 distance between projections onto
/// `directions` equally spaced lines through the origin.
///
/// Bounded by the planar Wasserstein-1 distance, and zero only when the two
/// clouds agree in every sampled direction. Used as a weak-convergence
/// metric between spectra.
pub fn max_sliced_wasserstein(a: &[Complex64], b: &[Complex64], directions: usize) -> f64 {
    projected_distances(a, b, directions).fold(0.0, f64::max)
}

/// Mean of the same projected distances; less sensitive to sampling noise.
pub fn sliced_wasserstein(a: &[Complex64], b: &[Complex64], directions: usize) -> f64 {
    projected_distances(a, b, directions).sum::<f64>() / directions as f64
}

/// Radial CDF of the eigenvalues of an `n x n` Ginibre matrix with entry
/// variance `variance`: `P(|λ| <= r)` for a uniformly chosen eigenvalue.
///
/// The squared moduli are distributed as independent `variance * Gamma(j, 1)`
/// variables, `j = 1..=n`, so the CDF is the average of regularized lower
/// incomplete gamma functions with integer shape.
pub fn ginibre_radial_cdf(n: usize, variance: f64, r: f64) -> f64 {
    assert!(n >= 1 && variance > 0.0);
    if r <= 0.0 {
        return 0.0;
    }
    let x = r * r / variance;
    // Σ_j Q(j, x) = Σ_{m<n} (n - m) e^{-x} x^m / m!.
    let lx = x.ln();
    let upper: f64 = (0..n).map(|m| (n - m) as f64 * (-x + m as f64 * lx - ln_gamma(m as f64 + 1.0)).exp()).sum();
    (1.0 - upper / n as f64).clamp(0.0, 1.0)
}
