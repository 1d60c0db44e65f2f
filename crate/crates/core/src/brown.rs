//! Empirical Brown measures.
//!
//! For a matrix the Brown measure is the uniform measure on its eigenvalues
//! counted with algebraic multiplicity. Two estimators are provided: the
//! eigenvalues from the Schur iteration, and an eigensolver-free density
//! obtained as the Laplacian of the regularized log-determinant
//! `u(z) = (1/2k) log det((a - z)^*(a - z) + δ² I)`, which only needs LU.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, logabsdet_in_place, norm2, ComplexMatrix};
use crate::measures::CompactMeasure;
use crate::rng::{self, tag};

/// Eigenvalues listed with multiplicity. Never empty, always finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct EigenvalueSequence(Vec<Complex64>);

impl EigenvalueSequence {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMeasure("eigenvalue sequence is empty".into()));
        }
        if let Some(bad) = values.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidMeasure(format!("non-finite eigenvalue {bad}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Each value repeated `copies` times in a row, the spectrum of `a ⊗ I`.
    pub fn tiled(&self, copies: usize) -> Self {
        assert!(copies >= 1);
        Self(self.0.iter().flat_map(|&z| std::iter::repeat_n(z, copies)).collect())
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }
}

impl TryFrom<Vec<Complex64>> for EigenvalueSequence {
    type Error = Error;

    fn try_from(v: Vec<Complex64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<EigenvalueSequence> for Vec<Complex64> {
    fn from(s: EigenvalueSequence) -> Self {
        s.0
    }
}

/// The Schur-iteration estimate: the eigenvalues of `a`.
pub fn brown_from_eigenvalues(a: &ComplexMatrix) -> Result<EigenvalueSequence> {
    linalg::eigenvalues(a)
}

/// A DT sample `y` and its blockwise circular perturbation `z`.
#[derive(Clone, Debug)]
pub struct PerturbedMicrostate {
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
    /// Row ranges of the atom blocks of the diagonal of `y`, one per atom.
    pub blocks: Vec<std::ops::Range<usize>>,
    /// `norm2(z - y) / (eps c) - 1`; the perturbation targets
    /// `norm2(z - y)² ≈ eps² c² Σ a_i`.
    pub slack: f64,
    /// Set when `mu` has no atoms, in which case `z = y`.
    pub no_atoms: bool,
}

/// `y = D + cT` plus, on each atom block of the diagonal, an independent
/// Ginibre block with entry variance `eps² c² / (a_i k)`.
pub fn perturbed_microstate(mu: &CompactMeasure, c: f64, eps: f64, k: usize, seed: u64) -> Result<PerturbedMicrostate> {
    if k < 2 || !(eps > 0.0) {
        return Err(Error::Precondition(format!("need k >= 2 and eps > 0, got k={k}, eps={eps}")));
    }
    let y = crate::ensembles::sample_dt(&crate::ensembles::DTParams::new(mu.clone(), c, k, seed)?)?;
    let diag = y.diagonal();
    let mut z = y.clone();
    let mut blocks = Vec::new();
    // Quantile sampling lists atoms first, each as one contiguous run.
    let mut start = 0;
    for (i, atom) in mu.atoms().iter().enumerate() {
        let len = diag[start..].iter().take_while(|&&d| d == atom.location).count();
        let range = start..start + len;
        start += len;
        if len > 0 {
            let variance = eps * eps * c * c / (atom.mass * k as f64);
            let g = crate::ensembles::sample_ginibre(
                len,
                variance,
                rng::child_seed(seed, (tag::PERTURBATION << 16) | i as u64),
            );
            for r in 0..len {
                let dst = (range.start + r) * k + range.start;
                for (x, &p) in z.as_mut_slice()[dst..dst + len].iter_mut().zip(g.row(r)) {
                    *x += p;
                }
            }
        }
        blocks.push(range);
    }
    let no_atoms = mu.atoms().is_empty();
    let slack = norm2(&z.sub(&y)?)? / (eps * c) - 1.0;
    Ok(PerturbedMicrostate { y, z, blocks, slack, no_atoms })
}

/// Lattice of square cells, node `(i, j)` at `(x_min + i h, y_min + j h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub y_min: f64,
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && x_max > x_min && y_max > y_min) {
            return Err(Error::Config("grid needs x_max > x_min, y_max > y_min and spacing > 0".into()));
        }
        let count = |lo: f64, hi: f64| ((hi - lo) / spacing).ceil() as usize + 1;
        Ok(Self { x_min, y_min, nx: count(x_min, x_max), ny: count(y_min, y_max), spacing })
    }

    /// Square grid `[-half_width, half_width]²` around `center`.
    pub fn square(center: Complex64, half_width: f64, spacing: f64) -> Result<Self> {
        Self::new(
            center.re - half_width,
            center.re + half_width,
            center.im - half_width,
            center.im + half_width,
            spacing,
        )
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + (self.nx - 1) as f64 * self.spacing
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + (self.ny - 1) as f64 * self.spacing
    }

    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.x_min + i as f64 * self.spacing, self.y_min + j as f64 * self.spacing)
    }

    fn covers_disk(&self, radius: f64) -> bool {
        self.x_min <= -radius && self.x_max() >= radius && self.y_min <= -radius && self.y_max() >= radius
    }
}

/// Brown density sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid,
    /// Row-major over `(j, i)`: `values[j * nx + i]` is the density at
    /// `grid.node(i, j)`.
    pub values: Vec<f64>,
    pub delta_reg: f64,
}

#[derive(Serialize)]
struct FieldHeader<'a> {
    grid: &'a Grid,
    delta_reg: f64,
    mass: f64,
}

impl DensityField {
    /// Riemann sum of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing * self.grid.spacing
    }

    /// Mass of the nodes with `|node - center| <= radius`.
    pub fn mass_within(&self, center: Complex64, radius: f64) -> f64 {
        let h2 = self.grid.spacing * self.grid.spacing;
        let mut m = 0.0;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                if (self.grid.node(i, j) - center).norm() <= radius {
                    m += self.values[j * self.grid.nx + i] * h2;
                }
            }
        }
        m
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::to_value(FieldHeader { grid: &self.grid, delta_reg: self.delta_reg, mass: self.mass() })
            .expect("plain data")
    }

    /// `x,y,density` rows after a header line.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y,density")?;
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                let p = self.grid.node(i, j);
                writeln!(w, "{},{},{}", p.re, p.im, self.values[j * self.grid.nx + i])?;
            }
        }
        Ok(())
    }
}

/// Lower estimate of the operator norm by power iteration on `a^* a`.
pub fn operator_norm_estimate(a: &ComplexMatrix) -> Result<f64> {
    let k = a.require_square("operator_norm_estimate")?;
    let mut v: Vec<Complex64> = (0..k).map(|i| Complex64::new(1.0 + (i as f64 * 0.618).fract(), 0.0)).collect();
    let mut estimate = 0.0;
    for _ in 0..100 {
        let av = matvec(a, &v);
        let w = matvec_adjoint(a, &av);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        // ||a^*a v|| / ||v|| tends to ||a||².
        let next = (norm / v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sqrt();
        v = w.into_iter().map(|z| z / norm).collect();
        if (next - estimate).abs() <= 1e-10 * next {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}

fn matvec(a: &ComplexMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (0..a.rows()).map(|i| a.row(i).iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn matvec_adjoint(a: &ComplexMatrix, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.cols()];
    for (i, &vi) in v.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(a.row(i)) {
            *o += x.conj() * vi;
        }
    }
    out
}

/// Regularized log-determinant estimate of the Brown density of `a`.
///
/// `u` is evaluated on the grid and one ring of extra nodes, and the
/// density at each grid node is the five-point Laplacian of `u` over `2π`,
/// clipped at zero. The grid must contain the disk of radius `1.1 ||a||`
/// and its spacing must not exceed `delta_reg`.
pub fn brown_logdet_grid(a: &ComplexMatrix, grid: &Grid, delta_reg: f64) -> Result<DensityField> {
    let k = a.require_square("brown_logdet_grid")?;
    if !(delta_reg > 0.0) {
        return Err(Error::Config(format!("delta_reg must be positive, got {delta_reg}")));
    }
    if grid.spacing > delta_reg {
        return Err(Error::Config(format!(
            "grid spacing {} exceeds delta_reg {delta_reg}; the Laplacian would be undersampled",
            grid.spacing
        )));
    }
    let bound = 1.1 * operator_norm_estimate(a)?;
    if !grid.covers_disk(bound) {
        return Err(Error::Precondition(format!("grid does not cover the disk of radius {bound:.4} (1.1 x norm)")));
    }

    // (a - z)^*(a - z) = a^*a - conj(z) a - z a^* + |z|^2 I, so only the
    // O(k^2) correction changes from node to node.
    let aa = a.adjoint().matmul(a)?;
    let (px, py) = (grid.nx + 2, grid.ny + 2);
    let h = grid.spacing;
    let u: Vec<f64> = (0..px * py)
        .into_par_iter()
        .map(|idx| {
            let z =
                Complex64::new(grid.x_min + ((idx % px) as f64 - 1.0) * h, grid.y_min + ((idx / px) as f64 - 1.0) * h);
            let shift = z.norm_sqr() + delta_reg * delta_reg;
            let mut m = aa.as_slice().to_vec();
            for i in 0..k {
                for j in 0..k {
                    m[i * k + j] -= z.conj() * a[(i, j)] + z * a[(j, i)].conj();
                }
                m[i * k + i] += shift;
            }
            logabsdet_in_place(&mut m, k) / (2.0 * k as f64)
        })
        .collect();

    let mut values = vec![0.0; grid.nx * grid.ny];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = (j + 1) * px + i + 1;
            let lap = (u[c - 1] + u[c + 1] + u[c - px] + u[c + px] - 4.0 * u[c]) / (h * h);
            values[j * grid.nx + i] = (lap / (2.0 * PI)).max(0.0);
        }
    }
    Ok(DensityField { grid: *grid, values, delta_reg })
}

/// `sup_{t ∈ [0, 1.5]} |F̂(t) - min(t², 1)|` where `F̂(t)` is the fraction of
/// points with `|λ - center| <= t radius`.
pub fn radial_cdf_distance(points: &EigenvalueSequence, center: Complex64, radius: f64) -> f64 {
    radial_cdf_distance_with(points, center, radius, 1.5, |t| (t * t).min(1.0))
}

/// As [`radial_cdf_distance`] against an arbitrary continuous radial CDF
/// `cdf(t)` on `[0, t_max]`, in units of `radius`.
pub fn radial_cdf_distance_with(
    points: &EigenvalueSequence,
    center: Complex64,
    radius: f64,
    t_max: f64,
    cdf: impl Fn(f64) -> f64,
) -> f64 {
    assert!(radius > 0.0, "radius must be positive");
    let mut t: Vec<f64> = points.values().iter().map(|z| (z - center).norm() / radius).collect();
    t.sort_by(f64::total_cmp);
    let n = t.len() as f64;
    let mut worst = cdf(0.0).abs().max((t.partition_point(|&x| x <= t_max) as f64 / n - cdf(t_max)).abs());
    let mut i = 0;
    while i < t.len() && t[i] <= t_max {
        let x = t[i];
        let below = i as f64 / n;
        while i < t.len() && t[i] == x {
            i += 1;
        }
        let g = cdf(x);
        worst = worst.max((g - below).abs()).max((i as f64 / n - g).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_strict_upper;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sequence_invariants() {
        assert!(EigenvalueSequence::new(vec![]).is_err());
        assert!(EigenvalueSequence::new(vec![c(f64::NAN, 0.0)]).is_err());
        let s = EigenvalueSequence::new(vec![c(1.0, 0.0), c(0.0, -2.0)]).unwrap();
        assert_eq!(s.max_modulus(), 2.0);
        assert_eq!(s.tiled(3).len(), 6);
        assert_eq!(s.tiled(2).values()[1], c(1.0, 0.0));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<EigenvalueSequence>(&json).unwrap(), s);
        assert!(serde_json::from_str::<EigenvalueSequence>("[]").is_err());
    }

    #[test]
    fn radial_distance_examples() {
        let at_center = EigenvalueSequence::new(vec![c(0.3, 0.3); 10]).unwrap();
        assert_eq!(radial_cdf_distance(&at_center, c(0.3, 0.3), 1.0), 1.0);

        // Points at the radial quantiles sqrt((i + 1/2) / n) of the unit disk.
        let n = 400;
        let pts: Vec<Complex64> =
            (0..n).map(|i| Complex64::from_polar(((i as f64 + 0.5) / n as f64).sqrt(), i as f64 * 2.4)).collect();
        let d = radial_cdf_distance(&EigenvalueSequence::new(pts).unwrap(), c(0.0, 0.0), 1.0);
        assert!(d <= 1.0 / n as f64 + 1e-12, "{d}");
    }

    #[test]
    fn perturbation_examples() {
        let dirac = CompactMeasure::dirac(c(0.0, 0.0));
        let p = perturbed_microstate(&dirac, 1.0, 0.5, 1024, 1).unwrap();
        assert_eq!(p.blocks, vec![0..1024]);
        assert!((norm2(&p.z.sub(&p.y).unwrap()).unwrap() - 0.5).abs() < 0.03);
        assert!(p.slack.abs() < 0.05);
        assert_eq!(p.y, sample_strict_upper(1024, 1.0, 1));

        let pm = CompactMeasure::from_atoms(&[(c(-1.0, 0.0), 0.5), (c(1.0, 0.0), 0.5)]).unwrap();
        let p = perturbed_microstate(&pm, 1.0, 0.3, 256, 2).unwrap();
        assert_eq!(p.blocks, vec![0..128, 128..256]);
        let d = p.z.sub(&p.y).unwrap();
        // Off-block entries are untouched. Entries are √2 c eps times those of
        // a k x k circular matrix, so each block has tr_{k/2} ≈ c² eps².
        let mut block_energy = [0.0; 2];
        for i in 0..256 {
            for j in 0..256 {
                if (i < 128) != (j < 128) {
                    assert_eq!(d[(i, j)], c(0.0, 0.0));
                } else {
                    block_energy[i / 128] += d[(i, j)].norm_sqr() / 128.0;
                }
            }
        }
        for e in block_energy {
            assert!((e - 0.09).abs() < 0.01, "{e}");
        }

        let disk = CompactMeasure::uniform_disk(c(0.0, 0.0), 1.0).unwrap();
        let p = perturbed_microstate(&disk, 1.0, 0.3, 16, 2).unwrap();
        assert!(p.no_atoms);
        assert_eq!(p.z, p.y);
        assert!(perturbed_microstate(&disk, 1.0, 0.0, 16, 2).is_err());
        assert!(perturbed_microstate(&disk, 1.0, 0.1, 1, 2).is_err());
    }

    #[test]
    fn norm_estimate() {
        let d = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, -3.0), c(2.0, 0.0)]);
        assert!((operator_norm_estimate(&d).unwrap() - 3.0).abs() < 1e-8);
        assert_eq!(operator_norm_estimate(&ComplexMatrix::zeros(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn grid_of_zero_matrix_is_a_smoothed_point_mass() {
        let grid = Grid::square(c(0.0, 0.0), 0.5, 0.01).unwrap();
        let f = brown_logdet_grid(&ComplexMatrix::zeros(64, 64), &grid, 0.05).unwrap();
        assert!(f.values.iter().all(|&v| v >= 0.0));
        assert!(f.mass() >= 0.9 && f.mass() <= 1.0 + 1e-3, "{}", f.mass());
        // Closed form: mass within R of the smoothed point is R²/(R² + δ²).
        assert!((f.mass_within(c(0.0, 0.0), 0.1) - 0.8).abs() < 0.02);
        let fine = Grid::square(c(0.0, 0.0), 0.5, 0.1).unwrap();
        assert!(matches!(brown_logdet_grid(&ComplexMatrix::zeros(4, 4), &fine, 0.05), Err(Error::Config(_))));
    }

    #[test]
    fn grid_of_normal_matrix_splits_mass() {
        let mut diag = vec![c(-1.0, 0.0); 16];
        diag.extend(vec![c(1.0, 0.0); 16]);
        let a = ComplexMatrix::from_diagonal(&diag);
        let small = Grid::square(c(0.0, 0.0), 1.0, 0.05).unwrap();
        assert!(matches!(brown_logdet_grid(&a, &small, 0.05), Err(Error::Precondition(_))));
        let grid = Grid::new(-2.0, 2.0, -1.2, 1.2, 0.01).unwrap();
        let f = brown_logdet_grid(&a, &grid, 0.05).unwrap();
        for x in [-1.0, 1.0] {
            assert!((f.mass_within(c(x, 0.0), 0.5) - 0.5).abs() < 0.05);
        }
        assert!((f.mass() - 1.0).abs() < 0.02, "{}", f.mass());
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + grid.nx * grid.ny);
        assert_eq!(f.header_json()["delta_reg"], 0.05);
    }

    #[test]
    fn grid_agrees_with_eigenvalues_on_a_dt_matrix() {
        let dirac = CompactMeasure::dirac(c(0.0, 0.0));
        let (k, delta) = (128, 0.03);
        let p = perturbed_microstate(&dirac, 1.0, 0.5, k, 5).unwrap();
        let r = 1.0 / 5f64.ln().sqrt();
        let ev = brown_from_eigenvalues(&p.z).unwrap();
        let inside = ev.values().iter().filter(|z| z.norm() <= 1.05 * r).count() as f64 / k as f64;
        let half = 1.1 * operator_norm_estimate(&p.z).unwrap() + delta;
        let f = brown_logdet_grid(&p.z, &Grid::square(c(0.0, 0.0), half, delta).unwrap(), delta).unwrap();
        let field_inside = f.mass_within(c(0.0, 0.0), 1.05 * r);
        assert!(field_inside >= 0.9, "{field_inside}");
        assert!((field_inside - inside).abs() < 0.1, "{field_inside} vs {inside}");
    }
}
