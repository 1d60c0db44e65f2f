//! Compactly supported measures on the plane and the disk-smearing
//! perturbation of their atoms.
//!
//! A [`CompactMeasure`] is a finite list of atoms plus a weighted sum of
//! diffuse pieces (uniform disks and empirical clouds). [`sigma_eps`] replaces
//! every atom `a δ_z` by mass `a` spread uniformly over a disk centred at `z`
//! of radius `c sqrt(a / log(1 + a / eps^2))`, which is the Brown measure of
//! the perturbed DT-operator. [`overlap_bound`] bounds how much of
//! `σ_ε × σ_ε` sits within distance `δ` of the diagonal.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng;

/// Tolerance on the total mass of a measure.
pub const MASS_TOL: f64 = 1e-12;

/// Countable atom lists are truncated once this much mass is covered.
pub const ATOM_COVERAGE: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Complex64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DiffusePiece {
    UniformDisk {
        center: Complex64,
        radius: f64,
    },
    /// Equal weight on every point.
    Empirical {
        points: Vec<Complex64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffuseComponent {
    pub mass: f64,
    pub piece: DiffusePiece,
}

/// Probability measure with compact support: atoms plus diffuse pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactMeasure {
    atoms: Vec<Atom>,
    diffuse: Vec<DiffuseComponent>,
}

impl CompactMeasure {
    pub fn new(atoms: Vec<Atom>, diffuse: Vec<DiffuseComponent>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return bad(format!("atom {i} has mass {}", a.mass));
            }
            if !(a.location.re.is_finite() && a.location.im.is_finite()) {
                return bad(format!("atom {i} has a non-finite location"));
            }
            if atoms[..i].iter().any(|b| b.location == a.location) {
                return bad(format!("atom {i} repeats location {}", a.location));
            }
            total += a.mass;
        }
        for (i, d) in diffuse.iter().enumerate() {
            if !(d.mass > 0.0 && d.mass.is_finite()) {
                return bad(format!("diffuse piece {i} has mass {}", d.mass));
            }
            match &d.piece {
                DiffusePiece::UniformDisk { center, radius } => {
                    if !(*radius > 0.0 && radius.is_finite() && center.re.is_finite() && center.im.is_finite()) {
                        return bad(format!("disk {i} needs a finite centre and positive radius"));
                    }
                }
                DiffusePiece::Empirical { points } => {
                    if points.is_empty() {
                        return bad(format!("empirical piece {i} has no points"));
                    }
                    if points.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
                        return bad(format!("empirical piece {i} has a non-finite point"));
                    }
                }
            }
            total += d.mass;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return bad(format!("total mass {total} is not 1"));
        }
        Ok(Self { atoms, diffuse })
    }

    pub fn dirac(location: Complex64) -> Self {
        Self { atoms: vec![Atom { location, mass: 1.0 }], diffuse: vec![] }
    }

    pub fn from_atoms(atoms: &[(Complex64, f64)]) -> Result<Self> {
        Self::new(atoms.iter().map(|&(location, mass)| Atom { location, mass }).collect(), vec![])
    }

    pub fn uniform_disk(center: Complex64, radius: f64) -> Result<Self> {
        Self::new(vec![], vec![DiffuseComponent { mass: 1.0, piece: DiffusePiece::UniformDisk { center, radius } }])
    }

    /// Builds a measure from a (possibly infinite) sequence of atoms whose
    /// masses sum to one. Atoms are taken until [`ATOM_COVERAGE`] of the mass
    /// is covered; the remainder becomes an empirical diffuse piece on the
    /// locations of the next (up to 64) atoms.
    pub fn from_atom_series(series: impl IntoIterator<Item = (Complex64, f64)>) -> Result<Self> {
        let mut iter = series.into_iter();
        let mut atoms = Vec::new();
        let mut covered = 0.0;
        for (location, mass) in iter.by_ref() {
            atoms.push(Atom { location, mass });
            covered += mass;
            if covered >= ATOM_COVERAGE {
                break;
            }
        }
        let rest = 1.0 - covered;
        let mut diffuse = Vec::new();
        if rest > MASS_TOL {
            let points: Vec<Complex64> = iter.take(64).map(|(z, _)| z).collect();
            if points.is_empty() {
                return Err(Error::InvalidMeasure(format!("atom series stops with mass {rest} missing")));
            }
            diffuse.push(DiffuseComponent { mass: rest, piece: DiffusePiece::Empirical { points } });
        } else if let Some(last) = atoms.last_mut() {
            last.mass += rest;
        }
        Self::new(atoms, diffuse)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn diffuse(&self) -> &[DiffuseComponent] {
        &self.diffuse
    }

    pub fn diffuse_mass(&self) -> f64 {
        self.diffuse.iter().map(|d| d.mass).sum()
    }

    pub fn is_purely_diffuse(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Radius of the smallest origin-centred disk containing the support.
    pub fn support_radius(&self) -> f64 {
        let atoms = self.atoms.iter().map(|a| a.location.norm());
        let diffuse = self.diffuse.iter().map(|d| match &d.piece {
            DiffusePiece::UniformDisk { center, radius } => center.norm() + radius,
            DiffusePiece::Empirical { points } => points.iter().map(|p| p.norm()).fold(0.0, f64::max),
        });
        atoms.chain(diffuse).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        let atoms: Complex64 = self.atoms.iter().map(|a| a.location * a.mass).sum();
        let diffuse: Complex64 = self
            .diffuse
            .iter()
            .map(|d| match &d.piece {
                DiffusePiece::UniformDisk { center, .. } => center * d.mass,
                DiffusePiece::Empirical { points } => points.iter().sum::<Complex64>() * (d.mass / points.len() as f64),
            })
            .sum();
        atoms + diffuse
    }

    /// Masses of all components, atoms first, in storage order.
    fn component_masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).chain(self.diffuse.iter().map(|d| d.mass)).collect()
    }

    /// Parses a measure literal.
    ///
    /// Pieces are separated by `;` or newlines, and each piece is either
    /// `kind:v1,v2,...` or the whitespace form `kind v1 v2 ...`:
    ///
    /// * `atom re im mass`
    /// * `disk center_re center_im radius mass`
    /// * `empirical path.csv mass` (CSV rows `re,im`, optional header)
    pub fn parse(literal: &str) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut diffuse = Vec::new();
        for raw in literal.split([';', '\n']) {
            let piece = raw.trim();
            if piece.is_empty() || piece.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = piece
                .splitn(2, [':', ' ', '\t'])
                .flat_map(|s| s.split([',', ' ', '\t']))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            let num = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .ok_or_else(|| Error::InvalidMeasure(format!("`{piece}`: missing field {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidMeasure(format!("`{piece}`: {e}")))
            };
            let arity = |n: usize| -> Result<()> {
                if fields.len() == n {
                    Ok(())
                } else {
                    Err(Error::InvalidMeasure(format!("`{piece}`: expected {} values", n - 1)))
                }
            };
            match fields[0] {
                "atom" => {
                    arity(4)?;
                    atoms.push(Atom { location: Complex64::new(num(1)?, num(2)?), mass: num(3)? });
                }
                "disk" => {
                    arity(5)?;
                    diffuse.push(DiffuseComponent {
                        mass: num(4)?,
                        piece: DiffusePiece::UniformDisk { center: Complex64::new(num(1)?, num(2)?), radius: num(3)? },
                    });
                }
                "empirical" => {
                    arity(3)?;
                    let points = read_points_csv(Path::new(fields[1]))?;
                    diffuse.push(DiffuseComponent { mass: num(2)?, piece: DiffusePiece::Empirical { points } });
                }
                other => return Err(Error::InvalidMeasure(format!("unknown measure piece `{other}`"))),
            }
        }
        if atoms.is_empty() && diffuse.is_empty() {
            return Err(Error::InvalidMeasure("empty measure literal".into()));
        }
        Self::new(atoms, diffuse)
    }
}

/// Reads `re,im` rows; a first line that does not parse is taken as a header.
pub fn read_points_csv(path: &Path) -> Result<Vec<Complex64>> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let parsed = match (it.next(), it.next()) {
            (Some(re), Some(im)) => re.parse::<f64>().ok().zip(im.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((re, im)) => points.push(Complex64::new(re, im)),
            None if lineno == 0 => continue,
            None => return Err(Error::InvalidMeasure(format!("{}:{}: expected `re,im`", path.display(), lineno + 1))),
        }
    }
    Ok(points)
}

/// Radius of the disk an atom of mass `a` is smeared over.
pub fn perturbation_radius(a: f64, c: f64, eps: f64) -> f64 {
    debug_assert!(a > 0.0 && c > 0.0 && eps > 0.0);
    c * (a / (a / (eps * eps)).ln_1p()).sqrt()
}

/// `σ_ε`: the measure with each atom replaced by a uniform disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedMeasure {
    pub base: CompactMeasure,
    pub eps: f64,
    pub c: f64,
    /// One radius per atom of `base`, in atom order.
    pub radii: Vec<f64>,
    smeared: CompactMeasure,
}

impl PerturbedMeasure {
    pub fn measure(&self) -> &CompactMeasure {
        &self.smeared
    }
}

impl AsRef<CompactMeasure> for PerturbedMeasure {
    fn as_ref(&self) -> &CompactMeasure {
        &self.smeared
    }
}

impl AsRef<CompactMeasure> for CompactMeasure {
    fn as_ref(&self) -> &CompactMeasure {
        self
    }
}

pub fn sigma_eps(mu: &CompactMeasure, c: f64, eps: f64) -> Result<PerturbedMeasure> {
    if !(c > 0.0 && eps > 0.0) {
        return Err(Error::Precondition(format!("need c > 0 and eps > 0, got c={c}, eps={eps}")));
    }
    let radii: Vec<f64> = mu.atoms.iter().map(|a| perturbation_radius(a.mass, c, eps)).collect();
    let disks = mu.atoms.iter().zip(&radii).map(|(a, &radius)| DiffuseComponent {
        mass: a.mass,
        piece: DiffusePiece::UniformDisk { center: a.location, radius },
    });
    let smeared = CompactMeasure { atoms: vec![], diffuse: disks.chain(mu.diffuse.iter().cloned()).collect() };
    Ok(PerturbedMeasure { base: mu.clone(), eps, c, radii, smeared })
}

/// Upper bound on `(σ_ε × σ_ε)(X_δ)`, `X_δ = {(w1, w2) : |w1 - w2| < δ}`:
/// `(ν × ν)(X_δ) + 2 Σ_i min(a_i, δ² c⁻² log(1 + a_i ε⁻²))`.
pub fn overlap_bound(mu: &CompactMeasure, c: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && c > 0.0 && eps > 0.0) {
        return Err(Error::Precondition("overlap_bound needs positive c, eps and delta".into()));
    }
    let atom_part: f64 =
        mu.atoms.iter().map(|a| a.mass.min(delta * delta / (c * c) * (a.mass / (eps * eps)).ln_1p())).sum();
    Ok(diffuse_proximity_mass(mu, delta) + 2.0 * atom_part)
}

/// `(ν × ν)(X_δ)` for the diffuse part `ν` of `mu` (not renormalised).
///
/// Disk/disk and disk/point terms are one-dimensional integrals of lens
/// areas evaluated by composite Gauss-Legendre quadrature; empirical clouds
/// are handled by exact pair counting with self-pairs excluded.
pub fn diffuse_proximity_mass(mu: &CompactMeasure, delta: f64) -> f64 {
    let d = &mu.diffuse;
    let mut total = 0.0;
    for (p, a) in d.iter().enumerate() {
        for (q, b) in d.iter().enumerate().skip(p) {
            let prob = piece_pair_probability(&a.piece, &b.piece, p == q, delta);
            let weight = a.mass * b.mass * if p == q { 1.0 } else { 2.0 };
            total += weight * prob;
        }
    }
    total
}

fn piece_pair_probability(a: &DiffusePiece, b: &DiffusePiece, same: bool, delta: f64) -> f64 {
    use DiffusePiece::*;
    match (a, b) {
        (UniformDisk { center: c1, radius: r1 }, UniformDisk { center: c2, radius: r2 }) => {
            disk_disk_probability((*c1 - *c2).norm(), *r1, *r2, delta)
        }
        (UniformDisk { center, radius }, Empirical { points })
        | (Empirical { points }, UniformDisk { center, radius }) => {
            let area = PI * radius * radius;
            points.iter().map(|p| lens_area((p - center).norm(), *radius, delta)).sum::<f64>()
                / (area * points.len() as f64)
        }
        (Empirical { points: p1 }, Empirical { points: p2 }) => {
            if same {
                pair_proximity_mass(p1, delta)
            } else {
                let close = p1.iter().map(|x| p2.iter().filter(|y| (x - *y).norm() < delta).count()).sum::<usize>();
                close as f64 / (p1.len() * p2.len()) as f64
            }
        }
    }
}

/// Area of the intersection of two disks with radii `r1`, `r2` whose centres
/// are `d` apart.
pub fn lens_area(d: f64, r1: f64, r2: f64) -> f64 {
    let (small, big) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= big - small {
        return PI * small * small;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let kite = 0.5 * ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0).sqrt();
    r1 * r1 * a1 + r2 * r2 * a2 - kite
}

/// Length of the circle of radius `rho` about the origin lying inside a disk
/// of radius `r` centred at distance `d`.
fn arc_inside_disk(rho: f64, d: f64, r: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    if rho + d <= r {
        return 2.0 * PI * rho;
    }
    if rho >= d + r || rho <= d - r {
        return 0.0;
    }
    let cos = ((rho * rho + d * d - r * r) / (2.0 * rho * d)).clamp(-1.0, 1.0);
    2.0 * rho * cos.acos()
}

/// Probability that independent uniform points of two disks (radii `r1`,
/// `r2`, centres `d` apart) land within `delta` of each other.
pub fn disk_disk_probability(d: f64, r1: f64, r2: f64, delta: f64) -> f64 {
    // Integrate over the distance rho from the second centre: the first
    // point lies on a circle of radius rho, and the second disk meets the
    // delta-ball around it in a lens.
    let lo = (d - r1).max(0.0);
    let hi = d + r1;
    let mut breaks = vec![lo, hi];
    for b in [r1 - d, d - r1, (r2 - delta).abs(), r2 + delta] {
        if b > lo && b < hi {
            breaks.push(b);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let gl = GaussLegendre::new(32);
    let mut integral = 0.0;
    for w in breaks.windows(2) {
        integral +=
            gl.integrate_composite(w[0], w[1], 16, |rho| arc_inside_disk(rho, d, r1) * lens_area(rho, r2, delta));
    }
    (integral / (PI * r1 * r1 * PI * r2 * r2)).clamp(0.0, 1.0)
}

/// `#{(i, j) : i != j, |p_i - p_j| < delta} / n²`.
pub fn pair_proximity_mass(points: &[Complex64], delta: f64) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    close_pair_count(points, delta) as f64 / (n as f64 * n as f64)
}

/// Ordered pairs `i != j` with `|p_i - p_j| < delta`.
pub fn close_pair_count(points: &[Complex64], delta: f64) -> u64 {
    let mut sorted: Vec<Complex64> = points.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re));
    let mut count = 0u64;
    for i in 0..sorted.len() {
        let x = sorted[i];
        for y in &sorted[i + 1..] {
            if y.re - x.re >= delta {
                break;
            }
            if (x - y).norm() < delta {
                count += 1;
            }
        }
    }
    2 * count
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SampleMode {
    /// Deterministic mass split (largest remainder) with stratified draws
    /// inside each diffuse piece.
    #[default]
    Quantile,
    /// Independent draws from the measure.
    Iid,
}

/// Largest-remainder allocation of `n` slots to `masses`; ties go to the
/// lower index.
pub fn largest_remainder(masses: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = masses.iter().sum();
    let quotas: Vec<f64> = masses.iter().map(|m| m / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (quotas[i] - quotas[i].floor(), quotas[j] - quotas[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws `n` points from `m`. In quantile mode the output lists the
/// components in storage order (atoms first).
pub fn sample_measure(m: &impl AsRef<CompactMeasure>, n: usize, mode: SampleMode, seed: u64) -> Vec<Complex64> {
    let m = m.as_ref();
    let mut rng = rng::stream(seed, rng::tag::MEASURE, 0);
    let masses = m.component_masses();
    let n_atoms = m.atoms.len();
    let mut out = Vec::with_capacity(n);
    match mode {
        SampleMode::Quantile => {
            for (idx, count) in largest_remainder(&masses, n).into_iter().enumerate() {
                if idx < n_atoms {
                    out.extend(std::iter::repeat_n(m.atoms[idx].location, count));
                } else {
                    let piece = &m.diffuse[idx - n_atoms].piece;
                    for i in 0..count {
                        let u = (i as f64 + rng.random::<f64>()) / count as f64;
                        out.push(draw_from_piece(piece, u, &mut rng));
                    }
                }
            }
        }
        SampleMode::Iid => {
            let cumulative: Vec<f64> = masses
                .iter()
                .scan(0.0, |acc, &w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                let idx = cumulative.partition_point(|&c| c <= u).min(masses.len() - 1);
                if idx < n_atoms {
                    out.push(m.atoms[idx].location);
                } else {
                    let v = rng.random::<f64>();
                    out.push(draw_from_piece(&m.diffuse[idx - n_atoms].piece, v, &mut rng));
                }
            }
        }
    }
    out
}

/// `u` in [0, 1) picks the radial quantile (disk) or the point index (cloud).
fn draw_from_piece(piece: &DiffusePiece, u: f64, rng: &mut impl Rng) -> Complex64 {
    match piece {
        DiffusePiece::UniformDisk { center, radius } => {
            let theta = 2.0 * PI * rng.random::<f64>();
            center + Complex64::from_polar(radius * u.sqrt(), theta)
        }
        DiffusePiece::Empirical { points } => {
            let idx = ((u * points.len() as f64) as usize).min(points.len() - 1);
            points[idx]
        }
    }
}
