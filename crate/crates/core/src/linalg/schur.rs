//! Complex Schur decomposition.
//!
//! Householder reduction to upper Hessenberg form, then single-shift complex
//! QR sweeps (Givens bulge chasing) with Wilkinson shifts and deflation.
//! When only eigenvalues are wanted the sweeps touch just the active window
//! and no unitary factor is accumulated; the window arithmetic is identical
//! in both modes, so `eigenvalues(a)` equals the diagonal of `schur(a).t`
//! bit for bit.

use num_complex::Complex64;

use super::ComplexMatrix;
use crate::brown::EigenvalueSequence;
use crate::error::{Error, Result};

/// Relative deflation threshold on sub-diagonal entries.
pub const DEFLATION_TOL: f64 = 1e-14;

/// QR sweeps allowed per unit of matrix size.
pub const SWEEPS_PER_ROW: usize = 30;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// `a = q t q^*` with `t` upper triangular and `q` unitary.
#[derive(Clone, Debug)]
pub struct SchurForm {
    pub t: ComplexMatrix,
    pub q: ComplexMatrix,
    /// `||a - q t q^*||_F / ||a||_F` (zero when `a = 0`).
    pub residual: f64,
}

impl SchurForm {
    /// `||q^* q - I||_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let qq = self.q.adjoint().matmul(&self.q).expect("square");
        let k = qq.rows();
        let mut s = 0.0;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                s += (qq[(i, j)] - target).norm_sqr();
            }
        }
        s.sqrt()
    }
}

pub fn schur(a: &ComplexMatrix) -> Result<SchurForm> {
    let n = a.require_square("schur")?;
    let mut h = a.as_slice().to_vec();
    let mut q = ComplexMatrix::identity(n).into_vec();
    hessenberg(&mut h, n, Some(&mut q));
    qr_iterate(&mut h, n, Some(&mut q))?;
    for i in 1..n {
        for j in 0..i {
            h[i * n + j] = ZERO;
        }
    }
    let t = ComplexMatrix::from_vec(n, n, h)?;
    let q = ComplexMatrix::from_vec(n, n, q)?;
    let residual = reconstruction_residual(a, &t, &q);
    Ok(SchurForm { t, q, residual })
}

/// Eigenvalues with algebraic multiplicity, in the order they appear on the
/// diagonal of the Schur form.
pub fn eigenvalues(a: &ComplexMatrix) -> Result<EigenvalueSequence> {
    let n = a.require_square("eigenvalues")?;
    let mut h = a.as_slice().to_vec();
    hessenberg(&mut h, n, None);
    qr_iterate(&mut h, n, None)?;
    EigenvalueSequence::new((0..n).map(|i| h[i * n + i]).collect())
}

fn reconstruction_residual(a: &ComplexMatrix, t: &ComplexMatrix, q: &ComplexMatrix) -> f64 {
    let rebuilt = q.matmul(t).and_then(|qt| qt.matmul(&q.adjoint())).expect("square");
    let diff = a.sub(&rebuilt).expect("same shape").frobenius();
    let scale = a.frobenius();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Reduces `h` (row-major, n x n) to upper Hessenberg form in place,
/// accumulating the reflectors into `q` from the right when given.
pub(crate) fn hessenberg(h: &mut [Complex64], n: usize, mut q: Option<&mut Vec<Complex64>>) {
    if n < 3 {
        return;
    }
    let mut v = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for j in 0..n - 2 {
        let len = n - j - 1;
        let v = &mut v[..len];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = h[(j + 1 + i) * n + j];
        }
        let tail_sq: f64 = v[1..].iter().map(Complex64::norm_sqr).sum();
        if tail_sq == 0.0 {
            continue;
        }
        let x0 = v[0];
        let xnorm = (x0.norm_sqr() + tail_sq).sqrt();
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        v[0] = x0 + phase * xnorm;
        let vnorm_sq: f64 = v.iter().map(Complex64::norm_sqr).sum();
        let tau = 2.0 / vnorm_sq;

        // Left: rows j+1.., columns j+1.. (column j is set explicitly below).
        let w = &mut w[..n];
        w[j + 1..].iter_mut().for_each(|x| *x = ZERO);
        for (i, &vi) in v.iter().enumerate() {
            let row = &h[(j + 1 + i) * n..(j + 2 + i) * n];
            let cv = vi.conj();
            for c in j + 1..n {
                w[c] += cv * row[c];
            }
        }
        for (i, &vi) in v.iter().enumerate() {
            let s = vi * tau;
            let row = &mut h[(j + 1 + i) * n..(j + 2 + i) * n];
            for c in j + 1..n {
                row[c] -= s * w[c];
            }
        }
        h[(j + 1) * n + j] = -phase * xnorm;
        for i in j + 2..n {
            h[i * n + j] = ZERO;
        }

        // Right: all rows, columns j+1..
        apply_reflector_right(h, n, j + 1, v, tau);
        if let Some(q) = q.as_deref_mut() {
            apply_reflector_right(q, n, j + 1, v, tau);
        }
    }
}

fn apply_reflector_right(m: &mut [Complex64], n: usize, offset: usize, v: &[Complex64], tau: f64) {
    for row in m.chunks_mut(n) {
        let seg = &mut row[offset..offset + v.len()];
        let s: Complex64 = seg.iter().zip(v).map(|(&x, &vi)| x * vi).sum::<Complex64>() * tau;
        for (x, &vi) in seg.iter_mut().zip(v) {
            *x -= s * vi.conj();
        }
    }
}

/// Givens rotation `[[c, s], [-conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
#[inline]
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64, Complex64) {
    let ax = x.norm();
    let ay = y.norm();
    if ay == 0.0 {
        return (1.0, ZERO, x);
    }
    if ax == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0), y);
    }
    let r = ax.hypot(ay);
    let phase = x / ax;
    let c = ax / r;
    let s = phase * y.conj() / r;
    (c, s, phase * r)
}

#[inline]
fn rotate_rows(h: &mut [Complex64], n: usize, r0: usize, cols: std::ops::Range<usize>, c: f64, s: Complex64) {
    let (top, bottom) = h.split_at_mut((r0 + 1) * n);
    let a = &mut top[r0 * n..];
    let b = &mut bottom[..n];
    let sc = s.conj();
    for j in cols {
        let (x, y) = (a[j], b[j]);
        a[j] = x * c + s * y;
        b[j] = y * c - sc * x;
    }
}

#[inline]
fn rotate_cols(h: &mut [Complex64], n: usize, c0: usize, rows: std::ops::Range<usize>, c: f64, s: Complex64) {
    let sc = s.conj();
    for i in rows {
        let base = i * n + c0;
        let (x, y) = (h[base], h[base + 1]);
        h[base] = x * c + sc * y;
        h[base + 1] = y * c - s * x;
    }
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    let mut y = (p * p + bc).sqrt();
    if (p + y).norm() < (p - y).norm() {
        y = -y;
    }
    let denom = p + y;
    if denom.norm() == 0.0 {
        d
    } else {
        d - bc / denom
    }
}

fn negligible(h: &[Complex64], n: usize, i: usize, window_scale: f64) -> bool {
    let sub = h[i * n + i - 1].norm();
    let diag = h[(i - 1) * n + i - 1].norm() + h[i * n + i].norm();
    let scale = if diag > 0.0 { diag } else { window_scale };
    sub <= DEFLATION_TOL * scale || sub < f64::MIN_POSITIVE
}

/// Shifted QR on an upper Hessenberg matrix. With `q` present the full
/// triangular factor is maintained and the rotations are accumulated.
pub(crate) fn qr_iterate(h: &mut [Complex64], n: usize, mut q: Option<&mut Vec<Complex64>>) -> Result<()> {
    if n < 2 {
        return Ok(());
    }
    let want_t = q.is_some();
    let cap = SWEEPS_PER_ROW * n;
    let mut sweeps = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    let full_scale = {
        let s: f64 = h.iter().map(Complex64::norm_sqr).sum();
        s.sqrt()
    };

    while hi > 0 {
        let mut lo = hi;
        while lo > 0 && !negligible(h, n, lo, full_scale) {
            lo -= 1;
        }
        if lo > 0 {
            h[lo * n + lo - 1] = ZERO;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        sweeps += 1;
        since_deflation += 1;
        if sweeps > cap {
            let max_subdiag = (lo + 1..=hi).map(|i| h[i * n + i - 1].norm()).fold(0.0, f64::max);
            return Err(Error::Convergence { sweeps: cap, max_subdiag });
        }

        let shift = if since_deflation.is_multiple_of(10) {
            h[hi * n + hi] + 0.75 * h[hi * n + hi - 1].norm()
        } else {
            wilkinson_shift(h[(hi - 1) * n + hi - 1], h[(hi - 1) * n + hi], h[hi * n + hi - 1], h[hi * n + hi])
        };

        let col_end = if want_t { n } else { hi + 1 };
        let row_start = if want_t { 0 } else { lo };
        for k in lo..hi {
            let (c, s) = if k == lo {
                let (c, s, _) = givens(h[lo * n + lo] - shift, h[(lo + 1) * n + lo]);
                rotate_rows(h, n, k, lo..col_end, c, s);
                (c, s)
            } else {
                let (c, s, r) = givens(h[k * n + k - 1], h[(k + 1) * n + k - 1]);
                h[k * n + k - 1] = r;
                h[(k + 1) * n + k - 1] = ZERO;
                rotate_rows(h, n, k, k..col_end, c, s);
                (c, s)
            };
            let row_end = (k + 2).min(hi) + 1;
            rotate_cols(h, n, k, row_start..row_end, c, s);
            if let Some(q) = q.as_deref_mut() {
                rotate_cols(q, n, k, 0..n, c, s);
            }
        }
    }
    Ok(())
}
