use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::Result;

/// `log|det a|` by Gaussian elimination with partial pivoting.
///
/// A singular matrix (an exactly zero pivot column) yields `-inf`.
pub fn lu_logabsdet(a: &ComplexMatrix) -> Result<f64> {
    let n = a.require_square("lu_logabsdet")?;
    let mut m = a.as_slice().to_vec();
    Ok(logabsdet_in_place(&mut m, n))
}

pub(crate) fn logabsdet_in_place(m: &mut [Complex64], n: usize) -> f64 {
    let mut logdet = 0.0;
    for k in 0..n {
        let (mut piv, mut best) = (k, m[k * n + k].norm());
        for i in k + 1..n {
            let v = m[i * n + k].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return f64::NEG_INFINITY;
        }
        if piv != k {
            for j in k..n {
                m.swap(k * n + j, piv * n + j);
            }
        }
        let pivot = m[k * n + k];
        logdet += best.ln();
        let inv = 1.0 / pivot;
        let (head, tail) = m.split_at_mut((k + 1) * n);
        let pivot_row = &head[k * n + k + 1..k * n + n];
        for row in tail.chunks_mut(n) {
            let factor = row[k] * inv;
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for (x, &p) in row[k + 1..].iter_mut().zip(pivot_row) {
                *x -= factor * p;
            }
        }
    }
    logdet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn cofactor_det(m: &[Vec<Complex64>]) -> Complex64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut det = Complex64::new(0.0, 0.0);
        for col in 0..n {
            let minor: Vec<Vec<Complex64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, &v)| v).collect())
                .collect();
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            det += m[0][col] * cofactor_det(&minor) * sign;
        }
        det
    }

    #[test]
    fn simple_determinants() {
        assert_eq!(lu_logabsdet(&ComplexMatrix::identity(5)).unwrap(), 0.0);
        let d = ComplexMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 3.0]]).unwrap();
        assert!((lu_logabsdet(&d).unwrap() - 6f64.ln()).abs() < 1e-15);
        let sing = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let v = lu_logabsdet(&sing).unwrap();
        assert!(v == f64::NEG_INFINITY || v < -30.0);
        assert_eq!(lu_logabsdet(&ComplexMatrix::zeros(3, 3)).unwrap(), f64::NEG_INFINITY);
        assert!(lu_logabsdet(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn matches_cofactor_expansion_on_random_matrices() {
        for seed in 0..10 {
            let mut r = rng::stream(seed, 99, 0);
            let rows: Vec<Vec<Complex64>> = (0..4)
                .map(|_| {
                    (0..4)
                        .map(|_| {
                            let re: f64 = StandardNormal.sample(&mut r);
                            let im: f64 = StandardNormal.sample(&mut r);
                            Complex64::new(re, im)
                        })
                        .collect()
                })
                .collect();
            let want = cofactor_det(&rows).norm().ln();
            let got = lu_logabsdet(&ComplexMatrix::from_rows(&rows).unwrap()).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "seed {seed}: {got} vs {want}");
        }
    }
}
