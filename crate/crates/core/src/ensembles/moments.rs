//! *-moments of matrix families and a finite-size freeness diagnostic.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{trace_of_product, ComplexMatrix};

/// A word in the generators of a family and their adjoints, e.g. `A B* A`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StarWord {
    /// `(generator index, adjoint?)`, read left to right.
    pub letters: Vec<(usize, bool)>,
}

impl StarWord {
    pub fn new(letters: Vec<(usize, bool)>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Config("a *-word needs at least one letter".into()));
        }
        Ok(Self { letters })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    fn max_generator(&self) -> usize {
        self.letters.iter().map(|l| l.0).max().unwrap_or(0)
    }
}

impl fmt::Display for StarWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(g, adj)) in self.letters.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            let name = if g < 26 { ((b'A' + g as u8) as char).to_string() } else { format!("X{g}") };
            write!(f, "{name}{}", if adj { "*" } else { "" })?;
        }
        Ok(())
    }
}

impl FromStr for StarWord {
    type Err = Error;

    /// Parses words such as `"A A*"`, `"AA*B"` or `"X30 A*"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut i = 0;
        while i < chars.len() {
            let g = match chars[i] {
                'X' if chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                    let start = i + 1;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    i -= 1;
                    chars[start..=i].iter().collect::<String>().parse::<usize>().expect("digits")
                }
                c @ 'A'..='Z' => (c as u8 - b'A') as usize,
                c => return Err(Error::Config(format!("bad letter `{c}` in word `{s}`"))),
            };
            i += 1;
            let adj = chars.get(i) == Some(&'*');
            if adj {
                i += 1;
            }
            letters.push((g, adj));
        }
        Self::new(letters)
    }
}

/// Every word of length `1..=max_len` in `generators` letters, shortest
/// first.
pub fn all_words(generators: usize, max_len: usize) -> Vec<StarWord> {
    let alphabet: Vec<(usize, bool)> = (0..generators).flat_map(|g| [(g, false), (g, true)]).collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<(usize, bool)>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&l| {
                    let mut w = w.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned().map(|letters| StarWord { letters }));
    }
    out
}

fn check_family(family: &[ComplexMatrix]) -> Result<usize> {
    let first = family.first().ok_or_else(|| Error::Dimension("empty family".into()))?;
    let k = first.require_square("star moments")?;
    if family.iter().any(|m| m.rows() != k || m.cols() != k) {
        return Err(Error::Dimension("family members differ in size".into()));
    }
    Ok(k)
}

/// Caches products of short words so that a moment of length `L` costs one
/// `O(k^2)` trace once the products of length `ceil(L/2)` exist.
struct ProductCache<'a> {
    family: &'a [ComplexMatrix],
    adjoints: Vec<Option<ComplexMatrix>>,
    products: HashMap<Vec<(usize, bool)>, ComplexMatrix>,
}

impl<'a> ProductCache<'a> {
    fn new(family: &'a [ComplexMatrix]) -> Self {
        Self { family, adjoints: vec![None; family.len()], products: HashMap::new() }
    }

    fn letter(&mut self, (g, adj): (usize, bool)) -> &ComplexMatrix {
        if adj {
            self.adjoints[g].get_or_insert_with(|| self.family[g].adjoint())
        } else {
            &self.family[g]
        }
    }

    fn product(&mut self, letters: &[(usize, bool)]) -> ComplexMatrix {
        if letters.len() == 1 {
            return self.letter(letters[0]).clone();
        }
        if let Some(p) = self.products.get(letters) {
            return p.clone();
        }
        let head = self.product(&letters[..letters.len() - 1]);
        let last = self.letter(letters[letters.len() - 1]).clone();
        let p = head.matmul(&last).expect("square family");
        self.products.insert(letters.to_vec(), p.clone());
        p
    }

    fn normalized_trace(&mut self, letters: &[(usize, bool)]) -> Complex64 {
        let k = self.family[0].rows() as f64;
        if letters.len() == 1 {
            let (g, adj) = letters[0];
            let t = self.family[g].trace() / k;
            return if adj { t.conj() } else { t };
        }
        let split = letters.len().div_ceil(2);
        let left = self.product(&letters[..split]);
        let right = self.product(&letters[split..]);
        trace_of_product(&left, &right).expect("square family") / k
    }
}

/// `tr_k` of the word evaluated on `family`, left to right.
pub fn star_moment(family: &[ComplexMatrix], w: &StarWord) -> Result<Complex64> {
    check_family(family)?;
    if w.is_empty() {
        return Err(Error::Config("empty word".into()));
    }
    if w.max_generator() >= family.len() {
        return Err(Error::Dimension(format!("word `{w}` uses a generator outside a family of {}", family.len())));
    }
    Ok(ProductCache::new(family).normalized_trace(&w.letters))
}

/// All *-moments of order `1..=m`, sharing intermediate products.
pub fn star_moments(family: &[ComplexMatrix], m: usize) -> Result<Vec<(StarWord, Complex64)>> {
    check_family(family)?;
    let mut cache = ProductCache::new(family);
    Ok(all_words(family.len(), m)
        .into_iter()
        .map(|w| {
            let v = cache.normalized_trace(&w.letters);
            (w, v)
        })
        .collect())
}

/// Factor of an alternating product: a word in one family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreenessWitness {
    /// `(member index, word in that member)` per factor; each factor is
    /// centred before multiplying.
    pub factors: Vec<(usize, String)>,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreenessReport {
    pub order: usize,
    pub gamma: f64,
    pub max_residual: f64,
    pub products_checked: usize,
    pub pass: bool,
    pub worst: Option<FreenessWitness>,
}

struct CenteredWord {
    member: usize,
    len: usize,
    label: String,
    matrix: ComplexMatrix,
}

/// Checks `(m, γ)`-*-freeness of a family: the largest `|tr_k|` over all
/// alternating products `x_1 ... x_r` (`r ≥ 2`, neighbouring factors from
/// different members, total length ≤ m) of centred single-member words
/// `x = w - tr_k(w) I`.
pub fn freeness_check(family: &[ComplexMatrix], m: usize, gamma: f64) -> Result<FreenessReport> {
    let k = check_family(family)?;
    if m == 0 || !(gamma > 0.0) {
        return Err(Error::Precondition("freeness_check needs m >= 1 and gamma > 0".into()));
    }
    let mut words = Vec::new();
    if family.len() >= 2 && m >= 2 {
        for (member, a) in family.iter().enumerate() {
            let single = std::slice::from_ref(a);
            let mut cache = ProductCache::new(single);
            for w in all_words(1, m - 1) {
                let mut matrix = cache.product(&w.letters);
                let shift = matrix.trace() / k as f64;
                for i in 0..k {
                    matrix[(i, i)] -= shift;
                }
                let label = w.to_string();
                words.push(CenteredWord { member, len: w.len(), label, matrix });
            }
        }
    }

    let mut report =
        FreenessReport { order: m, gamma, max_residual: 0.0, products_checked: 0, pass: true, worst: None };
    let mut path = Vec::new();
    for (i, w) in words.iter().enumerate() {
        path.push(i);
        extend_alternating(&words, &mut path, &w.matrix, w.len, m, k, &mut report);
        path.pop();
    }
    report.pass = report.max_residual <= gamma;
    Ok(report)
}

fn extend_alternating(
    words: &[CenteredWord],
    path: &mut Vec<usize>,
    prefix: &ComplexMatrix,
    used: usize,
    m: usize,
    k: usize,
    report: &mut FreenessReport,
) {
    let last_member = words[*path.last().expect("non-empty")].member;
    for (j, w) in words.iter().enumerate() {
        if w.member == last_member || used + w.len > m {
            continue;
        }
        path.push(j);
        let value = trace_of_product(prefix, &w.matrix).expect("square") / k as f64;
        report.products_checked += 1;
        if value.norm() > report.max_residual || report.worst.is_none() {
            report.max_residual = report.max_residual.max(value.norm());
            report.worst = Some(FreenessWitness {
                factors: path.iter().map(|&i| (words[i].member, words[i].label.clone())).collect(),
                value,
            });
        }
        // Only extend when some factor could still fit.
        if used + w.len < m {
            let next = prefix.matmul(&w.matrix).expect("square");
            extend_alternating(words, path, &next, used + w.len, m, k, report);
        }
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_ginibre, sample_strict_upper};

    #[test]
    fn word_parsing_and_display() {
        let w: StarWord = "A A* B".parse().unwrap();
        assert_eq!(w.letters, vec![(0, false), (0, true), (1, false)]);
        assert_eq!(w.to_string(), "A A* B");
        assert_eq!("AA*".parse::<StarWord>().unwrap().letters, vec![(0, false), (0, true)]);
        assert_eq!("X30*".parse::<StarWord>().unwrap().letters, vec![(30, true)]);
        assert!("".parse::<StarWord>().is_err());
        assert!("a".parse::<StarWord>().is_err());
        assert_eq!(all_words(1, 3).len(), 2 + 4 + 8);
        assert_eq!(all_words(2, 2).len(), 4 + 16);
    }

    #[test]
    fn moment_examples() {
        let id = ComplexMatrix::identity(5);
        assert_eq!(star_moment(std::slice::from_ref(&id), &"A".parse().unwrap()).unwrap(), Complex64::new(1.0, 0.0));
        assert!(star_moment(std::slice::from_ref(&id), &"B".parse().unwrap()).is_err());
        assert!(star_moment(&[id, ComplexMatrix::identity(4)], &"A".parse().unwrap()).is_err());

        let t = sample_strict_upper(1024, 1.0, 2);
        let v = star_moment(&[t], &"A A*".parse().unwrap()).unwrap();
        assert!((v.re - 0.5).abs() < 0.02 && v.im.abs() < 1e-12);

        let g = sample_ginibre(1024, 1.0 / 1024.0, 8);
        let v = star_moment(&[g], &"A A* A A*".parse().unwrap()).unwrap();
        assert!((v.re - 2.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn batched_moments_match_single_evaluation() {
        let a = sample_ginibre(12, 1.0 / 12.0, 1);
        let b = sample_strict_upper(12, 1.0, 2);
        let family = [a, b];
        for (w, v) in star_moments(&family, 3).unwrap() {
            // Direct left-to-right product.
            let mut p = ComplexMatrix::identity(12);
            for &(g, adj) in &w.letters {
                let f = if adj { family[g].adjoint() } else { family[g].clone() };
                p = p.matmul(&f).unwrap();
            }
            assert!((p.trace() / 12.0 - v).norm() < 1e-12, "{w}");
        }
    }

    #[test]
    fn freeness_of_one_member_is_vacuous() {
        let r = freeness_check(&[sample_ginibre(16, 1.0 / 16.0, 0)], 3, 0.05).unwrap();
        assert!(r.pass);
        assert_eq!(r.products_checked, 0);
    }

    #[test]
    fn a_matrix_is_not_free_from_itself() {
        let a = sample_ginibre(256, 1.0 / 256.0, 4);
        let r = freeness_check(&[a.clone(), a], 2, 0.05).unwrap();
        assert!(!r.pass);
        assert!(r.max_residual > 0.8);
        let w = r.worst.unwrap();
        assert_eq!(w.factors.len(), 2);
        assert_ne!(w.factors[0].1, w.factors[1].1, "witness pairs a word with its adjoint");
    }

    #[test]
    fn product_count_for_two_members_order_three() {
        let a = sample_ginibre(8, 1.0 / 8.0, 1);
        let b = sample_ginibre(8, 1.0 / 8.0, 2);
        let r = freeness_check(&[a, b], 3, 0.05).unwrap();
        // Factor lengths (1,1): 2*2*2 = 8, (1,2)+(2,1): 2*2*2*4 = 32, (1,1,1): 2*8 = 16.
        assert_eq!(r.products_checked, 56);
    }
}
