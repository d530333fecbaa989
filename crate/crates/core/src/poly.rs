//! Sparse multivariate polynomials over indexed variables.
//!
//! Monomials are ordered graded-lexicographically (total degree first, then
//! larger exponent of the lowest-indexed variable first), so
//! `monomial_basis(2, 2)` is `[1, x0, x1, x0^2, x0*x1, x1^2]`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients with absolute value below this are dropped after arithmetic.
pub const DROP_TOL: f64 = 1e-12;

/// Default cap on the size of a generated monomial basis.
pub const DEFAULT_BASIS_CAP: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("monomial basis of {nvars} variables up to degree {degree} has {size} elements, above the cap {cap}")]
    BasisTooLarge {
        nvars: usize,
        degree: u32,
        size: u128,
        cap: usize,
    },
    #[error("invalid polynomial literal: {0}")]
    InvalidLiteral(String),
}

/// A monomial stored as sorted `(variable, power)` pairs with nonzero powers.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    exps: Vec<(u32, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(index: usize) -> Self {
        Self {
            exps: vec![(index as u32, 1)],
        }
    }

    /// Builds a monomial from a dense exponent vector.
    pub fn from_dense(exponents: &[u32]) -> Self {
        let exps = exponents
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| (i as u32, e))
            .collect();
        Self { exps }
    }

    /// Builds a monomial from `(variable, power)` pairs in any order.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Self {
        let mut map: BTreeMap<u32, u32> = BTreeMap::new();
        for &(v, e) in pairs {
            *map.entry(v as u32).or_default() += e;
        }
        Self {
            exps: map.into_iter().filter(|&(_, e)| e > 0).collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, var: usize) -> u32 {
        self.exps
            .iter()
            .find(|&&(v, _)| v as usize == var)
            .map_or(0, |&(_, e)| e)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.exps.iter().map(|&(v, e)| (v as usize, e))
    }

    /// Highest variable index used plus one.
    pub fn min_nvars(&self) -> usize {
        self.exps.last().map_or(0, |&(v, _)| v as usize + 1)
    }

    pub fn to_dense(&self, nvars: usize) -> Vec<u32> {
        let mut out = vec![0; nvars];
        for &(v, e) in &self.exps {
            out[v as usize] = e;
        }
        out
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut exps = Vec::with_capacity(self.exps.len() + other.exps.len());
        let (mut i, mut j) = (0, 0);
        while i < self.exps.len() && j < other.exps.len() {
            let (a, b) = (self.exps[i], other.exps[j]);
            match a.0.cmp(&b.0) {
                Ordering::Less => {
                    exps.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    exps.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    exps.push((a.0, a.1 + b.1));
                    i += 1;
                    j += 1;
                }
            }
        }
        exps.extend_from_slice(&self.exps[i..]);
        exps.extend_from_slice(&other.exps[j..]);
        Monomial { exps }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .map(|&(v, e)| point[v as usize].powi(e as i32))
            .product()
    }

    /// Partial derivative: returns the multiplier and the reduced monomial.
    pub fn derivative(&self, var: usize) -> Option<(f64, Monomial)> {
        let pos = self.exps.iter().position(|&(v, _)| v as usize == var)?;
        let e = self.exps[pos].1;
        let mut exps = self.exps.clone();
        if e == 1 {
            exps.remove(pos);
        } else {
            exps[pos].1 = e - 1;
        }
        Some((e as f64, Monomial { exps }))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            // Same degree: more weight on lower-indexed variables comes first.
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.exps.get(i), other.exps.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Less,
                    (None, Some(_)) => return Ordering::Greater,
                    (Some(&(va, ea)), Some(&(vb, eb))) => {
                        if va != vb {
                            return va.cmp(&vb);
                        }
                        if ea != eb {
                            return eb.cmp(&ea);
                        }
                        i += 1;
                        j += 1;
                    }
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exps.is_empty() {
            return write!(f, "1");
        }
        for (k, &(v, e)) in self.exps.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "v{v}")?;
            } else {
                write!(f, "v{v}^{e}")?;
            }
        }
        Ok(())
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Number of monomials of total degree at most `degree` in `nvars` variables.
pub fn basis_size(nvars: usize, degree: u32) -> u128 {
    binomial(nvars as u128 + degree as u128, degree as u128)
}

/// All monomials of total degree `<= degree`, in graded-lex order.
pub fn monomial_basis(nvars: usize, degree: u32) -> Result<Vec<Monomial>, PolyError> {
    monomial_basis_capped(nvars, degree, DEFAULT_BASIS_CAP)
}

pub fn monomial_basis_capped(nvars: usize, degree: u32, cap: usize) -> Result<Vec<Monomial>, PolyError> {
    let size = basis_size(nvars, degree);
    if size > cap as u128 {
        return Err(PolyError::BasisTooLarge {
            nvars,
            degree,
            size,
            cap,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut dense = vec![0u32; nvars];
    for d in 0..=degree {
        exponents_of_degree(0, d, &mut dense, &mut out);
    }
    Ok(out)
}

// Emits exponent vectors of exact degree `rest` over variables `var..`,
// giving the lowest-indexed variable the largest power first.
fn exponents_of_degree(var: usize, rest: u32, dense: &mut [u32], out: &mut Vec<Monomial>) {
    if var + 1 >= dense.len() {
        if dense.is_empty() {
            if rest == 0 {
                out.push(Monomial::one());
            }
            return;
        }
        dense[var] = rest;
        out.push(Monomial::from_dense(dense));
        dense[var] = 0;
        return;
    }
    for e in (0..=rest).rev() {
        dense[var] = e;
        exponents_of_degree(var + 1, rest - e, dense, out);
    }
    dense[var] = 0;
}

/// A real polynomial in `nvars` indexed variables.
#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(Monomial::one(), c)])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        assert!(index < nvars, "variable {index} out of range for {nvars} variables");
        Self::from_terms(nvars, [(Monomial::var(index), 1.0)])
    }

    /// Collects terms, summing repeated monomials and dropping tiny coefficients.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in terms {
            assert!(m.min_nvars() <= nvars, "monomial {m} uses variables outside 0..{nvars}");
            *map.entry(m).or_insert(0.0) += c;
        }
        let mut p = Self { nvars, terms: map };
        p.prune();
        p
    }

    /// Affine polynomial `constant + sum coeffs[i] * v[offset + i]`.
    pub fn affine(nvars: usize, constant: f64, offset: usize, coeffs: &[f64]) -> Self {
        let terms = std::iter::once((Monomial::one(), constant))
            .chain(coeffs.iter().enumerate().map(|(i, &c)| (Monomial::var(offset + i), c)));
        Self::from_terms(nvars, terms)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() >= DROP_TOL);
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    /// Max total degree over stored terms; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Max total degree counting only variables in `vars`.
    pub fn degree_in(&self, vars: std::ops::Range<usize>) -> u32 {
        self.terms
            .keys()
            .map(|m| m.pairs().filter(|(v, _)| vars.contains(v)).map(|(_, e)| e).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                got: point.len(),
            });
        }
        Ok(self.terms.iter().map(|(m, c)| c * m.eval(point)).sum())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_terms(self.nvars, self.terms.iter().map(|(m, &c)| (m.clone(), c * k)))
    }

    pub fn derivative(&self, var: usize) -> Self {
        Self::from_terms(
            self.nvars,
            self.terms
                .iter()
                .filter_map(|(m, &c)| m.derivative(var).map(|(k, dm)| (dm, k * c))),
        )
    }

    /// Exact Hessian evaluated at `point`.
    pub fn hessian_at(&self, point: &[f64]) -> Result<DMatrix<f64>, PolyError> {
        let n = self.nvars;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            let di = self.derivative(i);
            for j in i..n {
                let v = di.derivative(j).eval(point)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// Re-embeds into a larger variable space, mapping variable `i` to `map[i]`.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Self {
        Self::from_terms(
            nvars,
            self.terms.iter().map(|(m, &c)| {
                let pairs: Vec<(usize, u32)> = m.pairs().map(|(v, e)| (map[v], e)).collect();
                (Monomial::from_pairs(&pairs), c)
            }),
        )
    }

    /// True if `self = k * other` for some `k > 0` (up to `tol` relative).
    pub fn positive_multiple_of(&self, other: &Polynomial, tol: f64) -> Option<f64> {
        if self.is_zero() || other.is_zero() || self.terms.len() != other.terms.len() {
            return None;
        }
        let (m0, c0) = other.terms.iter().next()?;
        let k = self.coefficient(m0) / c0;
        if k <= 0.0 {
            return None;
        }
        let diff = self - &other.scale(k);
        (diff.max_abs_coeff() <= tol * self.max_abs_coeff().max(1.0)).then_some(k)
    }

    /// Literal records `{exponents, coeff}` with dense exponent vectors.
    pub fn to_literal(&self) -> Vec<TermLiteral> {
        self.terms
            .iter()
            .map(|(m, &c)| TermLiteral {
                exponents: m.to_dense(self.nvars),
                coeff: c,
            })
            .collect()
    }

    pub fn from_literal(nvars: usize, terms: &[TermLiteral]) -> Result<Self, PolyError> {
        for (k, t) in terms.iter().enumerate() {
            if t.exponents.len() != nvars {
                return Err(PolyError::InvalidLiteral(format!(
                    "term {k} has {} exponents, expected {nvars}",
                    t.exponents.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(PolyError::InvalidLiteral(format!(
                    "term {k} has a non-finite coefficient"
                )));
            }
        }
        Ok(Self::from_terms(
            nvars,
            terms.iter().map(|t| (Monomial::from_dense(&t.exponents), t.coeff)),
        ))
    }

    fn combine(&self, other: &Polynomial, sign: f64) -> Polynomial {
        assert_eq!(self.nvars, other.nvars, "polynomials live in different spaces");
        let mut terms = self.terms.clone();
        for (m, &c) in &other.terms {
            *terms.entry(m.clone()).or_insert(0.0) += sign * c;
        }
        let mut p = Polynomial {
            nvars: self.nvars,
            terms,
        };
        p.prune();
        p
    }
}

/// One `{exponents: [...], coeff: ...}` record of the polynomial literal syntax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLiteral {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "polynomials live in different spaces");
        let mut terms: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                *terms.entry(ma.mul(mb)).or_insert(0.0) += ca * cb;
            }
        }
        let mut p = Polynomial {
            nvars: self.nvars,
            terms,
        };
        p.prune();
        p
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            match (k, *c < 0.0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            if m.is_one() {
                write!(f, "{mag}")?;
            } else if (mag - 1.0).abs() < 1e-15 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

/// Gram form `v^T G v` for the monomial vector `basis`.
pub fn gram_expand(basis: &[Monomial], gram: &DMatrix<f64>, nvars: usize) -> Result<Polynomial, PolyError> {
    if gram.nrows() != basis.len() || gram.ncols() != basis.len() {
        return Err(PolyError::DimensionMismatch {
            expected: basis.len(),
            got: gram.nrows(),
        });
    }
    let mut terms = Vec::with_capacity(basis.len() * (basis.len() + 1) / 2);
    for a in 0..basis.len() {
        terms.push((basis[a].mul(&basis[a]), gram[(a, a)]));
        for b in a + 1..basis.len() {
            terms.push((basis[a].mul(&basis[b]), gram[(a, b)] + gram[(b, a)]));
        }
    }
    Ok(Polynomial::from_terms(nvars, terms))
}
