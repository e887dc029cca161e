//! Polynomial sieves `P_k` and `Λ(P_k)`, prediction rules, and VC accounting.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::utility::Dataset;

/// Rule values are clamped to this magnitude before the link is applied.
pub const VALUE_CLAMP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Logistic,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logistic => "logistic",
        }
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Link::Identity),
            "logistic" => Ok(Link::Logistic),
            other => Err(Error::invalid(format!("unknown link '{other}'"))),
        }
    }
}

/// `Λ(v) = 1 / (1 + exp(-v))`.
#[inline]
pub fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `C(d + k, k)`, checked.
pub fn basis_size(d: usize, k: usize) -> Result<usize> {
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc * (d as u128 + i) / i;
        if acc > usize::MAX as u128 {
            return Err(Error::BasisOverflow { d, k });
        }
    }
    Ok(acc as usize)
}

/// All exponent vectors of total degree at most `k` in graded lexicographic
/// order: by total degree, then lexicographically descending within a degree.
pub fn enumerate_basis(d: usize, k: usize) -> Result<Vec<Vec<u32>>> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let size = basis_size(d, k)?;
    let mut out = Vec::with_capacity(size);
    let mut current = vec![0u32; d];
    for degree in 0..=k as u32 {
        compositions(degree, 0, &mut current, &mut out);
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        compositions(remaining - e, pos + 1, current, out);
    }
}

/// The class of polynomials of total degree at most `k` in `d` covariates,
/// optionally passed through the logistic function.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialClass {
    d: usize,
    k: usize,
    link: Link,
    basis: Arc<Vec<Vec<u32>>>,
}

impl PolynomialClass {
    pub fn new(d: usize, k: usize, link: Link) -> Result<Self> {
        let basis = enumerate_basis(d, k)?;
        Ok(PolynomialClass { d, k, link, basis: Arc::new(basis) })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn basis(&self) -> &[Vec<u32>] {
        &self.basis
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn with_link(&self, link: Link) -> Self {
        PolynomialClass { link, ..self.clone() }
    }

    /// Monomial values at `x`, in basis order.
    pub fn monomials_into(&self, x: &[f64], out: &mut [f64]) {
        let mut powers = [[1.0f64; 8]; 8];
        if self.d <= 8 && self.k < 8 {
            for (l, &xl) in x.iter().enumerate() {
                for e in 1..=self.k {
                    powers[l][e] = powers[l][e - 1] * xl;
                }
            }
            for (slot, p) in out.iter_mut().zip(self.basis.iter()) {
                *slot = p.iter().enumerate().map(|(l, &e)| powers[l][e as usize]).product();
            }
        } else {
            for (slot, p) in out.iter_mut().zip(self.basis.iter()) {
                *slot = p.iter().zip(x).map(|(&e, &xl)| xl.powi(e as i32)).product();
            }
        }
    }

    pub fn monomials(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis_len()];
        self.monomials_into(x, &mut out);
        out
    }

    /// Column-major design matrix of the data under this basis.
    pub fn design(&self, data: &Dataset) -> Result<Design> {
        if data.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: data.dim() });
        }
        let n = data.len();
        let b = self.basis_len();
        let mut cols = vec![0.0; n * b];
        let mut row = vec![0.0; b];
        for i in 0..n {
            self.monomials_into(data.row(i), &mut row);
            for j in 0..b {
                cols[j * n + i] = row[j];
            }
        }
        Ok(Design { n, b, cols })
    }

    pub fn is_nested_in(&self, other: &PolynomialClass) -> bool {
        self.d == other.d && self.link == other.link && self.k <= other.k
    }
}

/// Column-major `n x B` matrix of monomial values.
#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub b: usize,
    pub cols: Vec<f64>,
}

impl Design {
    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.cols[j * self.n + i]
    }

    /// `X beta` for every row.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &bj) in beta.iter().enumerate() {
            if bj != 0.0 {
                for (o, v) in out.iter_mut().zip(self.col(j)) {
                    *o += bj * v;
                }
            }
        }
        out
    }

    pub fn rows(&self, indices: &[usize]) -> Design {
        let n = indices.len();
        let mut cols = vec![0.0; n * self.b];
        for j in 0..self.b {
            let src = self.col(j);
            for (r, &i) in indices.iter().enumerate() {
                cols[j * n + r] = src[i];
            }
        }
        Design { n, b: self.b, cols }
    }
}

/// VC dimension of `{sign(f - c) : f in F}`: `C(d+k, k)` for `P_k` and the
/// bound `C(d+k, k) + 1` for `Λ(P_k)`. With constant covariates this is an
/// upper bound.
pub fn vc_dimension(class: &PolynomialClass) -> usize {
    let base = class.basis_len();
    match class.link {
        Link::Identity => base,
        Link::Logistic => base + 1,
    }
}

/// A member of a [`PolynomialClass`]: coefficients in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRule {
    class: PolynomialClass,
    coefficients: Vec<f64>,
}

impl PredictionRule {
    pub fn new(class: PolynomialClass, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != class.basis_len() {
            return Err(Error::DimensionMismatch { expected: class.basis_len(), got: coefficients.len() });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("rule coefficients must be finite"));
        }
        Ok(PredictionRule { class, coefficients })
    }

    pub fn zeros(class: PolynomialClass) -> Self {
        let b = class.basis_len();
        PredictionRule { class, coefficients: vec![0.0; b] }
    }

    pub fn class(&self) -> &PolynomialClass {
        &self.class
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// The polynomial part before the link, clamped to `±VALUE_CLAMP`.
    pub fn polynomial(&self, x: &[f64]) -> f64 {
        let mut row = [0.0f64; 64];
        let b = self.class.basis_len();
        let v = if b <= row.len() {
            self.class.monomials_into(x, &mut row[..b]);
            row[..b].iter().zip(&self.coefficients).map(|(m, c)| m * c).sum::<f64>()
        } else {
            let row = self.class.monomials(x);
            row.iter().zip(&self.coefficients).map(|(m, c)| m * c).sum::<f64>()
        };
        v.clamp(-VALUE_CLAMP, VALUE_CLAMP)
    }

    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        let v = self.polynomial(x);
        match self.class.link {
            Link::Identity => v,
            Link::Logistic => logistic(v),
        }
    }

    /// `f(x)`: the polynomial, then `Λ` for the logistic link.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.class.d {
            return Err(Error::DimensionMismatch { expected: self.class.d, got: x.len() });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, what: "covariate" });
        }
        Ok(self.evaluate_unchecked(x))
    }

    /// The same function as a member of a larger nested class.
    pub fn embed_in(&self, larger: &PolynomialClass) -> Result<PredictionRule> {
        if !self.class.is_nested_in(larger) {
            return Err(Error::invalid("target class does not contain this rule's class"));
        }
        let mut coefficients = vec![0.0; larger.basis_len()];
        coefficients[..self.coefficients.len()].copy_from_slice(&self.coefficients);
        Ok(PredictionRule { class: larger.clone(), coefficients })
    }

    /// Rewrites `g(z) = sum_j beta_j z^{p_j}` with `z_l = (x_l - mean_l) / scale_l`
    /// as a polynomial in `x` by binomial expansion of each monomial.
    pub fn from_standardized(
        class: PolynomialClass,
        beta: &[f64],
        mean: &[f64],
        scale: &[f64],
    ) -> Result<PredictionRule> {
        let d = class.dim();
        if beta.len() != class.basis_len() || mean.len() != d || scale.len() != d {
            return Err(Error::invalid("standardization dimensions do not match the class"));
        }
        if scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("standardization scales must be positive"));
        }
        let index: HashMap<&[u32], usize> =
            class.basis().iter().enumerate().map(|(j, p)| (p.as_slice(), j)).collect();
        let mut raw = vec![0.0; class.basis_len()];
        let mut target = vec![0u32; d];
        for (p, &bj) in class.basis().iter().zip(beta) {
            if bj == 0.0 {
                continue;
            }
            let factor: f64 = p.iter().zip(scale).map(|(&e, &s)| s.powi(-(e as i32))).product();
            expand(p, mean, 0, bj * factor, &mut target, &index, &mut raw);
        }
        PredictionRule::new(class, raw)
    }

    /// Plain-text record `d,k,link,coeff_0,...,coeff_{B-1}`.
    pub fn to_record(&self) -> String {
        let mut s = format!("{},{},{}", self.class.d, self.class.k, self.class.link.name());
        for c in &self.coefficients {
            s.push(',');
            s.push_str(&c.to_string());
        }
        s
    }

    pub fn from_record(record: &str) -> Result<PredictionRule> {
        let fields: Vec<&str> = record.trim().split(',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(Error::invalid(format!("rule record has {} fields, need at least 4", fields.len())));
        }
        let d: usize = fields[0].parse().map_err(|_| Error::invalid(format!("bad dimension '{}'", fields[0])))?;
        let k: usize = fields[1].parse().map_err(|_| Error::invalid(format!("bad degree '{}'", fields[1])))?;
        let link: Link = fields[2].parse()?;
        let class = PolynomialClass::new(d, k, link)?;
        let coefficients = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::invalid(format!("bad coefficient '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        PredictionRule::new(class, coefficients)
    }
}

fn expand(
    p: &[u32],
    mean: &[f64],
    pos: usize,
    coef: f64,
    target: &mut Vec<u32>,
    index: &HashMap<&[u32], usize>,
    raw: &mut [f64],
) {
    if pos == p.len() {
        raw[index[target.as_slice()]] += coef;
        return;
    }
    let e = p[pos];
    for q in 0..=e {
        let binom = binomial(e, q);
        let shift = (-mean[pos]).powi((e - q) as i32);
        target[pos] = q;
        expand(p, mean, pos + 1, coef * binom * shift, target, index, raw);
    }
    target[pos] = 0;
}

fn binomial(n: u32, k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

impl fmt::Display for PredictionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// A finite nested sequence of classes `F_1 ⊆ F_2 ⊆ ... ⊆ F_K`.
#[derive(Debug, Clone)]
pub struct HierarchySpec {
    classes: Vec<PolynomialClass>,
}

impl HierarchySpec {
    pub fn new(classes: Vec<PolynomialClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::invalid("hierarchy needs at least one class"));
        }
        for w in classes.windows(2) {
            if !w[0].is_nested_in(&w[1]) {
                return Err(Error::invalid("hierarchy classes must be nested"));
            }
        }
        Ok(HierarchySpec { classes })
    }

    /// `F_k = P_k` (or `Λ(P_k)`) for `k = 1..=depth`.
    pub fn polynomial(d: usize, depth: usize, link: Link) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("hierarchy depth must be at least 1"));
        }
        HierarchySpec::new((1..=depth).map(|k| PolynomialClass::new(d, k, link)).collect::<Result<_>>()?)
    }

    pub fn classes(&self) -> &[PolynomialClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn truncate(&self, depth: usize) -> Result<Self> {
        HierarchySpec::new(self.classes.iter().take(depth).cloned().collect())
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }
}
