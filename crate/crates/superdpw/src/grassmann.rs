//! Complexified Grassmann algebra `B_L = R[eta_1..eta_L] (x) C`.
//!
//! Elements are sparse lists of `(blade, coefficient)` pairs. A blade is a
//! bitmask whose set bits, read from low to high, are the strictly increasing
//! generator indices of the monomial (bit `k-1` stands for `eta_k`). The body
//! term (blade 0) is always stored, even when zero, so that coefficient shapes
//! survive for matrix-valued elements.

use crate::cmat::{CMat, C64};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

pub const DEFAULT_GENERATORS: u8 = 4;
pub const MAX_GENERATORS: u8 = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrassmannError {
    #[error("generator count mismatch: {left} vs {right}")]
    DimensionMismatch { left: u8, right: u8 },
    #[error("element is not invertible: body is zero")]
    NotInvertible,
    #[error("invalid generator index {index} for L = {l}")]
    InvalidIndex { index: u32, l: u8 },
    #[error("index list is not strictly increasing: {0:?}")]
    UnsortedIndices(Vec<u32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn sign(self) -> i32 {
        match self {
            Parity::Odd => -1,
            _ => 1,
        }
    }

    pub fn bit(self) -> u32 {
        match self {
            Parity::Odd => 1,
            _ => 0,
        }
    }
}

/// True when moving blade `b` left past blade `a` (i.e. writing `a*b` in
/// sorted order) costs an odd number of transpositions.
#[inline]
pub fn reorder_sign(a: u32, b: u32) -> bool {
    let mut a = a >> 1;
    let mut s = 0u32;
    while a != 0 {
        s += (a & b).count_ones();
        a >>= 1;
    }
    s & 1 == 1
}

pub fn blade_indices(mask: u32) -> Vec<u32> {
    (0..32).filter(|k| mask & (1 << k) != 0).map(|k| k + 1).collect()
}

pub fn blade_from_indices(idx: &[u32], l: u8) -> Result<u32, GrassmannError> {
    let mut mask = 0u32;
    let mut last = 0u32;
    for &k in idx {
        if k == 0 || k > l as u32 {
            return Err(GrassmannError::InvalidIndex { index: k, l });
        }
        if k <= last {
            return Err(GrassmannError::UnsortedIndices(idx.to_vec()));
        }
        last = k;
        mask |= 1 << (k - 1);
    }
    Ok(mask)
}

#[inline]
pub fn blade_degree(mask: u32) -> u32 {
    mask.count_ones()
}

/// Coefficient ring for Grassmann elements: complex scalars or matrices.
pub trait Coeff: Clone + Debug + PartialEq + Send + Sync {
    fn zero_like(&self) -> Self;
    fn is_zero(&self) -> bool;
    fn add_to(&mut self, o: &Self);
    fn sub_from(&mut self, o: &Self);
    fn negated(&self) -> Self;
    fn scaled(&self, s: C64) -> Self;
    fn conjugated(&self) -> Self;
    fn max_norm(&self) -> f64;
}

impl Coeff for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add_to(&mut self, o: &Self) {
        *self += o;
    }
    fn sub_from(&mut self, o: &Self) {
        *self -= o;
    }
    fn negated(&self) -> Self {
        -*self
    }
    fn scaled(&self, s: C64) -> Self {
        self * s
    }
    fn conjugated(&self) -> Self {
        self.conj()
    }
    fn max_norm(&self) -> f64 {
        self.norm()
    }
}

impl Coeff for CMat {
    fn zero_like(&self) -> Self {
        self.zeros_like()
    }
    fn is_zero(&self) -> bool {
        CMat::is_zero(self)
    }
    fn add_to(&mut self, o: &Self) {
        *self += o;
    }
    fn sub_from(&mut self, o: &Self) {
        *self -= o;
    }
    fn negated(&self) -> Self {
        -self
    }
    fn scaled(&self, s: C64) -> Self {
        self.scale(s)
    }
    fn conjugated(&self) -> Self {
        self.conj()
    }
    fn max_norm(&self) -> f64 {
        self.max_abs()
    }
}

/// Element of `B_L (x) T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gr<T> {
    l: u8,
    terms: Vec<(u32, T)>,
}

/// Grassmann number with complex coefficients.
pub type GrassmannNumber = Gr<C64>;
/// Matrix over Grassmann numbers, stored blade by blade.
pub type GMat = Gr<CMat>;

impl<T: Coeff> Gr<T> {
    pub fn from_body(l: u8, body: T) -> Self {
        assert!(l <= MAX_GENERATORS, "too many generators");
        Gr { l, terms: vec![(0, body)] }
    }

    /// Build from arbitrary (mask, coefficient) pairs; merges duplicates and
    /// drops exact zeros away from the body.
    pub fn from_terms(l: u8, proto: &T, mut raw: Vec<(u32, T)>) -> Self {
        raw.sort_by_key(|t| t.0);
        let mut terms: Vec<(u32, T)> = Vec::with_capacity(raw.len() + 1);
        for (m, v) in raw {
            debug_assert!(m >> l == 0, "blade outside generator range");
            match terms.last_mut() {
                Some(last) if last.0 == m => last.1.add_to(&v),
                _ => terms.push((m, v)),
            }
        }
        if terms.first().map(|t| t.0) != Some(0) {
            terms.insert(0, (0, proto.zero_like()));
        }
        let mut k = 1;
        while k < terms.len() {
            if terms[k].1.is_zero() {
                terms.remove(k);
            } else {
                k += 1;
            }
        }
        Gr { l, terms }
    }

    pub fn generators(&self) -> u8 {
        self.l
    }

    pub fn terms(&self) -> &[(u32, T)] {
        &self.terms
    }

    pub fn body(&self) -> &T {
        &self.terms[0].1
    }

    pub fn coeff(&self, mask: u32) -> Option<&T> {
        self.terms.iter().find(|t| t.0 == mask).map(|t| &t.1)
    }

    pub fn zero_like(&self) -> Self {
        Gr::from_body(self.l, self.body().zero_like())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.1.is_zero())
    }

    pub fn soul(&self) -> Self {
        let mut s = self.clone();
        s.terms[0].1 = s.terms[0].1.zero_like();
        s
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for (m, v) in &self.terms {
            if v.is_zero() {
                continue;
            }
            if m.count_ones() % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Parity::Even
    }

    /// Odd support only (the zero element counts as odd as well).
    pub fn is_odd(&self) -> bool {
        self.terms.iter().all(|(m, v)| m.count_ones() % 2 == 1 || v.is_zero())
    }

    /// Conjugates complex coefficients, fixes generators.
    pub fn conj(&self) -> Self {
        self.map(|v| v.conjugated())
    }

    /// Parity automorphism: negates odd blades.
    pub fn flip(&self) -> Self {
        Gr {
            l: self.l,
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (*m, if m.count_ones() % 2 == 1 { v.negated() } else { v.clone() }))
                .collect(),
        }
    }

    /// Component of exact Grassmann degree `d`.
    pub fn degree_part(&self, d: u32) -> Self {
        let proto = self.body().clone();
        Gr::from_terms(
            self.l,
            &proto,
            self.terms.iter().filter(|t| t.0.count_ones() == d).cloned().collect(),
        )
    }

    /// Part of degree at most `d`.
    pub fn truncate_degree(&self, d: u32) -> Self {
        let proto = self.body().clone();
        Gr::from_terms(
            self.l,
            &proto,
            self.terms.iter().filter(|t| t.0.count_ones() <= d).cloned().collect(),
        )
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().filter(|t| !t.1.is_zero()).map(|t| t.0.count_ones()).max().unwrap_or(0)
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> Gr<U> {
        let proto = f(self.body());
        let terms = self.terms.iter().map(|(m, v)| (*m, f(v))).collect();
        Gr::from_terms(self.l, &proto, terms)
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|v| v.scaled(s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.1.max_norm()))
    }

    /// Largest coefficient in each Grassmann degree `0..=L`.
    pub fn degree_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.l as usize + 1];
        for (m, v) in &self.terms {
            let d = m.count_ones() as usize;
            out[d] = out[d].max(v.max_norm());
        }
        out
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, GrassmannError> {
        check_l(self.l, o.l)?;
        Ok(self.merge(o, false))
    }

    fn merge(&self, o: &Self, subtract: bool) -> Self {
        let mut out: Vec<(u32, T)> = Vec::with_capacity(self.terms.len() + o.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < o.terms.len() {
            let take_left = j >= o.terms.len() || (i < self.terms.len() && self.terms[i].0 < o.terms[j].0);
            let take_right = i >= self.terms.len() || (j < o.terms.len() && o.terms[j].0 < self.terms[i].0);
            if take_left {
                out.push(self.terms[i].clone());
                i += 1;
            } else if take_right {
                let v = if subtract { o.terms[j].1.negated() } else { o.terms[j].1.clone() };
                out.push((o.terms[j].0, v));
                j += 1;
            } else {
                let mut v = self.terms[i].1.clone();
                if subtract {
                    v.sub_from(&o.terms[j].1);
                } else {
                    v.add_to(&o.terms[j].1);
                }
                out.push((self.terms[i].0, v));
                i += 1;
                j += 1;
            }
        }
        let mut k = 1;
        while k < out.len() {
            if out[k].1.is_zero() {
                out.remove(k);
            } else {
                k += 1;
            }
        }
        Gr { l: self.l.max(o.l), terms: out }
    }

    /// Generic blade-wise bilinear product.
    pub fn product_with<U: Coeff, R: Coeff>(&self, o: &Gr<U>, f: impl Fn(&T, &U) -> R) -> Gr<R> {
        assert_eq!(self.l, o.l, "generator count mismatch");
        let proto = f(self.body(), o.body());
        let mut raw = Vec::with_capacity(self.terms.len() * o.terms.len());
        for (a, x) in &self.terms {
            if x.is_zero() {
                continue;
            }
            for (b, y) in &o.terms {
                if a & b != 0 || y.is_zero() {
                    continue;
                }
                let p = f(x, y);
                raw.push((a | b, if reorder_sign(*a, *b) { p.negated() } else { p }));
            }
        }
        Gr::from_terms(self.l, &proto, raw)
    }
}

fn check_l(a: u8, b: u8) -> Result<(), GrassmannError> {
    if a != b {
        Err(GrassmannError::DimensionMismatch { left: a, right: b })
    } else {
        Ok(())
    }
}

impl GrassmannNumber {
    pub fn scalar(l: u8, v: C64) -> Self {
        Gr::from_body(l, v)
    }

    pub fn real(l: u8, v: f64) -> Self {
        Gr::from_body(l, C64::new(v, 0.0))
    }

    pub fn zero(l: u8) -> Self {
        Self::real(l, 0.0)
    }

    pub fn one(l: u8) -> Self {
        Self::real(l, 1.0)
    }

    /// The generator `eta_k` (1-based) times `v`.
    pub fn generator(l: u8, k: u32, v: C64) -> Self {
        assert!(k >= 1 && k <= l as u32, "generator index out of range");
        Gr::from_terms(l, &C64::new(0.0, 0.0), vec![(1 << (k - 1), v)])
    }

    /// Monomial `v * eta_{i1} ... eta_{ik}` for a strictly increasing index list.
    pub fn monomial(l: u8, idx: &[u32], v: C64) -> Result<Self, GrassmannError> {
        let m = blade_from_indices(idx, l)?;
        Ok(Gr::from_terms(l, &C64::new(0.0, 0.0), vec![(m, v)]))
    }

    pub fn body_value(&self) -> C64 {
        *self.body()
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self, GrassmannError> {
        check_l(self.l, o.l)?;
        Ok(self.product_with(o, |a, b| a * b))
    }

    pub fn try_inverse(&self) -> Result<Self, GrassmannError> {
        let b = self.body_value();
        if b.norm() == 0.0 {
            return Err(GrassmannError::NotInvertible);
        }
        let binv = 1.0 / b;
        let q = self.soul().scale(-binv);
        let mut term = Self::scalar(self.l, binv);
        let mut sum = term.clone();
        for _ in 0..self.l {
            term = &term * &q;
            if term.is_zero() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum)
    }

    /// Left product with a matrix: entries `self * M_ij`.
    pub fn times_mat(&self, m: &GMat) -> GMat {
        self.product_with(m, |a, b| b.scale(*a))
    }

    pub fn to_records(&self) -> Vec<GrassmannRecord> {
        self.terms
            .iter()
            .filter(|(m, v)| *m == 0 || !v.is_zero())
            .map(|(m, v)| GrassmannRecord { indices: blade_indices(*m), re: v.re, im: v.im })
            .collect()
    }

    pub fn from_records(l: u8, recs: &[GrassmannRecord]) -> Result<Self, GrassmannError> {
        let mut raw = Vec::with_capacity(recs.len());
        for r in recs {
            raw.push((blade_from_indices(&r.indices, l)?, C64::new(r.re, r.im)));
        }
        Ok(Gr::from_terms(l, &C64::new(0.0, 0.0), raw))
    }
}

impl GMat {
    pub fn from_mat(l: u8, m: CMat) -> Self {
        Gr::from_body(l, m)
    }

    pub fn zeros(l: u8, rows: usize, cols: usize) -> Self {
        Gr::from_body(l, CMat::zeros(rows, cols))
    }

    pub fn identity(l: u8, n: usize) -> Self {
        Gr::from_body(l, CMat::identity(n))
    }

    /// `eta-monomial * m`.
    pub fn blade(l: u8, mask: u32, m: CMat) -> Self {
        let proto = m.zeros_like();
        Gr::from_terms(l, &proto, vec![(mask, m)])
    }

    pub fn shape(&self) -> (usize, usize) {
        self.body().shape()
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    /// Transpose combined with coefficient conjugation.
    pub fn adjoint(&self) -> Self {
        self.map(|m| m.adjoint())
    }

    pub fn entry(&self, i: usize, j: usize) -> GrassmannNumber {
        self.map(|m| m[(i, j)])
    }

    pub fn column(&self, j: usize) -> Self {
        self.map(|m| m.column(j))
    }

    pub fn trace(&self) -> GrassmannNumber {
        self.map(|m| m.trace())
    }

    /// Apply a linear map of matrices blade by blade.
    pub fn linear(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        self.map(f)
    }

    pub fn from_entries(l: u8, rows: usize, cols: usize, f: impl Fn(usize, usize) -> GrassmannNumber) -> Self {
        let mut raw: Vec<(u32, CMat)> = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                let e = f(i, j);
                for (m, v) in e.terms() {
                    if v.is_zero() {
                        continue;
                    }
                    let mut cm = CMat::zeros(rows, cols);
                    cm[(i, j)] = *v;
                    raw.push((*m, cm));
                }
            }
        }
        Gr::from_terms(l, &CMat::zeros(rows, cols), raw)
    }

    pub fn try_inverse(&self) -> Option<Self> {
        let binv = self.body().try_inverse()?;
        let binv_g = GMat::from_mat(self.l, binv);
        let q = -(&binv_g * &self.soul());
        let mut term = binv_g.clone();
        let mut sum = binv_g;
        for _ in 0..self.l {
            term = &q * &term;
            if term.is_zero() {
                break;
            }
            sum = &sum + &term;
        }
        Some(sum)
    }

    pub fn inverse(&self) -> Self {
        self.try_inverse().expect("matrix body is singular")
    }

    /// Exponential: body by scaling-and-squaring, soul through the
    /// nilpotent series of `exp(b + s)` evaluated as a product limit.
    pub fn exp(&self) -> Self {
        let n = self.shape().0;
        let norm = self.max_abs() * n as f64;
        let mut s = 0;
        let mut scaled = self.clone();
        if norm > 0.5 {
            s = (norm / 0.5).log2().ceil() as i32;
            scaled = self.scale_re(0.5f64.powi(s));
        }
        let id = GMat::identity(self.l, n);
        let mut term = id.clone();
        let mut sum = id;
        for k in 1..22 {
            term = (&term * &scaled).scale_re(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    pub fn to_records(&self) -> Vec<Vec<Vec<GrassmannRecord>>> {
        let (r, cc) = self.shape();
        (0..r).map(|i| (0..cc).map(|j| self.entry(i, j).to_records()).collect()).collect()
    }

    pub fn from_records(l: u8, recs: &[Vec<Vec<GrassmannRecord>>]) -> Result<Self, GrassmannError> {
        let rows = recs.len();
        let cols = if rows == 0 { 0 } else { recs[0].len() };
        let mut entries = Vec::with_capacity(rows * cols);
        for row in recs {
            for cell in row {
                entries.push(GrassmannNumber::from_records(l, cell)?);
            }
        }
        Ok(GMat::from_entries(l, rows, cols, |i, j| entries[i * cols + j].clone()))
    }
}

/// Serialized monomial: `indices` are 1-based generator numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannRecord {
    pub indices: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

impl Serialize for GrassmannNumber {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_records().serialize(s)
    }
}

impl<T: Coeff> Add for &Gr<T> {
    type Output = Gr<T>;
    fn add(self, o: &Gr<T>) -> Gr<T> {
        assert_eq!(self.l, o.l, "generator count mismatch");
        self.merge(o, false)
    }
}

impl<T: Coeff> Sub for &Gr<T> {
    type Output = Gr<T>;
    fn sub(self, o: &Gr<T>) -> Gr<T> {
        assert_eq!(self.l, o.l, "generator count mismatch");
        self.merge(o, true)
    }
}

impl<T: Coeff> Add for Gr<T> {
    type Output = Gr<T>;
    fn add(self, o: Gr<T>) -> Gr<T> {
        &self + &o
    }
}

impl<T: Coeff> Sub for Gr<T> {
    type Output = Gr<T>;
    fn sub(self, o: Gr<T>) -> Gr<T> {
        &self - &o
    }
}

impl<T: Coeff> Neg for &Gr<T> {
    type Output = Gr<T>;
    fn neg(self) -> Gr<T> {
        Gr { l: self.l, terms: self.terms.iter().map(|(m, v)| (*m, v.negated())).collect() }
    }
}

impl<T: Coeff> Neg for Gr<T> {
    type Output = Gr<T>;
    fn neg(self) -> Gr<T> {
        -&self
    }
}

impl Mul for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn mul(self, o: &GrassmannNumber) -> GrassmannNumber {
        self.product_with(o, |a, b| a * b)
    }
}

impl Mul for GrassmannNumber {
    type Output = GrassmannNumber;
    fn mul(self, o: GrassmannNumber) -> GrassmannNumber {
        &self * &o
    }
}

impl Mul for &GMat {
    type Output = GMat;
    fn mul(self, o: &GMat) -> GMat {
        self.product_with(o, |a, b| a * b)
    }
}

impl Mul for GMat {
    type Output = GMat;
    fn mul(self, o: GMat) -> GMat {
        &self * &o
    }
}

/// Supercommutator `ab - (-1)^{p(a)p(b)} ba` for pure-parity scalars.
pub fn supercommutator(a: &GrassmannNumber, b: &GrassmannNumber) -> Option<GrassmannNumber> {
    let (pa, pb) = (a.parity(), b.parity());
    if pa == Parity::Mixed || pb == Parity::Mixed {
        return None;
    }
    let ab = a * b;
    let ba = b * a;
    Some(if pa.bit() * pb.bit() == 1 { &ab + &ba } else { &ab - &ba })
}

pub fn gr_mul(x: &GrassmannNumber, y: &GrassmannNumber) -> Result<GrassmannNumber, GrassmannError> {
    x.try_mul(y)
}

pub fn gr_inverse(x: &GrassmannNumber) -> Result<GrassmannNumber, GrassmannError> {
    x.try_inverse()
}

pub fn gr_parity(x: &GrassmannNumber) -> Parity {
    x.parity()
}

pub fn gr_body(x: &GrassmannNumber) -> C64 {
    x.body_value()
}

pub fn gr_conj(x: &GrassmannNumber) -> GrassmannNumber {
    x.conj()
}
