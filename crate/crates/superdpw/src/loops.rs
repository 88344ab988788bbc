//! Truncated twisted loops: Laurent polynomials in `lambda` with
//! Grassmann-matrix coefficients.

use crate::cmat::{CMat, C64};
use crate::grassmann::{GMat, GrassmannRecord};
use crate::liealg::{LieError, LieModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const DEFAULT_TRUNCATION: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("twist mismatch: {0:?} vs {1:?}")]
    TwistMismatch(Twist, Twist),
    #[error("truncation mismatch: {0} vs {1}")]
    TruncationMismatch(usize, usize),
    #[error("loop is singular on the unit circle near lambda = {lambda} (|det| = {det:e})")]
    Singular { lambda: C64, det: f64 },
    #[error("loop inverse did not reach tolerance: residual {0:e}")]
    InverseNotConverged(f64),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Twist {
    Tau,
    Sigma,
    Untwisted,
}

/// Laurent polynomial `sum_{k=lo}^{hi} lambda^k X_k` with `-N <= lo <= hi <= N`.
#[derive(Debug, Clone)]
pub struct LoopElement {
    truncation: usize,
    lo: i32,
    coeffs: Vec<GMat>,
    pub twist: Twist,
    /// Max-norm of coefficients discarded by the last truncating operation.
    pub truncation_loss: f64,
}

/// Unit-circle sample points `exp(2 pi i j / m)`.
pub fn circle_points(m: usize) -> Vec<C64> {
    (0..m).map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64)).collect()
}

/// Default sample count for truncation `n`: exact quadrature up to degree `2n`.
pub fn sample_count(n: usize) -> usize {
    4 * n + 1
}

impl LoopElement {
    pub fn zero(l: u8, size: usize, truncation: usize, twist: Twist) -> Self {
        LoopElement { truncation, lo: 0, coeffs: vec![GMat::zeros(l, size, size)], twist, truncation_loss: 0.0 }
    }

    pub fn identity(l: u8, size: usize, truncation: usize, twist: Twist) -> Self {
        Self::constant(GMat::identity(l, size), truncation, twist)
    }

    pub fn constant(x: GMat, truncation: usize, twist: Twist) -> Self {
        LoopElement { truncation, lo: 0, coeffs: vec![x], twist, truncation_loss: 0.0 }
    }

    pub fn monomial(k: i32, x: GMat, truncation: usize, twist: Twist) -> Self {
        assert!(k.unsigned_abs() as usize <= truncation, "power outside truncation window");
        LoopElement { truncation, lo: k, coeffs: vec![x], twist, truncation_loss: 0.0 }
    }

    /// From `(power, coefficient)` pairs; powers outside `[-N, N]` are dropped
    /// and accounted in `truncation_loss`.
    pub fn from_terms(terms: Vec<(i32, GMat)>, truncation: usize, twist: Twist) -> Self {
        assert!(!terms.is_empty(), "empty loop");
        let proto = terms[0].1.zero_like();
        let n = truncation as i32;
        let mut loss = 0.0f64;
        let kept: Vec<(i32, GMat)> = terms
            .into_iter()
            .filter(|(k, x)| {
                if k.abs() > n {
                    loss = loss.max(x.max_abs());
                    false
                } else {
                    true
                }
            })
            .collect();
        if kept.is_empty() {
            let mut z = LoopElement::constant(proto, truncation, twist);
            z.truncation_loss = loss;
            return z;
        }
        let lo = kept.iter().map(|t| t.0).min().unwrap();
        let hi = kept.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![proto; (hi - lo + 1) as usize];
        for (k, x) in kept {
            let slot = &mut coeffs[(k - lo) as usize];
            *slot = &*slot + &x;
        }
        LoopElement { truncation, lo, coeffs, twist, truncation_loss: loss }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn generators(&self) -> u8 {
        self.coeffs[0].generators()
    }

    pub fn size(&self) -> usize {
        self.coeffs[0].shape().0
    }

    /// Stored power window `[lo, hi]`.
    pub fn window(&self) -> (i32, i32) {
        (self.lo, self.lo + self.coeffs.len() as i32 - 1)
    }

    /// Window of powers carrying a nonzero coefficient, if any.
    pub fn support(&self) -> Option<(i32, i32)> {
        let nz: Vec<i32> = self.terms().filter(|(_, x)| !x.is_zero()).map(|(k, _)| k).collect();
        Some((*nz.iter().min()?, *nz.iter().max()?))
    }

    pub fn coeff(&self, k: i32) -> GMat {
        let (lo, hi) = self.window();
        if k < lo || k > hi {
            self.coeffs[0].zero_like()
        } else {
            self.coeffs[(k - lo) as usize].clone()
        }
    }

    pub fn coeff_ref(&self, k: i32) -> Option<&GMat> {
        let (lo, hi) = self.window();
        (k >= lo && k <= hi).then(|| &self.coeffs[(k - lo) as usize])
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &GMat)> {
        self.coeffs.iter().enumerate().map(move |(i, x)| (self.lo + i as i32, x))
    }

    pub fn map(&self, f: impl Fn(&GMat) -> GMat) -> Self {
        LoopElement { truncation: self.truncation, lo: self.lo, coeffs: self.coeffs.iter().map(f).collect(), twist: self.twist, truncation_loss: 0.0 }
    }

    /// Coefficient-wise map that may depend on the power.
    pub fn map_indexed(&self, f: impl Fn(i32, &GMat) -> GMat) -> Self {
        let coeffs = self.terms().map(|(k, x)| f(k, x)).collect();
        LoopElement { truncation: self.truncation, lo: self.lo, coeffs, twist: self.twist, truncation_loss: 0.0 }
    }

    pub fn with_truncation(&self, truncation: usize) -> Self {
        let terms = self.terms().map(|(k, x)| (k, x.clone())).collect();
        LoopElement::from_terms(terms, truncation, self.twist)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.max_abs()))
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|x| x.scale(s))
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut terms: Vec<(i32, GMat)> = self.terms().map(|(k, x)| (k, x.clone())).collect();
        terms.extend(o.terms().map(|(k, x)| (k, x.clone())));
        let twist = if self.twist == o.twist { self.twist } else { Twist::Untwisted };
        LoopElement::from_terms(terms, self.truncation.max(o.truncation), twist)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(C64::new(-1.0, 0.0)))
    }

    /// Largest coefficient difference over all powers.
    pub fn distance(&self, o: &Self) -> f64 {
        self.sub(o).max_abs()
    }

    /// Largest coefficient difference over powers in `[lo, hi]`.
    pub fn distance_on(&self, o: &Self, lo: i32, hi: i32) -> f64 {
        (lo..=hi).fold(0.0, |m, k| m.max((&self.coeff(k) - &o.coeff(k)).max_abs()))
    }

    /// Restriction to powers in `[lo, hi]`.
    pub fn restrict(&self, lo: i32, hi: i32) -> Self {
        let terms: Vec<(i32, GMat)> = self.terms().filter(|(k, _)| *k >= lo && *k <= hi).map(|(k, x)| (k, x.clone())).collect();
        if terms.is_empty() {
            return LoopElement::constant(self.coeffs[0].zero_like(), self.truncation, self.twist);
        }
        LoopElement::from_terms(terms, self.truncation, self.twist)
    }

    /// Horner evaluation at `lambda`.
    pub fn eval_at(&self, lambda: C64) -> GMat {
        let (lo, _) = self.window();
        let mut acc = self.coeffs[self.coeffs.len() - 1].clone();
        for x in self.coeffs.iter().rev().skip(1) {
            acc = &acc.scale(lambda) + x;
        }
        acc.scale(lambda.powi(lo))
    }

    /// Pointwise `X(lambda)^dagger` on the circle: coefficients `(X_{-k})^dagger`.
    pub fn circle_adjoint(&self) -> Self {
        let terms = self.terms().map(|(k, x)| (-k, x.adjoint())).collect();
        LoopElement::from_terms(terms, self.truncation, self.twist)
    }

    /// Values at the `m` circle points.
    pub fn samples(&self, m: usize) -> Vec<GMat> {
        circle_points(m).into_iter().map(|z| self.eval_at(z)).collect()
    }

    /// Discrete Fourier projection of `m` equispaced samples onto powers
    /// `[-N, N]`; the returned loop reports the largest coefficient in
    /// `N < |k| <= (m-1)/2` as truncation loss.
    pub fn from_samples(samples: &[GMat], truncation: usize, twist: Twist) -> Self {
        let m = samples.len();
        let half = ((m - 1) / 2) as i32;
        let n = truncation as i32;
        let coeffs = fourier_coefficients(samples, -half, half);
        let mut loss = 0.0f64;
        let mut kept = Vec::new();
        for (i, x) in coeffs.into_iter().enumerate() {
            let k = -half + i as i32;
            if k.abs() > n {
                loss = loss.max(x.max_abs());
            } else {
                kept.push((k, x));
            }
        }
        let mut out = LoopElement::from_terms(kept, truncation, twist);
        out.truncation_loss = loss;
        out
    }

    /// Body (numeric) part of every coefficient.
    pub fn body(&self) -> Self {
        let l = self.generators();
        self.map(|x| GMat::from_mat(l, x.body().clone()))
    }

    /// Twist residual: `tau X_k = (-1)^k X_k`, or `sigma X_k = i^k X_k`.
    pub fn twist_residual(&self, model: &LieModel) -> Result<f64, LieError> {
        self.twist_residual_as(model, self.twist)
    }

    pub fn twist_residual_as(&self, model: &LieModel, twist: Twist) -> Result<f64, LieError> {
        let mut worst = 0.0f64;
        for (k, x) in self.terms() {
            let r = match twist {
                Twist::Untwisted => 0.0,
                Twist::Tau => {
                    let t = model.tau(x);
                    let s = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    (&t - &x.scale_re(s)).max_abs()
                }
                Twist::Sigma => {
                    let t = model.sigma(x)?;
                    let ph = C64::from_polar(1.0, k as f64 * PI / 2.0);
                    (&t - &x.scale(ph)).max_abs()
                }
            };
            worst = worst.max(r);
        }
        Ok(worst)
    }

    /// Project every coefficient onto its twisted graded piece.
    pub fn project_twist(&self, model: &LieModel, twist: Twist) -> Result<Self, LieError> {
        let mut terms = Vec::with_capacity(self.coeffs.len());
        for (k, x) in self.terms() {
            let p = match twist {
                Twist::Untwisted => x.clone(),
                Twist::Tau => {
                    let (e, o) = model.cartan_parts(x);
                    if k.rem_euclid(2) == 0 {
                        e
                    } else {
                        o
                    }
                }
                Twist::Sigma => model.sigma_project(x, k)?,
            };
            terms.push((k, p));
        }
        let mut out = LoopElement::from_terms(terms, self.truncation, twist);
        out.twist = twist;
        Ok(out)
    }

    /// Sampled skew-hermiticity residual `max |X + X^dagger|` at `m` points.
    pub fn algebra_reality_residual(&self, m: usize) -> f64 {
        self.samples(m).iter().fold(0.0, |acc, x| acc.max((x + &x.adjoint()).max_abs()))
    }

    /// Sampled unitarity residual `max |X^dagger X - I|` at `m` points.
    pub fn unitarity_residual(&self, m: usize) -> f64 {
        let id = GMat::identity(self.generators(), self.size());
        self.samples(m).iter().fold(0.0, |acc, x| acc.max((&(&x.adjoint() * x) - &id).max_abs()))
    }

    pub fn to_serial(&self) -> Vec<LoopTermSerial> {
        self.terms()
            .filter(|(_, x)| !x.is_zero())
            .map(|(k, x)| LoopTermSerial { power: k, matrix: x.to_records() })
            .collect()
    }

    pub fn from_serial(l: u8, size: usize, terms: &[LoopTermSerial], truncation: usize, twist: Twist) -> Result<Self, crate::grassmann::GrassmannError> {
        let mut out = vec![(0, GMat::zeros(l, size, size))];
        for t in terms {
            out.push((t.power, GMat::from_records(l, &t.matrix)?));
        }
        Ok(LoopElement::from_terms(out, truncation, twist))
    }
}

/// Serialized loop coefficient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LoopTermSerial {
    pub power: i32,
    pub matrix: Vec<Vec<Vec<GrassmannRecord>>>,
}

/// Fourier coefficients for powers `lo..=hi` from equispaced samples.
pub fn fourier_coefficients(samples: &[GMat], lo: i32, hi: i32) -> Vec<GMat> {
    let m = samples.len();
    let l = samples[0].generators();
    let proto = samples[0].body().zeros_like();
    let inv_m = 1.0 / m as f64;
    (lo..=hi)
        .map(|k| {
            let mut acc: Vec<(u32, CMat)> = Vec::new();
            for (j, s) in samples.iter().enumerate() {
                let w = C64::from_polar(inv_m, -2.0 * PI * (k as f64) * (j as f64) / m as f64);
                for (mask, v) in s.terms() {
                    match acc.iter_mut().find(|t| t.0 == *mask) {
                        Some(t) => t.1.axpy(w, v),
                        None => acc.push((*mask, v.scale(w))),
                    }
                }
            }
            GMat::from_terms(l, &proto, acc)
        })
        .collect()
}

/// Cauchy product truncated to `[-N, N]` with truncation-loss accounting.
pub fn loop_mul(a: &LoopElement, b: &LoopElement) -> Result<LoopElement, LoopError> {
    if a.truncation != b.truncation {
        return Err(LoopError::TruncationMismatch(a.truncation, b.truncation));
    }
    let twist = match (a.twist, b.twist) {
        (x, y) if x == y => x,
        (x, y) => return Err(LoopError::TwistMismatch(x, y)),
    };
    Ok(mul_window(a, b, -(a.truncation as i32), a.truncation as i32, twist))
}

/// Cauchy product keeping only powers in `[lo, hi]`.
pub fn mul_window(a: &LoopElement, b: &LoopElement, lo: i32, hi: i32, twist: Twist) -> LoopElement {
    let (alo, ahi) = a.window();
    let (blo, bhi) = b.window();
    let plo = (alo + blo).max(lo);
    let phi = (ahi + bhi).min(hi);
    let proto = (&a.coeffs[0] * &b.coeffs[0]).zero_like();
    let mut loss = 0.0f64;
    let mut terms: Vec<(i32, GMat)> = Vec::new();
    for p in (alo + blo)..=(ahi + bhi) {
        let inside = p >= plo && p <= phi;
        let mut acc = proto.clone();
        let mut any = false;
        for i in alo..=ahi {
            let j = p - i;
            if j < blo || j > bhi {
                continue;
            }
            let x = &a.coeffs[(i - alo) as usize];
            let y = &b.coeffs[(j - blo) as usize];
            if x.is_zero() || y.is_zero() {
                continue;
            }
            acc = &acc + &(x * y);
            any = true;
        }
        if inside {
            terms.push((p, acc));
        } else if any {
            loss = loss.max(acc.max_abs());
        }
    }
    if terms.is_empty() {
        terms.push((0, proto));
    }
    let mut out = LoopElement::from_terms(terms, a.truncation.max(b.truncation), twist);
    out.truncation_loss = loss.max(a.truncation_loss).max(b.truncation_loss);
    out
}

/// Inverse of a loop: per-sample inversion and Fourier projection as the
/// starting point, then Newton steps `X <- X (2I - a X)`.
pub fn loop_inverse(a: &LoopElement) -> Result<LoopElement, LoopError> {
    let n = a.truncation;
    let m = sample_count(n);
    let pts = circle_points(m);
    let mut inv_samples = Vec::with_capacity(m);
    for (z, s) in pts.iter().zip(a.samples(m)) {
        let det = s.body().det();
        if det.norm() < 1e-12 {
            return Err(LoopError::Singular { lambda: *z, det: det.norm() });
        }
        inv_samples.push(s.try_inverse().ok_or(LoopError::Singular { lambda: *z, det: det.norm() })?);
    }
    let mut x = LoopElement::from_samples(&inv_samples, n, a.twist);
    let id = LoopElement::identity(a.generators(), a.size(), n, a.twist);
    let two = id.scale(C64::new(2.0, 0.0));
    let win = n as i32;
    let mut res = inverse_residual(a, &x, &id, win);
    for _ in 0..4 {
        if res <= 1e-13 {
            break;
        }
        let ax = mul_window(a, &x, -win, win, a.twist);
        let next = mul_window(&x, &two.sub(&ax), -win, win, a.twist);
        let r = inverse_residual(a, &next, &id, win);
        if r >= res {
            break;
        }
        x = next;
        res = r;
    }
    Ok(x)
}

fn inverse_residual(a: &LoopElement, x: &LoopElement, id: &LoopElement, win: i32) -> f64 {
    let ax = mul_window(a, x, -win, win, a.twist);
    ax.distance_on(id, -win, win)
}

/// Exact coefficient partition at power 0: `(powers <= -1, powers >= 0)`.
pub fn split_plus_minus(a: &LoopElement) -> (LoopElement, LoopElement) {
    let (lo, hi) = a.window();
    let minus = a.restrict(lo.min(-1), -1);
    let plus = a.restrict(0, hi.max(0));
    (minus, plus)
}

pub fn eval_at(a: &LoopElement, lambda: C64) -> GMat {
    a.eval_at(lambda)
}

/// Power series inverse of a `Lambda^+` loop to order `order`.
pub fn plus_inverse(h: &LoopElement, order: usize) -> LoopElement {
    let h0inv = h.coeff(0).inverse();
    let mut out: Vec<GMat> = vec![h0inv.clone()];
    for p in 1..=order as i32 {
        let mut acc = h0inv.zero_like();
        for j in 1..=p {
            if let Some(hj) = h.coeff_ref(j) {
                if hj.is_zero() {
                    continue;
                }
                acc = &acc + &(hj * &out[(p - j) as usize]);
            }
        }
        out.push(-(&h0inv * &acc));
    }
    let terms = out.into_iter().enumerate().map(|(k, x)| (k as i32, x)).collect();
    LoopElement::from_terms(terms, h.truncation.max(order), h.twist)
}

/// `exp(X)` for `X` with nonnegative powers, truncated at power `order`.
pub fn plus_exp(x: &LoopElement, order: usize) -> LoopElement {
    let l = x.generators();
    let n = x.size();
    let id = LoopElement::identity(l, n, x.truncation, x.twist);
    let o = order as i32;
    let mut term = id.clone();
    let mut sum = id;
    for k in 1..40 {
        term = mul_window(&term, x, 0, o, x.twist).scale(C64::new(1.0 / k as f64, 0.0));
        if term.max_abs() < 1e-18 {
            break;
        }
        sum = sum.add(&term);
    }
    sum.twist = x.twist;
    sum
}
