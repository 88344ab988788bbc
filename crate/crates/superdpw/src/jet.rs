//! Truncated bivariate Taylor jets and theta-expansions over `R^{2|2}`.
//!
//! `Jet<T>` holds normalized Taylor coefficients `c_ij = d_x^i d_y^j f / (i! j!)`
//! for `i + j <= order`. `Sup<T>` holds the four coefficients of
//! `A0 + th1 A1 + th2 A2 + th1 th2 A12` with the thetas written on the left.

use crate::cmat::{C64, I};
use crate::grassmann::{GMat, GrassmannNumber};

/// Minimal ring interface needed by the superfield calculus.
pub trait Alg: Clone + Send + Sync + std::fmt::Debug {
    fn zero_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, s: C64) -> Self;
    /// Grassmann parity automorphism (negate odd part).
    fn flip(&self) -> Self;
    fn max_abs(&self) -> f64;
}

pub trait AlgInv: Alg {
    fn inv(&self) -> Self;
}

impl Alg for GMat {
    fn zero_like(&self) -> Self {
        GMat::zero_like(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, s: C64) -> Self {
        GMat::scale(self, s)
    }
    fn flip(&self) -> Self {
        GMat::flip(self)
    }
    fn max_abs(&self) -> f64 {
        GMat::max_abs(self)
    }
}

impl AlgInv for GMat {
    fn inv(&self) -> Self {
        self.inverse()
    }
}

impl Alg for GrassmannNumber {
    fn zero_like(&self) -> Self {
        GrassmannNumber::zero_like(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, s: C64) -> Self {
        GrassmannNumber::scale(self, s)
    }
    fn flip(&self) -> Self {
        GrassmannNumber::flip(self)
    }
    fn max_abs(&self) -> f64 {
        GrassmannNumber::max_abs(self)
    }
}

impl AlgInv for GrassmannNumber {
    fn inv(&self) -> Self {
        self.try_inverse().expect("zero body")
    }
}

#[inline]
fn tri(i: usize, j: usize) -> usize {
    let s = i + j;
    s * (s + 1) / 2 + j
}

fn tri_len(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

#[derive(Clone, Debug)]
pub struct Jet<T> {
    order: usize,
    c: Vec<T>,
}

impl<T: Alg> Jet<T> {
    pub fn constant(v: T, order: usize) -> Self {
        let z = v.zero_like();
        let mut c = vec![z; tri_len(order)];
        c[0] = v;
        Jet { order, c }
    }

    /// Build from derivative values `d_x^i d_y^j f` via `f(i, j)`.
    pub fn from_derivatives(order: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut c = Vec::with_capacity(tri_len(order));
        for s in 0..=order {
            for j in 0..=s {
                let i = s - j;
                let fact = (factorial(i) * factorial(j)) as f64;
                c.push(f(i, j).scale(C64::new(1.0 / fact, 0.0)));
            }
        }
        Jet { order, c }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> &T {
        &self.c[0]
    }

    /// Normalized Taylor coefficient of `x^i y^j`.
    pub fn coeff(&self, i: usize, j: usize) -> &T {
        &self.c[tri(i, j)]
    }

    /// The derivative `d_x^i d_y^j f` at the expansion point.
    pub fn derivative(&self, i: usize, j: usize) -> T {
        let fact = (factorial(i) * factorial(j)) as f64;
        self.c[tri(i, j)].scale(C64::new(fact, 0.0))
    }

    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        Jet { order, c: self.c[..tri_len(order)].to_vec() }
    }

    pub fn dx(&self) -> Self {
        assert!(self.order >= 1, "jet order exhausted");
        let o = self.order - 1;
        let mut c = Vec::with_capacity(tri_len(o));
        for s in 0..=o {
            for j in 0..=s {
                let i = s - j;
                c.push(self.c[tri(i + 1, j)].scale(C64::new((i + 1) as f64, 0.0)));
            }
        }
        Jet { order: o, c }
    }

    pub fn dy(&self) -> Self {
        assert!(self.order >= 1, "jet order exhausted");
        let o = self.order - 1;
        let mut c = Vec::with_capacity(tri_len(o));
        for s in 0..=o {
            for j in 0..=s {
                let i = s - j;
                c.push(self.c[tri(i, j + 1)].scale(C64::new((j + 1) as f64, 0.0)));
            }
        }
        Jet { order: o, c }
    }

    /// `d/dz = (d_x - i d_y) / 2`.
    pub fn dz(&self) -> Self {
        self.dx().sub(&self.dy().scale(I)).scale(C64::new(0.5, 0.0))
    }

    /// `d/dzbar = (d_x + i d_y) / 2`.
    pub fn dzb(&self) -> Self {
        self.dx().add(&self.dy().scale(I)).scale(C64::new(0.5, 0.0))
    }

    pub fn map<U: Alg>(&self, f: impl Fn(&T) -> U) -> Jet<U> {
        Jet { order: self.order, c: self.c.iter().map(f).collect() }
    }

    fn zip(&self, o: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        let order = self.order.min(o.order);
        let n = tri_len(order);
        Jet { order, c: (0..n).map(|k| f(&self.c[k], &o.c[k])).collect() }
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

impl<T: Alg> Alg for Jet<T> {
    fn zero_like(&self) -> Self {
        Jet { order: self.order, c: self.c.iter().map(|v| v.zero_like()).collect() }
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b))
    }
    fn mul(&self, o: &Self) -> Self {
        let order = self.order.min(o.order);
        let mut c: Vec<Option<T>> = vec![None; tri_len(order)];
        for s1 in 0..=order {
            for j1 in 0..=s1 {
                let i1 = s1 - j1;
                let a = &self.c[tri(i1, j1)];
                for s2 in 0..=(order - s1) {
                    for j2 in 0..=s2 {
                        let i2 = s2 - j2;
                        let p = a.mul(&o.c[tri(i2, j2)]);
                        let k = tri(i1 + i2, j1 + j2);
                        c[k] = Some(match c[k].take() {
                            Some(acc) => acc.add(&p),
                            None => p,
                        });
                    }
                }
            }
        }
        Jet { order, c: c.into_iter().map(|v| v.expect("filled")).collect() }
    }
    fn scale(&self, s: C64) -> Self {
        self.map(|v| v.scale(s))
    }
    fn flip(&self) -> Self {
        self.map(|v| v.flip())
    }
    fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }
}

impl<T: AlgInv> AlgInv for Jet<T> {
    fn inv(&self) -> Self {
        let v0 = self.c[0].inv();
        let base = Jet::constant(v0.clone(), self.order);
        let mut r = self.clone();
        r.c[0] = r.c[0].zero_like();
        let q = base.mul(&r).scale(C64::new(-1.0, 0.0));
        let mut term = base.clone();
        let mut sum = base;
        for _ in 0..self.order {
            term = q.mul(&term);
            sum = sum.add(&term);
        }
        sum
    }
}

/// Theta-expansion `A0 + th1 A1 + th2 A2 + th1 th2 A12`.
#[derive(Clone, Debug)]
pub struct Sup<T> {
    pub c: [T; 4],
}

impl<T: Alg> Sup<T> {
    pub fn new(a0: T, a1: T, a2: T, a12: T) -> Self {
        Sup { c: [a0, a1, a2, a12] }
    }

    pub fn body_only(a0: T) -> Self {
        let z = a0.zero_like();
        Sup { c: [a0, z.clone(), z.clone(), z] }
    }

    pub fn map<U: Alg>(&self, f: impl Fn(&T) -> U) -> Sup<U> {
        Sup { c: [f(&self.c[0]), f(&self.c[1]), f(&self.c[2]), f(&self.c[3])] }
    }

    /// From complex-theta coefficients of `a + th b + thbar c + th thbar d`.
    pub fn from_complex(a: T, b: T, cc: T, d: T) -> Self {
        let a1 = b.add(&cc);
        let a2 = b.sub(&cc).scale(I);
        let a12 = d.scale(C64::new(0.0, -2.0));
        Sup::new(a, a1, a2, a12)
    }

    /// Complex-theta coefficients `(a, b, c, d)` of `a + th b + thbar c + th thbar d`.
    pub fn to_complex(&self) -> [T; 4] {
        let half = C64::new(0.5, 0.0);
        let b = self.c[1].sub(&self.c[2].scale(I)).scale(half);
        let cc = self.c[1].add(&self.c[2].scale(I)).scale(half);
        let d = self.c[3].scale(C64::new(0.0, 0.5));
        [self.c[0].clone(), b, cc, d]
    }
}

impl<T: Alg> Alg for Sup<T> {
    fn zero_like(&self) -> Self {
        self.map(|v| v.zero_like())
    }
    fn add(&self, o: &Self) -> Self {
        Sup::new(self.c[0].add(&o.c[0]), self.c[1].add(&o.c[1]), self.c[2].add(&o.c[2]), self.c[3].add(&o.c[3]))
    }
    fn sub(&self, o: &Self) -> Self {
        Sup::new(self.c[0].sub(&o.c[0]), self.c[1].sub(&o.c[1]), self.c[2].sub(&o.c[2]), self.c[3].sub(&o.c[3]))
    }
    fn mul(&self, o: &Self) -> Self {
        let [a0, a1, a2, a12] = &self.c;
        let [b0, b1, b2, b12] = &o.c;
        let pa0 = a0.flip();
        let c0 = a0.mul(b0);
        let c1 = pa0.mul(b1).add(&a1.mul(b0));
        let c2 = pa0.mul(b2).add(&a2.mul(b0));
        let c12 = a0.mul(b12).add(&a1.flip().mul(b2)).sub(&a2.flip().mul(b1)).add(&a12.mul(b0));
        Sup::new(c0, c1, c2, c12)
    }
    fn scale(&self, s: C64) -> Self {
        self.map(|v| v.scale(s))
    }
    fn flip(&self) -> Self {
        let m = C64::new(-1.0, 0.0);
        Sup::new(self.c[0].flip(), self.c[1].flip().scale(m), self.c[2].flip().scale(m), self.c[3].flip())
    }
    fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.max_abs()))
    }
}

impl<T: AlgInv> AlgInv for Sup<T> {
    fn inv(&self) -> Self {
        let [a0, a1, a2, a12] = &self.c;
        let b0 = a0.inv();
        let pa0_inv = a0.flip().inv();
        let m1 = C64::new(-1.0, 0.0);
        let b1 = pa0_inv.mul(&a1.mul(&b0)).scale(m1);
        let b2 = pa0_inv.mul(&a2.mul(&b0)).scale(m1);
        let rest = a1.flip().mul(&b2).sub(&a2.flip().mul(&b1)).add(&a12.mul(&b0));
        let b12 = b0.mul(&rest).scale(m1);
        Sup::new(b0, b1, b2, b12)
    }
}

/// Superfield jets: theta-expansion whose coefficients are Taylor jets.
pub type SuperJet<T> = Sup<Jet<T>>;

impl<T: Alg> Sup<Jet<T>> {
    pub fn order(&self) -> usize {
        self.c.iter().map(|j| j.order()).min().unwrap_or(0)
    }

    pub fn value(&self) -> Sup<T> {
        self.map(|j| j.value().clone())
    }

    fn jmap(&self, f: impl Fn(&Jet<T>) -> Jet<T>) -> Self {
        Sup { c: [f(&self.c[0]), f(&self.c[1]), f(&self.c[2]), f(&self.c[3])] }
    }

    pub fn dx(&self) -> Self {
        self.jmap(|j| j.dx())
    }

    pub fn dy(&self) -> Self {
        self.jmap(|j| j.dy())
    }

    pub fn dz(&self) -> Self {
        self.jmap(|j| j.dz())
    }

    pub fn dzb(&self) -> Self {
        self.jmap(|j| j.dzb())
    }

    /// `D1 = d/dth1 - th1 d_x - th2 d_y`.
    pub fn d1(&self) -> Self {
        let o = self.order().saturating_sub(1);
        let [a0, a1, a2, a12] = &self.c;
        Sup::new(
            a1.truncate(o),
            a0.dx().scale(C64::new(-1.0, 0.0)),
            a12.truncate(o).sub(&a0.dy()),
            a1.dy().sub(&a2.dx()),
        )
    }

    /// `D2 = d/dth2 - th1 d_y + th2 d_x`.
    pub fn d2(&self) -> Self {
        let o = self.order().saturating_sub(1);
        let [a0, a1, a2, a12] = &self.c;
        let m1 = C64::new(-1.0, 0.0);
        Sup::new(
            a2.truncate(o),
            a12.truncate(o).add(&a0.dy()).scale(m1),
            a0.dx(),
            a2.dy().add(&a1.dx()).scale(m1),
        )
    }

    /// `D = (D1 - i D2) / 2 = d/dth - th d_z`.
    pub fn d(&self) -> Self {
        self.d1().sub(&self.d2().scale(I)).scale(C64::new(0.5, 0.0))
    }

    /// `Dbar = (D1 + i D2) / 2`.
    pub fn dbar(&self) -> Self {
        self.d1().add(&self.d2().scale(I)).scale(C64::new(0.5, 0.0))
    }

    pub fn truncate(&self, order: usize) -> Self {
        self.jmap(|j| j.truncate(order))
    }
}

/// `exp(x)` by its Taylor series, stopped once terms fall below `1e-18`.
pub fn alg_exp<T: Alg>(x: &T, one: &T) -> T {
    let mut term = one.clone();
    let mut sum = one.clone();
    for k in 1..60 {
        term = term.mul(x).scale(C64::new(1.0 / k as f64, 0.0));
        if term.max_abs() < 1e-18 {
            break;
        }
        sum = sum.add(&term);
    }
    sum
}

/// Supercommutator of pure-parity elements given their parities (0 even, 1 odd).
pub fn super_bracket<T: Alg>(a: &T, b: &T, pa: u32, pb: u32) -> T {
    let ab = a.mul(b);
    let ba = b.mul(a);
    if pa * pb == 1 {
        ab.add(&ba)
    } else {
        ab.sub(&ba)
    }
}
