//! Small dense complex matrices used as Grassmann coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;
use smallvec::SmallVec;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Row-major dense matrix with inline storage up to 4x4.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: SmallVec<[C64; 16]>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: SmallVec::from_elem(C64::new(0.0, 0.0), rows * cols) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = re(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = SmallVec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let cc = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, cc, |i, j| rows[i][j])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cc = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, cc, |i, j| re(rows[i][j]))
    }

    pub fn diag(d: &[C64]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { re(0.0) })
    }

    /// Unit column vector e_k of length n.
    pub fn unit(n: usize, k: usize) -> Self {
        Self::from_fn(n, 1, |i, _| if i == k { re(1.0) } else { re(0.0) })
    }

    /// Single-entry matrix E_ij.
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m[(i, j)] = re(1.0);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn conj(&self) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frob(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// a += s * b
    pub fn axpy(&mut self, s: C64, b: &CMat) {
        debug_assert_eq!(self.shape(), b.shape());
        for (x, y) in self.data.iter_mut().zip(b.data.iter()) {
            *x += s * y;
        }
    }

    pub fn commutator(&self, o: &CMat) -> CMat {
        &(self * o) - &(o * self)
    }

    pub fn column(&self, j: usize) -> CMat {
        Self::from_fn(self.rows, 1, |i, _| self[(i, j)])
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| f(*z)).collect() }
    }

    pub fn to_na(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub fn from_na(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Inverse by LU; `None` when numerically singular.
    pub fn try_inverse(&self) -> Option<CMat> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        if n == 1 {
            let z = self.data[0];
            return if z.norm() == 0.0 { None } else { Some(Self::from_fn(1, 1, |_, _| 1.0 / z)) };
        }
        if n == 2 {
            let (a, b, cc, d) = (self.data[0], self.data[1], self.data[2], self.data[3]);
            let det = a * d - b * cc;
            if det.norm() == 0.0 {
                return None;
            }
            let inv = 1.0 / det;
            return Some(CMat {
                rows: 2,
                cols: 2,
                data: SmallVec::from_slice(&[d * inv, -b * inv, -cc * inv, a * inv]),
            });
        }
        self.to_na().try_inverse().map(|m| Self::from_na(&m))
    }

    pub fn inverse(&self) -> CMat {
        self.try_inverse().expect("singular matrix")
    }

    pub fn det(&self) -> C64 {
        self.to_na().determinant()
    }

    /// Matrix exponential by scaling and squaring with a Taylor core.
    pub fn exp(&self) -> CMat {
        let n = self.rows;
        let norm = self.max_abs() * n as f64;
        let mut s = 0;
        let mut scaled = self.clone();
        if norm > 0.5 {
            s = (norm / 0.5).log2().ceil() as i32;
            scaled = self.scale_re(0.5f64.powi(s));
        }
        let mut term = CMat::identity(n);
        let mut sum = CMat::identity(n);
        for k in 1..20 {
            term = &term * &scaled;
            term = term.scale_re(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Mul<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn mul(self, o: &CMat) -> CMat {
        debug_assert_eq!(self.cols, o.rows, "shape mismatch in product");
        let (n, k, m) = (self.rows, self.cols, o.cols);
        let mut out = CMat::zeros(n, m);
        for i in 0..n {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out.data[i * m + j] += a * o.data[l * m + j];
                }
            }
        }
        out
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, o: CMat) -> CMat {
        &self * &o
    }
}

impl<'a> Add<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn add(self, o: &CMat) -> CMat {
        let mut r = self.clone();
        r += o;
        r
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(mut self, o: CMat) -> CMat {
        self += &o;
        self
    }
}

impl<'a> Sub<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn sub(self, o: &CMat) -> CMat {
        let mut r = self.clone();
        r -= o;
        r
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(mut self, o: CMat) -> CMat {
        self -= &o;
        self
    }
}

impl<'a> AddAssign<&'a CMat> for CMat {
    fn add_assign(&mut self, o: &CMat) {
        debug_assert_eq!(self.shape(), o.shape());
        for (x, y) in self.data.iter_mut().zip(o.data.iter()) {
            *x += y;
        }
    }
}

impl<'a> SubAssign<&'a CMat> for CMat {
    fn sub_assign(&mut self, o: &CMat) {
        debug_assert_eq!(self.shape(), o.shape());
        for (x, y) in self.data.iter_mut().zip(o.data.iter()) {
            *x -= y;
        }
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(mut self) -> CMat {
        for x in self.data.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl<'a> Neg for &'a CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        -self.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let a = CMat::from_rows(&[
            &[c(2.0, 1.0), c(0.5, 0.0), c(0.0, -1.0)],
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.3, 0.2)],
            &[c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)],
        ]);
        let e = &(&a * &a.inverse()) - &CMat::identity(3);
        assert!(e.max_abs() < 1e-14);
    }

    #[test]
    fn exp_matches_nalgebra() {
        let a = CMat::from_rows(&[&[c(0.1, 2.0), c(1.5, 0.0)], &[c(-0.7, 0.3), c(0.0, -1.0)]]);
        let ours = a.exp();
        let theirs = CMat::from_na(&a.to_na().exp());
        assert!((&ours - &theirs).max_abs() < 1e-12);
    }

    #[test]
    fn adjoint_reverses_products() {
        let a = CMat::from_rows(&[&[c(1.0, 2.0), c(0.0, 1.0)], &[c(3.0, 0.0), c(1.0, -1.0)]]);
        let b = CMat::from_rows(&[&[c(0.5, 0.0), c(2.0, 1.0)], &[c(0.0, -3.0), c(1.0, 0.0)]]);
        let lhs = (&a * &b).adjoint();
        let rhs = &b.adjoint() * &a.adjoint();
        assert!((&lhs - &rhs).max_abs() < 1e-15);
    }
}
