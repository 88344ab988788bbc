//! Weierstrass data to superharmonic frames.
//!
//! A potential is the odd holomorphic `mu(D) = mu_D0 + theta mu_Dtheta`
//! with loop values in `Lambda_{-1,inf}`. The pipeline integrates the even
//! holomorphic frame `g0` at every circle sample, factors it as `U h0`, then
//! splits the odd part to obtain `F = U (1 + th1 a + th2 b + th1 th2 c)` with
//! `a = U^-1 Psi1`, `b = U^-1 Psi2`, `c = U^-1 f`.

use crate::cmat::{c, re, C64, I};
use crate::grassmann::GMat;
use crate::iwasawa::{iwasawa_samples, FrameResiduals, IwasawaError, IwasawaOptions};
use crate::jet::{Alg, AlgInv, Jet, Sup, SuperJet};
use crate::liealg::{LieError, LieModel};
use crate::loops::{circle_points, mul_window, plus_exp, plus_inverse, sample_count, LoopElement, Twist};
use crate::superfield::{GridField, SuperfieldError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DpwError {
    #[error("potential has a coefficient at lambda^{power} (norm {norm:e}) below the allowed window")]
    Window { power: i32, norm: f64 },
    #[error("{0} has the wrong Grassmann parity")]
    Parity(&'static str),
    #[error("potential is not holomorphic: max |d/dzbar| = {0:e}")]
    NotHolomorphic(f64),
    #[error("zero-curvature residual {0:e} exceeds the tolerance")]
    NotFlat(f64),
    #[error("gauge has a coefficient at a negative power (norm {0:e})")]
    GaugeWindow(f64),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Iwasawa(#[from] IwasawaError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Superfield(#[from] SuperfieldError),
}

/// Uniform rectangular grid, node `(i, j)` at `(x0 + i hx, y0 + j hy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    /// `n x n` nodes covering `[-extent, extent]^2`.
    pub fn square(n: usize, extent: f64) -> Self {
        let h = 2.0 * extent / (n.max(2) - 1) as f64;
        Grid { nx: n, ny: n, x0: -extent, y0: -extent, hx: h, hy: h }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> (f64, f64) {
        let (i, j) = (k % self.nx, k / self.nx);
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x0 + i as f64 * self.hx).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y0 + j as f64 * self.hy).collect()
    }

    /// Interior nodes at least `margin` cells away from the boundary.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|k| {
                let (i, j) = (k % self.nx, k / self.nx);
                i >= margin && j >= margin && i + margin < self.nx && j + margin < self.ny
            })
            .collect()
    }

    pub fn field(&self, values: Vec<Sup<GMat>>) -> GridField {
        GridField { x0: self.x0, y0: self.y0, hx: self.hx, hy: self.hy, nx: self.nx, ny: self.ny, values }
    }
}

pub type LoopMap = dyn Fn(f64, f64) -> LoopElement + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Generic,
    Normalized,
    Cp2,
    Gauged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialPart {
    D0,
    DTheta,
}

/// One monomial `z^p lambda^k X` of a polynomial potential.
#[derive(Debug, Clone)]
pub struct PotentialTerm {
    pub part: PotentialPart,
    pub z_power: u32,
    pub lambda_power: i32,
    pub matrix: GMat,
}

#[derive(Clone)]
pub struct Potential {
    pub generators: u8,
    pub size: usize,
    pub truncation: usize,
    pub twist: Twist,
    pub provenance: Provenance,
    mu_d0: Arc<LoopMap>,
    mu_dtheta: Arc<LoopMap>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Potential({}x{}, L={}, N={}, {:?}, {:?})", self.size, self.size, self.generators, self.truncation, self.twist, self.provenance)
    }
}

fn zpow(x: f64, y: f64, p: u32) -> C64 {
    c(x, y).powu(p)
}

impl Potential {
    pub fn new(
        generators: u8,
        size: usize,
        truncation: usize,
        twist: Twist,
        provenance: Provenance,
        mu_d0: impl Fn(f64, f64) -> LoopElement + Send + Sync + 'static,
        mu_dtheta: impl Fn(f64, f64) -> LoopElement + Send + Sync + 'static,
    ) -> Self {
        Potential { generators, size, truncation, twist, provenance, mu_d0: Arc::new(mu_d0), mu_dtheta: Arc::new(mu_dtheta) }
    }

    pub fn zero(l: u8, size: usize, truncation: usize, twist: Twist) -> Self {
        let z = move |_: f64, _: f64| LoopElement::zero(l, size, truncation, twist);
        Potential::new(l, size, truncation, twist, Provenance::Generic, z, z)
    }

    /// Polynomial potential in `z`; parities and the `lambda >= -1` window are
    /// checked on the coefficients.
    pub fn polynomial(l: u8, size: usize, truncation: usize, twist: Twist, terms: Vec<PotentialTerm>) -> Result<Self, DpwError> {
        for t in &terms {
            if t.matrix.shape() != (size, size) {
                return Err(DpwError::Shape(format!("potential coefficient is not {size}x{size}")));
            }
            if t.lambda_power < -1 && !t.matrix.is_zero() {
                return Err(DpwError::Window { power: t.lambda_power, norm: t.matrix.max_abs() });
            }
            match t.part {
                PotentialPart::D0 if !t.matrix.is_odd() => return Err(DpwError::Parity("mu_D0")),
                PotentialPart::DTheta if !t.matrix.is_even() => return Err(DpwError::Parity("mu_Dtheta")),
                _ => {}
            }
        }
        let pick = |part: PotentialPart| {
            let ts: Vec<PotentialTerm> = terms.iter().filter(|t| t.part == part).cloned().collect();
            move |x: f64, y: f64| {
                let mut out: Vec<(i32, GMat)> = ts.iter().map(|t| (t.lambda_power, t.matrix.scale(zpow(x, y, t.z_power)))).collect();
                if out.is_empty() {
                    out.push((0, GMat::zeros(l, size, size)));
                }
                LoopElement::from_terms(out, truncation, twist)
            }
        };
        Ok(Potential::new(l, size, truncation, twist, Provenance::Generic, pick(PotentialPart::D0), pick(PotentialPart::DTheta)))
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn mu_d0(&self, x: f64, y: f64) -> LoopElement {
        (self.mu_d0)(x, y)
    }

    pub fn mu_dtheta(&self, x: f64, y: f64) -> LoopElement {
        (self.mu_dtheta)(x, y)
    }

    /// The `g0`-potential `-(mu_Dtheta + mu_D0^2)`, window `[-2, N]`.
    pub fn induced_even(&self, x: f64, y: f64) -> LoopElement {
        let m0 = self.mu_d0(x, y);
        let sq = mul_window(&m0, &m0, -2, self.truncation as i32, self.twist);
        sq.add(&self.mu_dtheta(x, y)).scale(re(-1.0))
    }

    /// Window and parity check at the given points.
    pub fn validate(&self, points: &[(f64, f64)]) -> Result<(), DpwError> {
        for &(x, y) in points {
            for (name, lp, odd) in [("mu_D0", self.mu_d0(x, y), true), ("mu_Dtheta", self.mu_dtheta(x, y), false)] {
                if lp.size() != self.size {
                    return Err(DpwError::Shape(format!("{name} is not {0}x{0}", self.size)));
                }
                for (k, v) in lp.terms() {
                    if v.is_zero() {
                        continue;
                    }
                    if k < -1 {
                        return Err(DpwError::Window { power: k, norm: v.max_abs() });
                    }
                    if (odd && !v.is_odd()) || (!odd && !v.is_even()) {
                        return Err(DpwError::Parity(name));
                    }
                }
            }
        }
        Ok(())
    }

    /// `max |d/dzbar|` of both coefficient maps by central differences.
    pub fn holomorphy_residual(&self, points: &[(f64, f64)]) -> f64 {
        let d = 1e-4;
        let mut worst = 0.0f64;
        for &(x, y) in points {
            for f in [&self.mu_d0, &self.mu_dtheta] {
                let dx = f(x + d, y).sub(&f(x - d, y));
                let dy = f(x, y + d).sub(&f(x, y - d));
                let dzb = dx.add(&dy.scale(I)).scale(re(0.25 / d));
                worst = worst.max(dzb.max_abs());
            }
        }
        worst
    }
}

/// Normalized potential `mu(D) = lambda^-1 eta` for an odd `g1^C`-valued
/// holomorphic `eta`.
pub fn normalized_potential_from_eta(l: u8, size: usize, truncation: usize, twist: Twist, eta: impl Fn(f64, f64) -> GMat + Send + Sync + 'static) -> Potential {
    let d0 = move |x: f64, y: f64| LoopElement::monomial(-1, eta(x, y), truncation, twist);
    let zero = move |_: f64, _: f64| LoopElement::zero(l, size, truncation, twist);
    Potential::new(l, size, truncation, twist, Provenance::Normalized, d0, zero)
}

/// Values of `g0` at the circle samples of every grid node.
#[derive(Debug, Clone)]
pub struct BodyFrames {
    pub grid: Grid,
    pub values: Vec<Vec<GMat>>,
    /// Largest difference to the values obtained along the other L-path.
    pub path_independence: f64,
}

fn even_samples(p: &Potential, x: f64, y: f64, pts: &[C64]) -> Vec<GMat> {
    let a = p.induced_even(x, y);
    pts.iter().map(|z| a.eval_at(*z)).collect()
}

fn rk4_segment(p: &Potential, pts: &[C64], g: &mut [GMat], from: (f64, f64), to: (f64, f64), steps: usize) {
    let (dx, dy) = ((to.0 - from.0) / steps as f64, (to.1 - from.1) / steps as f64);
    let dz = c(dx, dy);
    let at = |s: f64| (from.0 + s * dx, from.1 + s * dy);
    let mut a0 = {
        let (x, y) = at(0.0);
        even_samples(p, x, y, pts)
    };
    for k in 0..steps {
        let (xh, yh) = at(k as f64 + 0.5);
        let (x1, y1) = at(k as f64 + 1.0);
        let ah = even_samples(p, xh, yh, pts);
        let a1 = even_samples(p, x1, y1, pts);
        for m in 0..g.len() {
            let gm = &g[m];
            let k1 = (gm * &a0[m]).scale(dz);
            let k2 = (&(gm + &k1.scale_re(0.5)) * &ah[m]).scale(dz);
            let k3 = (&(gm + &k2.scale_re(0.5)) * &ah[m]).scale(dz);
            let k4 = (&(gm + &k3) * &a1[m]).scale(dz);
            let inc = &(&(&k1 + &k2.scale_re(2.0)) + &k3.scale_re(2.0)) + &k4;
            g[m] = gm + &inc.scale_re(1.0 / 6.0);
        }
        a0 = a1;
    }
}

/// Values along a coordinate line starting from `start` at coordinate 0.
fn march(p: &Potential, pts: &[C64], start: &[GMat], coords: &[f64], line: impl Fn(f64) -> (f64, f64), h: f64, substeps: usize) -> Vec<Vec<GMat>> {
    let mut out: Vec<Option<Vec<GMat>>> = vec![None; coords.len()];
    for sign in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..coords.len()).filter(|&k| if sign > 0.0 { coords[k] >= 0.0 } else { coords[k] < 0.0 }).collect();
        idx.sort_by(|&a, &b| (coords[a].abs()).partial_cmp(&coords[b].abs()).unwrap());
        let mut g = start.to_vec();
        let mut here = 0.0;
        for k in idx {
            let target = coords[k];
            let dist = (target - here).abs();
            if dist > 0.0 {
                let steps = ((substeps as f64 * dist / h) - 1e-9).ceil().max(1.0) as usize;
                rk4_segment(p, pts, &mut g, line(here), line(target), steps);
            }
            here = target;
            out[k] = Some(g.clone());
        }
    }
    out.into_iter().map(|v| v.expect("every coordinate visited")).collect()
}

/// Integrates `g0^-1 dg0/dz = -(mu_Dtheta + mu_D0^2)` with `g0(0) = I` along
/// origin -> (x, 0) -> (x, y), RK4 with `substeps` steps per cell.
pub fn integrate_body_frame(p: &Potential, grid: &Grid, substeps: usize) -> BodyFrames {
    let m = sample_count(p.truncation);
    let pts = circle_points(m);
    let id = vec![GMat::identity(p.generators, p.size); m];
    let h = grid.hx.min(grid.hy);
    let xs = grid.xs();
    let ys = grid.ys();
    let sweep = |first_x: bool| -> Vec<Vec<GMat>> {
        let (first, second) = if first_x { (&xs, &ys) } else { (&ys, &xs) };
        let axis = march(p, &pts, &id, first, |s| if first_x { (s, 0.0) } else { (0.0, s) }, h, substeps);
        let lines: Vec<Vec<Vec<GMat>>> = axis
            .par_iter()
            .zip(first.par_iter())
            .map(|(g, &s0)| march(p, &pts, g, second, |t| if first_x { (s0, t) } else { (t, s0) }, h, substeps))
            .collect();
        let mut out = vec![Vec::new(); grid.len()];
        for (a, line) in lines.into_iter().enumerate() {
            for (b, v) in line.into_iter().enumerate() {
                let k = if first_x { a + grid.nx * b } else { b + grid.nx * a };
                out[k] = v;
            }
        }
        out
    };
    let values = sweep(true);
    let other = sweep(false);
    let path_independence = values
        .iter()
        .zip(&other)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).max_abs()))
        .fold(0.0, f64::max);
    BodyFrames { grid: *grid, values, path_independence }
}

/// The holomorphic map `g = g0 + theta g_theta` at every node.
#[derive(Debug, Clone)]
pub struct HolomorphicFrames {
    pub grid: Grid,
    pub g0: Vec<Vec<GMat>>,
    pub g_theta: Vec<Vec<GMat>>,
    /// `max |g^-1 D g - mu(D)|` over nodes and samples, with `d g0/dz` taken
    /// from short independent integrations around each node.
    pub chiral_residual: f64,
}

/// `g_theta = g0 mu_D0` and the check of `g^-1 D g = mu(D)`.
pub fn assemble_super_frame(p: &Potential, body: &BodyFrames) -> HolomorphicFrames {
    let grid = body.grid;
    let m = sample_count(p.truncation);
    let pts = circle_points(m);
    let per_node: Vec<(Vec<GMat>, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.point(k);
            let g0 = &body.values[k];
            let mu0: Vec<GMat> = p.mu_d0(x, y).samples(m);
            let mut_: Vec<GMat> = p.mu_dtheta(x, y).samples(m);
            let gth: Vec<GMat> = g0.iter().zip(&mu0).map(|(g, u)| g * u).collect();
            // d g0/dx by a five-point stencil over short RK4 integrations
            let d = 1e-3;
            let shifted: Vec<Vec<GMat>> = [-2.0, -1.0, 1.0, 2.0]
                .iter()
                .map(|s| {
                    let mut g = g0.clone();
                    rk4_segment(p, &pts, &mut g, (x, y), (x + s * d, y), 2);
                    g
                })
                .collect();
            let mut worst = 0.0f64;
            for j in 0..m {
                let dg = (&(&shifted[0][j] - &shifted[3][j]) + &(&shifted[2][j] - &shifted[1][j]).scale_re(8.0)).scale_re(1.0 / (12.0 * d));
                let inv = g0[j].inverse();
                let first = &(&inv * &gth[j]) - &mu0[j];
                let q = &inv * &gth[j];
                let second = &(&(&inv * &dg) + &(&q * &q)) + &mut_[j];
                worst = worst.max(first.max_abs()).max(second.max_abs());
            }
            (gth, worst)
        })
        .collect();
    let chiral_residual = per_node.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    HolomorphicFrames { grid, g0: body.values.clone(), g_theta: per_node.into_iter().map(|(g, _)| g).collect(), chiral_residual }
}

/// Splitting `Lambda g^C = Lambda g_tau (+) Lambda^+_b`: the real-form part.
pub fn unitary_part(x: &LoopElement, model: &LieModel) -> LoopElement {
    let (lo, _) = x.window();
    let mut terms = Vec::new();
    for k in lo.min(0)..0 {
        let v = x.coeff(k);
        terms.push((-k, -v.adjoint()));
        terms.push((k, v));
    }
    terms.push((0, model.iwasawa_split(&x.coeff(0)).0));
    let mut out = LoopElement::from_terms(terms, x.truncation(), x.twist);
    out.twist = x.twist;
    out
}

/// Supercommutator of two odd loops restricted to `[lo, hi]`.
fn odd_bracket(a: &LoopElement, b: &LoopElement, lo: i32, hi: i32, twist: Twist) -> LoopElement {
    mul_window(a, b, lo, hi, twist).add(&mul_window(b, a, lo, hi, twist))
}

fn commutator(a: &LoopElement, b: &LoopElement, lo: i32, hi: i32, twist: Twist) -> LoopElement {
    mul_window(a, b, lo, hi, twist).sub(&mul_window(b, a, lo, hi, twist))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitResiduals {
    pub iwasawa: FrameResiduals,
    /// The four component equations of `g = F h` at the circle samples.
    pub chiral: [f64; 4],
    /// `max |F^dagger F - 1|` as a superfield, off the sample nodes.
    pub super_unitarity: f64,
    /// Largest negative-power coefficient of the odd and top parts of `h`.
    pub plus_structure: f64,
    /// Failure of `a`, `b`, `U^-1 f'` to lie in the real form.
    pub reality: f64,
    pub twist: f64,
}

impl SplitResiduals {
    pub fn chiral_max(&self) -> f64 {
        self.chiral.iter().cloned().fold(0.0, f64::max)
    }
}

/// Frame `F = U (1 + th1 a + th2 b + th1 th2 c)` at one base point together
/// with `h = (1 + th1 beta1 + th2 beta2 + th1 th2 e) h0`.
#[derive(Debug, Clone)]
pub struct SuperFrame {
    pub unitary: LoopElement,
    pub a: LoopElement,
    pub b: LoopElement,
    pub c: LoopElement,
    /// Real-form part of `c`, i.e. `U^-1 f'`.
    pub f_prime: LoopElement,
    pub plus: LoopElement,
    pub beta1: LoopElement,
    pub beta2: LoopElement,
    pub e: LoopElement,
    pub residuals: SplitResiduals,
}

impl SuperFrame {
    /// `F(lambda)` with products taken after evaluation.
    pub fn eval(&self, lambda: C64) -> Sup<GMat> {
        let u = self.unitary.eval_at(lambda);
        Sup::new(u.clone(), &u * &self.a.eval_at(lambda), &u * &self.b.eval_at(lambda), &u * &self.c.eval_at(lambda))
    }

    pub fn plus_eval(&self, lambda: C64) -> Sup<GMat> {
        let one = GMat::identity(self.plus.generators(), self.plus.size());
        let inner = Sup::new(one, self.beta1.eval_at(lambda), self.beta2.eval_at(lambda), self.e.eval_at(lambda));
        inner.mul(&Sup::body_only(self.plus.eval_at(lambda)))
    }

    fn times_unitary(&self, x: &LoopElement) -> LoopElement {
        let n = self.unitary.truncation() as i32;
        mul_window(&self.unitary, x, -n, n, self.unitary.twist)
    }

    pub fn psi1(&self) -> LoopElement {
        self.times_unitary(&self.a)
    }

    pub fn psi2(&self) -> LoopElement {
        self.times_unitary(&self.b)
    }

    pub fn f(&self) -> LoopElement {
        self.times_unitary(&self.c)
    }
}

/// Splits `g = g0 + theta g0 mu_D0` given the samples of `g0` and `mu_D0` at
/// one base point.
pub fn split_super_frame(g0: &[GMat], mu_d0: &LoopElement, twist: Twist, model: &LieModel, opts: &IwasawaOptions) -> Result<SuperFrame, DpwError> {
    let n = mu_d0.truncation();
    let ni = n as i32;
    let mut iw = *opts;
    if twist != Twist::Untwisted && iw.project.is_none() {
        iw.project = Some(twist);
    }
    let pair = iwasawa_samples(g0, n, twist, model, &iw)?;
    let h0 = pair.plus.clone();
    let h0inv = plus_inverse(&h0, n);
    let xi = mul_window(&mul_window(&h0, mu_d0, -1, ni, twist), &h0inv, -1, ni, twist);
    let ixi = xi.scale(I);
    let a = unitary_part(&xi.restrict(-1, 0), model);
    let b = unitary_part(&ixi.restrict(-1, 0), model);
    let beta1 = xi.sub(&a).restrict(0, ni);
    let beta2 = ixi.sub(&b).restrict(0, ni);
    let m = odd_bracket(&a, &beta2, -2, ni, twist).sub(&odd_bracket(&b, &beta1, -2, ni, twist)).scale(re(0.5));
    let f_prime = unitary_part(&m.restrict(-2, 0), model);
    let c_full = f_prime.sub(&commutator(&a, &b, -2, 2, twist).scale(re(0.5)));
    let e_full = mul_window(&a, &beta2, -2, ni, twist).sub(&mul_window(&b, &beta1, -2, ni, twist)).sub(&c_full);
    let plus_structure = beta1
        .terms()
        .chain(beta2.terms())
        .chain(e_full.terms())
        .filter(|(k, _)| *k < 0)
        .map(|(_, v)| v.max_abs())
        .fold(0.0, f64::max);
    let e = e_full.restrict(0, ni);
    let mut frame = SuperFrame {
        unitary: pair.unitary,
        a,
        b,
        c: c_full,
        f_prime,
        plus: h0,
        beta1,
        beta2,
        e,
        residuals: SplitResiduals { iwasawa: pair.residuals, ..Default::default() },
    };
    let reality = [&frame.a, &frame.b, &frame.f_prime].iter().map(|x| x.add(&x.circle_adjoint()).max_abs()).fold(0.0, f64::max);
    // the four equations of g = F h at the samples
    let pts = circle_points(g0.len());
    let mut chiral = [0.0f64; 4];
    for (z, g) in pts.iter().zip(g0) {
        let f = frame.eval(*z);
        let h = frame.plus_eval(*z);
        let gth = g * &mu_d0.eval_at(*z);
        let fh = f.mul(&h);
        chiral[0] = chiral[0].max((&fh.c[0] - g).max_abs());
        chiral[1] = chiral[1].max((&fh.c[1] - &gth).max_abs());
        chiral[2] = chiral[2].max((&fh.c[2] - &gth.scale(I)).max_abs());
        chiral[3] = chiral[3].max(fh.c[3].max_abs());
    }
    let one = Sup::body_only(GMat::identity(mu_d0.generators(), mu_d0.size()));
    let super_unitarity = (0..16)
        .map(|j| {
            let z = C64::from_polar(1.0, std::f64::consts::PI * (2 * j + 1) as f64 / 16.0);
            let f = frame.eval(z);
            f.map(|x| x.adjoint()).mul(&f).sub(&one).max_abs()
        })
        .fold(0.0, f64::max);
    // c also carries the product term -(ab - ba)/2, which a transpose-type
    // twist does not preserve; the algebra-valued parts are a, b and f'.
    let twist_res = match twist {
        Twist::Untwisted => 0.0,
        t => [&frame.a, &frame.b, &frame.f_prime]
            .iter()
            .map(|x| x.twist_residual_as(model, t))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(0.0, f64::max),
    };
    frame.residuals.chiral = chiral;
    frame.residuals.super_unitarity = super_unitarity;
    frame.residuals.plus_structure = plus_structure;
    frame.residuals.reality = reality;
    frame.residuals.twist = twist_res;
    Ok(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub substeps: usize,
    pub iwasawa: IwasawaOptions,
    /// Skip the holomorphy precondition (negative controls only).
    pub allow_nonholomorphic: bool,
    pub holomorphy_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { substeps: 4, iwasawa: IwasawaOptions::default(), allow_nonholomorphic: false, holomorphy_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub nodes: usize,
    pub holomorphy: f64,
    pub path_independence: f64,
    pub chiral_potential: f64,
    pub reconstruction: f64,
    pub unitarity: f64,
    pub borel: f64,
    pub split_chiral: f64,
    pub super_unitarity: f64,
    pub plus_structure: f64,
    pub reality: f64,
    pub twist: f64,
    pub truncation_loss: f64,
    pub max_iterations: usize,
}

/// Output of the Weierstrass pipeline on a grid.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub grid: Grid,
    pub model: LieModel,
    pub twist: Twist,
    pub frames: Vec<SuperFrame>,
    pub report: PipelineReport,
}

/// Potential -> holomorphic frame -> Iwasawa split -> extended lift.
pub fn run_pipeline(p: &Potential, model: &LieModel, grid: &Grid, opts: &PipelineOptions) -> Result<Pipeline, DpwError> {
    if p.size != model.size {
        return Err(DpwError::Shape(format!("potential is {0}x{0}, model is {1}x{1}", p.size, model.size)));
    }
    let pts = grid.points();
    p.validate(&pts)?;
    let holomorphy = p.holomorphy_residual(&pts);
    if !opts.allow_nonholomorphic && holomorphy > opts.holomorphy_tol {
        return Err(DpwError::NotHolomorphic(holomorphy));
    }
    let body = integrate_body_frame(p, grid, opts.substeps);
    let hol = assemble_super_frame(p, &body);
    let frames: Vec<SuperFrame> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.point(k);
            split_super_frame(&hol.g0[k], &p.mu_d0(x, y), p.twist, model, &opts.iwasawa)
        })
        .collect::<Result<_, _>>()?;
    let mut r = PipelineReport { nodes: grid.len(), holomorphy, path_independence: body.path_independence, chiral_potential: hol.chiral_residual, ..Default::default() };
    for f in &frames {
        let s = &f.residuals;
        r.reconstruction = r.reconstruction.max(s.iwasawa.reconstruction);
        r.unitarity = r.unitarity.max(s.iwasawa.unitarity);
        r.borel = r.borel.max(s.iwasawa.borel);
        r.split_chiral = r.split_chiral.max(s.chiral_max());
        r.super_unitarity = r.super_unitarity.max(s.super_unitarity);
        r.plus_structure = r.plus_structure.max(s.plus_structure).max(s.iwasawa.plus_structure);
        r.reality = r.reality.max(s.reality);
        r.twist = r.twist.max(s.twist).max(s.iwasawa.twist_unitary).max(s.iwasawa.twist_plus);
        r.truncation_loss = r.truncation_loss.max(s.iwasawa.truncation_loss);
        r.max_iterations = r.max_iterations.max(s.iwasawa.iterations);
    }
    Ok(Pipeline { grid: *grid, model: model.clone(), twist: p.twist, frames, report: r })
}

impl Pipeline {
    pub fn frame_values(&self, lambda: C64) -> Vec<Sup<GMat>> {
        self.frames.iter().map(|f| f.eval(lambda)).collect()
    }

    pub fn frame_field(&self, lambda: C64) -> GridField {
        self.grid.field(self.frame_values(lambda))
    }

    /// `Phi_lambda = pi(F_lambda)`: last column (sphere models).
    pub fn target_field(&self, lambda: C64) -> Result<GridField, DpwError> {
        if self.model.sphere_dim().is_none() {
            return Err(DpwError::Shape(format!("model {} has no sphere projection", self.model.name)));
        }
        let n = self.model.size;
        Ok(self.grid.field(self.frame_values(lambda).into_iter().map(|f| f.map(|m| m.column(n - 1))).collect()))
    }

    /// `F tau(F)^-1`, a gauge-invariant image of the target point for any model.
    pub fn cartan_target(&self, lambda: C64) -> Vec<Sup<GMat>> {
        self.frame_values(lambda).into_iter().map(|f| cartan_image(&f, &self.model)).collect()
    }
}

pub fn cartan_image(f: &Sup<GMat>, model: &LieModel) -> Sup<GMat> {
    let t = f.map(|m| model.tau_group(m));
    f.mul(&t.inv())
}

/// Maurer-Cartan coefficients `alpha(D)`, `alpha(Dbar)`, `alpha(d/dz)`,
/// `alpha(d/dzbar)` of a frame jet.
#[derive(Debug, Clone)]
pub struct MaurerCartan {
    pub d: SuperJet<GMat>,
    pub dbar: SuperJet<GMat>,
    pub z: SuperJet<GMat>,
    pub zbar: SuperJet<GMat>,
}

pub fn maurer_cartan(f: &SuperJet<GMat>) -> MaurerCartan {
    let inv = f.inv();
    MaurerCartan { d: inv.mul(&f.d()), dbar: inv.mul(&f.dbar()), z: inv.mul(&f.dz()), zbar: inv.mul(&f.dzb()) }
}

fn map_jets(s: &SuperJet<GMat>, f: impl Fn(&GMat) -> GMat) -> SuperJet<GMat> {
    s.map(|j| j.map(&f))
}

/// `(even, odd)` Cartan parts of a superfield jet.
pub fn cartan_jets(s: &SuperJet<GMat>, model: &LieModel) -> (SuperJet<GMat>, SuperJet<GMat>) {
    (map_jets(s, |m| model.cartan_parts(m).0), map_jets(s, |m| model.cartan_parts(m).1))
}

/// Supercommutator of two odd superfields.
fn odd_anti<T: Alg>(a: &T, b: &T) -> T {
    a.mul(b).add(&b.mul(a))
}

/// `Dbar alpha_1(D) + [alpha_0(Dbar), alpha_1(D)]` at a frame jet of order >= 2.
pub fn harmonicity_expression(f: &SuperJet<GMat>, model: &LieModel) -> Sup<GMat> {
    let mc = maurer_cartan(f);
    let (_, a1) = cartan_jets(&mc.d, model);
    let (b0, _) = cartan_jets(&mc.dbar, model);
    a1.dbar().value().add(&odd_anti(&b0.value(), &a1.value()))
}

/// Loop-algebra harmonicity criterion over the grid nodes listed in `nodes`.
pub fn superharmonic_residual_symmetric(field: &GridField, model: &LieModel, nodes: &[usize]) -> f64 {
    nodes
        .par_iter()
        .map(|&k| {
            let (i, j) = (k % field.nx, k / field.nx);
            harmonicity_expression(&field.jet_at(i, j), model).max_abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Zero-curvature residual `Dbar A_D + D A_Dbar + [A_Dbar, A_D]` evaluated
/// directly and through its four complex theta-components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCurvature {
    pub direct: f64,
    pub split: [f64; 4],
    /// Difference between the two evaluations.
    pub agreement: f64,
}

impl ZeroCurvature {
    pub fn max(&self) -> f64 {
        self.direct.max(self.split.iter().cloned().fold(0.0, f64::max))
    }
}

pub fn zero_curvature_residual(a_d: &SuperJet<GMat>, a_dbar: &SuperJet<GMat>) -> ZeroCurvature {
    let direct_sup = a_d.dbar().value().add(&a_dbar.d().value()).add(&odd_anti(&a_dbar.value(), &a_d.value()));
    let [q0, q1, q2, q3] = a_d.to_complex();
    let [p0, p1, p2, p3] = a_dbar.to_complex();
    let v = |j: &Jet<GMat>| j.value().clone();
    let anti = |x: &Jet<GMat>, y: &Jet<GMat>| &(&v(x) * &v(y)) + &(&v(y) * &v(x));
    let comm = |x: &Jet<GMat>, y: &Jet<GMat>| &(&v(x) * &v(y)) - &(&v(y) * &v(x));
    let e1 = &(&v(&q2) + &v(&p1)) + &anti(&p0, &q0);
    let e2 = &(&(&(-&v(&q3)) - p0.dz().value()) + &comm(&p1, &q0)) + &comm(&q1, &p0);
    let e3 = &(&(&v(&p3) - q0.dzb().value()) + &comm(&p2, &q0)) + &comm(&q2, &p0);
    let e4 = &(&(&(&(q1.dzb().value() - p2.dz().value()) + &anti(&q0, &p3)) + &anti(&p0, &q3)) + &comm(&q1, &p2)) + &comm(&p1, &q2);
    let split = [e1.max_abs(), e2.max_abs(), e3.max_abs(), e4.max_abs()];
    let from_split = Sup::from_complex(e1, e2, e3, e4);
    ZeroCurvature { direct: direct_sup.max_abs(), split, agreement: direct_sup.sub(&from_split).max_abs() }
}

/// Shape, consistency and flatness report of the extended Maurer-Cartan form.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtendedMcReport {
    /// Largest deviation of `alpha_lambda(D)`, `alpha_lambda(d/dz)` and
    /// `alpha_lambda(d/dzbar)` from the predicted lambda-shape.
    pub shape: f64,
    pub shape_per_lambda: Vec<f64>,
    /// `alpha(d/dz) + D alpha(D) + alpha(D)^2`.
    pub alphaz: f64,
    /// `alpha(Dbar) - conj(alpha(D))` for the real structure `X -> -X^dagger`.
    pub reality: f64,
    pub zero_curvature: f64,
    /// Norm of `alpha_1(D)^2`, the coefficient of `lambda^-2`.
    pub lambda_minus_two: f64,
}

/// Real-structure conjugate of a superfield: coefficients `X -> -X^dagger`
/// and `theta <-> thetabar`.
pub fn conjugate_superfield(s: &Sup<GMat>) -> Sup<GMat> {
    let [a, b, cc, d] = s.to_complex();
    let r = |m: &GMat| -m.adjoint();
    Sup::from_complex(r(&a), r(&cc), r(&b), -r(&d))
}

pub fn extended_mc_form(p: &Pipeline, lambdas: &[C64], nodes: &[usize]) -> ExtendedMcReport {
    let fields: Vec<GridField> = lambdas.iter().map(|l| p.frame_field(*l)).collect();
    extended_mc_fields(&p.frame_field(re(1.0)), lambdas, &fields, &p.model, nodes)
}

/// As [`extended_mc_form`], from the frame sampled at `lambda = 1` and at `lambdas`.
pub fn extended_mc_fields(base: &GridField, lambdas: &[C64], fields: &[GridField], model: &LieModel, nodes: &[usize]) -> ExtendedMcReport {
    let per_node: Vec<ExtendedMcReport> = nodes
        .par_iter()
        .map(|&k| {
            let (i, j) = (k % base.nx, k / base.nx);
            let mc = maurer_cartan(&base.jet_at(i, j));
            let (d0, d1) = cartan_jets(&mc.d, model);
            let (db0, db1) = cartan_jets(&mc.dbar, model);
            let (z0, z1) = cartan_jets(&mc.z, model);
            let (zb0, zb1) = cartan_jets(&mc.zbar, model);
            let sq = d1.value().mul(&d1.value());
            let sqb = db1.value().mul(&db1.value());
            let mut r = ExtendedMcReport {
                alphaz: mc.z.value().add(&mc.d.d().value()).add(&mc.d.value().mul(&mc.d.value())).max_abs(),
                reality: mc.dbar.value().sub(&conjugate_superfield(&mc.d.value())).max_abs(),
                lambda_minus_two: sq.max_abs(),
                ..Default::default()
            };
            for (l, field) in lambdas.iter().zip(fields) {
                let mcl = maurer_cartan(&field.jet_at(i, j));
                let inv = l.inv();
                let pd = d0.value().add(&d1.value().scale(inv));
                let pz = sq.scale(-inv * inv).add(&z1.value().scale(inv)).add(&z0.value()).add(&sq);
                let pzb = sqb.scale(-l * l).add(&zb1.value().scale(*l)).add(&zb0.value()).add(&sqb);
                let pdb = db0.value().add(&db1.value().scale(*l));
                let s = mcl.d.value().sub(&pd).max_abs().max(mcl.z.value().sub(&pz).max_abs()).max(mcl.zbar.value().sub(&pzb).max_abs()).max(mcl.dbar.value().sub(&pdb).max_abs());
                r.shape = r.shape.max(s);
                r.shape_per_lambda.push(s);
                r.zero_curvature = r.zero_curvature.max(zero_curvature_residual(&mcl.d, &mcl.dbar).max());
            }
            r
        })
        .collect();
    let mut out = ExtendedMcReport { shape_per_lambda: vec![0.0; lambdas.len()], ..Default::default() };
    for r in per_node {
        out.shape = out.shape.max(r.shape);
        out.alphaz = out.alphaz.max(r.alphaz);
        out.reality = out.reality.max(r.reality);
        out.zero_curvature = out.zero_curvature.max(r.zero_curvature);
        out.lambda_minus_two = out.lambda_minus_two.max(r.lambda_minus_two);
        for (a, b) in out.shape_per_lambda.iter_mut().zip(&r.shape_per_lambda) {
            *a = a.max(*b);
        }
    }
    out
}

/// Pair `(A_D, A_Dbar)` of odd maps given with jets of the requested order.
pub type PairFn = dyn Fn(f64, f64, usize) -> (SuperJet<GMat>, SuperJet<GMat>) + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Largest RK4 step along each leg of the path.
    pub step: f64,
    /// Precondition: largest admissible zero-curvature residual.
    pub flatness_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions { step: 1.0 / 128.0, flatness_tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub points: Vec<(f64, f64)>,
    pub frames: Vec<Sup<GMat>>,
    pub flatness: f64,
    /// `max |F^-1 D F - A_D|, |F^-1 Dbar F - A_Dbar|` at the points.
    pub verification: f64,
}

struct PairData {
    a: Jet<GMat>,
    a_under: Jet<GMat>,
    b: Jet<GMat>,
    beta_z: GMat,
    beta_zb: GMat,
}

fn pair_data(ad: &SuperJet<GMat>, adb: &SuperJet<GMat>) -> PairData {
    let [a, a_th, a_thb, _] = ad.to_complex();
    let [au, _, au_thb, _] = adb.to_complex();
    let beta_z = -&(a_th.value() + &(a.value() * a.value()));
    let beta_zb = -&(au_thb.value() + &(au.value() * au.value()));
    let b = a_thb.add(&au.mul(&a));
    PairData { a, a_under: au, b, beta_z, beta_zb }
}

fn beta_dir(pf: &PairFn, x: f64, y: f64, along_x: bool) -> GMat {
    let (ad, adb) = pf(x, y, 0);
    let d = pair_data(&ad, &adb);
    if along_x {
        &d.beta_z + &d.beta_zb
    } else {
        (&d.beta_z - &d.beta_zb).scale(I)
    }
}

fn integrate_leg(pf: &PairFn, u: &GMat, from: (f64, f64), to: (f64, f64), step: f64) -> GMat {
    let along_x = from.1 == to.1;
    let dist = if along_x { to.0 - from.0 } else { to.1 - from.1 };
    if dist == 0.0 {
        return u.clone();
    }
    let steps = (dist.abs() / step).ceil().max(1.0) as usize;
    let h = dist / steps as f64;
    let at = |s: f64| if along_x { (from.0 + s, from.1) } else { (from.0, from.1 + s) };
    let mut u = u.clone();
    let mut b0 = {
        let (x, y) = at(0.0);
        beta_dir(pf, x, y, along_x)
    };
    for k in 0..steps {
        let (xh, yh) = at((k as f64 + 0.5) * h);
        let (x1, y1) = at((k as f64 + 1.0) * h);
        let bh = beta_dir(pf, xh, yh, along_x);
        let b1 = beta_dir(pf, x1, y1, along_x);
        let k1 = (&u * &b0).scale_re(h);
        let k2 = (&(&u + &k1.scale_re(0.5)) * &bh).scale_re(h);
        let k3 = (&(&u + &k2.scale_re(0.5)) * &bh).scale_re(h);
        let k4 = (&(&u + &k3) * &b1).scale_re(h);
        u = &u + &(&(&(&k1 + &k2.scale_re(2.0)) + &k3.scale_re(2.0)) + &k4).scale_re(1.0 / 6.0);
        b0 = b1;
    }
    u
}

/// Rebuilds the frame from `(A_D, A_Dbar)`: `beta` from the theta-components,
/// `U^-1 dU = beta` with `U(base) = u0` along base -> (x, y_base) -> (x, y),
/// then `F = U + theta U A + thetabar U A_ + theta thetabar U B`.
pub fn reconstruct_frame(pf: &PairFn, base: (f64, f64), u0: &GMat, targets: &[(f64, f64)], opts: &ReconstructOptions) -> Result<Reconstruction, DpwError> {
    let mut flatness = 0.0f64;
    for &(x, y) in std::iter::once(&base).chain(targets) {
        let (ad, adb) = pf(x, y, 1);
        flatness = flatness.max(zero_curvature_residual(&ad, &adb).max());
    }
    if flatness > opts.flatness_tol {
        return Err(DpwError::NotFlat(flatness));
    }
    let results: Vec<(Sup<GMat>, f64)> = targets
        .par_iter()
        .map(|&(x, y)| {
            let mid = integrate_leg(pf, u0, base, (x, base.1), opts.step);
            let u = integrate_leg(pf, &mid, (x, base.1), (x, y), opts.step);
            let (ad, adb) = pf(x, y, 1);
            let d = pair_data(&ad, &adb);
            let bx = &d.beta_z + &d.beta_zb;
            let by = (&d.beta_z - &d.beta_zb).scale(I);
            let uj = Jet::from_derivatives(1, |i, j| match (i, j) {
                (0, 0) => u.clone(),
                (1, 0) => &u * &bx,
                _ => &u * &by,
            });
            let f = Sup::from_complex(uj.clone(), uj.mul(&d.a), uj.mul(&d.a_under), uj.mul(&d.b));
            let mc = maurer_cartan(&f);
            let check = mc.d.value().sub(&ad.value()).max_abs().max(mc.dbar.value().sub(&adb.value()).max_abs());
            (f.value(), check)
        })
        .collect();
    let verification = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Reconstruction { points: targets.to_vec(), frames: results.into_iter().map(|r| r.0).collect(), flatness, verification })
}

/// Holomorphic gauge `h = h0 (1 + theta zeta)` with
/// `h0 = prod_k exp(z^{p_k} X_k)` and `zeta = sum_k z^k zeta_k`; all loops in
/// `Lambda^+`. Factors with `p_k >= 1` keep `h(0) = I`; a `z^0` factor is a
/// constant gauge and moves the base point normalization.
#[derive(Debug, Clone)]
pub struct HolomorphicGauge {
    pub factors: Vec<(u32, LoopElement)>,
    pub zeta: Vec<LoopElement>,
}

impl HolomorphicGauge {
    pub fn identity() -> Self {
        HolomorphicGauge { factors: Vec::new(), zeta: Vec::new() }
    }

    fn check(&self) -> Result<(), DpwError> {
        for x in self.factors.iter().map(|f| &f.1).chain(&self.zeta) {
            let neg = x.terms().filter(|(k, _)| *k < 0).map(|(_, v)| v.max_abs()).fold(0.0, f64::max);
            if neg > 0.0 {
                return Err(DpwError::GaugeWindow(neg));
            }
        }
        Ok(())
    }

    /// `(h0, d h0/dz, h_theta)` at `z = x + iy`.
    pub fn eval(&self, x: f64, y: f64, l: u8, size: usize, n: usize, twist: Twist) -> (LoopElement, LoopElement, LoopElement) {
        let z = c(x, y);
        let ni = n as i32;
        let id = LoopElement::identity(l, size, n, twist);
        let exps: Vec<LoopElement> = self.factors.iter().map(|(p, xk)| plus_exp(&xk.scale(z.powu(*p)), n)).collect();
        let prod = |items: &[LoopElement]| items.iter().fold(id.clone(), |acc, e| mul_window(&acc, e, 0, ni, twist));
        let h0 = prod(&exps);
        let mut dh0 = LoopElement::zero(l, size, n, twist);
        for (j, (p, xk)) in self.factors.iter().enumerate() {
            if *p == 0 {
                continue;
            }
            let left = prod(&exps[..j]);
            let right = prod(&exps[j..]);
            let mid = xk.scale(z.powu(p - 1) * *p as f64);
            dh0 = dh0.add(&mul_window(&mul_window(&left, &mid, 0, ni, twist), &right, 0, ni, twist));
        }
        let mut zeta = LoopElement::zero(l, size, n, twist);
        for (k, zk) in self.zeta.iter().enumerate() {
            zeta = zeta.add(&zk.scale(z.powu(k as u32)));
        }
        let hth = mul_window(&h0, &zeta, 0, ni, twist);
        (h0, dh0, hth)
    }
}

/// `h . mu = Ad h(mu) - dh h^-1`, written on `mu(D)`:
/// `mu'_D0 = h0 mu_D0 h0^-1 - h_th h0^-1` and
/// `mu'_Dth = -h0 mu_D0 W + (h0 mu_Dth + h_th mu_D0) h0^-1 + h_th W + (dh0/dz) h0^-1`
/// with `W = -h0^-1 h_th h0^-1`.
pub fn gauge_transform_potential(h: &HolomorphicGauge, mu: &Potential) -> Result<Potential, DpwError> {
    h.check()?;
    let (l, size, n, twist) = (mu.generators, mu.size, mu.truncation, mu.twist);
    let ni = n as i32;
    let parts = {
        let h = h.clone();
        let mu = mu.clone();
        Arc::new(move |x: f64, y: f64| -> (LoopElement, LoopElement) {
            let (h0, dh0, hth) = h.eval(x, y, l, size, n, twist);
            let h0inv = plus_inverse(&h0, n);
            let m0 = mu.mu_d0(x, y);
            let mth = mu.mu_dtheta(x, y);
            let mw = |a: &LoopElement, b: &LoopElement| mul_window(a, b, -1, ni, twist);
            let w = mw(&mw(&h0inv, &hth), &h0inv).scale(re(-1.0));
            let h0m0 = mw(&h0, &m0);
            let new0 = mw(&h0m0, &h0inv).sub(&mw(&hth, &h0inv));
            let newth = mw(&h0m0, &w)
                .scale(re(-1.0))
                .add(&mw(&mw(&h0, &mth).add(&mw(&hth, &m0)), &h0inv))
                .add(&mw(&hth, &w))
                .add(&mw(&dh0, &h0inv));
            (new0, newth)
        })
    };
    let p0 = parts.clone();
    Ok(Potential::new(l, size, n, twist, Provenance::Gauged, move |x, y| p0(x, y).0, move |x, y| parts(x, y).1))
}

/// Component residuals of the sphere superfield `pi(F_lambda)` for a frame
/// grid: builds the target superfield and returns its grid.
pub fn sphere_target(p: &Pipeline, lambda: C64) -> Result<crate::superfield::SuperField, DpwError> {
    Ok(crate::superfield::SuperField::grid(p.target_field(lambda)?)?)
}

/// Largest coefficient of `alpha(D)` outside `g`: real-form membership of the
/// restricted frame derivative, a cheap sanity check on frame fields.
pub fn frame_membership(field: &GridField, model: &LieModel) -> f64 {
    (0..field.values.len())
        .map(|k| {
            let (i, j) = (k % field.nx, k / field.nx);
            let mc = maurer_cartan(&field.jet_at(i, j));
            mc.d.value().c.iter().map(|m| model.membership_residual(m)).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
