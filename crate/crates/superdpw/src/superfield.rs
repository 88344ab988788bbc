//! Superfields `R^{2|2} -> R^N` as component quadruples `(u, psi1, psi2, F)`
//! with jet access, the odd derivations, component restriction and the
//! `S^n` residuals.

use crate::cmat::{re, CMat, C64, I};
use crate::grassmann::{blade_indices, GMat, GrassmannNumber};
use crate::jet::{Alg, Jet, Sup, SuperJet};
use crate::liealg::{Family, LieModel};
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuperfieldError {
    #[error("component `{component}` has wrong parity (expected {expected})")]
    Parity { component: &'static str, expected: &'static str },
    #[error("jet of order {needed} requested, provider supplies {available}")]
    JetUnavailable { needed: usize, available: usize },
    #[error("point ({x}, {y}) is not a grid node")]
    OffGrid { x: f64, y: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported target: {0}")]
    Unsupported(String),
}

pub const COMPONENT_NAMES: [&str; 4] = ["u", "psi1", "psi2", "F"];

type JetFn = dyn Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync;

/// Polynomial component fields `sum c_ij x^i y^j` with column-vector coefficients.
#[derive(Debug, Clone)]
pub struct PolyField {
    pub terms: Vec<((usize, usize), GMat)>,
}

impl PolyField {
    pub fn jet(&self, x: f64, y: f64, order: usize, proto: &GMat) -> Jet<GMat> {
        Jet::from_derivatives(order, |a, b| {
            let mut acc = proto.zero_like();
            for ((i, j), c) in &self.terms {
                if a > *i || b > *j {
                    continue;
                }
                let fx = falling(*i, a) * x.powi((i - a) as i32);
                let fy = falling(*j, b) * y.powi((j - b) as i32);
                acc = &acc + &c.scale_re(fx * fy);
            }
            acc
        })
    }
}

fn falling(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).map(|v| v as f64).product::<f64>()
}

/// Values on a uniform grid `x_i = x0 + i hx`, `y_j = y0 + j hy`, index `i + nx j`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Sup<GMat>>,
}

impl GridField {
    pub fn new(x0: f64, y0: f64, hx: f64, hy: f64, nx: usize, ny: usize, f: impl Fn(f64, f64) -> Sup<GMat>) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(x0 + i as f64 * hx, y0 + j as f64 * hy));
            }
        }
        GridField { x0, y0, hx, hy, nx, ny, values }
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }

    pub fn at(&self, i: usize, j: usize) -> &Sup<GMat> {
        &self.values[i + self.nx * j]
    }

    pub fn node(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = (x - self.x0) / self.hx;
        let fj = (y - self.y0) / self.hy;
        let (i, j) = (fi.round(), fj.round());
        let ok = (fi - i).abs() < 1e-9 && (fj - j).abs() < 1e-9 && i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny;
        ok.then_some((i as usize, j as usize))
    }

    /// Second-order jet at a node by sixth-order finite differences
    /// (centered inside, one-sided near the boundary).
    pub fn jet_at(&self, i: usize, j: usize) -> SuperJet<GMat> {
        let dx1 = stencil(i, self.nx, 1, self.hx);
        let dy1 = stencil(j, self.ny, 1, self.hy);
        let dx2 = stencil(i, self.nx, 2, self.hx);
        let dy2 = stencil(j, self.ny, 2, self.hy);
        let comp = |k: usize| -> Jet<GMat> {
            let get = |a: usize, b: usize| &self.at(a, b).c[k];
            let v0 = get(i, j).clone();
            let comb = |pts: &[(usize, usize, f64)]| -> GMat {
                let mut acc = v0.zero_like();
                for (a, b, w) in pts {
                    acc = &acc + &get(*a, *b).scale_re(*w);
                }
                acc
            };
            let fx: Vec<_> = dx1.iter().map(|(a, w)| (*a, j, *w)).collect();
            let fy: Vec<_> = dy1.iter().map(|(b, w)| (i, *b, *w)).collect();
            let fxx: Vec<_> = dx2.iter().map(|(a, w)| (*a, j, *w)).collect();
            let fyy: Vec<_> = dy2.iter().map(|(b, w)| (i, *b, *w)).collect();
            let mut fxy = Vec::new();
            for (a, wa) in &dx1 {
                for (b, wb) in &dy1 {
                    fxy.push((*a, *b, wa * wb));
                }
            }
            let d = [v0.clone(), comb(&fx), comb(&fy), comb(&fxx), comb(&fxy), comb(&fyy)];
            Jet::from_derivatives(2, |a, b| match (a, b) {
                (0, 0) => d[0].clone(),
                (1, 0) => d[1].clone(),
                (0, 1) => d[2].clone(),
                (2, 0) => d[3].clone(),
                (1, 1) => d[4].clone(),
                _ => d[5].clone(),
            })
        };
        Sup::new(comp(0), comp(1), comp(2), comp(3))
    }
}

/// Finite-difference weights of the derivative of order `deriv` at node `i`
/// of `n` nodes with spacing `h`: returns `(node, weight)` pairs.
pub fn stencil(i: usize, n: usize, deriv: usize, h: f64) -> Vec<(usize, f64)> {
    let width = if deriv == 2 && (i < 3 || i + 3 >= n) { 8 } else { 7 };
    let width = width.min(n);
    let start = i.saturating_sub(3).min(n - width);
    let offsets: Vec<f64> = (start..start + width).map(|k| k as f64 - i as f64).collect();
    let w = fd_weights(&offsets, deriv);
    (start..start + width).zip(w).map(|(k, w)| (k, w / h.powi(deriv as i32))).collect()
}

/// Fornberg weights for the `m`-th derivative at 0 from the given offsets.
pub fn fd_weights(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[derive(Clone)]
pub enum JetProvider {
    Analytic { max_order: usize, f: Arc<JetFn> },
    Polynomial([PolyField; 4]),
    Grid(Arc<GridField>),
}

impl std::fmt::Debug for JetProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JetProvider::Analytic { max_order, .. } => write!(f, "Analytic(order {max_order})"),
            JetProvider::Polynomial(_) => write!(f, "Polynomial"),
            JetProvider::Grid(g) => write!(f, "Grid({}x{})", g.nx, g.ny),
        }
    }
}

/// Superfield `Phi = u + th1 psi1 + th2 psi2 + th1 th2 F` valued in `R^N`
/// (`N x 1` Grassmann column vectors).
#[derive(Debug, Clone)]
pub struct SuperField {
    pub target_dim: usize,
    pub generators: u8,
    provider: JetProvider,
}

fn check_parities(s: &Sup<GMat>) -> Result<(), SuperfieldError> {
    for (k, v) in s.c.iter().enumerate() {
        let odd = k == 1 || k == 2;
        if odd && !v.is_odd() {
            return Err(SuperfieldError::Parity { component: COMPONENT_NAMES[k], expected: "odd" });
        }
        if !odd && !v.is_even() {
            return Err(SuperfieldError::Parity { component: COMPONENT_NAMES[k], expected: "even" });
        }
    }
    Ok(())
}

fn check_jet_parities(s: &SuperJet<GMat>) -> Result<(), SuperfieldError> {
    for (k, jet) in s.c.iter().enumerate() {
        let odd = k == 1 || k == 2;
        let o = jet.order();
        for a in 0..=o {
            for b in 0..=(o - a) {
                let v = jet.coeff(a, b);
                if odd && !v.is_odd() {
                    return Err(SuperfieldError::Parity { component: COMPONENT_NAMES[k], expected: "odd" });
                }
                if !odd && !v.is_even() {
                    return Err(SuperfieldError::Parity { component: COMPONENT_NAMES[k], expected: "even" });
                }
            }
        }
    }
    Ok(())
}

impl SuperField {
    /// Closure provider; parities are probed at a few points.
    pub fn analytic(target_dim: usize, generators: u8, max_order: usize, f: impl Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync + 'static) -> Result<Self, SuperfieldError> {
        let f: Arc<JetFn> = Arc::new(f);
        for (x, y) in [(0.0, 0.0), (0.37, -0.21), (-0.6, 0.45)] {
            let s = f(x, y, max_order);
            if s.c[0].value().shape() != (target_dim, 1) {
                return Err(SuperfieldError::Shape(format!("expected {target_dim}x1 components")));
            }
            check_jet_parities(&s)?;
        }
        Ok(SuperField { target_dim, generators, provider: JetProvider::Analytic { max_order, f } })
    }

    pub fn polynomial(target_dim: usize, generators: u8, comps: [PolyField; 4]) -> Result<Self, SuperfieldError> {
        for (k, p) in comps.iter().enumerate() {
            for (_, c) in &p.terms {
                if c.shape() != (target_dim, 1) {
                    return Err(SuperfieldError::Shape(format!("component {} coefficient is not {target_dim}x1", COMPONENT_NAMES[k])));
                }
                let z = GMat::zeros(generators, target_dim, 1);
                let mut probe = [z.clone(), z.clone(), z.clone(), z];
                probe[k] = c.clone();
                let [a, b, cc, d] = probe;
                check_parities(&Sup::new(a, b, cc, d))?;
            }
        }
        Ok(SuperField { target_dim, generators, provider: JetProvider::Polynomial(comps) })
    }

    pub fn grid(grid: GridField) -> Result<Self, SuperfieldError> {
        let first = grid.values.first().ok_or_else(|| SuperfieldError::Shape("empty grid".into()))?;
        let (target_dim, cols) = first.c[0].shape();
        if cols != 1 {
            return Err(SuperfieldError::Shape("components must be column vectors".into()));
        }
        let generators = first.c[0].generators();
        for v in &grid.values {
            check_parities(v)?;
        }
        Ok(SuperField { target_dim, generators, provider: JetProvider::Grid(Arc::new(grid)) })
    }

    pub fn provider(&self) -> &JetProvider {
        &self.provider
    }

    pub fn max_order(&self) -> usize {
        match &self.provider {
            JetProvider::Analytic { max_order, .. } => *max_order,
            JetProvider::Polynomial(_) => usize::MAX,
            JetProvider::Grid(_) => 2,
        }
    }

    /// Superfield jet of the requested order at `(x, y)`.
    pub fn superjet(&self, x: f64, y: f64, order: usize) -> Result<SuperJet<GMat>, SuperfieldError> {
        if order > self.max_order() {
            return Err(SuperfieldError::JetUnavailable { needed: order, available: self.max_order() });
        }
        match &self.provider {
            JetProvider::Analytic { f, .. } => Ok(f(x, y, order).truncate(order)),
            JetProvider::Polynomial(p) => {
                let proto = GMat::zeros(self.generators, self.target_dim, 1);
                Ok(Sup::new(p[0].jet(x, y, order, &proto), p[1].jet(x, y, order, &proto), p[2].jet(x, y, order, &proto), p[3].jet(x, y, order, &proto)))
            }
            JetProvider::Grid(g) => {
                let (i, j) = g.node(x, y).ok_or(SuperfieldError::OffGrid { x, y })?;
                Ok(g.jet_at(i, j).truncate(order))
            }
        }
    }

    /// Stored components `(u, psi1, psi2, F)` at a point.
    pub fn components(&self, x: f64, y: f64) -> Result<[GMat; 4], SuperfieldError> {
        Ok(self.superjet(x, y, 0)?.value().c)
    }

    pub fn apply_d1(&self, x: f64, y: f64) -> Result<Sup<GMat>, SuperfieldError> {
        Ok(self.superjet(x, y, 1)?.d1().value())
    }

    pub fn apply_d2(&self, x: f64, y: f64) -> Result<Sup<GMat>, SuperfieldError> {
        Ok(self.superjet(x, y, 1)?.d2().value())
    }

    pub fn apply_d(&self, x: f64, y: f64) -> Result<Sup<GMat>, SuperfieldError> {
        Ok(self.superjet(x, y, 1)?.d().value())
    }

    pub fn apply_dbar(&self, x: f64, y: f64) -> Result<Sup<GMat>, SuperfieldError> {
        Ok(self.superjet(x, y, 1)?.dbar().value())
    }

    /// Components recovered as restrictions of derivatives.
    pub fn restrict_components(&self, x: f64, y: f64) -> Result<[GMat; 4], SuperfieldError> {
        Ok(restrict_components(&self.superjet(x, y, 2)?))
    }

    /// Grid evaluation points (grid provider) or a uniform `n x n` sampling
    /// of `[-1, 1]^2` (other providers).
    pub fn sample_points(&self, n: usize) -> Vec<(f64, f64)> {
        match &self.provider {
            JetProvider::Grid(g) => (0..g.ny).flat_map(|j| (0..g.nx).map(move |i| (i, j))).map(|(i, j)| g.point(i, j)).collect(),
            _ => {
                let h = 2.0 / (n.max(2) - 1) as f64;
                (0..n).flat_map(|j| (0..n).map(move |i| (-1.0 + i as f64 * h, -1.0 + j as f64 * h))).collect()
            }
        }
    }

    /// CSV with columns `x,y,component_index,grassmann_index_set,re,im`;
    /// `component_index` is `name[entry]`, the index set is `;`-separated.
    pub fn to_csv(&self, points: &[(f64, f64)]) -> Result<String, SuperfieldError> {
        let mut out = String::from("x,y,component_index,grassmann_index_set,re,im\n");
        for &(x, y) in points {
            let comps = self.components(x, y)?;
            write_components_csv(&mut out, x, y, &comps);
        }
        Ok(out)
    }
}

pub fn write_components_csv(out: &mut String, x: f64, y: f64, comps: &[GMat; 4]) {
    for (k, v) in comps.iter().enumerate() {
        for (mask, m) in v.terms() {
            let idx: Vec<String> = blade_indices(*mask).iter().map(|i| i.to_string()).collect();
            for e in 0..m.rows() {
                let z = m[(e, 0)];
                if *mask != 0 && z.norm() == 0.0 {
                    continue;
                }
                let _ = writeln!(out, "{x},{y},{}[{e}],{},{:e},{:e}", COMPONENT_NAMES[k], idx.join(";"), z.re, z.im);
            }
        }
    }
}

/// `(u, psi_a, F) = (i*Phi, i*D_a Phi, i*(-1/2 eps^{ab} D_a D_b Phi))`, `eps^{12} = 1`.
pub fn restrict_components(sj: &SuperJet<GMat>) -> [GMat; 4] {
    let d1 = sj.d1();
    let d2 = sj.d2();
    let u = sj.c[0].value().clone();
    let psi1 = d1.c[0].value().clone();
    let psi2 = d2.c[0].value().clone();
    let d1d2 = d2.d1();
    let d2d1 = d1.d2();
    let f = (d1d2.c[0].value() - d2d1.c[0].value()).scale_re(-0.5);
    [u, psi1, psi2, f]
}

/// `R(Phi)` from the components: `F - th1 (Dslash psi)_1 - th2 (Dslash psi)_2 + th1 th2 Lap u`.
pub fn r_operator(sj: &SuperJet<GMat>) -> Sup<GMat> {
    let [u, p1, p2, f] = &sj.c;
    let dslash1 = p1.dy().sub(&p2.dx());
    let dslash2 = p1.dx().add(&p2.dy()).scale(re(-1.0));
    let lap = u.dx().dx().add(&u.dy().dy());
    Sup::new(f.value().clone(), -dslash1.value().clone(), -dslash2.value().clone(), lap.value().clone())
}

fn dot(a: &GMat, b: &GMat) -> GMat {
    &a.transpose() * b
}

/// `s v` with the `1 x 1` scalar on the left of every entry.
fn smul(s: &GMat, v: &GMat) -> GMat {
    let x = s.entry(0, 0);
    GMat::from_entries(v.generators(), v.shape().0, 1, |i, _| &x * &v.entry(i, 0))
}

fn dot_jet(a: &Jet<GMat>, b: &Jet<GMat>) -> Jet<GMat> {
    a.map(|v| v.transpose()).mul(b)
}

/// Inner product of superfield-valued column vectors, as a `1 x 1` superfield.
pub fn super_dot(a: &SuperJet<GMat>, b: &SuperJet<GMat>) -> SuperJet<GMat> {
    a.map(|j| j.map(|v| v.transpose())).mul(b)
}

/// Sphere constraint residuals at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SphereConstraints {
    /// `|u|^2 - 1`
    pub norm: f64,
    /// `<psi_a, u>`
    pub tangency: f64,
    /// `<F, u> - <psi1, psi2>`
    pub normal_f: f64,
    /// `F - pr(u) F - <psi1, psi2> u`
    pub f_perp: f64,
}

impl SphereConstraints {
    pub fn max(&self) -> f64 {
        self.norm.max(self.tangency).max(self.normal_f).max(self.f_perp)
    }

    pub fn merge(&self, o: &Self) -> Self {
        SphereConstraints { norm: self.norm.max(o.norm), tangency: self.tangency.max(o.tangency), normal_f: self.normal_f.max(o.normal_f), f_perp: self.f_perp.max(o.f_perp) }
    }
}

/// Component quadruple of an `R^{n+1}`-valued superfield claimed to lie in `S^n`.
#[derive(Debug, Clone)]
pub struct SpherePoint {
    pub jet: SuperJet<GMat>,
}

impl SpherePoint {
    pub fn new(jet: SuperJet<GMat>) -> Result<Self, SuperfieldError> {
        let (_, cols) = jet.c[0].value().shape();
        if cols != 1 {
            return Err(SuperfieldError::Shape("sphere point components must be column vectors".into()));
        }
        Ok(SpherePoint { jet })
    }
}

pub fn sphere_constraint_residual(p: &SpherePoint) -> SphereConstraints {
    let [u, p1, p2, f] = p.jet.value().c;
    let l = u.generators();
    let one = GMat::identity(l, 1);
    let uu = dot(&u, &u);
    let psi12 = dot(&p1, &p2);
    let fu = dot(&f, &u);
    let f_perp = &u * &fu;
    SphereConstraints {
        norm: (&uu - &one).max_abs(),
        tangency: dot(&p1, &u).max_abs().max(dot(&p2, &u).max_abs()),
        normal_f: (&fu - &psi12).max_abs(),
        f_perp: (&f_perp - &(&u * &psi12)).max_abs(),
    }
}

/// Residuals of the `S^n` superharmonic equations at one point.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SphereHarmonicReport {
    /// Max-norm of `Dbar D Phi + <Dbar Phi, D Phi> Phi` over its four theta components.
    pub dbard: f64,
    /// Max-norms of the three component equations (u, psi, F).
    pub component_equations: [f64; 3],
    /// Difference between the superspace residual and its expansion in
    /// terms of the component residuals.
    pub consistency: f64,
}

impl SphereHarmonicReport {
    pub fn merge(&self, o: &Self) -> Self {
        let mut ce = self.component_equations;
        for (a, b) in ce.iter_mut().zip(o.component_equations) {
            *a = a.max(b);
        }
        SphereHarmonicReport { dbard: self.dbard.max(o.dbard), component_equations: ce, consistency: self.consistency.max(o.consistency) }
    }

    pub fn component_max(&self) -> f64 {
        self.component_equations.iter().cloned().fold(0.0, f64::max)
    }
}

/// Superspace residual `Dbar D Phi + <Dbar Phi, D Phi> Phi` (2-jet needed).
pub fn dbard_expression(sj: &SuperJet<GMat>) -> Sup<GMat> {
    let d = sj.d();
    let dbd = d.dbar();
    let pairing = super_dot(&sj.dbar(), &d);
    let term = sj.truncate(1).mul(&pairing);
    dbd.value().add(&term.value())
}

/// Component residuals `(E_u, E_psi, E_F)` and their formal conjugates where needed.
struct ComponentResiduals {
    e_u: GMat,
    e_psi: GMat,
    e_psi_conj: GMat,
    e_f: GMat,
}

fn component_residuals(sj: &SuperJet<GMat>) -> ComponentResiduals {
    let [uj, p1j, p2j, fj] = &sj.c;
    let u = uj.value().clone();
    let psi_j = p1j.sub(&p2j.scale(I));
    let psib_j = p1j.add(&p2j.scale(I));
    let psi = psi_j.value().clone();
    let psib = psib_j.value().clone();
    let f = fj.value().clone();
    let proj = |x: &GMat| x - &(&u * &dot(&u, x));
    let uz = uj.dz().value().clone();
    let uzb = uj.dzb().value().clone();
    let uzzb = uj.dz().dzb().value().clone();
    let e_u = &proj(&uzzb).scale_re(4.0) - &(&(&psi * &dot(&psi, &uzb)) + &(&psib * &dot(&psib, &uz)));
    let quarter = 0.25;
    let e_psi = &proj(psi_j.dzb().value()) - &(&psib * &dot(&psib, &psi)).scale_re(quarter);
    let e_psi_conj = &proj(psib_j.dz().value()) - &(&psi * &dot(&psi, &psib)).scale_re(quarter);
    let e_f = &f - &(&u * &dot(&psi, &psib)).scale(C64::new(0.0, -0.5));
    ComponentResiduals { e_u, e_psi, e_psi_conj, e_f }
}

/// The superspace residual rebuilt from component residuals (complex theta
/// basis `a + th b + thbar c + th thbar d`), valid on the sphere constraints.
fn predicted_dbard(sj: &SuperJet<GMat>, r: &ComponentResiduals) -> [GMat; 4] {
    let [uj, p1j, p2j, fj] = &sj.c;
    let u = uj.value().clone();
    let psi = p1j.sub(&p2j.scale(I)).value().clone();
    let psib = p1j.add(&p2j.scale(I)).value().clone();
    let f = fj.value().clone();
    let half_i = C64::new(0.0, 0.5);
    let a = r.e_f.scale(half_i);
    let b = &r.e_psi_conj.scale_re(0.5) - &(&u * &dot(&f, &psi)).scale(C64::new(0.0, 0.25));
    let c = &r.e_psi.scale_re(-0.5) - &(&u * &dot(&psib, &f)).scale(C64::new(0.0, 0.25));
    let psi_zb = dot_jet(&p1j.sub(&p2j.scale(I)).dzb(), &Jet::constant(psi.clone(), 0));
    let psib_z = dot_jet(&p1j.add(&p2j.scale(I)).dz(), &Jet::constant(psib.clone(), 0));
    let re_part = (psi_zb.value() + psib_z.value()).scale_re(0.5);
    let scalar = &dot(&f, &f).scale_re(0.25) + &re_part.scale_re(0.5);
    let i8 = C64::new(0.0, 0.125);
    let d = &(&(&(&r.e_u.scale_re(-0.25) + &smul(&dot(&f, &psi), &psib).scale(i8)) - &smul(&dot(&psib, &f), &psi).scale(i8)) + &(&u * &scalar))
        + &(&f * &dot(&psib, &psi)).scale(i8);
    [a, b, c, d]
}

/// `S^n` superharmonicity residuals from a 2-jet.
pub fn superharmonic_residual_sphere(p: &SpherePoint) -> Result<SphereHarmonicReport, SuperfieldError> {
    let sj = &p.jet;
    if sj.order() < 2 {
        return Err(SuperfieldError::JetUnavailable { needed: 2, available: sj.order() });
    }
    let s = dbard_expression(sj);
    let sc = s.to_complex();
    let r = component_residuals(sj);
    let pred = predicted_dbard(sj, &r);
    let consistency = sc.iter().zip(pred.iter()).map(|(a, b)| (a - b).max_abs()).fold(0.0, f64::max);
    Ok(SphereHarmonicReport {
        dbard: s.max_abs(),
        component_equations: [r.e_u.max_abs(), r.e_psi.max_abs(), r.e_f.max_abs()],
        consistency,
    })
}

/// `<psi_a, R(psi_b, psi_c) psi_d>` for the unit sphere.
pub fn sphere_curvature_quartic(psi: &[GMat; 2], a: usize, b: usize, c: usize, d: usize) -> GMat {
    &(&dot(&psi[a], &psi[b]) * &dot(&psi[c], &psi[d])) + &(&dot(&psi[a], &psi[c]) * &dot(&psi[b], &psi[d]))
}

/// Pointwise Lagrangian density
/// `-1/2 |du|^2 + 1/2 <psi Dslash_u psi> + 1/12 eps eps <psi_a, R(psi_b, psi_c) psi_d> + 1/2 |F'|^2`.
pub fn lagrangian_density(p: &SpherePoint, model: &LieModel) -> Result<GrassmannNumber, SuperfieldError> {
    if model.family != Family::Orthogonal || model.size != p.jet.c[0].value().shape().0 {
        return Err(SuperfieldError::Unsupported(format!("curvature of `{}` on R^{}", model.name, p.jet.c[0].value().shape().0)));
    }
    let sj = &p.jet;
    if sj.order() < 1 {
        return Err(SuperfieldError::JetUnavailable { needed: 1, available: sj.order() });
    }
    let [uj, p1j, p2j, fj] = &sj.c;
    let u = uj.value().clone();
    let proj = |x: &GMat| x - &(&u * &dot(&u, x));
    let ux = uj.dx().value().clone();
    let uy = uj.dy().value().clone();
    let du2 = &dot(&ux, &ux) + &dot(&uy, &uy);
    let p1 = p1j.value().clone();
    let p2 = p2j.value().clone();
    let dslash1 = proj(&(p1j.dy().value() - p2j.dx().value()));
    let dslash2 = proj(&(p1j.dx().value() + p2j.dy().value())).scale_re(-1.0);
    let kinetic = &dot(&p1, &dslash2) - &dot(&p2, &dslash1);
    let psi = [p1, p2];
    let eps = |a: usize, b: usize| -> f64 {
        match (a, b) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => 0.0,
        }
    };
    let mut quartic = GMat::zeros(u.generators(), 1, 1);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let w = eps(a, b) * eps(c, d);
                    if w != 0.0 {
                        quartic = &quartic + &sphere_curvature_quartic(&psi, a, b, c, d).scale_re(w);
                    }
                }
            }
        }
    }
    let fprime = proj(fj.value());
    let total = &(&(&du2.scale_re(-0.5) + &kinetic.scale_re(0.5)) + &quartic.scale_re(1.0 / 12.0)) + &dot(&fprime, &fprime).scale_re(0.5);
    Ok(total.entry(0, 0))
}

/// Vector of Grassmann numbers as an `n x 1` matrix.
pub fn column_from_entries(l: u8, entries: &[GrassmannNumber]) -> GMat {
    GMat::from_entries(l, entries.len(), 1, |i, _| entries[i].clone())
}

/// Column vector with a numeric body.
pub fn column(l: u8, v: &[f64]) -> GMat {
    GMat::from_mat(l, CMat::from_fn(v.len(), 1, |i, _| re(v[i])))
}
