//! Primitive maps into a 4-symmetric space, the second elliptic system and
//! the Lagrangian angle of the `CP^2 = SU(3)/S(U(2)xU(1))` example.

use crate::cmat::{c, re, C64};
use crate::dpw::{maurer_cartan, DpwError, Potential, Provenance};
use crate::grassmann::{GMat, GrassmannNumber};
use crate::jet::{Alg, AlgInv, Jet, Sup, SuperJet};
use crate::liealg::{su3_y, LieError, LieModel};
use crate::loops::{LoopElement, Twist};
use crate::superfield::GridField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Elliptic2Error {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Dpw(#[from] DpwError),
    #[error("{0} must be Grassmann-odd")]
    Parity(&'static str),
    #[error("lambda^-2 coefficient has a body term of norm {0:e}")]
    BodyTerm(f64),
    #[error("g2 component is not proportional to Y (residual {0:e})")]
    NotProportional(f64),
    #[error("{0}")]
    Shape(String),
}

/// Components of `x` in the `e^{ik pi/2}`-eigenspaces of `sigma`, `k = 0..3`.
pub fn sigma_grading(x: &GMat, model: &LieModel) -> Result<[GMat; 4], LieError> {
    Ok([model.sigma_project(x, 0)?, model.sigma_project(x, 1)?, model.sigma_project(x, 2)?, model.sigma_project(x, 3)?])
}

fn sup_grade(s: &Sup<GMat>, model: &LieModel, k: i32) -> Result<Sup<GMat>, LieError> {
    Ok(Sup::new(model.sigma_project(&s.c[0], k)?, model.sigma_project(&s.c[1], k)?, model.sigma_project(&s.c[2], k)?, model.sigma_project(&s.c[3], k)?))
}

fn jet_grade(s: &SuperJet<GMat>, model: &LieModel, k: i32) -> Result<SuperJet<GMat>, LieError> {
    model.sigma_project(&GMat::zeros(0, model.size, model.size), k)?;
    Ok(s.map(|j| j.map(|m| model.sigma_project(m, k).expect("sigma checked above"))))
}

/// Norm of the `g~_1 (+) g~_2` part of `alpha(D) = F^-1 D F`: zero exactly when
/// `D Phi` lies in `[g_-1]`.
pub fn primitive_residual_at(frame: &SuperJet<GMat>, model: &LieModel) -> Result<f64, LieError> {
    let ad = maurer_cartan(frame).d.value();
    Ok(sup_grade(&ad, model, 1)?.max_abs().max(sup_grade(&ad, model, 2)?.max_abs()))
}

pub fn primitive_residual(field: &GridField, model: &LieModel, nodes: &[usize]) -> Result<f64, LieError> {
    if !model.has_sigma() {
        return Err(LieError::NoSigma(model.name.clone()));
    }
    let vals: Vec<f64> = nodes
        .par_iter()
        .map(|&k| primitive_residual_at(&field.jet_at(k % field.nx, k / field.nx), model))
        .collect::<Result<_, _>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Harmonicity of `F mod G_0`: `Dbar a_m(D) + [a_0(Dbar), a_m(D)] + [a_m(Dbar), a_m(D)]_m`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductiveHarmonicity {
    pub residual: f64,
    /// The `m`-part of `[a_m(Dbar), a_m(D)]`, zero for primitive maps.
    pub m_bracket: f64,
}

pub fn reductive_harmonicity_at(frame: &SuperJet<GMat>, model: &LieModel) -> Result<ReductiveHarmonicity, LieError> {
    let mc = maurer_cartan(frame);
    let fixed = jet_grade(&mc.d, model, 0)?;
    let m_d = mc.d.sub(&fixed);
    let fixed_b = jet_grade(&mc.dbar, model, 0)?;
    let m_db = mc.dbar.sub(&fixed_b);
    let (md, mdb, f0b) = (m_d.value(), m_db.value(), fixed_b.value());
    let anti = |a: &Sup<GMat>, b: &Sup<GMat>| a.mul(b).add(&b.mul(a));
    let bracket = anti(&mdb, &md);
    let bracket_m = bracket.sub(&sup_grade(&bracket, model, 0)?);
    let total = m_d.dbar().value().add(&anti(&f0b, &md)).add(&bracket_m);
    Ok(ReductiveHarmonicity { residual: total.max_abs(), m_bracket: bracket_m.max_abs() })
}

/// `(u0, u1, u2)` with values in `g~_0 (+) g~_-1 (+) g~_-2`, as jets of order >= 1.
#[derive(Debug, Clone)]
pub struct SecondEllipticState {
    pub u: [Jet<GMat>; 3],
}

/// Real-form conjugation `X -> -X^dagger`, blade by blade.
pub fn conj_form(x: &GMat) -> GMat {
    -x.adjoint()
}

fn conj_jet(j: &Jet<GMat>) -> Jet<GMat> {
    j.map(conj_form)
}

fn comm(a: &GMat, b: &GMat) -> GMat {
    &(a * b) - &(b * a)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SecondEllipticReport {
    /// Norms of the three equations of the system.
    pub equations: [f64; 3],
    /// Largest zero-curvature defect of the lambda-family over the sampled lambdas.
    pub form: f64,
    /// Difference between the lambda-family defect and its expansion by the
    /// system residuals.
    pub agreement: f64,
    /// Failure of `u_i` to lie in `g~_-i`.
    pub grading: f64,
}

impl SecondEllipticReport {
    pub fn max(&self) -> f64 {
        self.equations.iter().cloned().fold(self.form, f64::max)
    }
}

/// The system `dzb u2 + [ub0, u2]`, `dzb u1 + [ub0, u1] + [ub1, u2]`,
/// `-dzb u0 + dz ub0 + sum [u_i, ub_i]`, cross-checked against
/// `d alpha + [alpha ^ alpha]/2` for `alpha = sum lambda^-i u_i dz + lambda^i ub_i dzbar`.
pub fn second_elliptic_residual(s: &SecondEllipticState, model: &LieModel, lambdas: &[C64]) -> Result<SecondEllipticReport, LieError> {
    let [u0, u1, u2] = &s.u;
    let ub: Vec<Jet<GMat>> = s.u.iter().map(conj_jet).collect();
    let v = |j: &Jet<GMat>| j.value().clone();
    let e1 = &v(&u2.dzb()) + &comm(&v(&ub[0]), &v(u2));
    let e2 = &(&v(&u1.dzb()) + &comm(&v(&ub[0]), &v(u1))) + &comm(&v(&ub[1]), &v(u2));
    let mut e3 = &v(&ub[0].dz()) - &v(&u0.dzb());
    for i in 0..3 {
        e3 = &e3 + &comm(&v(&s.u[i]), &v(&ub[i]));
    }
    let mut grading = 0.0f64;
    for (i, u) in s.u.iter().enumerate() {
        let g = sigma_grading(u.value(), model)?;
        let own = (4 - i) % 4;
        for (k, part) in g.iter().enumerate() {
            if k != own {
                grading = grading.max(part.max_abs());
            }
        }
    }
    let mut form = 0.0f64;
    let mut agreement = 0.0f64;
    for &l in lambdas {
        let li = l.inv();
        let pw = |p: C64, k: usize| (0..k).fold(re(1.0), |acc, _| acc * p);
        let mut az = u0.zero_like();
        let mut azb = u0.zero_like();
        for i in 0..3 {
            az = az.add(&s.u[i].scale(pw(li, i)));
            azb = azb.add(&ub[i].scale(pw(l, i)));
        }
        // d alpha(d/dz, d/dzbar) = dz alpha_zbar - dzbar alpha_z + [alpha_z, alpha_zbar]
        let z = &(&v(&azb.dz()) - &v(&az.dzb())) + &comm(&v(&az), &v(&azb));
        let predicted = &(&(&(&e1.scale(-li * li) - &e2.scale(li)) + &e3) + &conj_form(&e2).scale(l)) + &conj_form(&e1).scale(l * l);
        form = form.max(z.max_abs());
        agreement = agreement.max((&z - &predicted).max_abs());
    }
    Ok(SecondEllipticReport { equations: [e1.max_abs(), e2.max_abs(), e3.max_abs()], form, agreement, grading })
}

/// `(u0, u1)` read off `U^-1 dU/dz` of the restricted frame `U = i^* F` by
/// the `sigma`-grading, and `u2` as the restriction of `-alpha_-1(D)^2`
/// (here `D^2 = -d/dz`), a square of odd entries and so free of body terms. The returned defect is
/// the larger of the `g~_1` part of `U^-1 dU/dz` and the mismatch between
/// `u2` and its `g~_2` part.
pub fn restrict_superprimitive(frame: &SuperJet<GMat>, model: &LieModel) -> Result<(SecondEllipticState, f64), Elliptic2Error> {
    if frame.order() < 2 {
        return Err(Elliptic2Error::Shape("restriction needs a frame 2-jet".into()));
    }
    let u = &frame.c[0];
    let az = u.inv().truncate(1).mul(&u.dz());
    let grade = |j: &Jet<GMat>, k: i32| -> Result<Jet<GMat>, LieError> {
        model.sigma_project(j.value(), k)?;
        Ok(j.map(|m| model.sigma_project(m, k).expect("sigma checked above")))
    };
    let ad = maurer_cartan(frame).d.c[0].clone();
    let a_minus_one = grade(&ad, -1)?;
    let u2 = grade(&a_minus_one.mul(&a_minus_one), -2)?.map(|m| m.scale_re(-1.0));
    let body = u2.value().body().max_abs();
    if body > 1e-8 {
        return Err(Elliptic2Error::BodyTerm(body));
    }
    let mismatch = (&grade(&az, -2)?.value().clone() - u2.value()).max_abs();
    let leak = model.sigma_project(az.value(), 1)?.max_abs().max(mismatch);
    let state = SecondEllipticState { u: [grade(&az, 0)?, grade(&az, -1)?, u2] };
    Ok((state, leak))
}

/// Holomorphic polynomial `sum_k z^k c_k` with Grassmann coefficients.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrassmannPolynomial {
    pub coeffs: Vec<GrassmannNumber>,
}

impl GrassmannPolynomial {
    pub fn new(coeffs: Vec<GrassmannNumber>) -> Self {
        GrassmannPolynomial { coeffs }
    }

    pub fn eval(&self, l: u8, x: f64, y: f64) -> GrassmannNumber {
        let z = c(x, y);
        let mut acc = GrassmannNumber::zero(l);
        let mut p = re(1.0);
        for k in &self.coeffs {
            acc = &acc + &k.scale(p);
            p *= z;
        }
        acc
    }

    pub fn is_odd(&self) -> bool {
        self.coeffs.iter().all(|k| k.is_zero() || k.is_odd())
    }
}

/// `A^0 = [[0, 0, a], [0, 0, b], [-i b, i a, 0]]`, an element of `g~_-1`.
pub fn cp2_a0(l: u8, a: &GrassmannNumber, b: &GrassmannNumber) -> GMat {
    let ia = a.scale(c(0.0, 1.0));
    let mib = b.scale(c(0.0, -1.0));
    GMat::from_entries(l, 3, 3, |i, j| match (i, j) {
        (0, 2) => a.clone(),
        (1, 2) => b.clone(),
        (2, 0) => mib.clone(),
        (2, 1) => ia.clone(),
        _ => GrassmannNumber::zero(l),
    })
}

/// Normalized `sigma`-twisted potential `mu(D) = lambda^-1 A^0(a, b)`.
pub fn cp2_build_potential(l: u8, truncation: usize, a: GrassmannPolynomial, b: GrassmannPolynomial) -> Result<Potential, Elliptic2Error> {
    if !a.is_odd() {
        return Err(Elliptic2Error::Parity("a"));
    }
    if !b.is_odd() {
        return Err(Elliptic2Error::Parity("b"));
    }
    let d0 = move |x: f64, y: f64| LoopElement::monomial(-1, cp2_a0(l, &a.eval(l, x, y), &b.eval(l, x, y)), truncation, Twist::Sigma);
    let zero = move |_: f64, _: f64| LoopElement::zero(l, 3, truncation, Twist::Sigma);
    Ok(Potential::new(l, 3, truncation, Twist::Sigma, Provenance::Cp2, d0, zero))
}

/// Coefficient `t` with `x = t Y + (part orthogonal to Y)` for the trace form.
pub fn y_coefficient(x: &GMat) -> GrassmannNumber {
    let y = su3_y();
    let yy = (&y * &y).trace();
    (x * &GMat::from_mat(x.generators(), y)).trace().scale(re(1.0) / yy)
}

/// Lagrangian angle data of a restricted `CP^2` frame on a grid.
#[derive(Debug, Clone)]
pub struct LagrangianAngle {
    /// `beta` at the nodes (row-major, `i + nx j`), zero at the base node.
    pub beta: Vec<GrassmannNumber>,
    pub beta_z: Vec<GrassmannNumber>,
    /// Fitted constant in `d beta/dz = c a b`; `None` when `ab` vanishes.
    pub c: Option<C64>,
    pub fit_residual: f64,
    /// `max |Laplacian beta|` over the interior nodes.
    pub laplacian: f64,
    /// Difference between the two line-integration orders.
    pub closedness: f64,
    /// Largest `g~_2` component orthogonal to `Y`.
    pub proportionality: f64,
}

/// Cumulative integral of uniformly spaced samples, exact for cubics.
fn cumulative(vals: &[GrassmannNumber], h: f64) -> Vec<GrassmannNumber> {
    let n = vals.len();
    let mut out = vec![vals[0].zero_like(); n];
    if n < 2 {
        return out;
    }
    for i in 0..n - 1 {
        let inc = if n < 4 {
            (&vals[i] + &vals[i + 1]).scale_re(0.5 * h)
        } else if i == 0 {
            let s = &(&vals[0].scale_re(9.0) + &vals[1].scale_re(19.0)) - &(&vals[2].scale_re(5.0) - &vals[3]);
            s.scale_re(h / 24.0)
        } else if i == n - 2 {
            let s = &(&vals[n - 1].scale_re(9.0) + &vals[n - 2].scale_re(19.0)) - &(&vals[n - 3].scale_re(5.0) - &vals[n - 4]);
            s.scale_re(h / 24.0)
        } else {
            let s = &(&vals[i].scale_re(13.0) + &vals[i + 1].scale_re(13.0)) - &(&vals[i - 1] + &vals[i + 2]);
            s.scale_re(h / 24.0)
        };
        out[i + 1] = &out[i] + &inc;
    }
    out
}

/// Integrates `beta` from the `beta_x`, `beta_y` samples starting at node `base`.
fn integrate_closed(bx: &[GrassmannNumber], by: &[GrassmannNumber], nx: usize, ny: usize, hx: f64, hy: f64, base: (usize, usize), x_first: bool) -> Vec<GrassmannNumber> {
    let shift = |line: Vec<GrassmannNumber>, at: usize| -> Vec<GrassmannNumber> {
        let off = line[at].clone();
        line.iter().map(|v| v - &off).collect()
    };
    let mut out = vec![bx[0].zero_like(); nx * ny];
    if x_first {
        let row: Vec<_> = (0..nx).map(|i| bx[i + nx * base.1].clone()).collect();
        let axis = shift(cumulative(&row, hx), base.0);
        for i in 0..nx {
            let col: Vec<_> = (0..ny).map(|j| by[i + nx * j].clone()).collect();
            let line = shift(cumulative(&col, hy), base.1);
            for j in 0..ny {
                out[i + nx * j] = &axis[i] + &line[j];
            }
        }
    } else {
        let col: Vec<_> = (0..ny).map(|j| by[base.0 + nx * j].clone()).collect();
        let axis = shift(cumulative(&col, hy), base.1);
        for j in 0..ny {
            let row: Vec<_> = (0..nx).map(|i| bx[i + nx * j].clone()).collect();
            let line = shift(cumulative(&row, hx), base.0);
            for i in 0..nx {
                out[i + nx * j] = &axis[j] + &line[i];
            }
        }
    }
    out
}

/// `beta` with `(d beta / 2) Y = alpha^_2`, the `g~_2` part of the restricted
/// Maurer-Cartan form, and the fit `d beta/dz = c a b`.
pub fn cp2_lagrangian_angle(
    frame: &GridField,
    model: &LieModel,
    a: &GrassmannPolynomial,
    b: &GrassmannPolynomial,
    margin: usize,
) -> Result<LagrangianAngle, Elliptic2Error> {
    if model.size != 3 || !model.has_sigma() {
        return Err(Elliptic2Error::Shape(format!("model {} is not the su(3) 4-symmetric model", model.name)));
    }
    let l = frame.values[0].c[0].generators();
    let (nx, ny) = (frame.nx, frame.ny);
    let per_node: Vec<(GrassmannNumber, f64)> = (0..nx * ny)
        .into_par_iter()
        .map(|k| -> Result<(GrassmannNumber, f64), Elliptic2Error> {
            let (state, _) = restrict_superprimitive(&frame.jet_at(k % nx, k / nx), model)?;
            let u2 = state.u[2].value();
            let t = y_coefficient(u2);
            let rest = u2 - &t.times_mat(&GMat::from_mat(l, su3_y()));
            Ok((t.scale_re(2.0), rest.max_abs()))
        })
        .collect::<Result<_, _>>()?;
    let proportionality = per_node.iter().map(|p| p.1).fold(0.0, f64::max);
    if proportionality > 1e-8 {
        return Err(Elliptic2Error::NotProportional(proportionality));
    }
    let beta_z: Vec<GrassmannNumber> = per_node.into_iter().map(|p| p.0).collect();
    // beta real: d beta/dzbar = conj(d beta/dz)
    let beta_x: Vec<GrassmannNumber> = beta_z.iter().map(|t| t + &t.conj()).collect();
    let beta_y: Vec<GrassmannNumber> = beta_z.iter().map(|t| (t - &t.conj()).scale(c(0.0, 1.0))).collect();
    let base = frame.node(0.0, 0.0).unwrap_or((nx / 2, ny / 2));
    let beta = integrate_closed(&beta_x, &beta_y, nx, ny, frame.hx, frame.hy, base, true);
    let other = integrate_closed(&beta_x, &beta_y, nx, ny, frame.hx, frame.hy, base, false);
    let closedness = beta.iter().zip(&other).map(|(p, q)| (p - q).max_abs()).fold(0.0, f64::max);

    let interior: Vec<usize> = (0..nx * ny)
        .filter(|k| {
            let (i, j) = (k % nx, k / nx);
            i >= margin && j >= margin && i + margin < nx && j + margin < ny
        })
        .collect();
    let beta_field = GridField {
        x0: frame.x0,
        y0: frame.y0,
        hx: frame.hx,
        hy: frame.hy,
        nx,
        ny,
        values: beta.iter().map(|v| Sup::body_only(GMat::from_entries(l, 1, 1, |_, _| v.clone()))).collect(),
    };
    let laplacian = interior
        .iter()
        .map(|&k| {
            let j = beta_field.jet_at(k % nx, k / nx).c[0].clone();
            (&j.dx().dx().value().clone() + j.dy().dy().value()).max_abs()
        })
        .fold(0.0, f64::max);

    let ab: Vec<GrassmannNumber> = (0..nx * ny)
        .map(|k| {
            let (x, y) = frame.point(k % nx, k / nx);
            &a.eval(l, x, y) * &b.eval(l, x, y)
        })
        .collect();
    let (mut num, mut den) = (re(0.0), 0.0);
    for k in &interior {
        for (mask, v) in ab[*k].terms() {
            let w = beta_z[*k].coeff(*mask).copied().unwrap_or(re(0.0));
            num += v.conj() * w;
            den += v.norm_sqr();
        }
    }
    let fit = if den > 0.0 { Some(num / den) } else { None };
    let fit_residual = match fit {
        Some(cf) => interior.iter().map(|&k| (&beta_z[k] - &ab[k].scale(cf)).max_abs()).fold(0.0, f64::max),
        None => interior.iter().map(|&k| beta_z[k].max_abs()).fold(0.0, f64::max),
    };
    Ok(LagrangianAngle { beta, beta_z, c: fit, fit_residual, laplacian, closedness, proportionality })
}
