//! Iwasawa factorization `g = F h` of twisted loops with `F` unitary on the
//! unit circle and `h` in `Lambda^+` with Borel-normalized constant term.
//!
//! The body is factored by a block-Toeplitz (Birkhoff) initial guess on
//! `g^dagger g` followed by Newton refinement; the soul is then fixed one
//! Grassmann degree at a time, each degree being a single linear split.

use crate::cmat::{CMat, C64};
use crate::grassmann::GMat;
use crate::liealg::{LieError, LieModel};
use crate::loops::{circle_points, mul_window, plus_exp, sample_count, LoopElement, LoopError, Twist};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IwasawaError {
    #[error("loop is singular on the unit circle near lambda = {0}")]
    Singular(C64),
    #[error("Iwasawa iteration did not converge after {iterations} steps: residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IwasawaOptions {
    pub max_iter: usize,
    /// Newton stops once the unitarity defect at the nodes drops below this.
    pub target: f64,
    /// Final defect above this is reported as non-convergence.
    pub accept: f64,
    /// Twist used to project Newton corrections; `None` disables projection.
    pub project: Option<Twist>,
    /// Circle sample count; `None` means `4N+1`.
    pub samples: Option<usize>,
}

impl Default for IwasawaOptions {
    fn default() -> Self {
        IwasawaOptions { max_iter: 50, target: 1e-14, accept: 1e-9, project: None, samples: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameResiduals {
    /// `max |F(l) h(l) - g(l)|` over the sample nodes, truncated coefficients.
    pub reconstruction: f64,
    /// `max |F^dagger F - I|` at 64 points between the nodes.
    pub unitarity: f64,
    /// Largest coefficient of `h` at a negative power.
    pub plus_structure: f64,
    /// Largest strictly-lower or imaginary-diagonal entry of `h_0` in the
    /// Borel frame (all blades).
    pub borel: f64,
    /// Smallest real diagonal entry of the body of `h_0` in the Borel frame.
    pub borel_min_diagonal: f64,
    pub twist_unitary: f64,
    pub twist_plus: f64,
    pub iterations: usize,
    pub newton_history: Vec<f64>,
    /// Unitarity defect left after each Grassmann degree pass.
    pub degree_defects: Vec<f64>,
    pub truncation_loss: f64,
}

/// `g = unitary * plus`.
#[derive(Debug, Clone)]
pub struct FramePair {
    pub unitary: LoopElement,
    pub plus: LoopElement,
    pub residuals: FrameResiduals,
}

/// Body Iwasawa factorization of the numeric part of `g`.
pub fn iwasawa_body(g: &LoopElement, model: &LieModel, opts: &IwasawaOptions) -> Result<FramePair, IwasawaError> {
    let body = g.body();
    iwasawa_super(&body, model, opts)
}

/// Full factorization of a Grassmann-valued loop.
pub fn iwasawa_super(g: &LoopElement, model: &LieModel, opts: &IwasawaOptions) -> Result<FramePair, IwasawaError> {
    let m = opts.samples.unwrap_or_else(|| sample_count(g.truncation()));
    let samples = g.samples(m);
    iwasawa_samples(&samples, g.truncation(), g.twist, model, opts)
}

/// Factorization from values at `m` equispaced circle points; `g` may be an
/// arbitrary smooth loop, only its samples are used.
pub fn iwasawa_samples(samples: &[GMat], n: usize, twist: Twist, model: &LieModel, opts: &IwasawaOptions) -> Result<FramePair, IwasawaError> {
    let l = samples[0].generators();
    let size = samples[0].shape().0;
    let pts = circle_points(samples.len());
    for (z, s) in pts.iter().zip(samples) {
        if s.body().det().norm() < 1e-13 {
            return Err(IwasawaError::Singular(*z));
        }
    }
    let body: Vec<CMat> = samples.iter().map(|s| s.body().clone()).collect();
    let mut h = toeplitz_guess(&body, n, model).unwrap_or_else(|| LoopElement::identity(0, size, n, twist));
    h.twist = twist;
    let mut history = Vec::new();
    let mut res = unitarity_defect(&body_gmats(&body), &h, None);
    history.push(res);
    let mut iterations = 0;
    while iterations < opts.max_iter && res > opts.target {
        iterations += 1;
        let fs = frame_samples(&body_gmats(&body), &h);
        let x = correction(&fs, n, None, model, opts.project)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..6 {
            let cand = step(&h, &x, t, n);
            let r = unitarity_defect(&body_gmats(&body), &cand, None);
            if r < res {
                h = cand;
                res = r;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(res);
        if !accepted {
            break;
        }
        let len = history.len();
        if len >= 3 && history[len - 1] > 0.5 * history[len - 2] && res < opts.accept {
            break;
        }
    }
    if res > opts.accept {
        return Err(IwasawaError::NotConverged { iterations, residual: res });
    }

    // lift to the Grassmann algebra and fix the soul degree by degree
    let mut h = h.map(|x| GMat::from_mat(l, x.body().clone()));
    h.twist = twist;
    let max_deg = samples.iter().map(|s| s.max_degree()).max().unwrap_or(0);
    let mut degree_defects = Vec::new();
    for d in 1..=max_deg {
        // a second pass absorbs the coupling to the inexact body factor
        for _ in 0..2 {
            let fs = frame_samples(samples, &h);
            let x = correction(&fs, n, Some(d), model, opts.project)?;
            h = step(&h, &x, 1.0, n);
        }
        degree_defects.push(unitarity_defect(samples, &h, Some(d)));
    }

    let fs = frame_samples(samples, &h);
    let unitary = LoopElement::from_samples(&fs, n, twist);
    let residuals = residuals(samples, &unitary, &h, model, twist, iterations, history, degree_defects)?;
    Ok(FramePair { unitary, plus: h, residuals })
}

fn body_gmats(body: &[CMat]) -> Vec<GMat> {
    body.iter().map(|b| GMat::from_mat(0, b.clone())).collect()
}

/// Birkhoff factorization of `W = g^dagger g = h^dagger h` by solving the
/// block-Toeplitz system for the `Lambda^-` factor, then a Cholesky
/// normalization of the constant term.
fn toeplitz_guess(body: &[CMat], n: usize, model: &LieModel) -> Option<LoopElement> {
    let size = body[0].rows();
    let m = body.len();
    let kmax = n as i32;
    let half = ((m - 1) / 2) as i32;
    if 2 * kmax > half {
        return None;
    }
    let w_samples: Vec<GMat> = body.iter().map(|g| GMat::from_mat(0, &g.adjoint() * g)).collect();
    let w_coeffs = crate::loops::fourier_coefficients(&w_samples, -2 * kmax, 2 * kmax);
    let w = |k: i32| w_coeffs[(k + 2 * kmax) as usize].body().clone();
    let k = n;
    let dim = size * k;
    // Y T = -[W_{-1} .. W_{-K}], block (j, m) of T is W_{j-m}; solved transposed.
    let mut t = DMatrix::<C64>::zeros(dim, dim);
    let mut rhs = DMatrix::<C64>::zeros(dim, size);
    for j in 1..=k {
        for mm in 1..=k {
            let blk = w(j as i32 - mm as i32);
            for a in 0..size {
                for b in 0..size {
                    // T^T block (m, j) = W_{j-m}^T
                    t[((mm - 1) * size + a, (j - 1) * size + b)] = blk[(b, a)];
                }
            }
        }
        let blk = w(-(j as i32));
        for a in 0..size {
            for b in 0..size {
                rhs[((j - 1) * size + a, b)] = -blk[(b, a)];
            }
        }
    }
    let sol = t.lu().solve(&rhs)?;
    let x_minus = |j: usize| -> CMat {
        if j == 0 {
            CMat::identity(size)
        } else {
            CMat::from_fn(size, size, |a, b| sol[((j - 1) * size + b, a)])
        }
    };
    let wplus: Vec<CMat> = (0..=n)
        .map(|p| {
            let mut acc = CMat::zeros(size, size);
            for j in 0..=k {
                acc += &(&x_minus(j) * &w(p as i32 + j as i32));
            }
            acc
        })
        .collect();
    let w0 = model.to_borel_frame(&wplus[0]);
    let w0 = (&w0 + &w0.adjoint()).scale_re(0.5);
    let chol = nalgebra::Cholesky::new(w0.to_na())?;
    // W0 = L L^dagger = R^dagger R with R = L^dagger upper triangular
    let r = CMat::from_na(&chol.l().adjoint());
    let q = model.borel_frame();
    let h0 = &(q * &r) * &q.adjoint();
    let h0_inv_adj = h0.inverse().adjoint();
    // h_0 = R exactly keeps the Borel pattern free of rounding
    let terms = wplus
        .iter()
        .enumerate()
        .map(|(p, wp)| (p as i32, GMat::from_mat(0, if p == 0 { h0.clone() } else { &h0_inv_adj * wp })))
        .collect();
    let h = LoopElement::from_terms(terms, n, Twist::Untwisted);
    if !h.max_abs().is_finite() {
        return None;
    }
    Some(h)
}

fn frame_samples(samples: &[GMat], h: &LoopElement) -> Vec<GMat> {
    let pts = circle_points(samples.len());
    samples.iter().zip(pts).map(|(g, z)| g * &h.eval_at(z).inverse()).collect()
}

/// `max |F^dagger F - I|` at the nodes, optionally restricted to one degree.
fn unitarity_defect(samples: &[GMat], h: &LoopElement, degree: Option<u32>) -> f64 {
    let fs = frame_samples(samples, h);
    let l = samples[0].generators();
    let id = GMat::identity(l, samples[0].shape().0);
    fs.iter()
        .map(|f| {
            let e = &(&f.adjoint() * f) - &id;
            match degree {
                Some(d) => e.degree_part(d).max_abs(),
                None => e.max_abs(),
            }
        })
        .fold(0.0, f64::max)
}

/// Newton correction `X` in `Lambda^+_b`: `X + X^dagger = F^dagger F - I`.
fn correction(fs: &[GMat], n: usize, degree: Option<u32>, model: &LieModel, project: Option<Twist>) -> Result<LoopElement, IwasawaError> {
    let l = fs[0].generators();
    let id = GMat::identity(l, fs[0].shape().0);
    let es: Vec<GMat> = fs
        .iter()
        .map(|f| {
            let e = &(&f.adjoint() * f) - &id;
            match degree {
                Some(d) => e.degree_part(d),
                None => e,
            }
        })
        .collect();
    let coeffs = crate::loops::fourier_coefficients(&es, 0, n as i32);
    let mut terms = Vec::with_capacity(n + 1);
    for (k, e) in coeffs.into_iter().enumerate() {
        let e = e.linear(|m| model.project_gc_cmat(m));
        let x = if k == 0 {
            model.iwasawa_split(&e.scale_re(0.5)).1
        } else {
            e
        };
        terms.push((k as i32, x));
    }
    let x = LoopElement::from_terms(terms, n, Twist::Untwisted);
    Ok(match project {
        Some(t) => x.project_twist(model, t)?,
        None => x,
    })
}

fn step(h: &LoopElement, x: &LoopElement, t: f64, n: usize) -> LoopElement {
    let e = plus_exp(&x.scale(C64::new(t, 0.0)), n);
    let mut out = mul_window(&e, h, 0, n as i32, h.twist);
    out.twist = h.twist;
    out
}

#[allow(clippy::too_many_arguments)]
fn residuals(
    samples: &[GMat],
    unitary: &LoopElement,
    plus: &LoopElement,
    model: &LieModel,
    twist: Twist,
    iterations: usize,
    newton_history: Vec<f64>,
    degree_defects: Vec<f64>,
) -> Result<FrameResiduals, IwasawaError> {
    let pts = circle_points(samples.len());
    let reconstruction = samples
        .iter()
        .zip(&pts)
        .map(|(g, z)| (&(&unitary.eval_at(*z) * &plus.eval_at(*z)) - g).max_abs())
        .fold(0.0, f64::max);
    let l = samples[0].generators();
    let id = GMat::identity(l, samples[0].shape().0);
    let unitarity = (0..64)
        .map(|j| {
            let z = C64::from_polar(1.0, std::f64::consts::PI * (2 * j + 1) as f64 / 64.0);
            let f = unitary.eval_at(z);
            (&(&f.adjoint() * &f) - &id).max_abs()
        })
        .fold(0.0, f64::max);
    let plus_structure = plus.terms().filter(|(k, _)| *k < 0).map(|(_, x)| x.max_abs()).fold(0.0, f64::max);
    let h0 = plus.coeff(0);
    let mut borel = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for (mask, v) in h0.terms() {
        let (lower, dmin, dim) = model.borel_pattern(v);
        borel = borel.max(lower).max(dim);
        if *mask == 0 {
            min_diag = dmin;
        }
    }
    let (twist_unitary, twist_plus) = match twist {
        Twist::Untwisted => (0.0, 0.0),
        t => (group_twist_residual(unitary, model, t)?, group_twist_residual(plus, model, t)?),
    };
    Ok(FrameResiduals {
        reconstruction,
        unitarity,
        plus_structure,
        borel,
        borel_min_diagonal: min_diag,
        twist_unitary,
        twist_plus,
        iterations,
        newton_history,
        degree_defects,
        truncation_loss: unitary.truncation_loss,
    })
}

/// Twist condition for group loops, `tau(g(l)) = g(-l)` or
/// `sigma(g(l)) = g(il)`, sampled at 16 circle points.
pub fn group_twist_residual(g: &LoopElement, model: &LieModel, twist: Twist) -> Result<f64, LieError> {
    let mut worst = 0.0f64;
    for z in circle_points(16) {
        let z = z * C64::from_polar(1.0, 0.1);
        let r = match twist {
            Twist::Untwisted => 0.0,
            Twist::Tau => (&model.tau_group(&g.eval_at(z)) - &g.eval_at(-z)).max_abs(),
            Twist::Sigma => (&model.sigma_group(&g.eval_at(z))? - &g.eval_at(z * crate::cmat::I)).max_abs(),
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Uniqueness check: factor `g b` for a constant `b` in the positive Borel
/// group and compare with `(F, h b)`.
pub fn uniqueness_residual(g: &LoopElement, b: &GMat, model: &LieModel, opts: &IwasawaOptions) -> Result<f64, IwasawaError> {
    let first = iwasawa_super(g, model, opts)?;
    let bl = LoopElement::constant(b.clone(), g.truncation(), g.twist);
    let gb = mul_window(g, &bl, -(g.truncation() as i32), g.truncation() as i32, g.twist);
    let second = iwasawa_super(&gb, model, opts)?;
    let hb = mul_window(&first.plus, &bl, 0, g.truncation() as i32, g.twist);
    Ok(first.unitary.distance(&second.unitary).max(hb.distance(&second.plus)))
}
