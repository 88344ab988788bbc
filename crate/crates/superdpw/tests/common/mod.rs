#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superdpw::cmat::{c, re, CMat, C64};
use superdpw::dpw::{maurer_cartan, PairFn};
use superdpw::grassmann::{blade_degree, GMat};
use superdpw::jet::{alg_exp, Alg, Jet, Sup, SuperJet};
use superdpw::loops::{mul_window, LoopElement, Twist};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cnum(r: &mut ChaCha8Rng, scale: f64) -> C64 {
    if scale == 0.0 {
        return re(0.0);
    }
    c(r.random_range(-scale..scale), r.random_range(-scale..scale))
}

pub fn cmat(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    CMat::from_fn(n, n, |_, _| cnum(r, scale))
}

pub fn traceless(m: &CMat) -> CMat {
    let n = m.rows();
    let t = m.trace() / n as f64;
    m - &CMat::identity(n).scale(t)
}

pub fn skew_hermitian(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let a = cmat(r, n, scale);
    traceless(&(&a - &a.adjoint()).scale_re(0.5))
}

/// Random element of `SU(n)`.
pub fn special_unitary(r: &mut ChaCha8Rng, n: usize) -> CMat {
    skew_hermitian(r, n, 1.5).exp()
}

/// Upper triangular, positive diagonal, determinant one.
pub fn positive_borel(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let mut b = CMat::zeros(n, n);
    let mut logs: Vec<f64> = (0..n).map(|_| r.random_range(-0.5..0.5)).collect();
    let mean = logs.iter().sum::<f64>() / n as f64;
    for v in logs.iter_mut() {
        *v -= mean;
    }
    for i in 0..n {
        b[(i, i)] = re(logs[i].exp());
        for j in (i + 1)..n {
            b[(i, j)] = cnum(r, 0.7);
        }
    }
    b
}

/// Unit-norm random vector as an `n x 1` matrix.
fn unit_vector(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let v = CMat::from_fn(n, 1, |_, _| cnum(r, 1.0));
    let norm = v.frob();
    v.scale_re(1.0 / norm)
}

fn body_loop(terms: Vec<(i32, CMat)>, n: usize) -> LoopElement {
    LoopElement::from_terms(terms.into_iter().map(|(k, m)| (k, GMat::from_mat(0, m))).collect(), n, Twist::Untwisted)
}

/// Polynomial `SU(n)` loop `U0 (I - P + l P)(I - Q + l^{-1} Q)` with rank-one projectors.
pub fn unitary_loop(r: &mut ChaCha8Rng, n: usize, trunc: usize) -> LoopElement {
    let u0 = special_unitary(r, n);
    let id = CMat::identity(n);
    let proj = |v: &CMat| v * &v.adjoint();
    let p = proj(&unit_vector(r, n));
    let q = proj(&unit_vector(r, n));
    let a = body_loop(vec![(0, &id - &p), (1, p)], trunc);
    let b = body_loop(vec![(0, &id - &q), (-1, q)], trunc);
    let u = body_loop(vec![(0, u0)], trunc);
    let w = trunc as i32;
    mul_window(&mul_window(&u, &a, -w, w, Twist::Untwisted), &b, -w, w, Twist::Untwisted)
}

/// Random rank-one nilpotent `a v w^T` with `w^T v = 0`.
fn nilpotent(r: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let v = CMat::from_fn(n, 1, |_, _| cnum(r, 1.0));
    let mut w = CMat::from_fn(n, 1, |_, _| cnum(r, 1.0));
    // remove the component making w^T v nonzero
    let wv: C64 = (0..n).map(|i| w[(i, 0)] * v[(i, 0)]).sum();
    let vv: C64 = (0..n).map(|i| v[(i, 0)] * v[(i, 0)]).sum();
    for i in 0..n {
        w[(i, 0)] -= wv / vv * v[(i, 0)];
    }
    (&v * &w.transpose()).scale_re(scale)
}

/// Polynomial `Lambda^+ SL(n)` loop `B (I + l N1)(I + l^2 N2)`.
pub fn plus_loop(r: &mut ChaCha8Rng, n: usize, trunc: usize) -> LoopElement {
    let b = positive_borel(r, n);
    let id = CMat::identity(n);
    let f1 = body_loop(vec![(0, id.clone()), (1, nilpotent(r, n, 0.6))], trunc);
    let f2 = body_loop(vec![(0, id), (2, nilpotent(r, n, 0.4))], trunc);
    let w = trunc as i32;
    mul_window(&mul_window(&body_loop(vec![(0, b)], trunc), &f1, 0, w, Twist::Untwisted), &f2, 0, w, Twist::Untwisted)
}

/// Random even-soul Grassmann matrix with traceless blade coefficients
/// built by `gen` on each even blade of positive degree.
pub fn even_soul(l: u8, n: usize, mut gen: impl FnMut() -> CMat) -> GMat {
    let mut terms = Vec::new();
    for mask in 1u32..(1u32 << l) {
        if blade_degree(mask) % 2 == 0 {
            terms.push((mask, traceless(&gen())));
        }
    }
    GMat::from_terms(l, &CMat::zeros(n, n), terms)
}

/// `exp` of a nilpotent (soul) loop by its finite series.
pub fn nilpotent_loop_exp(x: &LoopElement) -> LoopElement {
    let w = x.truncation() as i32;
    let mut term = LoopElement::identity(x.generators(), x.size(), x.truncation(), x.twist);
    let mut sum = term.clone();
    for k in 1..8 {
        term = mul_window(&term, x, -w, w, x.twist).scale(re(1.0 / k as f64));
        if term.max_abs() == 0.0 {
            break;
        }
        sum = sum.add(&term);
    }
    sum
}

/// Grassmann lift of a unitary loop by `exp(S)` with `S` skew-hermitian on the circle.
pub fn soul_unitary(r: &mut ChaCha8Rng, f: &LoopElement, l: u8) -> LoopElement {
    let n = f.size();
    let s_minus = even_soul(l, n, || cmat(r, n, 0.3));
    let s0 = even_soul(l, n, || skew_hermitian(r, n, 0.3));
    let s_plus = s_minus.adjoint().scale_re(-1.0);
    let s = LoopElement::from_terms(vec![(-1, s_minus), (0, s0), (1, s_plus)], f.truncation(), f.twist);
    let fl = f.map(|x| GMat::from_mat(l, x.body().clone()));
    let w = f.truncation() as i32;
    mul_window(&fl, &nilpotent_loop_exp(&s), -w, w, f.twist)
}

/// Grassmann lift of a plus loop by `exp(T)`, `T_0` upper triangular with real diagonal.
pub fn soul_plus(r: &mut ChaCha8Rng, h: &LoopElement, l: u8) -> LoopElement {
    let n = h.size();
    let t0 = even_soul(l, n, || {
        let mut m = cmat(r, n, 0.3);
        for i in 0..n {
            for j in 0..i {
                m[(i, j)] = re(0.0);
            }
            m[(i, i)] = re(m[(i, i)].re);
        }
        m
    });
    let t1 = even_soul(l, n, || cmat(r, n, 0.3));
    let t = LoopElement::from_terms(vec![(0, t0), (1, t1)], h.truncation(), h.twist);
    let hl = h.map(|x| GMat::from_mat(l, x.body().clone()));
    let w = h.truncation() as i32;
    mul_window(&hl, &nilpotent_loop_exp(&t), 0, w, h.twist)
}


/// Random Grassmann matrix with support on blades of the given parity
/// (`Some(0)` even, `Some(1)` odd); small dyadic-free floats.
pub fn grassmann_mat(r: &mut ChaCha8Rng, l: u8, rows: usize, cols: usize, parity: u32, scale: f64, with_body: bool) -> GMat {
    let mut terms = Vec::new();
    for mask in 0u32..(1u32 << l) {
        if mask.count_ones() % 2 != parity || (mask == 0 && !with_body) {
            continue;
        }
        terms.push((mask, CMat::from_fn(rows, cols, |_, _| re(r.random_range(-scale..scale)))));
    }
    GMat::from_terms(l, &CMat::zeros(rows, cols), terms)
}

/// Coordinate jets `x` and `y` (1 x 1) at a point.
pub fn xy_jets(l: u8, x: f64, y: f64, order: usize) -> (Jet<GMat>, Jet<GMat>) {
    let one = |v: f64| GMat::from_mat(l, CMat::from_fn(1, 1, |_, _| re(v)));
    let xj = Jet::from_derivatives(order, |a, b| match (a, b) {
        (0, 0) => one(x),
        (1, 0) => one(1.0),
        _ => one(0.0),
    });
    let yj = Jet::from_derivatives(order, |a, b| match (a, b) {
        (0, 0) => one(y),
        (0, 1) => one(1.0),
        _ => one(0.0),
    });
    (xj, yj)
}

/// Jet of `sum_k p_k(x, y) C_k` for scalar polynomial jets `p_k`.
pub fn jet_combination(parts: &[(Jet<GMat>, GMat)]) -> Jet<GMat> {
    let order = parts[0].0.order();
    Jet::from_derivatives(order, |a, b| {
        let mut acc = parts[0].1.zero_like();
        for (p, c) in parts {
            acc = &acc + &c.times_scalar(&p.derivative(a, b));
        }
        acc
    })
}

trait TimesScalar {
    fn times_scalar(&self, s: &GMat) -> GMat;
}

impl TimesScalar for GMat {
    /// `s C` for a `1 x 1` scalar `s` placed on the left.
    fn times_scalar(&self, s: &GMat) -> GMat {
        let x = s.entry(0, 0);
        x.times_mat(self)
    }
}

/// Random rotation superfield `exp(A) e_N`, `A` an `so(N)`-valued even superfield
/// with polynomial coefficients; lies on `S^{N-1}` but solves nothing.
pub fn sphere_superfield(r: &mut ChaCha8Rng, n: usize, l: u8) -> impl Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync + 'static {
    let mut comps = Vec::new();
    for k in 0..4 {
        let parity = if k == 1 || k == 2 { 1 } else { 0 };
        let mut cs = Vec::new();
        for _ in 0..4 {
            let m = grassmann_mat(r, l, n, n, parity, 0.35, parity == 0);
            cs.push(&m - &m.transpose());
        }
        comps.push(cs);
    }
    move |x, y, order| {
        let (xj, yj) = xy_jets(l, x, y, order);
        let one = Jet::constant(GMat::identity(l, 1), order);
        let monos = [one, xj.clone(), yj.clone(), xj.mul(&yj)];
        let a: Vec<Jet<GMat>> = comps
            .iter()
            .map(|cs| jet_combination(&monos.iter().cloned().zip(cs.iter().cloned()).collect::<Vec<_>>()))
            .collect();
        let a = Sup::new(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone());
        let id = Sup::body_only(Jet::constant(GMat::identity(l, n), order));
        let rot = alg_exp(&a, &id);
        let e = GMat::from_mat(l, CMat::unit(n, n - 1));
        rot.mul(&Sup::body_only(Jet::constant(e, order)))
    }
}

/// Inverse stereographic projection of `z`, a classical harmonic map into `S^2`.
pub fn stereographic_superfield(l: u8) -> impl Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync + 'static {
    move |x, y, order| {
        let (xj, yj) = xy_jets(l, x, y, order);
        let one = Jet::constant(GMat::identity(l, 1), order);
        let r2 = xj.mul(&xj).add(&yj.mul(&yj));
        let inv = superdpw::jet::AlgInv::inv(&one.add(&r2));
        let comps = [xj.scale(re(2.0)).mul(&inv), yj.scale(re(2.0)).mul(&inv), r2.sub(&one).mul(&inv)];
        let basis = |k: usize| GMat::from_mat(l, CMat::unit(3, k));
        let u = jet_combination(&[(comps[0].clone(), basis(0)), (comps[1].clone(), basis(1)), (comps[2].clone(), basis(2))]);
        let z = u.zero_like();
        Sup::new(u, z.clone(), z.clone(), z)
    }
}

/// `E_ij - E_ji` in `so(n)`.
pub fn so_generator(n: usize, i: usize, j: usize) -> CMat {
    &CMat::elementary(n, i, j) - &CMat::elementary(n, j, i)
}

/// Random element of the `tau = -1` part of `so(n)` (last row and column),
/// complex coefficients of the given Grassmann parity.
pub fn sphere_m_part(r: &mut ChaCha8Rng, l: u8, n: usize, parity: u32, scale: f64) -> GMat {
    sphere_part(r, l, n, parity, scale, true)
}

/// Random element of the `tau = +1` block of `so(n)`.
pub fn sphere_k_part(r: &mut ChaCha8Rng, l: u8, n: usize, parity: u32, scale: f64) -> GMat {
    sphere_part(r, l, n, parity, scale, false)
}

fn sphere_part(r: &mut ChaCha8Rng, l: u8, n: usize, parity: u32, scale: f64, odd_block: bool) -> GMat {
    let mut terms = Vec::new();
    for mask in 0u32..(1u32 << l) {
        if mask.count_ones() % 2 != parity {
            continue;
        }
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if (j == n - 1) == odd_block {
                    m.axpy(cnum(r, scale), &so_generator(n, i, j));
                }
            }
        }
        terms.push((mask, m));
    }
    GMat::from_terms(l, &CMat::zeros(n, n), terms)
}

/// Independent matrix exponential: Pade-free Taylor on a scaled matrix,
/// repeated squaring, 30 terms.
pub fn expm_oracle(a: &CMat) -> CMat {
    let n = a.rows();
    let mut s = 0;
    while a.frob() * 0.5f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a.scale_re(0.5f64.powi(s));
    let mut term = CMat::identity(n);
    let mut sum = CMat::identity(n);
    for k in 1..30 {
        term = (&term * &scaled).scale_re(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Random frame `exp(A)` with `A` an `so(3)`-valued even superfield.
pub fn frame_fn(seed: u64, l: u8) -> impl Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync + Clone + 'static {
    let mut r = rng(seed);
    let mut comps = Vec::new();
    for k in 0..4 {
        let parity = if k == 1 || k == 2 { 1 } else { 0 };
        let cs: Vec<GMat> = (0..4)
            .map(|_| {
                let m = grassmann_mat(&mut r, l, 3, 3, parity, 0.4, parity == 0);
                &m - &m.transpose()
            })
            .collect();
        comps.push(cs);
    }
    move |x, y, order| {
        let (xj, yj) = xy_jets(l, x, y, order);
        let one = Jet::constant(GMat::identity(l, 1), order);
        let monos = [one, xj.clone(), yj.clone(), xj.mul(&yj)];
        let a: Vec<Jet<GMat>> = comps
            .iter()
            .map(|cs| jet_combination(&monos.iter().cloned().zip(cs.iter().cloned()).collect::<Vec<_>>()))
            .collect();
        let a = Sup::new(a[0].clone(), a[1].clone(), a[2].clone(), a[3].clone());
        alg_exp(&a, &Sup::body_only(Jet::constant(GMat::identity(l, 3), order)))
    }
}

/// Zero-curvature pair `(F^-1 D F, F^-1 Dbar F)` of a frame.
pub fn pair_from_frame(f: impl Fn(f64, f64, usize) -> SuperJet<GMat> + Send + Sync + 'static) -> Box<PairFn> {
    Box::new(move |x, y, order| {
        let mc = maurer_cartan(&f(x, y, order + 1));
        (mc.d.truncate(order), mc.dbar.truncate(order))
    })
}
