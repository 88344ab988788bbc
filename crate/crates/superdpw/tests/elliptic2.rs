mod common;

use common::*;
use superdpw::cmat::{c, re, C64};
use superdpw::dpw::*;
use superdpw::elliptic2::*;
use superdpw::grassmann::{GMat, GrassmannNumber};
use superdpw::jet::{Alg, Jet, Sup};
use superdpw::liealg::LieModel;
use superdpw::loops::{LoopElement, Twist};

const L: u8 = 4;
const N: usize = 6;

fn gen(k: u32, v: f64) -> GrassmannNumber {
    GrassmannNumber::generator(L, k + 1, re(v))
}

fn poly(cs: Vec<GrassmannNumber>) -> GrassmannPolynomial {
    GrassmannPolynomial::new(cs)
}

/// `i a b diag(1, 1, -2)` written out entry by entry.
fn expected_minus_two(a: &GrassmannNumber, b: &GrassmannNumber) -> GMat {
    let ab = (a * b).scale(c(0.0, 1.0));
    GMat::from_entries(L, 3, 3, |i, j| match (i, j) {
        (0, 0) | (1, 1) => ab.clone(),
        (2, 2) => ab.scale(re(-2.0)),
        _ => GrassmannNumber::zero(L),
    })
}

#[test]
fn a0_lies_in_the_minus_one_eigenspace() {
    let model = LieModel::su3_four_symmetric();
    let a0 = cp2_a0(L, &(&gen(0, 0.7) + &gen(2, -0.3)), &gen(1, 1.1));
    let g = sigma_grading(&a0, &model).unwrap();
    assert!((&g[3] - &a0).max_abs() < 1e-15);
    assert!(g[0].max_abs() + g[1].max_abs() + g[2].max_abs() < 1e-15);
}

#[test]
fn cp2_minus_two_coefficient() {
    let zero = cp2_build_potential(L, N, poly(vec![]), poly(vec![])).unwrap();
    assert_eq!(zero.induced_even(0.3, 0.2).coeff(-2).max_abs(), 0.0);

    let (a, b) = (gen(0, 0.8), gen(1, -0.6));
    let p = cp2_build_potential(L, N, poly(vec![a.clone()]), poly(vec![b.clone()])).unwrap();
    let got = p.induced_even(0.1, -0.4).coeff(-2);
    assert!((&got - &expected_minus_two(&a, &b)).max_abs() < 1e-15);
    let y = GMat::from_mat(L, superdpw::liealg::su3_y());
    let three_ab_y = (&a * &b).scale(re(3.0)).times_mat(&y);
    assert!((&got - &three_ab_y).max_abs() < 1e-15);

    // a = eta1 z: coefficient 3 eta1 eta2 z Y
    let p = cp2_build_potential(L, N, poly(vec![GrassmannNumber::zero(L), a.clone()]), poly(vec![b.clone()])).unwrap();
    let (x, yv) = (0.3, -0.7);
    let az = a.scale(c(x, yv));
    let got = p.induced_even(x, yv).coeff(-2);
    assert!((&got - &expected_minus_two(&az, &b)).max_abs() < 1e-15);
    assert!(p.holomorphy_residual(&[(0.1, 0.2), (-0.3, 0.4)]) < 1e-9);
}

#[test]
fn cp2_rejects_even_data() {
    let even = GrassmannNumber::real(L, 1.0);
    assert!(matches!(cp2_build_potential(L, N, poly(vec![even]), poly(vec![])), Err(Elliptic2Error::Parity("a"))));
}

fn random_state(seed: u64, model: &LieModel, x: f64, y: f64) -> SecondEllipticState {
    let mut r = rng(seed);
    let order = 2;
    let (xj, yj) = xy_jets(L, x, y, order);
    let one = Jet::constant(GMat::identity(L, 1), order);
    let monos = [one, xj.clone(), yj.clone(), xj.mul(&yj), xj.mul(&xj)];
    let comp = |r: &mut rand_chacha::ChaCha8Rng, k: i32| -> Jet<GMat> {
        let parts: Vec<(Jet<GMat>, GMat)> = monos
            .iter()
            .map(|m| {
                let raw = &grassmann_mat(r, L, 3, 3, 0, 0.5, true) + &GMat::from_mat(L, cmat(r, 3, 0.5)).scale(c(0.0, 1.0));
                (m.clone(), model.sigma_project(&raw, k).unwrap())
            })
            .collect();
        jet_combination(&parts)
    };
    SecondEllipticState { u: [comp(&mut r, 0), comp(&mut r, -1), comp(&mut r, -2)] }
}

fn lambdas() -> Vec<C64> {
    (0..8).map(|k| C64::from_polar(1.0, 0.2 + 0.8 * k as f64)).collect()
}

#[test]
fn system_and_zero_curvature_agree_on_arbitrary_states() {
    let model = LieModel::su3_four_symmetric();
    for seed in 0..5 {
        let s = random_state(100 + seed, &model, 0.3, -0.2);
        let rep = second_elliptic_residual(&s, &model, &lambdas()).unwrap();
        assert!(rep.form > 1e-2, "non-solution expected");
        assert!(rep.agreement < 1e-10, "{rep:?}");
        assert!(rep.grading < 1e-14, "{rep:?}");
    }
}

#[test]
fn trivial_second_elliptic_states() {
    let model = LieModel::su3_four_symmetric();
    let z = Jet::constant(GMat::zeros(L, 3, 3), 1);
    let rep = second_elliptic_residual(&SecondEllipticState { u: [z.clone(), z.clone(), z.clone()] }, &model, &lambdas()).unwrap();
    assert_eq!(rep.max(), 0.0);

    let mut r = rng(7);
    let u2 = model.sigma_project(&GMat::from_mat(L, cmat(&mut r, 3, 1.0)), 2).unwrap();
    let ub2 = conj_form(&u2);
    let expected = (&(&u2 * &ub2) - &(&ub2 * &u2)).max_abs();
    let s = SecondEllipticState { u: [z.clone(), z, Jet::constant(u2, 1)] };
    let rep = second_elliptic_residual(&s, &model, &lambdas()).unwrap();
    assert_eq!(rep.equations[0], 0.0);
    assert_eq!(rep.equations[1], 0.0);
    assert_eq!(rep.equations[2], expected);
}

#[test]
fn primitive_residual_isolates_wrong_eigenspace() {
    let model = LieModel::su3_four_symmetric();
    let mut r = rng(8);
    let body = GMat::from_mat(L, special_unitary(&mut r, 3));
    let constant = Sup::body_only(Jet::constant(body, 1));
    assert_eq!(primitive_residual_at(&constant, &model).unwrap(), 0.0);

    // F = 1 + theta X with X odd in g~_1 and X^2 = 0: alpha(D) = X
    let raw = GMat::blade(L, 0b1, cmat(&mut r, 3, 1.0));
    let x = model.sigma_project(&raw, 1).unwrap();
    let one = GMat::identity(L, 3);
    let zero = GMat::zeros(L, 3, 3);
    let f = Sup::from_complex(one, x.clone(), zero.clone(), zero).map(|m| Jet::constant(m.clone(), 1));
    let res = primitive_residual_at(&f, &model).unwrap();
    assert!((res - x.max_abs()).abs() < 1e-15);
    assert!(matches!(primitive_residual_at(&f, &LieModel::sphere(2)), Err(_)));
}

struct Chain {
    pipe: Pipeline,
    grid: Grid,
}

fn cp2_chain(a: GrassmannPolynomial, b: GrassmannPolynomial, twist: Twist) -> Chain {
    let model = LieModel::su3_four_symmetric();
    let p = cp2_build_potential(L, N, a.clone(), b.clone()).unwrap();
    let p = if twist == Twist::Sigma {
        p
    } else {
        let (a2, b2) = (a.clone(), b.clone());
        Potential::new(
            L,
            3,
            N,
            twist,
            Provenance::Cp2,
            move |x, y| LoopElement::monomial(-1, cp2_a0(L, &a2.eval(L, x, y), &b2.eval(L, x, y)), N, Twist::Tau),
            |_, _| LoopElement::zero(L, 3, N, Twist::Tau),
        )
    };
    let grid = Grid::square(11, 0.5);
    let pipe = run_pipeline(&p, &model, &grid, &PipelineOptions::default()).unwrap();
    Chain { pipe, grid }
}

fn sample_ab() -> (GrassmannPolynomial, GrassmannPolynomial) {
    (poly(vec![gen(0, 0.6), gen(2, 0.4)]), poly(vec![gen(1, -0.5), GrassmannNumber::zero(L), gen(3, 0.3)]))
}

#[test]
fn superprimitive_chain() {
    let model = LieModel::su3_four_symmetric();
    let (a, b) = sample_ab();
    let ch = cp2_chain(a, b, Twist::Sigma);
    let frame = ch.pipe.frame_field(re(1.0));
    let nodes = ch.grid.interior(2);
    let pr = primitive_residual(&frame, &model, &nodes).unwrap();
    assert!(pr < 1e-7, "{pr:e}");
    for &k in &nodes {
        let jet = frame.jet_at(k % ch.grid.nx, k / ch.grid.nx);
        let (state, leak) = restrict_superprimitive(&jet, &model).unwrap();
        assert!(leak < 1e-8);
        assert_eq!(state.u[2].value().body().max_abs(), 0.0);
        let rep = second_elliptic_residual(&state, &model, &lambdas()).unwrap();
        assert!(rep.max() < 1e-6, "{rep:?}");
        assert!(rep.agreement < 1e-10, "{rep:?}");
        let h = reductive_harmonicity_at(&jet, &model).unwrap();
        assert!(h.residual < 1e-6 && h.m_bracket < 1e-10, "{h:?}");
    }
}

#[test]
fn restricted_minus_two_coefficient_is_the_potential_square() {
    let model = LieModel::su3_four_symmetric();
    let (a, b) = (gen(0, 0.6), gen(1, -0.5));
    let ch = cp2_chain(poly(vec![a.clone()]), poly(vec![b.clone()]), Twist::Sigma);
    let frame = ch.pipe.frame_field(re(1.0));
    let want = expected_minus_two(&a, &b);
    for k in ch.grid.interior(2) {
        let (state, _) = restrict_superprimitive(&frame.jet_at(k % ch.grid.nx, k / ch.grid.nx), &model).unwrap();
        assert!((state.u[2].value() - &want).max_abs() < 1e-10);
    }
}

#[test]
fn sigma_and_tau_pipelines_agree() {
    let (a, b) = sample_ab();
    let s = cp2_chain(a.clone(), b.clone(), Twist::Sigma);
    let t = cp2_chain(a, b, Twist::Tau);
    for lam in [re(1.0), c(0.6, 0.8)] {
        let d = s.pipe.frame_values(lam).iter().zip(t.pipe.frame_values(lam)).map(|(u, v)| u.sub(&v).max_abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d:e}");
    }
}

#[test]
fn lagrangian_angle_constant() {
    let model = LieModel::su3_four_symmetric();
    let (a, b) = sample_ab();
    let ch = cp2_chain(a.clone(), b.clone(), Twist::Sigma);
    let ang = cp2_lagrangian_angle(&ch.pipe.frame_field(re(1.0)), &model, &a, &b, 2).unwrap();
    let cf = ang.c.expect("ab is nonzero");
    assert!(ang.fit_residual < 1e-6, "{:e}", ang.fit_residual);
    assert!(ang.laplacian < 1e-8, "{:e}", ang.laplacian);
    assert!(ang.closedness < 1e-10, "{:e}", ang.closedness);
    assert!((cf - re(6.0)).norm() < 1e-6, "c = {cf}");

    let zero = cp2_chain(poly(vec![]), poly(vec![]), Twist::Sigma);
    let ang0 = cp2_lagrangian_angle(&zero.pipe.frame_field(re(1.0)), &model, &poly(vec![]), &poly(vec![]), 2).unwrap();
    assert!(ang0.c.is_none());
    assert!(ang0.beta.iter().all(|v| v.max_abs() == 0.0));
}

#[test]
fn body_sigma_frame_has_no_minus_two_part() {
    let model = LieModel::su3_four_symmetric();
    let mut r = rng(9);
    let x = model.sigma_project(&GMat::from_mat(L, cmat(&mut r, 3, 0.3)), -1).unwrap();
    let p = Potential::new(
        L,
        3,
        12,
        Twist::Sigma,
        Provenance::Generic,
        |_, _| LoopElement::zero(L, 3, 12, Twist::Sigma),
        move |_, _| LoopElement::monomial(-1, x.clone(), 12, Twist::Sigma),
    );
    let grid = Grid::square(11, 0.3);
    let pipe = run_pipeline(&p, &model, &grid, &PipelineOptions::default()).unwrap();
    let frame = pipe.frame_field(re(1.0));
    for k in grid.interior(2) {
        let (state, _) = restrict_superprimitive(&frame.jet_at(k % grid.nx, k / grid.nx), &model).unwrap();
        assert!(state.u[2].value().max_abs() < 1e-6);
    }
}
