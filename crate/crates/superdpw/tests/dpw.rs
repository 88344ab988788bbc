mod common;

use common::*;
use rand_chacha::ChaCha8Rng;
use superdpw::cmat::{c, re, CMat, C64, I};
use superdpw::dpw::*;
use superdpw::grassmann::GMat;
use superdpw::iwasawa::IwasawaOptions;
use superdpw::jet::{Alg, Jet, Sup, SuperJet};
use superdpw::liealg::LieModel;
use superdpw::loops::{circle_points, sample_count, LoopElement, Twist};
use superdpw::superfield::{superharmonic_residual_sphere, SpherePoint};

const L: u8 = 2;
const N: usize = 6;
/// Body potentials make `g0` an infinite Laurent series; this truncation
/// keeps the tail below the Iwasawa acceptance level on small grids.
const BODY_N: usize = 12;

fn term(part: PotentialPart, z_power: u32, lambda_power: i32, matrix: GMat) -> PotentialTerm {
    PotentialTerm { part, z_power, lambda_power, matrix }
}

/// Twisted polynomial potential on `so(3)`: odd powers of lambda in `m`, even in `k`.
fn random_potential(r: &mut ChaCha8Rng, n: usize, body: f64, soul: f64) -> Potential {
    use PotentialPart::*;
    let mut terms = Vec::new();
    for (zp, lp) in [(0, -1), (1, -1), (0, 1)] {
        let m = &sphere_m_part(r, L, 3, 0, soul) + &GMat::from_mat(L, sphere_m_part(r, 0, 3, 0, body).body().clone());
        terms.push(term(DTheta, zp, lp, m));
        terms.push(term(D0, zp, lp, sphere_m_part(r, L, 3, 1, soul)));
    }
    terms.push(term(DTheta, 1, 0, GMat::from_mat(L, sphere_k_part(r, 0, 3, 0, body).body().clone())));
    terms.push(term(D0, 0, 0, sphere_k_part(r, L, 3, 1, soul)));
    Potential::polynomial(L, 3, n, Twist::Tau, terms).unwrap()
}

fn odd_direction(n: usize) -> CMat {
    so_generator(n, 0, n - 1)
}

fn blade(mask: u32, m: &CMat) -> GMat {
    GMat::blade(L, mask, m.clone())
}

#[test]
fn zero_potential_gives_identity_frames() {
    let p = Potential::zero(L, 3, N, Twist::Tau);
    let grid = Grid::square(5, 0.5);
    let body = integrate_body_frame(&p, &grid, 4);
    let id = GMat::identity(L, 3);
    assert!(body.values.iter().flatten().all(|g| (g - &id).max_abs() == 0.0));
    let pipe = run_pipeline(&p, &LieModel::sphere(2), &grid, &PipelineOptions::default()).unwrap();
    for f in pipe.frame_values(c(0.6, 0.8)) {
        assert!(f.sub(&Sup::body_only(id.clone())).max_abs() < 1e-14);
    }
}

#[test]
fn constant_potential_matches_matrix_exponential() {
    let mut r = rng(11);
    let a = sphere_m_part(&mut r, 0, 3, 0, 0.6).body().clone();
    let b = sphere_k_part(&mut r, 0, 3, 0, 0.6).body().clone();
    let terms = vec![
        term(PotentialPart::DTheta, 0, -1, GMat::from_mat(L, a.clone())),
        term(PotentialPart::DTheta, 0, 0, GMat::from_mat(L, b.clone())),
    ];
    let p = Potential::polynomial(L, 3, N, Twist::Tau, terms).unwrap();
    let grid = Grid::square(17, 0.6);
    let body = integrate_body_frame(&p, &grid, 4);
    let pts = circle_points(sample_count(N));
    let mut worst = 0.0f64;
    for k in 0..grid.len() {
        let (x, y) = grid.point(k);
        for (j, lam) in pts.iter().enumerate() {
            let gen = &a.scale(lam.inv()) + &b;
            let want = expm_oracle(&gen.scale(-c(x, y)));
            worst = worst.max((body.values[k][j].body() - &want).max_abs());
        }
    }
    assert!(worst < 1e-9, "exp mismatch {worst:e}");
}

#[test]
fn polynomial_potential_is_path_independent() {
    let mut r = rng(12);
    let p = random_potential(&mut r, N, 0.5, 0.3);
    let grid = Grid::square(9, 0.5);
    let body = integrate_body_frame(&p, &grid, 4);
    assert!(body.path_independence < 1e-8, "{:e}", body.path_independence);
    let hol = assemble_super_frame(&p, &body);
    assert!(hol.chiral_residual < 1e-9, "{:e}", hol.chiral_residual);
}

#[test]
fn assembled_frame_starts_at_the_potential() {
    let mut r = rng(13);
    let p = random_potential(&mut r, N, 0.5, 0.3);
    let grid = Grid::square(3, 0.2);
    let hol = assemble_super_frame(&p, &integrate_body_frame(&p, &grid, 4));
    let centre = 4;
    assert_eq!(grid.point(centre), (0.0, 0.0));
    let want = p.mu_d0(0.0, 0.0).samples(sample_count(N));
    for (g, w) in hol.g_theta[centre].iter().zip(&want) {
        assert!((g - w).max_abs() < 1e-15);
    }
}

#[test]
fn split_with_trivial_plus_factor() {
    let model = LieModel::sphere(2);
    let x = &blade(0b01, &odd_direction(3)).scale(c(0.3, 0.4)) + &blade(0b10, &odd_direction(3)).scale(re(-0.2));
    let mu = LoopElement::monomial(-1, x.clone(), N, Twist::Tau);
    let g0 = vec![GMat::identity(L, 3); sample_count(N)];
    let f = split_super_frame(&g0, &mu, Twist::Tau, &model, &IwasawaOptions::default()).unwrap();
    let ix = x.scale(I);
    let want_a = LoopElement::from_terms(vec![(-1, x.clone()), (1, -x.adjoint())], N, Twist::Tau);
    let want_b = LoopElement::from_terms(vec![(-1, ix.clone()), (1, -ix.adjoint())], N, Twist::Tau);
    assert!(f.psi1().distance(&want_a) < 1e-14);
    assert!(f.psi2().distance(&want_b) < 1e-14);
    assert!(f.residuals.chiral_max() < 1e-13);
    assert!(f.residuals.super_unitarity < 1e-13);
}

#[test]
fn split_of_even_frame_has_no_odd_part() {
    let model = LieModel::sphere(2);
    let mut r = rng(14);
    let p = random_potential(&mut r, BODY_N, 0.5, 0.0);
    let grid = Grid::square(3, 0.3);
    let body = integrate_body_frame(&p, &grid, 4);
    let zero = LoopElement::zero(L, 3, BODY_N, Twist::Tau);
    let f = split_super_frame(&body.values[0], &zero, Twist::Tau, &model, &IwasawaOptions::default()).unwrap();
    for part in [&f.a, &f.b, &f.c, &f.f_prime] {
        assert_eq!(part.max_abs(), 0.0);
    }
}

#[test]
fn random_potential_split_residuals() {
    let model = LieModel::sphere(2);
    let mut r = rng(15);
    let p = random_potential(&mut r, BODY_N, 0.4, 0.3);
    let grid = Grid::square(5, 0.3);
    let pipe = run_pipeline(&p, &model, &grid, &PipelineOptions::default()).unwrap();
    let rep = &pipe.report;
    assert!(rep.split_chiral < 1e-8, "{rep:?}");
    assert!(rep.super_unitarity < 1e-8, "{rep:?}");
    assert!(rep.plus_structure < 1e-8, "{rep:?}");
    assert!(rep.reality < 1e-12, "{rep:?}");
    assert!(rep.twist < 1e-10, "{rep:?}");
}

#[test]
fn zero_curvature_of_trivial_and_constant_pairs() {
    let zero = Sup::body_only(Jet::constant(GMat::zeros(L, 3, 3), 1));
    assert_eq!(zero_curvature_residual(&zero, &zero).max(), 0.0);

    let mut r = rng(16);
    let a = sphere_m_part(&mut r, L, 3, 1, 0.5);
    let b = sphere_k_part(&mut r, L, 3, 1, 0.5);
    let ad = Sup::body_only(&a + &b);
    let adb = conjugate_superfield(&ad);
    let jet = |s: &Sup<GMat>| -> SuperJet<GMat> { s.map(|m| Jet::constant(m.clone(), 1)) };
    let res = zero_curvature_residual(&jet(&ad), &jet(&adb));
    let bracket = adb.mul(&ad).add(&ad.mul(&adb)).max_abs();
    assert!(bracket > 1e-3);
    assert_eq!(res.direct, bracket);
    assert!(res.agreement < 1e-14);
}

#[test]
fn reconstruction_of_trivial_pair_is_identity() {
    let pf: Box<PairFn> = Box::new(|_, _, order| {
        let z = Sup::body_only(Jet::constant(GMat::zeros(L, 3, 3), order));
        (z.clone(), z)
    });
    let rec = reconstruct_frame(&*pf, (0.0, 0.0), &GMat::identity(L, 3), &[(0.3, -0.2), (-0.4, 0.1)], &ReconstructOptions::default()).unwrap();
    for f in &rec.frames {
        assert!(f.sub(&Sup::body_only(GMat::identity(L, 3))).max_abs() < 1e-15);
    }
}

#[test]
fn reconstruction_round_trip_and_rejection() {
    let frame = frame_fn(17, L);
    let pf = pair_from_frame(frame.clone());
    let base = frame(0.0, 0.0, 0).value().c[0].clone();
    let targets = [(0.4, 0.3), (-0.5, 0.2), (0.1, -0.45)];
    let rec = reconstruct_frame(&*pf, (0.0, 0.0), &base, &targets, &ReconstructOptions::default()).unwrap();
    assert!(rec.flatness < 1e-12, "{:e}", rec.flatness);
    assert!(rec.verification < 1e-8, "{:e}", rec.verification);
    for (f, &(x, y)) in rec.frames.iter().zip(&targets) {
        let err = f.sub(&frame(x, y, 0).value()).max_abs();
        assert!(err < 1e-8, "round trip {err:e}");
    }

    let kick = blade(0b01, &so_generator(3, 0, 1)).scale_re(0.1);
    let inner = pair_from_frame(frame);
    let broken: Box<PairFn> = Box::new(move |x, y, order| {
        let (ad, adb) = inner(x, y, order);
        let mut ad = ad;
        ad.c[0] = ad.c[0].add(&Jet::constant(kick.clone(), order));
        (ad, adb)
    });
    let err = reconstruct_frame(&*broken, (0.0, 0.0), &base, &targets, &ReconstructOptions::default()).unwrap_err();
    assert!(matches!(err, DpwError::NotFlat(_)));
}

#[test]
fn pure_theta_pair_integrates_to_exponential() {
    let gen = so_generator(3, 0, 1).scale_re(0.7);
    let cm = GMat::from_mat(L, gen.clone());
    let ad = Sup::from_complex(GMat::zeros(L, 3, 3), cm.clone(), GMat::zeros(L, 3, 3), GMat::zeros(L, 3, 3));
    let adb = conjugate_superfield(&ad);
    let pf: Box<PairFn> = Box::new(move |_, _, order| (ad.map(|m| Jet::constant(m.clone(), order)), adb.map(|m| Jet::constant(m.clone(), order))));
    let targets = [(0.5, 0.3), (-0.3, -0.4)];
    let rec = reconstruct_frame(&*pf, (0.0, 0.0), &GMat::identity(L, 3), &targets, &ReconstructOptions::default()).unwrap();
    for (f, &(x, _)) in rec.frames.iter().zip(&targets) {
        // d/dz U = -U C and d/dzbar U = -U C, so U = exp(-2x C)
        let want = expm_oracle(&gen.scale_re(-2.0 * x));
        assert!((f.c[0].body() - &want).max_abs() < 1e-10);
        assert!(f.c[1].max_abs() + f.c[2].max_abs() + f.c[3].max_abs() < 1e-15);
    }
}

#[test]
fn constant_frame_is_superharmonic() {
    let model = LieModel::sphere(2);
    let f = Sup::body_only(frame_fn(18, L)(0.2, 0.1, 0).value().c[0].clone());
    let grid = Grid::square(5, 0.5);
    let field = grid.field(vec![f; grid.len()]);
    let nodes: Vec<usize> = (0..grid.len()).collect();
    // stencil weights cancel only up to rounding
    assert!(superharmonic_residual_symmetric(&field, &model, &nodes) < 1e-13);
}

fn soul_eta_potential(extent_scale: f64) -> Potential {
    let x = odd_direction(3);
    let e1 = blade(0b01, &x).scale(c(0.4, 0.2));
    let e2 = blade(0b10, &x).scale(c(-0.3, 0.5 * extent_scale));
    normalized_potential_from_eta(L, 3, N, Twist::Tau, move |x, y| &e1 + &e2.scale(c(x, y)))
}

#[test]
fn normalized_pipeline_is_superharmonic_on_the_sphere() {
    let model = LieModel::sphere(2);
    let grid = Grid::square(32, 1.0);
    let pipe = run_pipeline(&soul_eta_potential(1.0), &model, &grid, &PipelineOptions::default()).unwrap();
    let nodes: Vec<usize> = (0..grid.len()).collect();
    let frame = pipe.frame_field(re(1.0));
    let sym = superharmonic_residual_symmetric(&frame, &model, &nodes);
    assert!(sym < 1e-6, "criterion residual {sym:e}");
    let target = pipe.target_field(c(0.6, -0.8)).unwrap();
    for k in [0, 100, 527, 1023] {
        let (i, j) = (k % grid.nx, k / grid.nx);
        let sp = SpherePoint::new(target.jet_at(i, j)).unwrap();
        let rep = superharmonic_residual_sphere(&sp).unwrap();
        assert!(rep.dbard < 1e-6, "{rep:?}");
    }
}

#[test]
fn nonholomorphic_potential_breaks_harmonicity() {
    let model = LieModel::sphere(2);
    let grid = Grid::square(17, 0.5);
    let x = GMat::from_mat(L, odd_direction(3).scale_re(0.3));
    let make = |broken: bool| {
        let x = x.clone();
        let d0 = move |_: f64, _: f64| LoopElement::zero(L, 3, BODY_N, Twist::Tau);
        let dth = move |px: f64, py: f64| {
            let s = if broken { c(1.0, 0.0) + c(px, -py) } else { re(1.0) };
            LoopElement::monomial(-1, x.scale(s), BODY_N, Twist::Tau)
        };
        Potential::new(L, 3, BODY_N, Twist::Tau, Provenance::Generic, d0, dth)
    };
    let opts = PipelineOptions { allow_nonholomorphic: true, ..Default::default() };
    let nodes = grid.interior(3);
    let run = |p: &Potential| {
        let pipe = run_pipeline(p, &model, &grid, &opts).unwrap();
        superharmonic_residual_symmetric(&pipe.frame_field(re(1.0)), &model, &nodes)
    };
    let good = run(&make(false));
    let bad = run(&make(true));
    assert!(good < 1e-5, "control {good:e}");
    assert!(bad > 1e-3, "broken {bad:e}");
    let strict = run_pipeline(&make(true), &model, &grid, &PipelineOptions::default()).unwrap_err();
    assert!(matches!(strict, DpwError::NotHolomorphic(_)));
}

#[test]
fn normalized_potential_data() {
    let zero = normalized_potential_from_eta(L, 3, N, Twist::Tau, |_, _| GMat::zeros(L, 3, 3));
    assert_eq!(zero.mu_d0(0.3, 0.1).max_abs(), 0.0);
    assert_eq!(zero.induced_even(0.3, 0.1).max_abs(), 0.0);

    let mut r = rng(19);
    let eta = &sphere_m_part(&mut r, 4, 3, 1, 0.5) + &GMat::zeros(4, 3, 3);
    let e = eta.clone();
    let p = normalized_potential_from_eta(4, 3, N, Twist::Tau, move |_, _| e.clone());
    let even = p.induced_even(0.2, -0.1);
    let sq = &eta * &eta;
    assert!(sq.max_abs() > 1e-3);
    assert!((&even.coeff(-2) + &sq).max_abs() < 1e-15);
    assert_eq!(p.mu_dtheta(0.0, 0.0).max_abs(), 0.0);
}

#[test]
fn window_and_parity_are_enforced() {
    let m = GMat::from_mat(L, odd_direction(3));
    let bad_window = Potential::polynomial(L, 3, N, Twist::Tau, vec![term(PotentialPart::DTheta, 0, -2, m.clone())]);
    assert!(matches!(bad_window, Err(DpwError::Window { .. })));
    let bad_parity = Potential::polynomial(L, 3, N, Twist::Tau, vec![term(PotentialPart::D0, 0, -1, m)]);
    assert!(matches!(bad_parity, Err(DpwError::Parity(_))));
}

#[test]
fn gauge_identity_and_constant() {
    let mut r = rng(20);
    let p = random_potential(&mut r, N, 0.4, 0.3);
    let q = gauge_transform_potential(&HolomorphicGauge::identity(), &p).unwrap();
    for (x, y) in [(0.1, 0.2), (-0.3, 0.4)] {
        assert!(q.mu_d0(x, y).distance(&p.mu_d0(x, y)) < 1e-15);
        assert!(q.mu_dtheta(x, y).distance(&p.mu_dtheta(x, y)) < 1e-15);
    }
    let b = sphere_k_part(&mut r, 0, 3, 0, 0.5).body().clone();
    let h = HolomorphicGauge { factors: vec![(0, LoopElement::constant(GMat::from_mat(L, b), N, Twist::Tau))], zeta: Vec::new() };
    let zero = gauge_transform_potential(&h, &Potential::zero(L, 3, N, Twist::Tau)).unwrap();
    assert!(zero.mu_d0(0.2, 0.3).max_abs() < 1e-15);
    assert!(zero.mu_dtheta(0.2, 0.3).max_abs() < 1e-15);
}

#[test]
fn gauge_rejects_negative_powers() {
    let x = GMat::from_mat(L, odd_direction(3));
    let h = HolomorphicGauge { factors: vec![(1, LoopElement::monomial(-1, x, N, Twist::Tau))], zeta: Vec::new() };
    assert!(matches!(gauge_transform_potential(&h, &Potential::zero(L, 3, N, Twist::Tau)), Err(DpwError::GaugeWindow(_))));
}

#[test]
fn gauged_potential_gives_same_sphere_map() {
    let model = LieModel::sphere(2);
    let mut r = rng(21);
    let p = random_potential(&mut r, BODY_N, 0.4, 0.3);
    let x1 = sphere_m_part(&mut r, 0, 3, 0, 0.15).body().clone();
    let x2 = sphere_k_part(&mut r, L, 3, 0, 0.15);
    let zeta = sphere_m_part(&mut r, L, 3, 1, 0.2);
    let h = HolomorphicGauge {
        factors: vec![
            (1, LoopElement::monomial(1, GMat::from_mat(L, x1), BODY_N, Twist::Tau)),
            (2, LoopElement::constant(x2, BODY_N, Twist::Tau)),
        ],
        zeta: vec![LoopElement::zero(L, 3, BODY_N, Twist::Tau), LoopElement::monomial(1, zeta, BODY_N, Twist::Tau)],
    };
    let q = gauge_transform_potential(&h, &p).unwrap();
    let grid = Grid::square(5, 0.3);
    let opts = PipelineOptions { holomorphy_tol: 1e-5, ..Default::default() };
    let a = run_pipeline(&p, &model, &grid, &opts).unwrap();
    let b = run_pipeline(&q, &model, &grid, &opts).unwrap();
    for lam in [re(1.0), c(0.0, 1.0)] {
        let ta = a.target_field(lam).unwrap();
        let tb = b.target_field(lam).unwrap();
        let d = ta.values.iter().zip(&tb.values).map(|(u, v)| u.sub(v).max_abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "fiber mismatch {d:e}");
    }
}

#[test]
fn extended_form_of_pipeline_frame() {
    let model = LieModel::sphere(2);
    let grid = Grid::square(9, 0.5);
    let pipe = run_pipeline(&soul_eta_potential(1.0), &model, &grid, &PipelineOptions::default()).unwrap();
    let lambdas: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, 0.3 + k as f64 * 0.7)).collect();
    let rep = extended_mc_form(&pipe, &lambdas, &grid.interior(2));
    assert!(rep.shape < 1e-7, "{rep:?}");
    assert!(rep.alphaz < 1e-9, "{rep:?}");
    assert!(rep.reality < 1e-9, "{rep:?}");
    assert!(rep.zero_curvature < 1e-7, "{rep:?}");
}
