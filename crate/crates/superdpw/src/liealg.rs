//! Matrix models of symmetric and 4-symmetric data: `g`, the involution `tau`,
//! an optional order-4 automorphism `sigma`, graded projections and brackets
//! over Grassmann scalars.

use crate::cmat::{c, re, CMat, C64, I};
use crate::grassmann::{GMat, Parity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("element not in the complexified algebra (relative residual {residual:e})")]
    NotInAlgebra { residual: f64 },
    #[error("mixed parity operand in bracket")]
    MixedParity,
    #[error("model `{0}` has no order-4 automorphism")]
    NoSigma(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unsupported capability for model `{model}`: {what}")]
    Unsupported { model: String, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// `so(m)`: antisymmetric matrices.
    Orthogonal,
    /// `su(m)`: traceless skew-hermitian matrices.
    Unitary,
}

#[derive(Debug, Clone)]
pub struct LieModel {
    pub name: String,
    pub family: Family,
    pub size: usize,
    /// `tau = Ad diag(tau_diag)`.
    tau_diag: Vec<f64>,
    /// `sigma(X) = -S X^T S^{-1}` when present.
    sigma_mat: Option<CMat>,
    /// Unitary change of basis in which the Borel of `H^C` is upper triangular.
    borel_frame: CMat,
    basis: Vec<CMat>,
}

impl LieModel {
    /// `so(n+1)` with `tau = Ad diag(1,..,1,-1)`; the symmetric space is `S^n`.
    pub fn sphere(n: usize) -> Self {
        assert!(n >= 1, "sphere dimension must be positive");
        let m = n + 1;
        let mut tau_diag = vec![1.0; m];
        tau_diag[m - 1] = -1.0;
        let mut basis = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let mut e = CMat::zeros(m, m);
                e[(i, j)] = re(1.0);
                e[(j, i)] = re(-1.0);
                basis.push(e);
            }
        }
        let qn = orthogonal_borel_frame(n);
        let borel_frame = CMat::from_fn(m, m, |i, j| {
            if i < n && j < n {
                qn[(i, j)]
            } else if i == j {
                re(1.0)
            } else {
                re(0.0)
            }
        });
        LieModel { name: "so(n+1)-sphere".into(), family: Family::Orthogonal, size: m, tau_diag, sigma_mat: None, borel_frame, basis }
    }

    /// `su(m)` with `tau = Ad diag(1,..,1,-1)`; the symmetric space is `CP^{m-1}`.
    pub fn projective(m: usize) -> Self {
        assert!(m >= 2);
        let mut tau_diag = vec![1.0; m];
        tau_diag[m - 1] = -1.0;
        LieModel {
            name: "su(n)-projective".into(),
            family: Family::Unitary,
            size: m,
            tau_diag,
            sigma_mat: None,
            borel_frame: CMat::identity(m),
            basis: su_basis(m),
        }
    }

    /// `su(3)` with the order-4 automorphism `sigma(X) = -S X^T S^{-1}`,
    /// `S = diag(J, 1)`, `J = [[0,1],[-1,0]]`. Its fixed algebra is the
    /// upper-left `su(2)` and `sigma^2 = Ad diag(-1,-1,1) = tau`.
    pub fn su3_four_symmetric() -> Self {
        let s = CMat::from_real_rows(&[&[0.0, 1.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        LieModel {
            name: "su3-4symmetric".into(),
            family: Family::Unitary,
            size: 3,
            tau_diag: vec![1.0, 1.0, -1.0],
            sigma_mat: Some(s),
            borel_frame: CMat::identity(3),
            basis: su_basis(3),
        }
    }

    /// Registry lookup; `dim` is the sphere dimension `n` or the matrix size.
    pub fn by_name(name: &str, dim: usize) -> Result<Self, LieError> {
        match name {
            "so(n+1)-sphere" => Ok(Self::sphere(dim.max(1))),
            "su3-4symmetric" => Ok(Self::su3_four_symmetric()),
            "su(n)-projective" => Ok(Self::projective(dim.max(2))),
            other => Err(LieError::UnknownModel(other.to_string())),
        }
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn has_sigma(&self) -> bool {
        self.sigma_mat.is_some()
    }

    pub fn borel_frame(&self) -> &CMat {
        &self.borel_frame
    }

    /// Sphere dimension when the model is the `S^n` model.
    pub fn sphere_dim(&self) -> Option<usize> {
        (self.family == Family::Orthogonal).then_some(self.size - 1)
    }

    pub fn tau_cmat(&self, x: &CMat) -> CMat {
        CMat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * (self.tau_diag[i] * self.tau_diag[j]))
    }

    pub fn tau(&self, x: &GMat) -> GMat {
        x.linear(|m| self.tau_cmat(m))
    }

    /// Group-level involution `Ad diag(tau_diag)`; same formula as on the algebra.
    pub fn tau_group(&self, g: &GMat) -> GMat {
        self.tau(g)
    }

    pub fn sigma_cmat(&self, x: &CMat) -> Result<CMat, LieError> {
        let s = self.sigma_mat.as_ref().ok_or_else(|| LieError::NoSigma(self.name.clone()))?;
        Ok(-&(&(s * &x.transpose()) * &s.inverse()))
    }

    pub fn sigma(&self, x: &GMat) -> Result<GMat, LieError> {
        let s = self.sigma_mat.as_ref().ok_or_else(|| LieError::NoSigma(self.name.clone()))?;
        let sinv = s.inverse();
        Ok(x.linear(|m| -&(&(s * &m.transpose()) * &sinv)))
    }

    /// Group-level `sigma(g) = S (g^T)^{-1} S^{-1}`.
    pub fn sigma_group(&self, g: &GMat) -> Result<GMat, LieError> {
        let s = self.sigma_mat.as_ref().ok_or_else(|| LieError::NoSigma(self.name.clone()))?;
        let l = g.generators();
        let sg = GMat::from_mat(l, s.clone());
        let sinv = GMat::from_mat(l, s.inverse());
        Ok(&(&sg * &g.transpose().inverse()) * &sinv)
    }

    /// Relative residual of membership in `g^C`.
    pub fn membership_residual_cmat(&self, x: &CMat) -> f64 {
        let scale = x.max_abs().max(1.0);
        let r = match self.family {
            Family::Orthogonal => (x + &x.transpose()).max_abs(),
            Family::Unitary => x.trace().norm(),
        };
        r / scale
    }

    pub fn membership_residual(&self, x: &GMat) -> f64 {
        x.terms().iter().fold(0.0f64, |m, (_, v)| m.max(self.membership_residual_cmat(v)))
    }

    pub fn check_membership(&self, x: &GMat) -> Result<(), LieError> {
        let r = self.membership_residual(x);
        if r > MEMBERSHIP_TOL {
            Err(LieError::NotInAlgebra { residual: r })
        } else {
            Ok(())
        }
    }

    /// Residual of lying in the compact real form `g` (blade-wise skew-hermitian).
    pub fn reality_residual(&self, x: &GMat) -> f64 {
        x.terms().iter().fold(0.0f64, |m, (_, v)| m.max((v + &v.adjoint()).max_abs()))
    }

    /// Orthogonal projection of a matrix onto `g^C` along the trace-form complement.
    pub fn project_gc_cmat(&self, x: &CMat) -> CMat {
        match self.family {
            Family::Orthogonal => (x - &x.transpose()).scale_re(0.5),
            Family::Unitary => {
                let n = x.rows();
                let t = x.trace() / n as f64;
                x - &CMat::identity(n).scale(t)
            }
        }
    }

    /// Trace form `<X,Y> = -tr(XY)`.
    pub fn inner(&self, x: &CMat, y: &CMat) -> C64 {
        -(x * y).trace()
    }

    /// Linear Iwasawa splitting `g^C = g (+) b` of a matrix in `g^C`:
    /// returns `(compact, borel)` with `compact` skew-hermitian and `borel`
    /// upper triangular with real diagonal in the Borel frame.
    pub fn iwasawa_split_cmat(&self, z: &CMat) -> (CMat, CMat) {
        let q = &self.borel_frame;
        let zq = &(&q.adjoint() * z) * q;
        let n = zq.rows();
        let mut k = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                k[(i, j)] = zq[(i, j)];
                k[(j, i)] = -zq[(i, j)].conj();
            }
            k[(i, i)] = c(0.0, zq[(i, i)].im);
        }
        let b = &zq - &k;
        let back = |m: &CMat| &(q * m) * &q.adjoint();
        (back(&k), back(&b))
    }

    pub fn iwasawa_split(&self, z: &GMat) -> (GMat, GMat) {
        let l = z.generators();
        let mut ks = Vec::with_capacity(z.terms().len());
        let mut bs = Vec::with_capacity(z.terms().len());
        for (m, v) in z.terms() {
            let (k, b) = self.iwasawa_split_cmat(v);
            ks.push((*m, k));
            bs.push((*m, b));
        }
        let proto = z.body().zeros_like();
        (GMat::from_terms(l, &proto, ks), GMat::from_terms(l, &proto, bs))
    }

    /// `h` conjugated into the Borel frame.
    pub fn to_borel_frame(&self, h: &CMat) -> CMat {
        &(&self.borel_frame.adjoint() * h) * &self.borel_frame
    }

    /// Deviation from the Borel pattern (upper triangular, positive real
    /// diagonal) in the Borel frame: returns (lower-part norm, min diagonal
    /// real part, max diagonal imaginary part).
    pub fn borel_pattern(&self, h: &CMat) -> (f64, f64, f64) {
        let hb = self.to_borel_frame(h);
        let n = hb.rows();
        let mut lower = 0.0f64;
        let mut min_re = f64::INFINITY;
        let mut max_im = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                lower = lower.max(hb[(i, j)].norm());
            }
            min_re = min_re.min(hb[(i, i)].re);
            max_im = max_im.max(hb[(i, i)].im.abs());
        }
        (lower, min_re, max_im)
    }

    pub fn cartan_split(&self, x: &GMat) -> Result<(GMat, GMat), LieError> {
        self.check_membership(x)?;
        Ok(self.cartan_parts(x))
    }

    /// `(X + tau X)/2, (X - tau X)/2` without the membership check.
    pub fn cartan_parts(&self, x: &GMat) -> (GMat, GMat) {
        let t = self.tau(x);
        ((x + &t).scale_re(0.5), (x - &t).scale_re(0.5))
    }

    /// Component in the `e^{i k pi/2}`-eigenspace of `sigma`.
    pub fn sigma_project(&self, x: &GMat, k: i32) -> Result<GMat, LieError> {
        let k = k.rem_euclid(4);
        let mut acc = x.zero_like();
        let mut cur = x.clone();
        for j in 0..4 {
            let phase = C64::from_polar(0.25, -(k * j) as f64 * std::f64::consts::FRAC_PI_2);
            acc = &acc + &cur.scale(phase);
            cur = self.sigma(&cur)?;
        }
        Ok(acc)
    }

    pub fn sigma_project_cmat(&self, x: &CMat, k: i32) -> Result<CMat, LieError> {
        let k = k.rem_euclid(4);
        let mut acc = x.zeros_like();
        let mut cur = x.clone();
        for j in 0..4 {
            let phase = C64::from_polar(0.25, -(k * j) as f64 * std::f64::consts::FRAC_PI_2);
            acc.axpy(phase, &cur);
            cur = self.sigma_cmat(&cur)?;
        }
        Ok(acc)
    }

    /// Supercommutator of pure-parity matrices.
    pub fn bracket(&self, x: &GMat, y: &GMat) -> Result<GMat, LieError> {
        let (px, py) = (x.parity(), y.parity());
        if px == Parity::Mixed || py == Parity::Mixed {
            return Err(LieError::MixedParity);
        }
        Ok(bracket_with(x, y, px.bit() * py.bit() == 1))
    }

    /// The `g`-component of a product of two algebra elements, `[a,b]/2`.
    pub fn product_projection(&self, a: &GMat, b: &GMat) -> Result<GMat, LieError> {
        self.check_membership(a)?;
        self.check_membership(b)?;
        Ok(self.bracket(a, b)?.scale_re(0.5))
    }

    /// Sup over basis pairs of the failure of the Cartan relations.
    pub fn cartan_closure_residual(&self) -> f64 {
        let parts: Vec<(CMat, CMat)> = self
            .basis
            .iter()
            .map(|b| {
                let t = self.tau_cmat(b);
                ((b + &t).scale_re(0.5), (b - &t).scale_re(0.5))
            })
            .collect();
        let mut worst = 0.0f64;
        for (a0, a1) in &parts {
            for (b0, b1) in &parts {
                let in0 = |x: &CMat| (x - &self.tau_cmat(x)).max_abs();
                let in1 = |x: &CMat| (x + &self.tau_cmat(x)).max_abs();
                worst = worst.max(in0(&a0.commutator(b0)));
                worst = worst.max(in1(&a0.commutator(b1)));
                worst = worst.max(in0(&a1.commutator(b1)));
                worst = worst.max(self.membership_residual_cmat(&a0.commutator(b1)));
            }
        }
        worst
    }

    /// Sup over basis pairs of `[g_k, g_l] in g_{k+l}` and of `sigma^2 = tau`.
    pub fn sigma_grading_residual(&self) -> Result<f64, LieError> {
        let mut comps: Vec<(i32, CMat)> = Vec::new();
        for b in &self.basis {
            for k in 0..4 {
                comps.push((k, self.sigma_project_cmat(b, k)?));
            }
        }
        let mut worst = 0.0f64;
        for b in &self.basis {
            let s2 = self.sigma_cmat(&self.sigma_cmat(b)?)?;
            worst = worst.max((&s2 - &self.tau_cmat(b)).max_abs());
        }
        for (k, x) in &comps {
            for (l, y) in &comps {
                let z = x.commutator(y);
                let p = self.sigma_project_cmat(&z, k + l)?;
                worst = worst.max((&z - &p).max_abs());
            }
        }
        Ok(worst)
    }

    /// Complex dimension of the `sigma`-eigenspace `g_k`.
    pub fn sigma_eigenspace_dim(&self, k: i32) -> Result<usize, LieError> {
        let vecs: Vec<CMat> = self.basis.iter().map(|b| self.sigma_project_cmat(b, k)).collect::<Result<_, _>>()?;
        Ok(complex_rank(&vecs, 1e-10))
    }

    /// Sup of the `m`-component failure of `[g_0, m] in m` over basis pairs.
    pub fn m_invariance_residual(&self) -> Result<f64, LieError> {
        let mut worst = 0.0f64;
        for a in &self.basis {
            let a0 = self.sigma_project_cmat(a, 0)?;
            for b in &self.basis {
                let m = b - &self.sigma_project_cmat(b, 0)?;
                let z = a0.commutator(&m);
                worst = worst.max(self.sigma_project_cmat(&z, 0)?.max_abs());
            }
        }
        Ok(worst)
    }
}

pub fn bracket_with(x: &GMat, y: &GMat, both_odd: bool) -> GMat {
    let xy = x * y;
    let yx = y * x;
    if both_odd {
        &xy + &yx
    } else {
        &xy - &yx
    }
}

/// `Y = (i/3) diag(1, 1, -2)`, spanning `g_2` of the 4-symmetric `su(3)` model.
pub fn su3_y() -> CMat {
    CMat::diag(&[c(0.0, 1.0 / 3.0), c(0.0, 1.0 / 3.0), c(0.0, -2.0 / 3.0)])
}

fn su_basis(m: usize) -> Vec<CMat> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let mut a = CMat::zeros(m, m);
            a[(i, j)] = re(1.0);
            a[(j, i)] = re(-1.0);
            out.push(a);
            let mut s = CMat::zeros(m, m);
            s[(i, j)] = I;
            s[(j, i)] = I;
            out.push(s);
        }
    }
    for k in 0..(m - 1) {
        let mut d = CMat::zeros(m, m);
        d[(k, k)] = I;
        d[(k + 1, k + 1)] = -I;
        out.push(d);
    }
    out
}

/// Unitary `Q` with `Q^T Q` anti-diagonal, pairing `(e_{2k-1}, e_{2k})`.
fn orthogonal_borel_frame(n: usize) -> CMat {
    let mut q = CMat::zeros(n, n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..(n / 2) {
        let (a, b) = (2 * k, 2 * k + 1);
        let (lo, hi) = (k, n - 1 - k);
        q[(a, lo)] = re(h);
        q[(b, lo)] = c(0.0, h);
        q[(a, hi)] = re(h);
        q[(b, hi)] = c(0.0, -h);
    }
    if n % 2 == 1 {
        q[(n - 1, n / 2)] = re(1.0);
    }
    q
}

/// Rank of a family of matrices viewed as complex vectors.
pub fn complex_rank(vs: &[CMat], tol: f64) -> usize {
    if vs.is_empty() {
        return 0;
    }
    let len = vs[0].data().len();
    let m = nalgebra::DMatrix::from_fn(len, vs.len(), |i, j| vs[j].data()[i]);
    let sv = m.svd(false, false).singular_values;
    sv.iter().filter(|s| **s > tol).count()
}
