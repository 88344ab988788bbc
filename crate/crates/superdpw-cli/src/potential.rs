use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use superdpw::cmat::{c, CMat, C64};
use superdpw::dpw::{normalized_potential_from_eta, Potential, PotentialPart, PotentialTerm};
use superdpw::elliptic2::{cp2_build_potential, GrassmannPolynomial};
use superdpw::grassmann::{GMat, GrassmannNumber, GrassmannRecord};
use superdpw::liealg::LieModel;
use superdpw::loops::Twist;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub row: usize,
    pub col: usize,
    pub coeff: Vec<GrassmannRecord>,
}

/// Coefficient `lambda^lambda z^z_power M` with `M` given entry by entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "minus_one")]
    pub lambda: i32,
    #[serde(default)]
    pub z_power: u32,
    pub entries: Vec<EntrySpec>,
}

fn minus_one() -> i32 {
    -1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    Generic,
    Normalized,
    Cp2,
    RandomNormalized,
}

/// Potential file: polynomial coefficient tables in `z` per lambda-power,
/// with Grassmann-valued entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub twist: Option<Twist>,
    /// `generic`: odd part `mu_D^0`.
    #[serde(default)]
    pub d0: Vec<TermSpec>,
    /// `generic`: even part `mu_D^theta`.
    #[serde(default)]
    pub dtheta: Vec<TermSpec>,
    /// `normalized`: `eta` as a polynomial in `z` (the `lambda` field is ignored).
    #[serde(default)]
    pub eta: Vec<TermSpec>,
    /// `cp2`: coefficients of `a` and `b` by ascending power of `z`.
    #[serde(default)]
    pub a: Vec<Vec<GrassmannRecord>>,
    #[serde(default)]
    pub b: Vec<Vec<GrassmannRecord>>,
    /// `random-normalized`: polynomial degree and coefficient scale.
    #[serde(default)]
    pub degree: u32,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    0.5
}

fn matrix(l: u8, n: usize, entries: &[EntrySpec]) -> Result<GMat> {
    let mut cells = vec![GrassmannNumber::zero(l); n * n];
    for e in entries {
        if e.row >= n || e.col >= n {
            bail!("entry ({}, {}) outside a {n}x{n} matrix", e.row, e.col);
        }
        let v = GrassmannNumber::from_records(l, &e.coeff)?;
        cells[e.row * n + e.col] = &cells[e.row * n + e.col] + &v;
    }
    Ok(GMat::from_entries(l, n, n, |i, j| cells[i * n + j].clone()))
}

fn z_poly(terms: Vec<(u32, GMat)>) -> impl Fn(f64, f64) -> GMat + Send + Sync + 'static {
    move |x, y| {
        let z = c(x, y);
        let mut acc = terms[0].1.zero_like();
        for (k, m) in &terms {
            acc = &acc + &m.scale(z.powu(*k));
        }
        acc
    }
}

fn random_odd_direction(r: &mut ChaCha8Rng, model: &LieModel, l: u8, scale: f64) -> Result<GMat> {
    let n = model.size;
    let mut acc = GMat::zeros(l, n, n);
    for g in 0..l {
        let raw = CMat::from_fn(n, n, |_, _| C64::new(r.random_range(-scale..scale), r.random_range(-scale..scale)));
        let x = GMat::blade(l, 1 << g, model.project_gc_cmat(&raw));
        let odd = if model.has_sigma() { model.sigma_project(&x, -1)? } else { model.cartan_parts(&x).1 };
        acc = &acc + &odd;
    }
    Ok(acc)
}

impl PotentialSpec {
    pub fn twist(&self, model: &LieModel) -> Twist {
        self.twist.unwrap_or(if model.has_sigma() { Twist::Sigma } else { Twist::Tau })
    }

    pub fn build(&self, model: &LieModel, l: u8, truncation: usize, seed: u64) -> Result<Potential> {
        let n = model.size;
        let twist = self.twist(model);
        Ok(match self.kind {
            PotentialKind::Zero => Potential::zero(l, n, truncation, twist),
            PotentialKind::Generic => {
                let mut terms = Vec::new();
                for (part, list) in [(PotentialPart::D0, &self.d0), (PotentialPart::DTheta, &self.dtheta)] {
                    for t in list {
                        terms.push(PotentialTerm { part, z_power: t.z_power, lambda_power: t.lambda, matrix: matrix(l, n, &t.entries)? });
                    }
                }
                Potential::polynomial(l, n, truncation, twist, terms)?
            }
            PotentialKind::Normalized => {
                let mut terms = vec![(0, GMat::zeros(l, n, n))];
                for t in &self.eta {
                    terms.push((t.z_power, matrix(l, n, &t.entries)?));
                }
                normalized_potential_from_eta(l, n, truncation, twist, z_poly(terms))
            }
            PotentialKind::RandomNormalized => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                let mut terms = Vec::new();
                for k in 0..=self.degree {
                    terms.push((k, random_odd_direction(&mut r, model, l, self.scale)?));
                }
                normalized_potential_from_eta(l, n, truncation, twist, z_poly(terms))
            }
            PotentialKind::Cp2 => {
                if n != 3 || !model.has_sigma() {
                    bail!("cp2 potentials need the su3-4symmetric model");
                }
                let poly = |cs: &[Vec<GrassmannRecord>]| -> Result<GrassmannPolynomial> {
                    Ok(GrassmannPolynomial::new(cs.iter().map(|r| GrassmannNumber::from_records(l, r)).collect::<Result<_, _>>()?))
                };
                cp2_build_potential(l, truncation, poly(&self.a)?, poly(&self.b)?)?
            }
        })
    }
}
