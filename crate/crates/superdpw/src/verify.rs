//! Residual sweeps over sampled frames, the frame file format and the
//! truncation / grid convergence study.

use crate::cmat::{re, C64};
use crate::dpw::{extended_mc_fields, frame_membership, run_pipeline, superharmonic_residual_symmetric, DpwError, ExtendedMcReport, Grid, Pipeline, PipelineOptions, PipelineReport, Potential};
use crate::elliptic2::{primitive_residual, reductive_harmonicity_at, restrict_superprimitive, second_elliptic_residual, Elliptic2Error};
use crate::grassmann::GrassmannError;
use crate::jet::Sup;
use crate::liealg::{LieError, LieModel};
use crate::loops::{LoopElement, LoopTermSerial, Twist};
use crate::superfield::{sphere_constraint_residual, superharmonic_residual_sphere, GridField, SphereConstraints, SphereHarmonicReport, SpherePoint, SuperfieldError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Dpw(#[from] DpwError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Elliptic2(#[from] Elliptic2Error),
    #[error(transparent)]
    Superfield(#[from] SuperfieldError),
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
    #[error("frame file: {0}")]
    Schema(String),
}

/// `count` points on the unit circle, avoiding `lambda = 1`.
pub fn sample_lambdas(count: usize) -> Vec<C64> {
    (0..count).map(|k| C64::from_polar(1.0, 0.3 + 2.0 * PI * k as f64 / count as f64)).collect()
}

/// Frame sampled at `lambda = 1` and at a few points of the circle.
#[derive(Debug, Clone)]
pub struct FrameSet {
    pub model: LieModel,
    pub grid: Grid,
    pub lambdas: Vec<C64>,
    pub base: GridField,
    pub samples: Vec<GridField>,
}

impl FrameSet {
    pub fn from_pipeline(p: &Pipeline, lambdas: &[C64]) -> Self {
        FrameSet {
            model: p.model.clone(),
            grid: p.grid,
            lambdas: lambdas.to_vec(),
            base: p.frame_field(re(1.0)),
            samples: lambdas.iter().map(|l| p.frame_field(*l)).collect(),
        }
    }

    fn all_fields(&self) -> impl Iterator<Item = &GridField> {
        std::iter::once(&self.base).chain(self.samples.iter())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub constraints: SphereConstraints,
    pub harmonic: SphereHarmonicReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveReport {
    pub primitive: f64,
    pub second_elliptic: f64,
    pub form: f64,
    pub agreement: f64,
    pub grading: f64,
    pub u2_body: f64,
    pub restriction_leak: f64,
    pub reductive_harmonicity: f64,
    pub m_bracket: f64,
}

/// Every frame-level residual; `sphere` and `primitive` only for models
/// that support them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FrameReport {
    pub nodes: usize,
    pub membership: f64,
    /// Lift criterion at `lambda = 1`.
    pub superharmonic: f64,
    /// Lift criterion over the sampled lambdas.
    pub lambda_family: f64,
    pub extended: ExtendedMcReport,
    pub sphere: Option<SphereReport>,
    pub primitive: Option<PrimitiveReport>,
}

impl FrameReport {
    /// Named residuals, in report order.
    pub fn checks(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("membership", self.membership),
            ("superharmonic", self.superharmonic),
            ("lambda_family", self.lambda_family),
            ("lambda_shape", self.extended.shape),
            ("alphaz", self.extended.alphaz),
            ("reality", self.extended.reality),
            ("zero_curvature", self.extended.zero_curvature),
        ];
        if let Some(s) = &self.sphere {
            out.push(("sphere_constraints", s.constraints.max()));
            out.push(("dbard", s.harmonic.dbard));
            out.push(("component_equations", s.harmonic.component_max()));
            out.push(("consistency", s.harmonic.consistency));
        }
        if let Some(p) = &self.primitive {
            out.extend([
                ("primitive", p.primitive),
                ("second_elliptic", p.second_elliptic),
                ("second_elliptic_agreement", p.agreement),
                ("u2_body", p.u2_body),
                ("restriction_leak", p.restriction_leak),
                ("reductive_harmonicity", p.reductive_harmonicity),
                ("m_bracket", p.m_bracket),
            ]);
        }
        out
    }
}

pub fn pipeline_checks(r: &PipelineReport) -> Vec<(&'static str, f64)> {
    vec![
        ("holomorphy", r.holomorphy),
        ("path_independence", r.path_independence),
        ("chiral_potential", r.chiral_potential),
        ("iwasawa_reconstruction", r.reconstruction),
        ("iwasawa_unitarity", r.unitarity),
        ("borel", r.borel),
        ("split_chiral", r.split_chiral),
        ("super_unitarity", r.super_unitarity),
        ("plus_structure", r.plus_structure),
        ("split_reality", r.reality),
        ("twist", r.twist),
        ("truncation_loss", r.truncation_loss),
    ]
}

/// Default tolerance of every named check.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("holomorphy", 1e-6),
        ("path_independence", 1e-8),
        ("chiral_potential", 1e-8),
        ("iwasawa_reconstruction", 1e-10),
        ("iwasawa_unitarity", 1e-10),
        ("borel", 1e-10),
        ("split_chiral", 1e-8),
        ("super_unitarity", 1e-10),
        ("plus_structure", 1e-10),
        ("split_reality", 1e-10),
        ("twist", 1e-10),
        ("truncation_loss", 1e-8),
        ("membership", 1e-6),
        ("superharmonic", 1e-6),
        ("lambda_family", 1e-6),
        ("lambda_shape", 1e-7),
        ("alphaz", 1e-6),
        ("reality", 1e-8),
        ("zero_curvature", 1e-6),
        ("sphere_constraints", 1e-8),
        ("dbard", 1e-6),
        ("component_equations", 1e-6),
        ("consistency", 1e-8),
        ("primitive", 1e-7),
        ("second_elliptic", 1e-6),
        ("second_elliptic_agreement", 1e-10),
        ("u2_body", 0.0),
        ("restriction_leak", 1e-7),
        ("reductive_harmonicity", 1e-6),
        ("m_bracket", 1e-10),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn column_field(f: &GridField, col: usize) -> GridField {
    GridField { values: f.values.iter().map(|v| v.map(|m| m.column(col))).collect(), ..f.clone() }
}

pub fn verify_frames(fs: &FrameSet, margin: usize) -> Result<FrameReport, VerifyError> {
    let model = &fs.model;
    let nodes = fs.grid.interior(margin);
    let superharmonic = superharmonic_residual_symmetric(&fs.base, model, &nodes);
    let lambda_family = fs.samples.iter().map(|f| superharmonic_residual_symmetric(f, model, &nodes)).fold(0.0, f64::max);
    let membership = fs.all_fields().map(|f| frame_membership(f, model)).fold(0.0, f64::max);
    let extended = extended_mc_fields(&fs.base, &fs.lambdas, &fs.samples, model, &nodes);

    let sphere = match model.sphere_dim() {
        Some(_) => {
            let mut rep = SphereReport::default();
            for f in fs.all_fields() {
                let target = column_field(f, model.size - 1);
                let per: Vec<SphereReport> = nodes
                    .par_iter()
                    .map(|&k| -> Result<SphereReport, SuperfieldError> {
                        let sp = SpherePoint::new(target.jet_at(k % target.nx, k / target.nx))?;
                        Ok(SphereReport { constraints: sphere_constraint_residual(&sp), harmonic: superharmonic_residual_sphere(&sp)? })
                    })
                    .collect::<Result<_, _>>()?;
                for r in per {
                    rep = SphereReport { constraints: rep.constraints.merge(&r.constraints), harmonic: rep.harmonic.merge(&r.harmonic) };
                }
            }
            Some(rep)
        }
        None => None,
    };

    let primitive = if model.has_sigma() {
        let mut rep = PrimitiveReport::default();
        for f in fs.all_fields() {
            rep.primitive = rep.primitive.max(primitive_residual(f, model, &nodes)?);
        }
        let per: Vec<PrimitiveReport> = nodes
            .par_iter()
            .map(|&k| -> Result<PrimitiveReport, VerifyError> {
                let jet = fs.base.jet_at(k % fs.base.nx, k / fs.base.nx);
                let (state, leak) = restrict_superprimitive(&jet, model)?;
                let se = second_elliptic_residual(&state, model, &fs.lambdas)?;
                let h = reductive_harmonicity_at(&jet, model)?;
                Ok(PrimitiveReport {
                    primitive: 0.0,
                    second_elliptic: se.equations.iter().cloned().fold(0.0, f64::max),
                    form: se.form,
                    agreement: se.agreement,
                    grading: se.grading,
                    u2_body: state.u[2].value().body().max_abs(),
                    restriction_leak: leak,
                    reductive_harmonicity: h.residual,
                    m_bracket: h.m_bracket,
                })
            })
            .collect::<Result<_, _>>()?;
        for r in per {
            rep.second_elliptic = rep.second_elliptic.max(r.second_elliptic);
            rep.form = rep.form.max(r.form);
            rep.agreement = rep.agreement.max(r.agreement);
            rep.grading = rep.grading.max(r.grading);
            rep.u2_body = rep.u2_body.max(r.u2_body);
            rep.restriction_leak = rep.restriction_leak.max(r.restriction_leak);
            rep.reductive_harmonicity = rep.reductive_harmonicity.max(r.reductive_harmonicity);
            rep.m_bracket = rep.m_bracket.max(r.m_bracket);
        }
        Some(rep)
    } else {
        None
    };

    Ok(FrameReport { nodes: nodes.len(), membership, superharmonic, lambda_family, extended, sphere, primitive })
}

/// Loop data of the split frame at one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameNode {
    pub unitary: Vec<LoopTermSerial>,
    pub a: Vec<LoopTermSerial>,
    pub b: Vec<LoopTermSerial>,
    pub c: Vec<LoopTermSerial>,
}

/// Serialized pipeline frame: enough to evaluate `F(lambda)` anywhere on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFile {
    pub model: String,
    pub dim: usize,
    pub generators: u8,
    pub size: usize,
    pub truncation: usize,
    pub twist: Twist,
    pub grid: Grid,
    pub lambdas: Vec<[f64; 2]>,
    pub nodes: Vec<FrameNode>,
}

fn model_dim(model: &LieModel) -> usize {
    model.sphere_dim().unwrap_or(model.size)
}

impl FrameFile {
    pub fn from_pipeline(p: &Pipeline, lambdas: &[C64]) -> Self {
        let f0 = &p.frames[0].unitary;
        FrameFile {
            model: p.model.name.clone(),
            dim: model_dim(&p.model),
            generators: f0.generators(),
            size: f0.size(),
            truncation: f0.truncation(),
            twist: p.twist,
            grid: p.grid,
            lambdas: lambdas.iter().map(|l| [l.re, l.im]).collect(),
            nodes: p.frames.iter().map(|f| FrameNode { unitary: f.unitary.to_serial(), a: f.a.to_serial(), b: f.b.to_serial(), c: f.c.to_serial() }).collect(),
        }
    }

    pub fn frames(&self) -> Result<FrameSet, VerifyError> {
        let model = LieModel::by_name(&self.model, self.dim)?;
        if model.size != self.size {
            return Err(VerifyError::Schema(format!("model {} is {}x{}, file has size {}", self.model, model.size, model.size, self.size)));
        }
        if self.nodes.len() != self.grid.len() {
            return Err(VerifyError::Schema(format!("{} nodes for a grid of {}", self.nodes.len(), self.grid.len())));
        }
        let load = |t: &[LoopTermSerial]| LoopElement::from_serial(self.generators, self.size, t, self.truncation, self.twist);
        let parts: Vec<[LoopElement; 4]> = self
            .nodes
            .iter()
            .map(|n| Ok([load(&n.unitary)?, load(&n.a)?, load(&n.b)?, load(&n.c)?]))
            .collect::<Result<_, GrassmannError>>()?;
        let eval = |lambda: C64| -> GridField {
            self.grid.field(
                parts
                    .iter()
                    .map(|[u, a, b, c]| {
                        let u = u.eval_at(lambda);
                        Sup::new(u.clone(), &u * &a.eval_at(lambda), &u * &b.eval_at(lambda), &u * &c.eval_at(lambda))
                    })
                    .collect(),
            )
        };
        let lambdas: Vec<C64> = self.lambdas.iter().map(|l| C64::new(l[0], l[1])).collect();
        Ok(FrameSet { model, grid: self.grid, base: eval(re(1.0)), samples: lambdas.iter().map(|l| eval(*l)).collect(), lambdas })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub truncations: [usize; 2],
    /// Largest change of any frame loop coefficient when `N` is doubled.
    pub truncation_drift: f64,
    pub grid_sizes: [usize; 2],
    /// Lift-criterion residual at shared nodes on the coarse and fine grid.
    pub fd_residuals: [f64; 2],
    pub observed_order: f64,
}

fn loop_drift(a: &LoopElement, b: &LoopElement) -> f64 {
    let (alo, ahi) = a.window();
    let (blo, bhi) = b.window();
    (alo.min(blo)..=ahi.max(bhi))
        .map(|k| match (a.coeff_ref(k), b.coeff_ref(k)) {
            (Some(x), Some(y)) => (x - y).max_abs(),
            (Some(x), None) | (None, Some(x)) => x.max_abs(),
            (None, None) => 0.0,
        })
        .fold(0.0, f64::max)
}

/// Reruns the pipeline at `(N, 2N)` and at grid spacing `(h, h/2)`.
/// `build` maps a truncation order to the potential; `n` is the coarse
/// node count per side and `margin` the boundary margin of the FD check.
pub fn convergence_study(
    build: &dyn Fn(usize) -> Potential,
    model: &LieModel,
    truncation: usize,
    n: usize,
    extent: f64,
    margin: usize,
    opts: &PipelineOptions,
) -> Result<ConvergenceReport, VerifyError> {
    let coarse = Grid::square(n, extent);
    let fine = Grid::square(2 * n - 1, extent);
    let p1 = run_pipeline(&build(truncation), model, &coarse, opts)?;
    let p2 = run_pipeline(&build(2 * truncation), model, &coarse, opts)?;
    let truncation_drift = p1
        .frames
        .iter()
        .zip(&p2.frames)
        .map(|(x, y)| loop_drift(&x.unitary, &y.unitary).max(loop_drift(&x.a, &y.a)).max(loop_drift(&x.b, &y.b)).max(loop_drift(&x.c, &y.c)))
        .fold(0.0, f64::max);

    let pf = run_pipeline(&build(truncation), model, &fine, opts)?;
    let coarse_nodes = coarse.interior(margin);
    let fine_nodes: Vec<usize> = coarse_nodes.iter().map(|&k| 2 * (k % n) + 2 * (k / n) * fine.nx).collect();
    let r1 = superharmonic_residual_symmetric(&p1.frame_field(re(1.0)), model, &coarse_nodes);
    let r2 = superharmonic_residual_symmetric(&pf.frame_field(re(1.0)), model, &fine_nodes);
    Ok(ConvergenceReport {
        truncations: [truncation, 2 * truncation],
        truncation_drift,
        grid_sizes: [n, 2 * n - 1],
        fd_residuals: [r1, r2],
        observed_order: (r1 / r2).log2(),
    })
}
