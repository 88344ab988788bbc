use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use superdpw::cmat::re;
use superdpw::dpw::{run_pipeline, Grid, PipelineOptions, PipelineReport};
use superdpw::grassmann::blade_indices;
use superdpw::liealg::LieModel;
use superdpw::superfield::{write_components_csv, GridField};
use superdpw::verify::{convergence_study, pipeline_checks, sample_lambdas, verify_frames, ConvergenceReport, FrameFile, FrameReport, FrameSet};

use crate::config::RunConfig;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn evaluate(named: &[(&'static str, f64)], tol: &BTreeMap<String, f64>) -> Vec<Check> {
    named
        .iter()
        .map(|(name, value)| {
            let tolerance = tol.get(*name).copied().unwrap_or(0.0);
            Check { name: name.to_string(), value: *value, tolerance, pass: *value <= tolerance }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub model: String,
    pub dim: usize,
    pub generators: u8,
    pub truncation: usize,
    pub grid: Grid,
    pub seed: u64,
    pub margin: usize,
    pub lambdas: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub settings: Settings,
    pub potential: PotentialSpec,
    pub pipeline: PipelineReport,
    pub frames: FrameReport,
    pub checks: Vec<Check>,
    pub failed: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub source: String,
    pub frames: FrameReport,
    pub checks: Vec<Check>,
    pub failed: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceOutput {
    pub command: &'static str,
    pub settings: Settings,
    pub convergence: ConvergenceReport,
    /// Coarse residual already at rounding level, so no order is observable.
    pub exact: bool,
    pub passed: bool,
}

fn failed(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
}

pub fn print_checks(checks: &[Check]) {
    for c in checks {
        println!("{:<28} {:>12.3e}  tol {:>9.1e}  {}", c.name, c.value, c.tolerance, if c.pass { "ok" } else { "FAIL" });
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json_as(path, value, true)
}

fn write_json_as<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = if pretty { serde_json::to_string_pretty(value)? } else { serde_json::to_string(value)? };
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

const FRAME_NAMES: [&str; 4] = ["U", "Psi1", "Psi2", "f"];

/// Frame entries as CSV rows `x,y,component_index,grassmann_index_set,re,im`.
pub fn frame_csv(field: &GridField) -> String {
    let mut out = String::from("x,y,component_index,grassmann_index_set,re,im\n");
    for j in 0..field.ny {
        for i in 0..field.nx {
            let (x, y) = field.point(i, j);
            for (k, comp) in field.at(i, j).c.iter().enumerate() {
                for (mask, m) in comp.terms() {
                    let idx: Vec<String> = blade_indices(*mask).iter().map(|b| b.to_string()).collect();
                    for r in 0..m.rows() {
                        for cc in 0..m.cols() {
                            let z = m[(r, cc)];
                            if *mask != 0 && z.norm() == 0.0 {
                                continue;
                            }
                            let _ = writeln!(out, "{x},{y},{}[{r}][{cc}],{},{:e},{:e}", FRAME_NAMES[k], idx.join(";"), z.re, z.im);
                        }
                    }
                }
            }
        }
    }
    out
}

fn target_csv(field: &GridField, col: usize) -> String {
    let mut out = String::from("x,y,component_index,grassmann_index_set,re,im\n");
    for j in 0..field.ny {
        for i in 0..field.nx {
            let (x, y) = field.point(i, j);
            let comps = field.at(i, j).c.clone().map(|m| m.column(col));
            write_components_csv(&mut out, x, y, &comps);
        }
    }
    out
}

fn settings(cfg: &RunConfig, grid: Grid, lambdas: &[superdpw::cmat::C64]) -> Settings {
    Settings {
        model: cfg.model.clone(),
        dim: cfg.dim,
        generators: cfg.generators,
        truncation: cfg.truncation,
        grid,
        seed: cfg.seed,
        margin: cfg.margin,
        lambdas: lambdas.iter().map(|l| [l.re, l.im]).collect(),
    }
}

fn pipeline_options(cfg: &RunConfig) -> PipelineOptions {
    PipelineOptions { substeps: cfg.substeps, allow_nonholomorphic: true, ..Default::default() }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
}

pub fn cmd_run(cfg: &RunConfig, emit_fields: bool, report_path: Option<PathBuf>) -> Result<RunOutcome> {
    let model = LieModel::by_name(&cfg.model, cfg.dim)?;
    let spec = cfg.potential_spec()?;
    let potential = spec.build(&model, cfg.generators, cfg.truncation, cfg.seed)?;
    let grid = cfg.grid.grid();
    let pipe = run_pipeline(&potential, &model, &grid, &pipeline_options(cfg))?;
    let lambdas = sample_lambdas(cfg.lambdas);
    let frames = verify_frames(&FrameSet::from_pipeline(&pipe, &lambdas), cfg.margin)?;

    let tol = cfg.tolerance_table();
    let mut named = pipeline_checks(&pipe.report);
    named.extend(frames.checks());
    let checks = evaluate(&named, &tol);
    let failed = failed(&checks);
    let report = RunReport {
        command: "run",
        settings: settings(cfg, grid, &lambdas),
        potential: spec,
        pipeline: pipe.report.clone(),
        frames,
        passed: failed.is_empty(),
        failed,
        checks,
    };
    let report_path = report_path.unwrap_or_else(|| cfg.output_dir.join("report.json"));
    write_json(&report_path, &report)?;
    if emit_fields {
        std::fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
        write_json_as(&cfg.output_dir.join("frame.json"), &FrameFile::from_pipeline(&pipe, &lambdas), false)?;
        let base = pipe.frame_field(re(1.0));
        std::fs::write(cfg.output_dir.join("frame.csv"), frame_csv(&base))?;
        if model.sphere_dim().is_some() {
            std::fs::write(cfg.output_dir.join("target.csv"), target_csv(&base, model.size - 1))?;
        }
    }
    Ok(RunOutcome { report, report_path })
}

pub fn cmd_verify(frame_path: &Path, margin: usize, tol: &BTreeMap<String, f64>) -> Result<VerifyReport> {
    let text = std::fs::read_to_string(frame_path).with_context(|| format!("reading {}", frame_path.display()))?;
    let file: FrameFile = serde_json::from_str(&text).with_context(|| format!("parsing frame file {}", frame_path.display()))?;
    let frames = verify_frames(&file.frames()?, margin)?;
    let checks = evaluate(&frames.checks(), tol);
    let failed = failed(&checks);
    Ok(VerifyReport { command: "verify", source: frame_path.display().to_string(), frames, passed: failed.is_empty(), failed, checks })
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<ConvergenceOutput> {
    let model = LieModel::by_name(&cfg.model, cfg.dim)?;
    let spec = cfg.potential_spec()?;
    spec.build(&model, cfg.generators, cfg.truncation, cfg.seed)?;
    let (l, seed) = (cfg.generators, cfg.seed);
    let m = model.clone();
    let build = move |n: usize| spec.build(&m, l, n, seed).expect("potential validated above");
    let c = &cfg.convergence;
    let rep = convergence_study(&build, &model, cfg.truncation, c.n, c.extent, c.margin, &pipeline_options(cfg))?;
    let exact = rep.fd_residuals[0] <= 1e-12;
    let passed = rep.truncation_drift <= c.max_drift && (exact || rep.observed_order >= c.min_order);
    let grid = Grid::square(c.n, c.extent);
    Ok(ConvergenceOutput { command: "convergence", settings: settings(cfg, grid, &[]), convergence: rep, exact, passed })
}

pub fn save<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
