use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use superdpw::dpw::Grid;
use superdpw::verify::default_tolerances;

use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nx: 32, ny: 32, extent: 1.0 }
    }
}

impl GridSpec {
    /// `nx x ny` nodes over `[-extent, extent]^2`.
    pub fn grid(&self) -> Grid {
        let hx = 2.0 * self.extent / (self.nx - 1) as f64;
        let hy = 2.0 * self.extent / (self.ny - 1) as f64;
        Grid { nx: self.nx, ny: self.ny, x0: -self.extent, y0: -self.extent, hx, hy }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    /// Coarse nodes per side; the fine grid has `2 n - 1`.
    pub n: usize,
    pub extent: f64,
    pub margin: usize,
    pub min_order: f64,
    pub max_drift: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        ConvergenceSpec { n: 9, extent: 0.4, margin: 2, min_order: 3.5, max_drift: 1e-8 }
    }
}

/// Either a path to a potential file (relative to the config) or an inline table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    Path(PathBuf),
    Inline(PotentialSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_generators")]
    pub generators: u8,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub potential: PotentialSource,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lambdas")]
    pub lambdas: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub margin: usize,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
}

fn default_dim() -> usize {
    2
}
fn default_generators() -> u8 {
    4
}
fn default_truncation() -> usize {
    6
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_lambdas() -> usize {
    8
}
fn default_substeps() -> usize {
    4
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub extent: Option<f64>,
    pub truncation: Option<usize>,
    pub generators: Option<u8>,
    pub seed: Option<u64>,
    pub tolerances: Vec<(String, f64)>,
}

pub fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("tolerance `{k}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).with_context(|| format!("parsing {origin}"))
    }

    /// Loads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let PotentialSource::Path(p) = &cfg.potential {
            if p.is_relative() {
                cfg.potential = PotentialSource::Path(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.nx {
            self.grid.nx = v;
        }
        if let Some(v) = o.ny {
            self.grid.ny = v;
        }
        if let Some(v) = o.extent {
            self.grid.extent = v;
        }
        if let Some(v) = o.truncation {
            self.truncation = v;
        }
        if let Some(v) = o.generators {
            self.generators = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        for (k, v) in &o.tolerances {
            self.tolerances.insert(k.clone(), *v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.nx < 2 || self.grid.ny < 2 {
            bail!("grid needs at least 2 nodes per side");
        }
        if !(self.grid.extent > 0.0) {
            bail!("grid extent must be positive");
        }
        if self.truncation == 0 || self.generators == 0 || self.generators > 16 || self.substeps == 0 || self.dim == 0 {
            bail!("truncation, generators (1..=16), substeps and dim must be positive");
        }
        let known = default_tolerances();
        for (k, v) in &self.tolerances {
            if !known.contains_key(k) {
                bail!("unknown tolerance `{k}`");
            }
            if !(*v >= 0.0) {
                bail!("tolerance `{k}` must be non-negative");
            }
        }
        Ok(())
    }

    /// Defaults overlaid with the configured tolerances.
    pub fn tolerance_table(&self) -> BTreeMap<String, f64> {
        let mut t = default_tolerances();
        t.extend(self.tolerances.iter().map(|(k, v)| (k.clone(), *v)));
        t
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        match &self.potential {
            PotentialSource::Inline(s) => Ok(s.clone()),
            PotentialSource::Path(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading potential {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing potential {}", p.display()))
            }
        }
    }
}
