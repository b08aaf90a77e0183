//! Versioned JSON configuration for models and runs.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of such pairs. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::symmetry::FockAction;

pub const SCHEMA_VERSION: u32 = 1;

pub type Complex = [f64; 2];
pub type MatrixJson = Vec<Vec<Complex>>;

pub fn matrix_from_json(m: &MatrixJson, dim: usize, what: &str) -> Result<CMat> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(Error::Config(format!("{what}: expected a {dim}x{dim} matrix")));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| c64(m[i][j][0], m[i][j][1])))
}

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Radial coupling profile `g(r)` on the unit ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude · r^exponent`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude · r^exponent · exp(−r/scale)`.
    PowerExp {
        exponent: f64,
        scale: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Zero,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub profile: Profile,
    /// Polynomial coefficients of `G₁(s)` (atomic part).
    pub annihilation: Vec<MatrixJson>,
    /// Polynomial coefficients of `G₂(s)` (atomic part).
    pub creation: Vec<MatrixJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub ratio: f64,
    pub levels: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub max_photons: u32,
    pub energy_cutoff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    /// Radius ε of the contour around `E_at(s₀)`.
    pub contour_radius: f64,
    /// Radius of the parameter disc around `s₀`.
    pub s_radius: f64,
    /// Radius of the spectral disc around `E_at(s)`; must be below 1/2.
    pub z_radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub atomic: MatrixJson,
    #[serde(default)]
    pub antiunitary: bool,
    #[serde(default = "default_fock")]
    pub fock: FockAction,
}

fn default_fock() -> FockAction {
    FockAction::Identity
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dispersion {
    #[default]
    Massless,
    Massive {
        mass: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub name: String,
    pub atomic_dim: usize,
    pub multiplicity: usize,
    /// `E_at(s₀)`.
    pub atomic_energy: Complex,
    #[serde(default)]
    pub reference_point: Complex,
    /// Polynomial coefficients of `H_at(s)`.
    pub atomic_hamiltonian: Vec<MatrixJson>,
    pub coupling: CouplingConfig,
    pub coupling_strength: f64,
    pub infrared_exponent: f64,
    /// Multiplies every shell measure (polarization sum convention).
    #[serde(default = "one")]
    pub polarization_factor: f64,
    pub grid: GridConfig,
    pub truncation: TruncationConfig,
    pub window: WindowConfig,
    #[serde(default)]
    pub symmetry: Vec<GeneratorConfig>,
    #[serde(default)]
    pub reflection_symmetric: bool,
    /// Atomic matrix `J` of an antiunitary `𝒥 = (J ⊗ 1)·conj`.
    #[serde(default)]
    pub complex_selfadjoint: Option<MatrixJson>,
    #[serde(default)]
    pub dispersion: Dispersion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    /// `|E^(n−1)(z)| ≤ ρ/8`.
    RhoOver8,
    /// `|E^(n−1)(z)| ≤ ρ/2`.
    RhoOver2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolydiscPolicy {
    Warn,
    Abort,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RgSettings {
    pub c_chi: f64,
    pub max_iterations: usize,
    pub tol_z: f64,
    pub tol_stop: f64,
    pub window_rule: WindowRule,
    pub polydisc_policy: PolydiscPolicy,
    pub r_grid_nodes: usize,
}

impl Default for RgSettings {
    fn default() -> Self {
        Self {
            c_chi: 1.0,
            max_iterations: 16,
            tol_z: 1e-12,
            tol_stop: 1e-13,
            window_rule: WindowRule::RhoOver8,
            polydisc_policy: PolydiscPolicy::Warn,
            r_grid_nodes: 101,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub contour_radius: f64,
    pub contour_nodes: usize,
    pub cr_step: f64,
    pub g_sweep: Vec<f64>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { contour_radius: 0.05, contour_nodes: 16, cr_step: 1e-3, g_sweep: vec![0.02, 0.04, 0.08, 0.16] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Kv,
    Digest,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Model config path, relative to the run config file.
    pub model: PathBuf,
    #[serde(default)]
    pub rg: RgSettings,
    #[serde(default)]
    pub probes: ProbeSettings,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    #[serde(default)]
    pub seed: u64,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Kv, ReportFormat::Digest]
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})")));
    }
    Ok(())
}

pub fn parse_model(text: &str) -> Result<ModelConfig> {
    let m: ModelConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    check_version(m.schema_version)?;
    Ok(m)
}

pub fn parse_run(text: &str) -> Result<RunConfig> {
    let r: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    check_version(r.schema_version)?;
    Ok(r)
}

/// A run configuration together with its resolved model.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub run: RunConfig,
    pub model: ModelConfig,
}

/// Load either a run config (with a `model` path) or a bare model config,
/// which is wrapped with default run settings.
pub fn load(path: &Path) -> Result<LoadedRun> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(Error::Config(format!("{} is empty", path.display())));
    }
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if value.get("model").is_some() {
        let run = parse_run(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mpath = base.join(&run.model);
        let mtext = std::fs::read_to_string(&mpath)
            .map_err(|e| Error::Config(format!("cannot read model {}: {e}", mpath.display())))?;
        Ok(LoadedRun { model: parse_model(&mtext)?, run })
    } else {
        let model = parse_model(&text)?;
        let run = RunConfig {
            schema_version: SCHEMA_VERSION,
            model: path.to_path_buf(),
            rg: RgSettings::default(),
            probes: ProbeSettings::default(),
            output_dir: default_out(),
            formats: default_formats(),
            seed: 0,
        };
        Ok(LoadedRun { run, model })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    Triv,
    Exact,
    Pauli,
    Kramers,
}

impl Fixture {
    pub const ALL: [Fixture; 4] = [Fixture::Triv, Fixture::Exact, Fixture::Pauli, Fixture::Kramers];

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::Triv => "M-TRIV",
            Fixture::Exact => "M-EXACT",
            Fixture::Pauli => "M-PAULI",
            Fixture::Kramers => "M-KRAMERS",
        }
    }

    pub fn source(&self) -> &'static str {
        match self {
            Fixture::Triv => include_str!("../../../fixtures/m-triv.json"),
            Fixture::Exact => include_str!("../../../fixtures/m-exact.json"),
            Fixture::Pauli => include_str!("../../../fixtures/m-pauli.json"),
            Fixture::Kramers => include_str!("../../../fixtures/m-kramers.json"),
        }
    }

    pub fn config(&self) -> ModelConfig {
        parse_model(self.source()).expect("shipped fixture parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_parse() {
        for f in Fixture::ALL {
            assert_eq!(f.config().name, f.name());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(Fixture::Triv.source()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(parse_model(&v.to_string()).is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        let mut v: serde_json::Value = serde_json::from_str(Fixture::Triv.source()).unwrap();
        v["schema_version"] = serde_json::json!(2);
        assert!(parse_model(&v.to_string()).is_err());
    }
}
