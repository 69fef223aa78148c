//! Experiment configuration: one JSON document drives a whole run.
//!
//! The document fixes the model, the grid, solver tolerances, and the
//! parameters of the spectral, dynamics, and pinning experiments. Unknown
//! keys are rejected so a typo cannot silently fall back to a default, and
//! every report produced from a config embeds the SHA-256 of the exact
//! bytes it was parsed from, so a report can always be traced to its
//! configuration.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{PotentialKind, PotentialSpec};
use crate::pinning::{LocalizedPotential, EPS_MAX};
use crate::profile::SolveOptions;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Potential family, in the model layer's tagged form, e.g.
    /// `{"kind": "symmetric-cubic", "gamma": 3.0}`.
    pub potential: PotentialKind,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    /// Pinning experiment; absent means the `pin` command needs its
    /// potential from the command line.
    #[serde(default)]
    pub pinning: Option<PinningConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { l: 20.0, n: 4095 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_newton: usize,
    pub flow_steps: usize,
    pub coarse_n: usize,
    pub refine: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        SolverConfig {
            tol: o.tol,
            max_newton: o.max_newton,
            flow_steps: o.flow_steps,
            coarse_n: o.coarse_n,
            refine: o.refine,
        }
    }
}

impl SolverConfig {
    pub fn to_options(self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_newton: self.max_newton,
            flow_steps: self.flow_steps,
            coarse_n: self.coarse_n,
            refine: self.refine,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// Eigenvalues computed per operator.
    pub k: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { k: 6 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: f64,
    /// Orbit-distance size of the seeded perturbation.
    pub eps: f64,
    pub seed: u64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig { t: 50.0, dt: 2e-3, eps: 1e-2, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningConfig {
    pub potential: LocalizedPotential,
    /// Couplings to solve the pinned branch at; more than one entry makes
    /// the `pin` command a sweep.
    #[serde(default = "default_pin_eps")]
    pub eps: Vec<f64>,
}

fn default_pin_eps() -> Vec<f64> {
    vec![1e-3]
}

/// Default output destinations; command-line flags override field by field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Wall profile CSV (`solve`).
    pub out: Option<PathBuf>,
    /// Report JSON (all commands).
    pub report: Option<PathBuf>,
    /// Evolution trace CSV (`evolve`).
    pub trace: Option<PathBuf>,
}

/// A parsed configuration together with the hash of the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the exact source bytes.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

impl ExperimentConfig {
    /// Parse and validate a configuration document.
    pub fn from_json(bytes: &[u8]) -> Result<LoadedConfig> {
        // serde_json's Display already carries "at line L column C".
        let config: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(LoadedConfig { config, sha256: sha256_hex(bytes) })
    }

    /// Read, parse, and validate a configuration file.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open config {}: {e}", path.display())))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    /// Load `path` when given, otherwise fall back to the built-in default
    /// document. The fallback is hashed over its canonical serialization,
    /// so it matches a config file shipped with those exact bytes.
    pub fn load_or_default(path: Option<&Path>) -> Result<LoadedConfig> {
        match path {
            Some(p) => Self::load(p),
            None => {
                let config = Self::default_document();
                Ok(LoadedConfig { sha256: sha256_hex(&config.canonical_bytes()?), config })
            }
        }
    }

    /// Pretty-printed serialization with a trailing newline; the form the
    /// shipped default config file uses.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        Ok(json.into_bytes())
    }

    /// The built-in default experiment: the closed-form-checked model on the
    /// acceptance grid.
    pub fn default_document() -> ExperimentConfig {
        ExperimentConfig {
            potential: PotentialKind::SymmetricCubic { gamma: 3.0 },
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            spectral: SpectralConfig::default(),
            dynamics: DynamicsConfig::default(),
            pinning: Some(PinningConfig {
                potential: LocalizedPotential::sech2(1.0, 1.0),
                eps: default_pin_eps(),
            }),
            output: OutputConfig::default(),
        }
    }

    /// Semantic checks beyond shape: every numeric field within its
    /// documented range, and the model itself admissible.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.make_grid()?;
        let s = &self.solver;
        if !(s.tol.is_finite() && s.tol > 0.0 && s.tol <= 1e-6) {
            return Err(Error::Config(format!(
                "solver.tol must lie in (0, 1e-6], got {}",
                s.tol
            )));
        }
        if s.max_newton == 0 || s.max_newton > 10_000 {
            return Err(Error::Config(format!(
                "solver.max_newton must lie in [1, 10000], got {}",
                s.max_newton
            )));
        }
        if self.spectral.k < 2 || self.spectral.k > 64 {
            return Err(Error::Config(format!(
                "spectral.k must lie in [2, 64], got {}",
                self.spectral.k
            )));
        }
        let d = &self.dynamics;
        if !(d.t.is_finite() && d.t > 0.0) {
            return Err(Error::Config(format!("dynamics.T must be positive, got {}", d.t)));
        }
        if !(d.dt.is_finite() && d.dt > 0.0 && d.dt <= d.t) {
            return Err(Error::Config(format!(
                "dynamics.dt must lie in (0, T], got dt={} with T={}",
                d.dt, d.t
            )));
        }
        if !(0.0..=0.05).contains(&d.eps) {
            return Err(Error::Config(format!(
                "dynamics.eps must lie in [0, 0.05], got {}",
                d.eps
            )));
        }
        if let Some(pin) = &self.pinning {
            pin.potential.validate(self.grid.l)?;
            if pin.eps.is_empty() {
                return Err(Error::Config("pinning.eps must not be empty".into()));
            }
            for e in &pin.eps {
                if !(e.is_finite() && e.abs() <= EPS_MAX) {
                    return Err(Error::Config(format!(
                        "pinning.eps entries must satisfy |eps| <= {EPS_MAX}, got {e}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<PotentialSpec> {
        PotentialSpec::new(self.potential.clone())
    }

    pub fn make_grid(&self) -> Result<Grid> {
        Grid::new(self.grid.l, self.grid.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_document_round_trips_and_validates() {
        let doc = ExperimentConfig::default_document();
        let json = serde_json::to_vec_pretty(&doc).unwrap();
        let loaded = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(loaded.sha256.len(), 64);
        assert_eq!(loaded.config.grid.n, 4095);
        assert_eq!(loaded.config.spectral.k, 6);

        // Same bytes, same hash; a whitespace change is a different document.
        let again = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(loaded.sha256, again.sha256);
        let mut spaced = json.clone();
        spaced.push(b'\n');
        assert_ne!(ExperimentConfig::from_json(&spaced).unwrap().sha256, loaded.sha256);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        let err = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 3.0}, "grdi": {}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("grdi"), "got: {err}");
        assert_eq!(err.exit_code(), 2);

        // An inadmissible model is a config-class failure naming the rule.
        let err = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 0.5}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("gamma > 1"), "got: {err}");
        assert_eq!(err.exit_code(), 2);

        let err = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 3.0},
                 "dynamics": {"eps": 0.2}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("0.05"), "got: {err}");

        let err = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 3.0},
                 "pinning": {"potential": {"kind": "sech2", "a": 1.0, "b": 0.1}}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("tail"), "got: {err}");
    }

    /// Golden-file guard: the shipped default config must stay byte-equal
    /// to the built-in document so that running without --config and
    /// running against configs/default.json produce the same report hash.
    /// Set WALLFORGE_BLESS=1 to regenerate the file after changing defaults.
    #[test]
    fn shipped_default_config_matches_the_builtin_document() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs/default.json");
        let want = ExperimentConfig::default_document().canonical_bytes().unwrap();
        if std::env::var("WALLFORGE_BLESS").as_deref() == Ok("1") {
            std::fs::write(&path, &want).unwrap();
        }
        let shipped = std::fs::read(&path).unwrap_or_default();
        assert_eq!(
            String::from_utf8_lossy(&shipped),
            String::from_utf8_lossy(&want),
            "configs/default.json is out of date; rerun with WALLFORGE_BLESS=1"
        );
    }

    #[test]
    fn grid_keys_use_the_upper_case_names() {
        let loaded = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 3.0},
                 "grid": {"L": 15.0, "N": 1023}}"#,
        )
        .unwrap();
        assert_eq!(loaded.config.grid.l, 15.0);
        assert_eq!(loaded.config.grid.n, 1023);
        let err = ExperimentConfig::from_json(
            br#"{"potential": {"kind": "symmetric-cubic", "gamma": 3.0},
                 "grid": {"l": 15.0, "n": 1023}}"#,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
