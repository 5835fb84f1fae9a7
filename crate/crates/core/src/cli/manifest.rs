//! Versioned experiment manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::phantom::PhantomSpec;
use crate::acquisition::NoiseSpec;
use crate::error::{config, Error, Result};
use crate::grid::Grid;
use crate::inversion::InversionConfig;
use crate::probes::{ProbeMode, PropernessThresholds};
use crate::refine::RefineConfig;

pub const MANIFEST_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            n: 257,
            half_width: 0.5,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.n, self.half_width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    /// Scale of the frequency family.
    pub n: f64,
    pub mode: ProbeMode,
    pub thresholds: PropernessThresholds,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            n: 1.0,
            mode: ProbeMode::Helmholtz,
            thresholds: PropernessThresholds::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineSpec {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: RefineConfig,
}

impl Default for RefineSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            config: RefineConfig::default(),
        }
    }
}

/// Cells are the product `sigmas × deltas`; `sigma` follows `noise.sigma_relative`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub sigmas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub realizations: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            sigmas: vec![1e-5, 4e-5],
            deltas: vec![2.0 / 256.0, 4.0 / 256.0],
            realizations: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub version: u32,
    pub grid: GridSpec,
    pub k: f64,
    pub phantom: PhantomSpec,
    pub probes: ProbeSpec,
    /// `noise.seed` is replaced by `seed` when a run starts.
    pub noise: NoiseSpec,
    pub inversion: InversionConfig,
    pub refine: RefineSpec,
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Run every stage even when the probes fail the properness check.
    pub continue_on_improper: bool,
    pub dump_noise: bool,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            grid: GridSpec::default(),
            k: 6.0,
            phantom: PhantomSpec::default(),
            probes: ProbeSpec::default(),
            noise: NoiseSpec::default(),
            inversion: InversionConfig::default(),
            refine: RefineSpec::default(),
            sweep: None,
            output_dir: PathBuf::from("qtat-out"),
            seed: 0,
            continue_on_improper: false,
            dump_noise: false,
        }
    }
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Hex SHA-256 of the compact JSON encoding, with the output directory
    /// blanked: where a run is written does not change what it computes.
    pub fn hash(&self) -> String {
        let content = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&content).expect("manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Noise spec with the run seed applied.
    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            seed: self.seed,
            ..self.noise
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return config(format!(
                "manifest version {} unsupported, expected {MANIFEST_VERSION}",
                self.version
            ));
        }
        let grid = self.grid.build()?;
        if !(self.k > 0.0 && self.k.is_finite()) {
            return config(format!("wavenumber must be positive, got {}", self.k));
        }
        self.phantom.validate(grid.dim())?;
        if !(self.probes.n > 0.0 && self.probes.n.is_finite()) {
            return config(format!(
                "probe scale must be positive, got {}",
                self.probes.n
            ));
        }
        self.noise
            .validate(grid.dim())
            .map_err(|e| Error::Config(e.to_string()))?;
        let r = &self.refine.config;
        if !(r.q_min > 0.0 && r.q_min < r.q_max) {
            return config(format!(
                "refinement bounds ({}, {}) are not an interval",
                r.q_min, r.q_max
            ));
        }
        if !(r.lambda_rel >= 0.0) || r.max_iters == 0 || r.cg_max_iterations == 0 {
            return config("refinement needs lambda_rel >= 0 and positive iteration limits");
        }
        if let Some(s) = &self.sweep {
            if s.sigmas.is_empty() || s.deltas.is_empty() || s.realizations == 0 {
                return config("sweep lists and realization count must be non-empty");
            }
            if s.sigmas.iter().any(|&v| !(v >= 0.0)) || s.deltas.iter().any(|&v| !(v > 0.0)) {
                return config("sweep sigmas must be non-negative and deltas positive");
            }
        }
        Ok(())
    }
}
