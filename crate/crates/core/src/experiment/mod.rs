//! Experiment runner: presets, configuration and artifact emission.

mod artifacts;
mod config;
mod presets;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use artifacts::{FileEntry, ImageEntry, OutputDir, LOCK_NAME, MANIFEST_NAME};
pub use config::{AnalysisSection, ExperimentConfig};

use crate::LatticeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown preset `{0}`; run `list-presets` for the available names")]
    UnknownPreset(String),

    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),

    #[error("io error at {path}: {reason}")]
    Io { path: PathBuf, reason: String },

    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

macro_rules! presets {
    ($($variant:ident => $name:literal, $about:literal;)*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Preset {
            $($variant,)*
        }

        impl Preset {
            pub const ALL: [Preset; [$($name),*].len()] = [$(Preset::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Preset::$variant => $name,)*
                }
            }

            pub fn description(self) -> &'static str {
                match self {
                    $(Preset::$variant => $about,)*
                }
            }
        }
    };
}

presets! {
    EnergyDecay => "energy-decay", "LLG on the sphere (α = 1): energy trace, dissipation identity and energy-density images";
    EnergyConservation => "energy-conservation", "LLG on the sphere with α = 0: energy drift of the undamped flow";
    KernelSlopes => "kernel-slopes", "log-log decay slopes of the heat and damped Schrödinger kernels, orders 0 and 1";
    KernelMass => "kernel-mass", "heat-kernel mass and central value against the Bessel series";
    DuhamelOracle => "duhamel-oracle", "kernel convolution and Duhamel sums against fine explicit Euler";
    InterpolantCensus => "interpolant-census", "bilinear interpolant exactness and norm-equivalence ratios over an h-ladder";
    SobolevCensus => "sobolev-census", "fitted constants of the localized Sobolev inequality over an h-ladder";
    FrameHolonomy => "frame-holonomy", "transported frame invariants and spherical-cap holonomy";
    LinearizationResidual => "linearization-residual", "residual of the linearized frame equation on a torus target";
    LocalEnergy => "local-energy", "local energy inequality and second-difference trace for small heat-flow data";
    ConcentrationBubble => "concentration-bubble", "concentration detector on a shrinking degree-one sphere bubble";
    SmallEnergyRegularity => "small-energy-regularity", "empty concentration report and bounded y(t) at half the threshold energy";
}

impl Preset {
    /// INI text layered over the built-in defaults.
    pub(crate) fn defaults(self) -> &'static str {
        match self {
            Preset::EnergyDecay => {
                "[grid]\nh = 0.0625\n[solver]\nalpha = 1\nt_end = 1\ncfl = 0.25\n[analysis]\namplitude = 0.5\n"
            }
            Preset::EnergyConservation => {
                "[grid]\nh = 0.0625\n[solver]\nalpha = 0\nt_end = 1\ncfl = 0.125\n[analysis]\namplitude = 0.5\n"
            }
            Preset::KernelSlopes => "[solver]\nalpha = 1\n",
            Preset::KernelMass => "",
            Preset::DuhamelOracle => "[solver]\nalpha = 1\n",
            Preset::InterpolantCensus => "[analysis]\namplitude = 1\nkmax = 3\n",
            Preset::SobolevCensus => "[analysis]\nradius = 0.15\nfields = 8\n",
            Preset::FrameHolonomy => "[analysis]\namplitude = 0.4\nkmax = 3\n",
            Preset::LinearizationResidual => {
                "[run]\nseed = 7\n[grid]\nnx = 32\nny = 32\nh = 0.03125\n[target]\nsurface = torus:2,0.7\n\
                 [analysis]\namplitude = 0.2\n"
            }
            Preset::LocalEnergy => {
                "[solver]\nflow = heat\nt_end = 0.02\n[analysis]\namplitude = 0.3\nradius = 0.15\n"
            }
            Preset::ConcentrationBubble => {
                "[grid]\nboundary = far-field\n[solver]\nflow = heat\nt_end = 0.02\ncfl = 0.2\nstore_every = 4\n"
            }
            Preset::SmallEnergyRegularity => {
                "[solver]\nflow = heat\nt_end = 0.02\n[analysis]\nladder = 32,64\nradius = 0.3\n"
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| ExperimentError::UnknownPreset(s.trim().to_string()))
    }
}

/// Preset names with their one-line descriptions.
pub fn list_presets() -> String {
    let width = Preset::ALL.iter().map(|p| p.name().len()).max().unwrap_or(0);
    Preset::ALL
        .iter()
        .map(|p| format!("{:width$}  {}\n", p.name(), p.description()))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(String),
}

/// Record of one run; serialized to `manifest.json` after every artifact.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub preset: Preset,
    pub seed: u64,
    pub status: RunStatus,
    /// `sha256("blob <len>\0" + canonical config)`.
    pub input_hash: String,
    pub config: String,
    pub files: Vec<FileEntry>,
    pub images: Vec<ImageEntry>,
    pub summary: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn to_json(&self) -> Value {
        let (status, error) = match &self.status {
            RunStatus::Ok => ("ok", Value::Null),
            RunStatus::Failed(e) => ("failed", Value::String(e.clone())),
        };
        json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "preset": self.preset.name(),
            "seed": self.seed,
            "status": status,
            "error": error,
            "input_hash": self.input_hash,
            "config": self.config,
            "files": self.files.iter().map(|f| json!({
                "path": f.path,
                "sha256": f.sha256,
                "bytes": f.bytes,
            })).collect::<Vec<_>>(),
            "images": self.images.iter().map(|i| json!({
                "path": i.path,
                "quantity": i.quantity,
                "min": i.min,
                "max": i.max,
            })).collect::<Vec<_>>(),
            "summary": self.summary,
        })
    }
}

pub fn input_hash(canonical: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", canonical.len()).as_bytes());
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

/// Runs the preset pipeline into `out`. Artifacts written before a failure
/// are kept and the manifest is marked failed.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunManifest, ExperimentError> {
    let mut dir = OutputDir::open(out)?;
    let canonical = config.canonical();
    let outcome = presets::execute(config, &mut dir);
    let status = match &outcome {
        Ok(()) => RunStatus::Ok,
        Err(e) => RunStatus::Failed(e.to_string()),
    };
    let (files, images, summary) = dir.records();
    let manifest = RunManifest {
        preset: config.preset,
        seed: config.seed,
        status,
        input_hash: input_hash(&canonical),
        config: canonical,
        files,
        images,
        summary,
    };
    let text = serde_json::to_string_pretty(&manifest.to_json()).expect("manifest serializes");
    dir.write_manifest(text.as_bytes())?;
    outcome.map(|()| manifest)
}
