//! INI-style experiment configuration layered over preset defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use ini::Ini;

use super::{ExperimentError, Preset};
use crate::dynamics::{DtPolicy, Flow, SolverConfig};
use crate::grid::{Boundary, GridSpec};
use crate::target::Surface;

/// Every accepted key with its built-in default. Presets override some of
/// these; user files override both.
const KEYS: &[(&str, &str, &str)] = &[
    ("run", "preset", ""),
    ("run", "seed", "1"),
    ("grid", "nx", "64"),
    ("grid", "ny", "64"),
    ("grid", "h", "0.015625"),
    ("grid", "boundary", "periodic"),
    ("target", "surface", "sphere"),
    ("solver", "flow", "llg"),
    ("solver", "alpha", "1"),
    ("solver", "t_end", "0.01"),
    ("solver", "cfl", "0.125"),
    ("solver", "dt", "auto"),
    ("solver", "record_every", "1"),
    ("solver", "store_every", "8"),
    ("analysis", "amplitude", "0.5"),
    ("analysis", "kmax", "2"),
    ("analysis", "eps0_fraction", "0.3"),
    ("analysis", "delta", "auto"),
    ("analysis", "r0", "0.25"),
    ("analysis", "lambda", "0.05"),
    ("analysis", "r_out", "0.4"),
    ("analysis", "center", "0.5,0.5"),
    ("analysis", "radius", "0.15"),
    ("analysis", "cos_colatitude", "0.75"),
    ("analysis", "amplitudes", "0.2,0.1,0.05"),
    ("analysis", "ladder", "16,32,64"),
    ("analysis", "samples", "11"),
    ("analysis", "fields", "8"),
    ("analysis", "energy_fraction", "0.5"),
    ("analysis", "oracle_time", "2"),
    ("analysis", "oracle_steps", "2000"),
    ("output", "frames", "4"),
];

/// Flat `section.key → value` table after layering.
#[derive(Clone, Debug, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    fn defaults() -> Self {
        let values = KEYS
            .iter()
            .map(|(s, k, v)| (format!("{s}.{k}"), v.to_string()))
            .collect();
        Self { values }
    }

    fn overlay(&mut self, text: &str, origin: &str) -> Result<(), ExperimentError> {
        let ini = Ini::load_from_str(text).map_err(|e| ExperimentError::Config {
            field: origin.to_string(),
            reason: e.to_string(),
        })?;
        for (section, props) in ini.iter() {
            for (key, value) in props.iter() {
                let name = match section {
                    Some(s) => format!("{}.{}", s.trim(), key.trim()),
                    None => {
                        return Err(ExperimentError::Config {
                            field: key.trim().to_string(),
                            reason: "keys must sit inside a [section]".into(),
                        })
                    }
                };
                if !self.values.contains_key(&name) {
                    return Err(ExperimentError::Config {
                        field: name,
                        reason: "unknown key".into(),
                    });
                }
                self.values.insert(name, value.trim().to_string());
            }
        }
        Ok(())
    }

    fn get(&self, field: &str) -> &str {
        self.values.get(field).map(String::as_str).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, field: &str) -> Result<T, ExperimentError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(field);
        raw.parse::<T>().map_err(|e| ExperimentError::Config {
            field: field.to_string(),
            reason: format!("cannot parse `{raw}`: {e}"),
        })
    }

    fn list<T: FromStr>(&self, field: &str) -> Result<Vec<T>, ExperimentError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(field)
            .split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|e| ExperimentError::Config {
                    field: field.to_string(),
                    reason: format!("cannot parse `{}`: {e}", s.trim()),
                })
            })
            .collect()
    }

    /// Canonical `[section]` / `key = value` text, sorted.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (name, value) in &self.values {
            let (section, key) = name.split_once('.').expect("keys are qualified");
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSection {
    pub amplitude: f64,
    pub kmax: i32,
    pub eps0: f64,
    pub delta: Option<f64>,
    pub r0: f64,
    pub lambda: f64,
    pub r_out: f64,
    pub center: (f64, f64),
    pub radius: f64,
    pub cos_colatitude: f64,
    pub amplitudes: Vec<f64>,
    pub ladder: Vec<usize>,
    pub samples: usize,
    pub fields: usize,
    pub energy_fraction: f64,
    /// Oracle horizon in units of `h²`.
    pub oracle_time: f64,
    pub oracle_steps: usize,
}

/// Fully parsed and validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub store_every: usize,
    pub analysis: AnalysisSection,
    pub frames: usize,
    raw: RawConfig,
}

fn bad(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(raw: &RawConfig, field: &str) -> Result<f64, ExperimentError> {
    let v: f64 = raw.parse(field)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(bad(field, format!("must be a positive number, got {v}")));
    }
    Ok(v)
}

fn auto_or_positive(raw: &RawConfig, field: &str) -> Result<Option<f64>, ExperimentError> {
    if raw.get(field) == "auto" {
        Ok(None)
    } else {
        positive(raw, field).map(Some)
    }
}

impl ExperimentConfig {
    /// Defaults of `preset`, then `overrides` (a user file), then the seed.
    pub fn build(preset: Option<Preset>, overrides: Option<&str>, seed: Option<u64>) -> Result<Self, ExperimentError> {
        let mut raw = RawConfig::defaults();
        let mut user = RawConfig::defaults();
        if let Some(text) = overrides {
            user.overlay(text, "config")?;
        }
        let named = user.get("run.preset").to_string();
        let preset = match (preset, named.as_str()) {
            (Some(p), "") => p,
            (Some(p), n) if n == p.name() => p,
            (Some(p), n) => {
                return Err(bad("run.preset", format!("config names `{n}` but `{}` was requested", p.name())))
            }
            (None, "") => return Err(bad("run.preset", "no preset given")),
            (None, n) => n.parse::<Preset>()?,
        };
        raw.overlay(preset.defaults(), "preset defaults")?;
        raw.values.insert("run.preset".into(), preset.name().into());
        if let Some(text) = overrides {
            raw.overlay(text, "config")?;
        }
        if let Some(s) = seed {
            raw.values.insert("run.seed".into(), s.to_string());
        }
        Self::from_raw(preset, raw)
    }

    fn from_raw(preset: Preset, raw: RawConfig) -> Result<Self, ExperimentError> {
        let seed: u64 = raw.parse("run.seed")?;
        let h = positive(&raw, "grid.h")?;
        let nx: usize = raw.parse("grid.nx")?;
        let ny: usize = raw.parse("grid.ny")?;
        if nx < 4 || ny < 4 {
            return Err(bad("grid.nx", format!("grid must be at least 4×4, got {nx}×{ny}")));
        }
        let boundary = match raw.get("grid.boundary") {
            "periodic" => Boundary::Periodic,
            "far-field" => Boundary::ConstantFarField,
            other => return Err(bad("grid.boundary", format!("expected `periodic` or `far-field`, got `{other}`"))),
        };
        let grid = GridSpec::new(h, nx, ny, boundary).map_err(|e| bad("grid", e.to_string()))?;
        let surface: Surface = raw.get("target.surface").parse().map_err(|e: crate::LatticeError| bad("target.surface", e.to_string()))?;
        let flow = match raw.get("solver.flow") {
            "llg" => Flow::Llg,
            "heat" => Flow::HeatFlow,
            other => return Err(bad("solver.flow", format!("expected `llg` or `heat`, got `{other}`"))),
        };
        let alpha: f64 = raw.parse("solver.alpha")?;
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(bad("solver.alpha", format!("must be ≥ 0, got {alpha}")));
        }
        let t_end: f64 = raw.parse("solver.t_end")?;
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(bad("solver.t_end", format!("must be ≥ 0, got {t_end}")));
        }
        let dt_policy = match auto_or_positive(&raw, "solver.dt")? {
            Some(dt) => DtPolicy::Fixed(dt),
            None => DtPolicy::Cfl(positive(&raw, "solver.cfl")?),
        };
        let record_every: usize = raw.parse("solver.record_every")?;
        let store_every: usize = raw.parse("solver.store_every")?;
        if record_every == 0 {
            return Err(bad("solver.record_every", "must be ≥ 1"));
        }
        if store_every == 0 {
            return Err(bad("solver.store_every", "must be ≥ 1"));
        }
        let solver = SolverConfig {
            alpha,
            flow,
            surface,
            dt_policy,
            projection: crate::dynamics::Projection::NearestPoint,
            t_end,
            record_every,
        };
        solver.validate().map_err(|e| bad("solver", e.to_string()))?;
        let center: Vec<f64> = raw.list("analysis.center")?;
        if center.len() != 2 {
            return Err(bad("analysis.center", "expected `x,y`"));
        }
        let ladder: Vec<usize> = raw.list("analysis.ladder")?;
        if ladder.iter().any(|&n| n < 4) {
            return Err(bad("analysis.ladder", "grid sizes must be at least 4"));
        }
        let amplitudes: Vec<f64> = raw.list("analysis.amplitudes")?;
        if amplitudes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(bad("analysis.amplitudes", "amplitudes must be positive"));
        }
        let cos_colatitude: f64 = raw.parse("analysis.cos_colatitude")?;
        if !(cos_colatitude > -1.0 && cos_colatitude < 1.0) {
            return Err(bad("analysis.cos_colatitude", "must lie in (−1, 1)"));
        }
        let amplitude: f64 = raw.parse("analysis.amplitude")?;
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(bad("analysis.amplitude", "must be ≥ 0"));
        }
        let analysis = AnalysisSection {
            amplitude,
            kmax: raw.parse("analysis.kmax")?,
            eps0: positive(&raw, "analysis.eps0_fraction")? * 4.0 * std::f64::consts::PI,
            delta: auto_or_positive(&raw, "analysis.delta")?,
            r0: positive(&raw, "analysis.r0")?,
            lambda: positive(&raw, "analysis.lambda")?,
            r_out: positive(&raw, "analysis.r_out")?,
            center: (center[0], center[1]),
            radius: positive(&raw, "analysis.radius")?,
            cos_colatitude,
            amplitudes,
            ladder,
            samples: raw.parse("analysis.samples")?,
            fields: raw.parse("analysis.fields")?,
            energy_fraction: positive(&raw, "analysis.energy_fraction")?,
            oracle_time: positive(&raw, "analysis.oracle_time")?,
            oracle_steps: raw.parse("analysis.oracle_steps")?,
        };
        if analysis.kmax < 1 {
            return Err(bad("analysis.kmax", "must be ≥ 1"));
        }
        if analysis.oracle_steps == 0 {
            return Err(bad("analysis.oracle_steps", "must be ≥ 1"));
        }
        if analysis.fields == 0 {
            return Err(bad("analysis.fields", "must be ≥ 1"));
        }
        let frames: usize = raw.parse("output.frames")?;
        Ok(Self {
            preset,
            seed,
            grid,
            solver,
            store_every,
            analysis,
            frames,
            raw,
        })
    }

    /// Canonical text of every resolved setting.
    pub fn canonical(&self) -> String {
        self.raw.canonical()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_for_every_preset() {
        for p in Preset::ALL {
            let c = ExperimentConfig::build(Some(p), None, None).unwrap();
            assert_eq!(c.preset, p);
            assert!(c.canonical().contains(&format!("preset = {}", p.name())));
        }
    }

    #[test]
    fn malformed_values_name_their_field() {
        let cases = [
            ("[grid]\nh = -0.1\n", "grid.h"),
            ("[grid]\nboundary = open\n", "grid.boundary"),
            ("[solver]\nalpha = x\n", "solver.alpha"),
            ("[grid]\nspacing = 1\n", "grid.spacing"),
            ("[target]\nsurface = cube\n", "target.surface"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::build(Some(Preset::EnergyDecay), Some(text), None).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
    }

    #[test]
    fn file_selects_preset_and_seed_overrides() {
        let text = "[run]\npreset = kernel-mass\nseed = 5\n[grid]\nh = 0.1\n";
        let c = ExperimentConfig::build(None, Some(text), Some(9)).unwrap();
        assert_eq!(c.preset, Preset::KernelMass);
        assert_eq!(c.seed, 9);
        assert_eq!(c.grid.h(), 0.1);
        assert!(ExperimentConfig::build(Some(Preset::EnergyDecay), Some(text), None).is_err());
        assert!(ExperimentConfig::build(None, Some("[run]\npreset = nope\n"), None).is_err());
    }
}
