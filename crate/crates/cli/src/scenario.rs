//! Scenario files: one JSON object with flat keys.

use std::fs;
use std::path::Path;

use fpsteer::control::SteerConfig;
use fpsteer::convergence::{Level, MIN_LEVELS};
use fpsteer::grid::{normalize, project, uniform_grid};
use fpsteer::pde::Scheme;
use fpsteer::{DensitySpec, GridFunction};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stabilize,
    Steer,
    Spectrum,
    Particles,
    Convergence,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    #[default]
    Stabilizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    pub count: usize,
    /// Defaults to the scenario `dt`.
    pub dt: Option<f64>,
    pub seed: u64,
    /// Defaults to `[T]`.
    pub snapshots: Vec<f64>,
    pub bins: usize,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            count: 100_000,
            dt: None,
            seed: 0,
            snapshots: Vec::new(),
            bins: 50,
        }
    }
}

/// Thresholds of the audits that decide the exit status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub mass: f64,
    pub rate: f64,
    pub terminal: f64,
    pub replay: f64,
    pub particle_l1: f64,
    pub min_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: 1e-12,
            rate: 0.05,
            terminal: 1e-3,
            replay: 5e-3,
            particle_l1: 0.05,
            min_order: 1.9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    y0_spec: String,
    f_spec: String,
    n: usize,
    #[serde(rename = "T")]
    horizon: f64,
    dt: f64,
    mode: Mode,
    #[serde(default)]
    scheme: Option<Scheme>,
    #[serde(default)]
    steer_config: Map<String, Value>,
    #[serde(default)]
    particle_config: Option<ParticleConfig>,
    #[serde(default)]
    levels: Vec<Level>,
    #[serde(default)]
    convergence_drift: DriftKind,
    #[serde(default)]
    trajectory_stride: Option<usize>,
    #[serde(default = "default_spectrum_k")]
    spectrum_k: usize,
    #[serde(default)]
    tolerances: Tolerances,
}

fn default_spectrum_k() -> usize {
    10
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub y0_spec: DensitySpec,
    pub f_spec: DensitySpec,
    pub n: usize,
    pub horizon: f64,
    pub dt: f64,
    pub mode: Mode,
    pub scheme: Scheme,
    pub steer: SteerConfig,
    pub particles: ParticleConfig,
    pub levels: Vec<Level>,
    pub convergence_drift: DriftKind,
    pub trajectory_stride: Option<usize>,
    pub spectrum_k: usize,
    pub tolerances: Tolerances,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_spec(field: &str, text: &str) -> CliResult<DensitySpec> {
    text.parse().map_err(|e| config(format!("{field}: {e}")))
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawScenario = serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_raw(raw)
    }

    #[cfg(test)]
    pub fn from_json(text: &str) -> CliResult<Self> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|source| CliError::Parse {
            path: "<inline>".into(),
            source,
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> CliResult<Self> {
        if raw.name.is_empty() || raw.name.starts_with('.') || raw.name.contains(['/', '\\']) {
            return Err(config(format!(
                "name `{}` is not a plain directory name",
                raw.name
            )));
        }
        let y0_spec = parse_spec("y0_spec", &raw.y0_spec)?;
        let f_spec = parse_spec("f_spec", &raw.f_spec)?;
        if !(raw.horizon > 0.0 && raw.horizon.is_finite()) {
            return Err(config(format!("T must be positive, got {}", raw.horizon)));
        }
        if !(raw.dt > 0.0 && raw.dt.is_finite()) {
            return Err(config(format!("dt must be positive, got {}", raw.dt)));
        }
        let grid = uniform_grid(raw.n).map_err(|e| config(e.to_string()))?;

        let mut steer_map = raw.steer_config;
        steer_map.entry("dt").or_insert_with(|| Value::from(raw.dt));
        let steer: SteerConfig = serde_json::from_value(Value::Object(steer_map))
            .map_err(|e| config(format!("steer_config: {e}")))?;
        if let Some(eps) = steer.epsilon {
            if !(eps > 0.0 && eps < raw.horizon) {
                return Err(config(format!(
                    "steer_config.epsilon must lie in (0, T), got {eps}"
                )));
            }
        }

        let mut particles = raw.particle_config.unwrap_or_default();
        if particles.snapshots.is_empty() {
            particles.snapshots.push(raw.horizon);
        }

        let scenario = Self {
            name: raw.name,
            y0_spec,
            f_spec,
            n: raw.n,
            horizon: raw.horizon,
            dt: raw.dt,
            mode: raw.mode,
            scheme: raw.scheme.unwrap_or(Scheme::CrankNicolson),
            steer,
            particles,
            levels: raw.levels,
            convergence_drift: raw.convergence_drift,
            trajectory_stride: raw.trajectory_stride,
            spectrum_k: raw.spectrum_k,
            tolerances: raw.tolerances,
        };
        scenario.check_densities(grid)?;
        scenario.check_mode(scenario.mode)?;
        Ok(scenario)
    }

    fn check_densities(&self, grid: fpsteer::Grid) -> CliResult<()> {
        let f = project(&self.f_spec, grid);
        if !(f.min() > 0.0) {
            return Err(config(format!(
                "target `{}` must be strictly positive",
                self.f_spec
            )));
        }
        let y0 = project(&self.y0_spec, grid);
        if y0.min() < 0.0 || !(y0.values().iter().sum::<f64>() > 0.0) {
            return Err(config(format!(
                "initial density `{}` must be nonnegative with positive mass",
                self.y0_spec
            )));
        }
        Ok(())
    }

    /// Checks the parts of the scenario that `mode` relies on.
    pub fn check_mode(&self, mode: Mode) -> CliResult<()> {
        match mode {
            Mode::Particles => self.check_particles(),
            Mode::Convergence => self.check_levels(),
            Mode::Spectrum => {
                if self.spectrum_k < 2 || self.spectrum_k > self.n {
                    return Err(config(format!(
                        "spectrum_k must lie in [2, n], got {}",
                        self.spectrum_k
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn check_particles(&self) -> CliResult<()> {
        let p = &self.particles;
        if p.count == 0 {
            return Err(config("particle_config.count must be positive"));
        }
        if let Some(dt) = p.dt {
            if !(dt > 0.0) {
                return Err(config(format!(
                    "particle_config.dt must be positive, got {dt}"
                )));
            }
        }
        if p.bins < 4 || !self.n.is_multiple_of(p.bins) {
            return Err(config(format!(
                "particle_config.bins must be at least 4 and divide n = {}, got {}",
                self.n, p.bins
            )));
        }
        if p.snapshots.windows(2).any(|w| !(w[1] > w[0]))
            || p.snapshots
                .iter()
                .any(|&t| !(0.0..=self.horizon).contains(&t))
        {
            return Err(config(
                "snapshot times must increase strictly within [0, T]",
            ));
        }
        Ok(())
    }

    fn check_levels(&self) -> CliResult<()> {
        if self.levels.len() < MIN_LEVELS {
            return Err(config(format!(
                "a convergence study needs at least {MIN_LEVELS} levels, got {}",
                self.levels.len()
            )));
        }
        for w in self.levels.windows(2) {
            if w[1].n < w[0].n || w[1].n % w[0].n != 0 || w[1].dt > w[0].dt {
                return Err(config(
                    "levels must refine: n divides the next n, dt does not grow",
                ));
            }
        }
        if self.levels.iter().any(|l| l.n < 4 || !(l.dt > 0.0)) {
            return Err(config("every level needs n >= 4 and dt > 0"));
        }
        Ok(())
    }

    pub fn grid(&self) -> fpsteer::Grid {
        uniform_grid(self.n).expect("validated")
    }

    pub fn initial(&self, grid: fpsteer::Grid) -> fpsteer::Result<GridFunction> {
        normalize(&project(&self.y0_spec, grid))
    }

    pub fn target(&self, grid: fpsteer::Grid) -> fpsteer::Result<GridFunction> {
        normalize(&project(&self.f_spec, grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"name": "s", "y0_spec": "step:0.2:1.8:0.5", "f_spec": "sine:0.5:1",
        "n": 40, "T": 1.0, "dt": 0.01, "mode": "steer"}"#;

    fn with(extra: &str) -> String {
        format!("{}, {extra}}}", BASE.trim_end_matches('}'))
    }

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::from_json(BASE).unwrap();
        assert_eq!(s.steer.dt, 0.01);
        assert_eq!(s.steer.m_max, 40);
        assert_eq!(s.particles.snapshots, vec![1.0]);
        assert_eq!(s.scheme, Scheme::CrankNicolson);
        let s = Scenario::from_json(&with(r#""steer_config": {"dt": 0.001, "m_max": 5}"#)).unwrap();
        assert_eq!((s.steer.dt, s.steer.m_max), (0.001, 5));
    }

    #[test]
    fn rejects_invalid_input() {
        for bad in [
            with(r#""steer_config": {"m_maxx": 5}"#),
            with(r#""surprise": 1"#),
            BASE.replace("steer", "hover"),
            BASE.replace("sine:0.5:1", "sine:2:1"),
            BASE.replace("sine:0.5:1", "step:0:1:0.5"),
            BASE.replace("\"n\": 40", "\"n\": 2"),
            BASE.replace("\"T\": 1.0", "\"T\": -1.0"),
            BASE.replace("\"name\": \"s\"", "\"name\": \"../x\""),
            with(r#""steer_config": {"epsilon": 2.0}"#),
        ] {
            assert!(Scenario::from_json(&bad).is_err(), "{bad}");
        }
        let s = Scenario::from_json(&with(
            r#""levels": [{"n": 10, "dt": 0.1}, {"n": 20, "dt": 0.05}]"#,
        ))
        .unwrap();
        assert!(s.check_mode(Mode::Convergence).is_err());
        let s = Scenario::from_json(&with(r#""particle_config": {"bins": 7}"#)).unwrap();
        assert!(s.check_mode(Mode::Particles).is_err());
    }
}
