//! TOML run configuration with sections `[plant]`, `[lqr]`,
//! `[pole_placement]` and `[simulation]`. Every field has a default, so an
//! empty file describes the quadruple pendulum.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, PlantParams, QUADRUPLE_CART_MASS};
use crate::linalg::{self, LinalgError, Matrix};
use crate::linearization::EquilibriumKind;
use crate::simulation::SimConfig;
use crate::synthesis::{LqrWeights, PoleDesign, SynthesisError, DEFAULT_FAR_POLE_SPACING};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("damping matrix {path}: {source}")]
    Damping {
        path: PathBuf,
        #[source]
        source: LinalgError,
    },
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

impl From<DynamicsError> for ConfigError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParams { field, reason } => {
                ConfigError::Invalid { field: format!("plant.{field}"), reason }
            }
            other => ConfigError::Invalid { field: "plant".into(), reason: other.to_string() },
        }
    }
}

fn invalid(field: &str, e: SynthesisError) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumChoice {
    #[default]
    Upright,
    Hanging,
}

impl From<EquilibriumChoice> for EquilibriumKind {
    fn from(c: EquilibriumChoice) -> Self {
        match c {
            EquilibriumChoice::Upright => EquilibriumKind::Upright,
            EquilibriumChoice::Hanging => EquilibriumKind::Hanging,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub cart_mass: f64,
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
    pub gravity: f64,
    /// `"zero"` or the path of a CSV matrix, relative to the config file.
    pub damping: String,
    pub equilibrium: EquilibriumChoice,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            cart_mass: QUADRUPLE_CART_MASS,
            masses: vec![0.1; 4],
            lengths: vec![0.03, 0.04, 0.07, 0.10],
            gravity: 9.81,
            damping: "zero".into(),
            equilibrium: EquilibriumChoice::Upright,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrSection {
    /// Diagonal of `Q` in interleaved order; 10 on positions and 1 on
    /// velocities when absent.
    pub q_diag: Option<Vec<f64>>,
    pub r: f64,
}

impl Default for LqrSection {
    fn default() -> Self {
        Self { q_diag: None, r: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolePlacementSection {
    pub overshoot_pct: f64,
    pub settling_time: f64,
    pub spread: f64,
    pub far_pole_spacing: f64,
    /// Settling times visited by `sweep`.
    pub sweep_settling_times: Vec<f64>,
}

impl Default for PolePlacementSection {
    fn default() -> Self {
        Self {
            overshoot_pct: 1.0,
            settling_time: 6.0,
            spread: 10.0,
            far_pole_spacing: DEFAULT_FAR_POLE_SPACING,
            sweep_settling_times: vec![3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub lqr: LqrSection,
    pub pole_placement: PolePlacementSection,
    pub simulation: SimConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string().trim_end().into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// The resolved configuration, suitable for saving next to the outputs.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn plant_params(&self) -> Result<PlantParams> {
        let s = &self.plant;
        let base = PlantParams::new(s.cart_mass, s.masses.clone(), s.lengths.clone(), s.gravity)?;
        match s.damping.trim() {
            "" | "zero" => Ok(base),
            path => {
                let path = self.base_dir.join(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                let d: Matrix =
                    linalg::csv::from_csv(&text).map_err(|source| ConfigError::Damping { path, source })?;
                Ok(base.with_damping_matrix(d)?)
            }
        }
    }

    pub fn lqr_weights(&self, states: usize) -> Result<LqrWeights> {
        let weights = match &self.lqr.q_diag {
            Some(q) if q.len() != states => {
                return Err(ConfigError::Invalid {
                    field: "lqr.q_diag".into(),
                    reason: format!("{} entries for a {states}-state plant", q.len()),
                })
            }
            Some(q) => LqrWeights::diagonal(q, self.lqr.r),
            None => {
                let diag: Vec<f64> = LqrWeights::position_heavy(states).q().diagonal().iter().copied().collect();
                LqrWeights::diagonal(&diag, self.lqr.r)
            }
        };
        weights.map_err(|e| invalid("lqr", e))
    }

    pub fn pole_design(&self) -> Result<PoleDesign> {
        let s = &self.pole_placement;
        PoleDesign {
            overshoot_pct: s.overshoot_pct,
            settling_time: s.settling_time,
            spread: s.spread,
            far_pole_spacing: s.far_pole_spacing,
        }
        .validated()
        .map_err(|e| invalid("pole_placement", e))
    }

    /// Check every section, so a bad field is reported whichever command
    /// reads the file.
    pub fn validate(&self) -> Result<()> {
        self.plant_params()?;
        self.lqr_weights(2 * (self.plant.masses.len() + 1))?;
        self.pole_design()?;
        self.simulation()?;
        Ok(())
    }

    pub fn simulation(&self) -> Result<SimConfig> {
        self.simulation.validate().map_err(|e| ConfigError::Invalid {
            field: "simulation".into(),
            reason: e.to_string(),
        })?;
        Ok(self.simulation.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_quadruple_plant() {
        let cfg = RunConfig::from_toml_str("", "inline").unwrap();
        assert_eq!(cfg.plant_params().unwrap(), PlantParams::quadruple_reference());
        assert_eq!(cfg.simulation().unwrap(), SimConfig::default());
        assert_eq!(cfg.pole_design().unwrap(), PoleDesign::new(1.0, 6.0).unwrap());
        let w = cfg.lqr_weights(10).unwrap();
        assert_eq!(w.q()[(0, 0)], 10.0);
        assert_eq!(w.q()[(1, 1)], 1.0);
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = RunConfig::from_toml_str("[plant]\ncart_mass = \"heavy\"\n", "c.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("c.toml") && msg.contains("line 2"), "{msg}");
        let err = RunConfig::from_toml_str("[plant]\nbogus = 1\n", "c.toml").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = RunConfig::from_toml_str("[plant]\nmasses = [0.1, -0.2, 0.1, 0.1]\n", "c").unwrap();
        let msg = cfg.plant_params().unwrap_err().to_string();
        assert!(msg.contains("plant.masses[1]"), "{msg}");

        let cfg = RunConfig::from_toml_str("[pole_placement]\novershoot_pct = 150\n", "c").unwrap();
        assert!(cfg.pole_design().unwrap_err().to_string().contains("overshoot"));

        let cfg = RunConfig::from_toml_str("[lqr]\nq_diag = [1.0, 1.0]\n", "c").unwrap();
        assert!(cfg.lqr_weights(10).is_err());
        assert!(cfg.validate().unwrap_err().to_string().contains("lqr.q_diag"));
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn damping_matrix_is_read_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("d.csv"), "0,0\n0,0.01\n").unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "[plant]\ncart_mass = 1.0\nmasses = [0.1]\nlengths = [0.5]\ndamping = \"d.csv\"\n",
        )
        .unwrap();
        let p = RunConfig::load(&path).unwrap().plant_params().unwrap();
        assert_eq!(p.damping()[(1, 1)], 0.01);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.simulation.seed = 9;
        cfg.lqr.q_diag = Some(vec![1.0; 10]);
        let back = RunConfig::from_toml_str(&cfg.to_toml(), "x").unwrap();
        assert_eq!(back, cfg);
    }
}
