//! JSON run configuration.
//!
//! Lengths are in mm, forces in N, moduli in MPa and angles in degrees.
//! Unknown keys are rejected. A minimal document:
//!
//! ```json
//! {
//!   "mechanism": {
//!     "beam": { "length_L": 40, "thickness_T": 1.2, "width_W": 5, "tilt_deg": 7 },
//!     "n_beams": 12
//!   },
//!   "material": { "youngs_modulus": 1800 },
//!   "sweep": { "travel_max": 5 }
//! }
//! ```
//!
//! Optional blocks are `design`, `fe` and `output_dir`; see [`RunConfig`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{DesignBounds, DesignSpec, GridDensity, DEFAULT_GRID_CAP, DEFAULT_STRESS_LIMIT};
use crate::error::{ensure, Error, Result};
use crate::fe::FeSettings;
use crate::mechanism::{
    CantileverSection, MechanismConfig, DEFAULT_LATCH_RAMP_FACTOR, DEFAULT_LATCH_TRAVEL,
    DEFAULT_LENGTH_BUDGET, DEFAULT_SERIES_STIFFNESS, TABLE2_JAW_CALIBRATION,
};
use crate::tebc::{MaterialModel, VBeamGeometry, DEFAULT_CURVE_SAMPLES};

const REQUIRED_KEYS: [&str; 3] = ["mechanism", "material", "sweep"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("config invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct BeamSection {
    pub length_L: f64,
    pub thickness_T: f64,
    pub width_W: f64,
    pub tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    pub beam: BeamSection,
    pub n_beams: u32,
    #[serde(default = "default_latch_travel")]
    pub latch_travel: f64,
    #[serde(default = "default_ks")]
    pub series_stiffness_ks: f64,
    #[serde(default = "default_jaw_calibration")]
    pub jaw_calibration: Vec<(f64, f64)>,
    #[serde(default)]
    pub jaw_section: CantileverSection,
    #[serde(default = "default_length_budget")]
    pub overall_length_budget: f64,
    #[serde(default = "default_ramp")]
    pub latch_ramp_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub youngs_modulus: f64,
    #[serde(default = "default_poisson")]
    pub poisson_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub travel_max: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub target_force: f64,
    pub target_travel: f64,
    pub bounds: DesignBounds,
    #[serde(default = "default_grid")]
    pub grid: GridDensity,
    #[serde(default = "default_stress_limit")]
    pub stress_limit: f64,
    #[serde(default = "default_length_budget")]
    pub length_budget: f64,
    #[serde(default)]
    pub fixture_allowance: f64,
    #[serde(default)]
    pub require_non_bistable_at_travel: bool,
    #[serde(default = "default_grid_cap")]
    pub grid_cap: u64,
    #[serde(default = "default_refine_evals")]
    pub refine_max_evals: usize,
}

/// A parsed configuration with every default filled in, so serializing it
/// and parsing the result gives it back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mechanism: MechanismSection,
    pub material: MaterialSection,
    pub sweep: SweepSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(default)]
    pub fe: FeSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_latch_travel() -> f64 {
    DEFAULT_LATCH_TRAVEL
}
fn default_ks() -> f64 {
    DEFAULT_SERIES_STIFFNESS
}
fn default_jaw_calibration() -> Vec<(f64, f64)> {
    TABLE2_JAW_CALIBRATION.to_vec()
}
fn default_length_budget() -> f64 {
    DEFAULT_LENGTH_BUDGET
}
fn default_ramp() -> f64 {
    DEFAULT_LATCH_RAMP_FACTOR
}
fn default_poisson() -> f64 {
    MaterialModel::pla().poisson_ratio
}
fn default_samples() -> usize {
    DEFAULT_CURVE_SAMPLES
}
fn default_grid() -> GridDensity {
    GridDensity::uniform(5)
}
fn default_stress_limit() -> f64 {
    DEFAULT_STRESS_LIMIT
}
fn default_grid_cap() -> u64 {
    DEFAULT_GRID_CAP
}
fn default_refine_evals() -> usize {
    200
}

impl RunConfig {
    pub fn geometry(&self) -> Result<VBeamGeometry> {
        let b = &self.mechanism.beam;
        VBeamGeometry::from_degrees(b.length_L, b.thickness_T, b.width_W, b.tilt_deg)
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        MaterialModel::new(self.material.youngs_modulus, self.material.poisson_ratio)
    }

    pub fn mechanism_config(&self) -> Result<MechanismConfig> {
        let m = &self.mechanism;
        let cfg = MechanismConfig {
            beam_geometry: self.geometry()?,
            n_beams: m.n_beams,
            material: self.material_model()?,
            latch_travel: m.latch_travel,
            jaw_calibration: m.jaw_calibration.clone(),
            series_stiffness_ks: m.series_stiffness_ks,
            jaw_section: m.jaw_section,
            overall_length_budget: m.overall_length_budget,
            latch_ramp_factor: m.latch_ramp_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn design_spec(&self) -> Result<Option<(DesignSpec, GridDensity, usize)>> {
        let Some(d) = &self.design else {
            return Ok(None);
        };
        let spec = DesignSpec {
            target_force: d.target_force,
            target_travel: d.target_travel,
            bounds: d.bounds,
            material: self.material_model()?,
            stress_limit: d.stress_limit,
            length_budget: d.length_budget,
            fixture_allowance: d.fixture_allowance,
            require_non_bistable_at_travel: d.require_non_bistable_at_travel,
            grid_cap: d.grid_cap,
        };
        spec.validate()?;
        ensure(
            [d.grid.length, d.grid.thickness, d.grid.width, d.grid.tilt, d.grid.n_beams]
                .iter()
                .all(|&c| c >= 1),
            "design grid needs at least 1 point per parameter",
        )?;
        Ok(Some((spec, d.grid, d.refine_max_evals)))
    }

    pub fn validate(&self) -> Result<()> {
        self.mechanism_config()?;
        ensure(
            self.sweep.travel_max.is_finite() && self.sweep.travel_max > 0.0,
            "sweep travel_max must be positive",
        )?;
        ensure(self.sweep.n_samples >= 2, "sweep n_samples must be at least 2")?;
        self.design_spec()?;
        self.fe.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Some(obj) = value.as_object() {
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !obj.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Schema {
                path: ".".into(),
                message: format!("missing required keys: {}", missing.join(", ")),
            }
            .into());
        }
    }
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    config.validate().map_err(|e| match e {
        Error::Validation { invariant } => Error::Config(ConfigError::Invariant(invariant)),
        other => other,
    })?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1: &str = include_str!("../examples/table1.json");

    #[test]
    fn shipped_example_parses() {
        let c = parse_config(TABLE1).unwrap();
        assert_eq!(c.mechanism.n_beams, 12);
        assert_eq!(c.geometry().unwrap(), VBeamGeometry::table1());
        assert_eq!(c.material.youngs_modulus, 1800.0);
        assert_eq!(c.sweep.travel_max, 5.0);
        assert_eq!(c.mechanism_config().unwrap(), MechanismConfig::table1());
    }

    #[test]
    fn negative_thickness_names_the_invariant() {
        let text = TABLE1.replace("\"thickness_T\": 1.2", "\"thickness_T\": -1");
        match parse_config(&text) {
            Err(Error::Config(ConfigError::Invariant(msg))) => assert!(msg.contains("thickness")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_document_lists_required_keys() {
        for text in ["", "{}"] {
            match parse_config(text) {
                Err(Error::Config(ConfigError::Schema { message, .. })) => {
                    for k in REQUIRED_KEYS {
                        assert!(message.contains(k), "{message}");
                    }
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config("{\n  \"mechanism\": ,\n}") {
            Err(Error::Config(ConfigError::Syntax { line, column, .. })) => {
                assert_eq!(line, 2);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = TABLE1.replacen("\"tilt_deg\"", "\"tilt\"", 1);
        match parse_config(&text) {
            Err(Error::Config(ConfigError::Schema { path, .. })) => {
                assert!(path.starts_with("mechanism.beam"), "{path}")
            }
            other => panic!("{other:?}"),
        }
    }
}
