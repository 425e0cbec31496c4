//! Scenario files: TOML documents with `[parameters]`, `[initial]`,
//! `[horizon]`, `[controls]`, `[solver]` and `[output]` sections.
//!
//! Only `[parameters]` is required. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlBounds, SweepOptions, U3Rule};
use crate::dynamics::TimeGrid;
use crate::model::{CostWeights, ModelError, ModelParams, State};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read scenario `{name}`: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub parameters: ModelParams,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Initial compartment sizes. Defaults to the 1,539-member field cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub s0: f64,
    pub i0: f64,
    pub r0: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            s0: 1357.0,
            i0: 136.0,
            r0: 46.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonConfig {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            t_final: 5.0,
            dt: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsConfig {
    /// Which of `u1, u2, u3` are optimized.
    pub active: [bool; 3],
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub weights: [f64; 3],
}

impl Default for ControlsConfig {
    fn default() -> Self {
        Self {
            active: [false; 3],
            min: [0.0; 3],
            max: [1.0; 3],
            weights: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub relaxation: f64,
    /// Use `(z2 − z3)` instead of `(z2 − z1)` in the `u3` update.
    pub u3_compat: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SweepOptions::default();
        Self {
            max_iters: o.max_iters,
            tol: o.tol,
            relaxation: o.relaxation,
            u3_compat: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub emit_svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            emit_svg: false,
        }
    }
}

const TABLE2_BETA03: &str = include_str!("../scenarios/table2_beta03.toml");
const TABLE2_BETA03_U1: &str = include_str!("../scenarios/table2_beta03_u1.toml");

/// Scenario files shipped with the crate, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".toml") {
        "table2_beta03" => Some(TABLE2_BETA03),
        "table2_beta03_u1" => Some(TABLE2_BETA03_U1),
        _ => None,
    }
}

pub const BUNDLED_NAMES: [&str; 2] = ["table2_beta03", "table2_beta03_u1"];

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        ConfigError::Parse {
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config serializes to TOML")
}

/// Reads a scenario from `path`, falling back to a bundled scenario name.
pub fn load_config(path: &str) -> Result<ScenarioConfig, ConfigError> {
    if Path::new(path).is_file() {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            name: path.to_string(),
            source,
        })?;
        return parse_config(&text);
    }
    match bundled(path) {
        Some(text) => parse_config(text),
        None => Err(ConfigError::Io {
            name: path.to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file or bundled scenario",
            ),
        }),
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.parameters.validate().map_err(|e| match e {
            ModelError::InvalidParameter { name, reason } => {
                ConfigError::invalid(format!("parameters.{name}"), reason)
            }
        })?;

        for (name, v) in [
            ("s0", self.initial.s0),
            ("i0", self.initial.i0),
            ("r0", self.initial.r0),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::invalid(
                    format!("initial.{name}"),
                    format!("{v} must be >= 0"),
                ));
            }
        }

        let h = &self.horizon;
        if !(h.t_final.is_finite() && h.t_final > 0.0) {
            return Err(ConfigError::invalid(
                "horizon.t_final",
                format!("{} must be > 0", h.t_final),
            ));
        }
        if !(h.dt.is_finite() && h.dt > 0.0 && h.dt <= h.t_final) {
            return Err(ConfigError::invalid(
                "horizon.dt",
                format!("{} must be > 0 and no larger than t_final", h.dt),
            ));
        }

        let c = &self.controls;
        for k in 0..3 {
            let (lo, hi) = (c.min[k], c.max[k]);
            if !(lo.is_finite() && lo >= 0.0) {
                return Err(ConfigError::invalid(
                    format!("controls.min[{k}]"),
                    format!("{lo} must be >= 0"),
                ));
            }
            if !(hi.is_finite() && hi >= lo) {
                return Err(ConfigError::invalid(
                    format!("controls.max[{k}]"),
                    format!("{hi} must be >= min {lo}"),
                ));
            }
            let w = c.weights[k];
            if !(w.is_finite() && w > 0.0) {
                return Err(ConfigError::invalid(
                    format!("controls.weights[{k}]"),
                    format!("{w} must be > 0"),
                ));
            }
        }

        let s = &self.solver;
        if s.max_iters == 0 {
            return Err(ConfigError::invalid("solver.max_iters", "must be >= 1"));
        }
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(ConfigError::invalid(
                "solver.tol",
                format!("{} must be > 0", s.tol),
            ));
        }
        if !(s.relaxation > 0.0 && s.relaxation <= 1.0) {
            return Err(ConfigError::invalid(
                "solver.relaxation",
                format!("{} must lie in (0, 1]", s.relaxation),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State::new(self.initial.s0, self.initial.i0, self.initial.r0)
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::with_step(0.0, self.horizon.t_final, self.horizon.dt)
            .expect("validated horizon yields a grid")
    }

    pub fn bounds(&self) -> ControlBounds {
        ControlBounds {
            min: self.controls.min,
            max: self.controls.max,
        }
    }

    pub fn weights(&self) -> CostWeights {
        let w = self.controls.weights;
        CostWeights::new(w[0], w[1], w[2])
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            max_iters: self.solver.max_iters,
            tol: self.solver.tol,
            relaxation: self.solver.relaxation,
            u3_rule: if self.solver.u3_compat {
                U3Rule::Compat
            } else {
                U3Rule::Stationarity
            },
        }
    }
}
