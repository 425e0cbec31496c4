//! Local parameter sensitivity: normalized central-difference elasticities
//! `(p/Q)·∂Q/∂p` of trajectory and threshold metrics.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::control::{uncontrolled_objective, ControlError};
use crate::dynamics::{integrate_forward, DynamicsError, TimeGrid};
use crate::model::{ModelParams, State};
use crate::stability::{next_gen_r0, StabilityError};

pub const DEFAULT_REL_STEP: f64 = 0.01;
/// Metric magnitudes below this make the elasticity undefined.
pub const ZERO_METRIC_TOL: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("metric {metric} is zero at the base point; elasticity undefined")]
    ZeroMetric { metric: String },
    #[error("relative step {0} must lie in (0, 0.5)")]
    InvalidStep(f64),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parameter {
    Lambda,
    Phi,
    Delta1,
    Delta2,
    Omega,
    Rho,
    Gamma1,
    Gamma2,
    Alpha,
    Beta,
}

impl Parameter {
    pub const ALL: [Parameter; 10] = [
        Parameter::Lambda,
        Parameter::Phi,
        Parameter::Delta1,
        Parameter::Delta2,
        Parameter::Omega,
        Parameter::Rho,
        Parameter::Gamma1,
        Parameter::Gamma2,
        Parameter::Alpha,
        Parameter::Beta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Parameter::Lambda => "lambda",
            Parameter::Phi => "phi",
            Parameter::Delta1 => "delta1",
            Parameter::Delta2 => "delta2",
            Parameter::Omega => "omega",
            Parameter::Rho => "rho",
            Parameter::Gamma1 => "gamma1",
            Parameter::Gamma2 => "gamma2",
            Parameter::Alpha => "alpha",
            Parameter::Beta => "beta",
        }
    }

    pub fn get(&self, p: &ModelParams) -> f64 {
        match self {
            Parameter::Lambda => p.lambda,
            Parameter::Phi => p.phi,
            Parameter::Delta1 => p.delta1,
            Parameter::Delta2 => p.delta2,
            Parameter::Omega => p.omega,
            Parameter::Rho => p.rho,
            Parameter::Gamma1 => p.gamma1,
            Parameter::Gamma2 => p.gamma2,
            Parameter::Alpha => p.alpha,
            Parameter::Beta => p.beta,
        }
    }

    pub fn with(&self, p: &ModelParams, value: f64) -> ModelParams {
        let mut q = *p;
        let slot = match self {
            Parameter::Lambda => &mut q.lambda,
            Parameter::Phi => &mut q.phi,
            Parameter::Delta1 => &mut q.delta1,
            Parameter::Delta2 => &mut q.delta2,
            Parameter::Omega => &mut q.omega,
            Parameter::Rho => &mut q.rho,
            Parameter::Gamma1 => &mut q.gamma1,
            Parameter::Gamma2 => &mut q.gamma2,
            Parameter::Alpha => &mut q.alpha,
            Parameter::Beta => &mut q.beta,
        };
        *slot = value;
        q
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SensitivityError::Unknown {
                kind: "parameter",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    FinalI,
    PeakI,
    FinalS,
    R0,
    UncontrolledObjective,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::FinalI,
        Metric::PeakI,
        Metric::FinalS,
        Metric::R0,
        Metric::UncontrolledObjective,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::FinalI => "final_i",
            Metric::PeakI => "peak_i",
            Metric::FinalS => "final_s",
            Metric::R0 => "r0",
            Metric::UncontrolledObjective => "uncontrolled_objective",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = SensitivityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SensitivityError::Unknown {
                kind: "metric",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityEntry {
    pub parameter: Parameter,
    pub metric: Metric,
    pub index: f64,
    pub rel_step: f64,
    /// Base value was zero, so an absolute step of `rel_step` was used and
    /// `index` is the semi-elasticity `(1/Q)·∂Q/∂p`.
    pub absolute_step: bool,
}

/// Value of `metric` for the uncontrolled system.
pub fn metric_value(
    metric: Metric,
    params: &ModelParams,
    x0: &State,
    grid: &TimeGrid,
) -> Result<f64, SensitivityError> {
    Ok(match metric {
        Metric::R0 => next_gen_r0(params)?,
        Metric::UncontrolledObjective => uncontrolled_objective(x0, params, grid)?,
        Metric::FinalI => integrate_forward(x0, None, params, grid)?.last().i,
        Metric::PeakI => integrate_forward(x0, None, params, grid)?.peak_i(),
        Metric::FinalS => integrate_forward(x0, None, params, grid)?.last().s,
    })
}

/// Central-difference elasticity of an arbitrary quantity of the parameters.
pub fn elasticity<F>(
    parameter: Parameter,
    params: &ModelParams,
    rel_step: f64,
    mut quantity: F,
) -> Result<(f64, bool), SensitivityError>
where
    F: FnMut(&ModelParams) -> Result<f64, SensitivityError>,
{
    if !(rel_step > 0.0 && rel_step < 0.5) {
        return Err(SensitivityError::InvalidStep(rel_step));
    }
    let base = quantity(params)?;
    if base.abs() < ZERO_METRIC_TOL {
        return Err(SensitivityError::ZeroMetric {
            metric: format!("{base:e}"),
        });
    }
    let p0 = parameter.get(params);
    let absolute = p0 == 0.0;
    let step = if absolute { rel_step } else { p0 * rel_step };
    let up = quantity(&parameter.with(params, p0 + step))?;
    let down = quantity(&parameter.with(params, p0 - step))?;
    let slope = (up - down) / (2.0 * step);
    let scale = if absolute { 1.0 } else { p0 };
    Ok((scale * slope / base, absolute))
}

pub fn sensitivity_index(
    parameter: Parameter,
    metric: Metric,
    params: &ModelParams,
    x0: &State,
    grid: &TimeGrid,
    rel_step: f64,
) -> Result<SensitivityEntry, SensitivityError> {
    let (index, absolute_step) = elasticity(parameter, params, rel_step, |p| {
        metric_value(metric, p, x0, grid)
    })
    .map_err(|e| match e {
        SensitivityError::ZeroMetric { .. } => SensitivityError::ZeroMetric {
            metric: metric.name().to_string(),
        },
        other => other,
    })?;
    Ok(SensitivityEntry {
        parameter,
        metric,
        index,
        rel_step,
        absolute_step,
    })
}

/// All ten parameters ordered by `|index|` descending, ties by name.
pub fn rank_parameters(
    metric: Metric,
    params: &ModelParams,
    x0: &State,
    grid: &TimeGrid,
    rel_step: f64,
) -> Result<Vec<SensitivityEntry>, SensitivityError> {
    let mut entries = Parameter::ALL
        .iter()
        .map(|&p| sensitivity_index(p, metric, params, x0, grid, rel_step))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort_by(|a, b| {
        b.index
            .abs()
            .partial_cmp(&a.index.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.parameter.name().cmp(b.parameter.name()))
    });
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::crime_free;

    fn e0_s(p: &ModelParams) -> Result<f64, SensitivityError> {
        Ok(crime_free(p)
            .map_err(|e| SensitivityError::Unknown {
                kind: "e0",
                name: e.to_string(),
            })?
            .s)
    }

    #[test]
    fn crime_free_power_law() {
        let p = ModelParams::table2(0.3);
        let h = DEFAULT_REL_STEP;
        let (e, abs) = elasticity(Parameter::Lambda, &p, h, e0_s).unwrap();
        assert!(!abs);
        assert!((e - 1.0).abs() < 1e-12, "{e}");
        // central difference of 1/φ: −1/(1 − h²)
        let (e, _) = elasticity(Parameter::Phi, &p, h, e0_s).unwrap();
        assert!((e + 1.0 / (1.0 - h * h)).abs() < 1e-10, "{e}");
    }

    #[test]
    fn zero_base_uses_absolute_step() {
        let p = ModelParams {
            delta1: 0.0,
            ..ModelParams::table2(0.3)
        };
        let (_, abs) = elasticity(Parameter::Delta1, &p, 0.01, |q| Ok(1.0 + q.delta1)).unwrap();
        assert!(abs);
    }

    #[test]
    fn zero_metric_rejected() {
        let p = ModelParams {
            alpha: 0.0,
            ..ModelParams::table2(0.3)
        };
        let grid = TimeGrid::with_step(0.0, 1.0, 0.1).unwrap();
        let err = sensitivity_index(
            Parameter::Lambda,
            Metric::R0,
            &p,
            &State::default(),
            &grid,
            0.01,
        );
        assert!(matches!(err, Err(SensitivityError::ZeroMetric { .. })));
    }

    #[test]
    fn step_bounds() {
        let p = ModelParams::table2(0.3);
        for h in [0.0, 0.5, -0.1] {
            assert_eq!(
                elasticity(Parameter::Beta, &p, h, |q| Ok(q.beta)),
                Err(SensitivityError::InvalidStep(h))
            );
        }
    }

    #[test]
    fn metric_values_simple() {
        let p = ModelParams {
            alpha: 0.0,
            ..ModelParams::table2(0.3)
        };
        let grid = TimeGrid::with_step(0.0, 2.0, 0.01).unwrap();
        assert_eq!(
            metric_value(Metric::R0, &p, &State::default(), &grid).unwrap(),
            0.0
        );
        let p = ModelParams::table2(0.3);
        let e0 = crime_free(&p).unwrap();
        let s = metric_value(Metric::FinalS, &p, &e0, &grid).unwrap();
        assert!((s - p.capacity()).abs() < 1e-10);
    }

    #[test]
    fn names_roundtrip() {
        for p in Parameter::ALL {
            assert_eq!(p.name().parse::<Parameter>().unwrap(), p);
        }
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("kappa".parse::<Parameter>().is_err());
    }

    #[test]
    fn r0_ranking_has_lambda_and_phi() {
        let p = ModelParams::table2(0.3);
        let grid = TimeGrid::with_step(0.0, 1.0, 0.1).unwrap();
        let ranked = rank_parameters(Metric::R0, &p, &State::default(), &grid, 0.01).unwrap();
        assert_eq!(ranked.len(), 10);
        for name in [Parameter::Lambda, Parameter::Phi] {
            let e = ranked.iter().find(|e| e.parameter == name).unwrap();
            assert!(e.index.abs() > 1e-6);
        }
        for w in ranked.windows(2) {
            assert!(w[0].index.abs() >= w[1].index.abs());
        }
    }
}
