//! Three-control optimal policy problem solved by forward–backward sweep.
//!
//! Each sweep iteration integrates the state forward under the current
//! schedule, integrates the co-state backward from `z(T) = 0`, computes the
//! clamped minimizer of the Hamiltonian at every node and blends it into the
//! schedule with a relaxation factor. Iteration stops once the max-norm
//! change of the schedule falls below `tol` relative to the schedule size
//! (floored at one).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    integrate_backward, integrate_forward, AdjointTrajectory, DynamicsError, TimeGrid, Trajectory,
};
use crate::model::{
    control_gradient, running_cost, AdjointState, Controls, CostWeights, ModelParams, State,
};

/// Nodes closer than this to a bound count as clamped.
pub const CLAMP_EPS: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid control bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("trajectory and schedule grids differ")]
    GridMismatch,
    #[error("sweep diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for ControlBounds {
    fn default() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }
}

impl ControlBounds {
    pub fn validate(&self) -> Result<(), ControlError> {
        for k in 0..3 {
            let (lo, hi) = (self.min[k], self.max[k]);
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return Err(ControlError::InvalidBounds(format!(
                    "u{}: need 0 <= min <= max, got [{lo}, {hi}]",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn clamp(&self, k: usize, v: f64) -> f64 {
        v.max(self.min[k]).min(self.max[k])
    }
}

/// Which closed form to use for the reintegration control `u3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum U3Rule {
    /// `(z2 − z1)·γ2·I / c3`, the zero of `∂H/∂u3`.
    #[default]
    Stationarity,
    /// `(z2 − z3)·γ2·I / c3`, kept for reproduction studies.
    Compat,
}

/// Control values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub grid: TimeGrid,
    pub values: Vec<Controls>,
    pub bounds: ControlBounds,
    /// Controls being optimized; inactive ones are pinned to zero.
    pub active: [bool; 3],
}

impl ControlSchedule {
    /// Every node set to `u`, clamped into bounds, with inactive entries zeroed.
    pub fn constant(grid: TimeGrid, bounds: ControlBounds, active: [bool; 3], u: Controls) -> Self {
        let v = project(&u, &bounds, &active);
        Self {
            grid,
            values: vec![v; grid.len()],
            bounds,
            active,
        }
    }

    /// Linear interpolation between nodes.
    pub fn at(&self, t: f64) -> Controls {
        let (k, w) = self.grid.locate(t);
        self.values[k].lerp(&self.values[k + 1], w)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        self.bounds.validate()?;
        if self.values.len() != self.grid.len() {
            return Err(ControlError::GridMismatch);
        }
        for (n, u) in self.values.iter().enumerate() {
            for (k, v) in u.to_array().into_iter().enumerate() {
                let ok = if self.active[k] {
                    v >= self.bounds.min[k] && v <= self.bounds.max[k]
                } else {
                    v == 0.0
                };
                if !ok {
                    return Err(ControlError::InvalidBounds(format!(
                        "node {n}: u{} = {v} violates its constraint",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

fn project(u: &Controls, bounds: &ControlBounds, active: &[bool; 3]) -> Controls {
    let a = u.to_array();
    Controls::from_array(std::array::from_fn(|k| {
        if active[k] {
            bounds.clamp(k, a[k])
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Weight of the new candidate in `u ← θ·candidate + (1−θ)·old`.
    pub relaxation: f64,
    pub u3_rule: U3Rule,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-6,
            relaxation: 0.5,
            u3_rule: U3Rule::Stationarity,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.max_iters == 0 {
            return Err(ControlError::InvalidOptions(
                "max_iters must be >= 1".into(),
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(ControlError::InvalidOptions(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(ControlError::InvalidOptions(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub state_traj: Trajectory,
    pub adjoint_traj: AdjointTrajectory,
    pub schedule: ControlSchedule,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm schedule change of the last iteration, relative to the schedule size.
    pub last_change: f64,
    /// Largest `|∂H/∂u_k|` over nodes where an active control is strictly interior.
    pub stationarity_residual: f64,
}

/// Clamped pointwise minimizer of the Hamiltonian over the control box.
pub fn pointwise_control(
    x: &State,
    z: &AdjointState,
    params: &ModelParams,
    w: &CostWeights,
    b: &ControlBounds,
) -> Controls {
    pointwise_control_with(x, z, params, w, b, U3Rule::Stationarity)
}

pub fn pointwise_control_with(
    x: &State,
    z: &AdjointState,
    params: &ModelParams,
    w: &CostWeights,
    b: &ControlBounds,
    rule: U3Rule,
) -> Controls {
    let fi = params.holling(x.s) * x.i;
    let u1 = (z.z2 - z.z1) * fi / w.c1;
    let u2 = (z.z2 - z.z3) * params.gamma1 * x.i / w.c2;
    let u3_diff = match rule {
        U3Rule::Stationarity => z.z2 - z.z1,
        U3Rule::Compat => z.z2 - z.z3,
    };
    let u3 = u3_diff * params.gamma2 * x.i / w.c3;
    Controls::new(b.clamp(0, u1), b.clamp(1, u2), b.clamp(2, u3))
}

/// Trapezoid quadrature of the running cost over the trajectory grid.
pub fn objective(
    state_traj: &Trajectory,
    schedule: &ControlSchedule,
    w: &CostWeights,
) -> Result<f64, ControlError> {
    if state_traj.grid != schedule.grid || state_traj.states.len() != schedule.values.len() {
        return Err(ControlError::GridMismatch);
    }
    Ok(trapezoid(
        &state_traj.states,
        &schedule.values,
        w,
        state_traj.grid.dt(),
    ))
}

/// Objective of the uncontrolled system over `grid`.
pub fn uncontrolled_objective(
    x0: &State,
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<f64, ControlError> {
    let traj = integrate_forward(x0, None, params, grid)?;
    let zeros = vec![Controls::ZERO; grid.len()];
    Ok(trapezoid(
        &traj.states,
        &zeros,
        &CostWeights::default(),
        grid.dt(),
    ))
}

fn trapezoid(states: &[State], controls: &[Controls], w: &CostWeights, dt: f64) -> f64 {
    let n = states.len();
    let mut acc = 0.0;
    for (k, (x, u)) in states.iter().zip(controls).enumerate() {
        let g = running_cost(x, u, w);
        acc += if k == 0 || k == n - 1 { 0.5 * g } else { g };
    }
    acc * dt
}

/// Objective value of an arbitrary feasible schedule.
pub fn evaluate_schedule(
    x0: &State,
    schedule: &ControlSchedule,
    params: &ModelParams,
    w: &CostWeights,
) -> Result<f64, ControlError> {
    let traj = integrate_forward(x0, Some(schedule), params, &schedule.grid)?;
    objective(&traj, schedule, w)
}

pub fn forward_backward_sweep(
    x0: &State,
    params: &ModelParams,
    w: &CostWeights,
    bounds: &ControlBounds,
    mask: [bool; 3],
    grid: &TimeGrid,
    opts: &SweepOptions,
) -> Result<OptimizationResult, ControlError> {
    bounds.validate()?;
    opts.validate()?;

    let theta = opts.relaxation;
    let mut schedule = ControlSchedule::constant(*grid, *bounds, mask, Controls::ZERO);
    let mut iterations = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;

    while iterations < opts.max_iters {
        iterations += 1;
        let (states, costates) = sweep_pass(x0, &schedule, params, grid, iterations)?;

        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        let mut candidates = Vec::with_capacity(grid.len());
        for n in 0..grid.len() {
            let cand = pointwise_control_with(
                &states.states[n],
                &costates.costates[n],
                params,
                w,
                bounds,
                opts.u3_rule,
            );
            let cand = project(&cand, bounds, &mask).to_array();
            candidates.push(Controls::from_array(cand));
            let old = schedule.values[n].to_array();
            let new: [f64; 3] = std::array::from_fn(|k| theta * cand[k] + (1.0 - theta) * old[k]);
            for k in 0..3 {
                change = change.max((new[k] - old[k]).abs());
                size = size.max(new[k].abs());
            }
            schedule.values[n] = Controls::from_array(new);
        }

        last_change = change / size.max(1.0);
        if !last_change.is_finite() {
            return Err(ControlError::Diverged {
                iteration: iterations,
                reason: "non-finite control update".into(),
            });
        }
        if last_change <= opts.tol {
            // Relaxation only approaches a clamped bound geometrically; take
            // the undamped minimizer so active bounds are hit exactly.
            schedule.values = candidates;
            converged = true;
            break;
        }
    }

    let (state_traj, adjoint_traj) = sweep_pass(x0, &schedule, params, grid, iterations)?;
    let objective = objective(&state_traj, &schedule, w)?;
    if !objective.is_finite() {
        return Err(ControlError::Diverged {
            iteration: iterations,
            reason: format!("objective is {objective}"),
        });
    }
    let stationarity_residual =
        stationarity_residual(&state_traj, &adjoint_traj, &schedule, params, w);

    Ok(OptimizationResult {
        state_traj,
        adjoint_traj,
        schedule,
        objective,
        iterations,
        converged,
        last_change,
        stationarity_residual,
    })
}

fn sweep_pass(
    x0: &State,
    schedule: &ControlSchedule,
    params: &ModelParams,
    grid: &TimeGrid,
    iteration: usize,
) -> Result<(Trajectory, AdjointTrajectory), ControlError> {
    let diverged = |e: DynamicsError| ControlError::Diverged {
        iteration,
        reason: e.to_string(),
    };
    let states = integrate_forward(x0, Some(schedule), params, grid).map_err(diverged)?;
    let costates = integrate_backward(&AdjointState::ZERO, &states, Some(schedule), params, grid)
        .map_err(diverged)?;
    Ok((states, costates))
}

fn is_interior(v: f64, k: usize, b: &ControlBounds) -> bool {
    v > b.min[k] + CLAMP_EPS && v < b.max[k] - CLAMP_EPS
}

/// Largest `|∂H/∂u_k|` over nodes where active control `k` is strictly inside its bounds.
pub fn stationarity_residual(
    states: &Trajectory,
    costates: &AdjointTrajectory,
    schedule: &ControlSchedule,
    params: &ModelParams,
    w: &CostWeights,
) -> f64 {
    let mut worst: f64 = 0.0;
    for ((x, z), u) in states
        .states
        .iter()
        .zip(&costates.costates)
        .zip(&schedule.values)
    {
        let grad = control_gradient(x, u, z, params, w);
        for (k, v) in u.to_array().into_iter().enumerate() {
            if schedule.active[k] && is_interior(v, k, &schedule.bounds) {
                worst = worst.max(grad[k].abs());
            }
        }
    }
    worst
}

/// Nodes violating the sign conditions at clamped controls: at an upper bound
/// the Hamiltonian must not increase with `u_k` (`∂H/∂u_k ≤ tol`), at a lower
/// bound it must not decrease (`∂H/∂u_k ≥ −tol`).
pub fn kkt_violations(
    result: &OptimizationResult,
    params: &ModelParams,
    w: &CostWeights,
    tol: f64,
) -> Vec<(usize, usize, f64)> {
    let sched = &result.schedule;
    let b = &sched.bounds;
    let mut bad = Vec::new();
    for (n, ((x, z), u)) in result
        .state_traj
        .states
        .iter()
        .zip(&result.adjoint_traj.costates)
        .zip(&sched.values)
        .enumerate()
    {
        let grad = control_gradient(x, u, z, params, w);
        for (k, v) in u.to_array().into_iter().enumerate() {
            if !sched.active[k] || b.max[k] - b.min[k] <= CLAMP_EPS {
                continue;
            }
            let at_max = v >= b.max[k] - CLAMP_EPS;
            let at_min = v <= b.min[k] + CLAMP_EPS;
            if (at_max && grad[k] > tol) || (at_min && grad[k] < -tol) {
                bad.push((n, k, grad[k]));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_costates_give_lower_bounds() {
        let p = ModelParams::table2(0.3);
        let b = ControlBounds {
            min: [0.1, 0.2, 0.05],
            max: [1.0; 3],
        };
        let x = State::new(100.0, 10.0, 5.0);
        for a in [-3.0, 0.0, 7.5] {
            let u = pointwise_control(
                &x,
                &AdjointState::new(a, a, a),
                &p,
                &CostWeights::default(),
                &b,
            );
            assert_eq!(u, Controls::new(0.1, 0.2, 0.05));
        }
    }

    #[test]
    fn no_infected_gives_zero_candidates() {
        let p = ModelParams::table2(0.3);
        let u = pointwise_control(
            &State::new(100.0, 0.0, 5.0),
            &AdjointState::new(-4.0, 9.0, 1.0),
            &p,
            &CostWeights::default(),
            &ControlBounds::default(),
        );
        assert_eq!(u, Controls::ZERO);
    }

    #[test]
    fn interior_control_is_stationary() {
        let p = ModelParams::table2(0.3);
        let w = CostWeights::new(500.0, 3.0, 10.0);
        let x = State::new(100.0, 10.0, 5.0);
        let z = AdjointState::new(-1.0, 2.0, 0.5);
        let b = ControlBounds::default();
        let u = pointwise_control(&x, &z, &p, &w, &b);
        for k in 0..3 {
            assert!(is_interior(u.to_array()[k], k, &b), "{u:?}");
        }
        let g = control_gradient(&x, &u, &z, &p, &w);
        for gk in g {
            assert!(gk.abs() <= 1e-12, "{g:?}");
        }
    }

    #[test]
    fn compat_rule_uses_z3() {
        let p = ModelParams::table2(0.3);
        let w = CostWeights::new(1.0, 1.0, 100.0);
        let x = State::new(100.0, 10.0, 5.0);
        let z = AdjointState::new(0.0, 2.0, 1.0);
        let b = ControlBounds::default();
        let a = pointwise_control_with(&x, &z, &p, &w, &b, U3Rule::Stationarity);
        let c = pointwise_control_with(&x, &z, &p, &w, &b, U3Rule::Compat);
        assert!((a.u3 - 2.0 * 0.1 * 10.0 / 100.0).abs() < 1e-15);
        assert!((c.u3 - 1.0 * 0.1 * 10.0 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn objective_constant_controls() {
        let grid = TimeGrid::with_step(0.0, 5.0, 0.01).unwrap();
        let traj = Trajectory {
            grid,
            states: vec![State::new(3.0, 0.0, 0.0); grid.len()],
            controls: None,
        };
        let zero =
            ControlSchedule::constant(grid, ControlBounds::default(), [true; 3], Controls::ZERO);
        let ones = ControlSchedule::constant(
            grid,
            ControlBounds::default(),
            [true; 3],
            Controls::new(1.0, 1.0, 1.0),
        );
        let w = CostWeights::default();
        assert_eq!(objective(&traj, &zero, &w).unwrap(), 0.0);
        assert!((objective(&traj, &ones, &w).unwrap() - 7.5).abs() < 1e-12);
        let other = ControlSchedule::constant(
            TimeGrid::with_step(0.0, 5.0, 0.1).unwrap(),
            ControlBounds::default(),
            [true; 3],
            Controls::ZERO,
        );
        assert_eq!(
            objective(&traj, &other, &w),
            Err(ControlError::GridMismatch)
        );
    }

    #[test]
    fn schedule_projection_and_validation() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let b = ControlBounds {
            min: [0.2, 0.0, 0.0],
            max: [0.8, 1.0, 1.0],
        };
        let s =
            ControlSchedule::constant(grid, b, [true, false, true], Controls::new(0.0, 0.5, 3.0));
        assert_eq!(s.values[0], Controls::new(0.2, 0.0, 1.0));
        assert!(s.validate().is_ok());
        let mut bad = s.clone();
        bad.values[2].u2 = 0.1;
        assert!(bad.validate().is_err());
        assert!(ControlBounds {
            min: [0.5, 0.0, 0.0],
            max: [0.4, 1.0, 1.0]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn options_validation() {
        assert!(SweepOptions::default().validate().is_ok());
        for bad in [
            SweepOptions {
                max_iters: 0,
                ..Default::default()
            },
            SweepOptions {
                tol: 0.0,
                ..Default::default()
            },
            SweepOptions {
                relaxation: 0.0,
                ..Default::default()
            },
            SweepOptions {
                relaxation: 1.5,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn inactive_mask_is_single_iteration() {
        let p = ModelParams::table2(0.3);
        let grid = TimeGrid::with_step(0.0, 5.0, 0.01).unwrap();
        let x0 = State::new(1357.0, 136.0, 46.0);
        let res = forward_backward_sweep(
            &x0,
            &p,
            &CostWeights::default(),
            &ControlBounds::default(),
            [false; 3],
            &grid,
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert!(res.schedule.values.iter().all(|u| *u == Controls::ZERO));
        let unc = uncontrolled_objective(&x0, &p, &grid).unwrap();
        assert!((res.objective - unc).abs() <= 1e-9 * unc.abs());
        assert_eq!(res.adjoint_traj.costates[grid.n_steps], AdjointState::ZERO);
    }
}
