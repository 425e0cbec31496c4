//! Fixed-step RK4 integration of the state system (forward in time) and the
//! co-state system (backward in time) on a shared node grid, plus monitoring
//! of the positivity/invariance properties of the flow.

use thiserror::Error;

use crate::control::ControlSchedule;
use crate::model::{
    adjoint_rhs, controlled_rhs, uncontrolled_rhs, AdjointState, Controls, ModelParams, State,
};

/// Tolerance used by [`monitor_invariance`] for the total-population bound.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Smallest component value still considered nonnegative.
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite state at step {step} (t = {t})")]
    NonFiniteState { step: usize, t: f64 },
    #[error("trajectories are defined on different grids")]
    GridMismatch,
}

/// Uniform grid `t0, t0 + dt, ..., t_final` with `n_steps + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_final: f64, n_steps: usize) -> Result<Self, DynamicsError> {
        if !(t0.is_finite() && t_final.is_finite()) || t_final <= t0 {
            return Err(DynamicsError::InvalidGrid(format!(
                "need t_final > t0, got [{t0}, {t_final}]"
            )));
        }
        if n_steps == 0 {
            return Err(DynamicsError::InvalidGrid("n_steps must be >= 1".into()));
        }
        Ok(Self {
            t0,
            t_final,
            n_steps,
        })
    }

    /// Grid on `[t0, t_final]` whose step is as close to `dt` as an integer
    /// number of steps allows.
    pub fn with_step(t0: f64, t_final: f64, dt: f64) -> Result<Self, DynamicsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DynamicsError::InvalidGrid(format!(
                "dt must be > 0, got {dt}"
            )));
        }
        let n = ((t_final - t0) / dt).round().max(1.0) as usize;
        Self::new(t0, t_final, n)
    }

    pub fn dt(&self) -> f64 {
        (self.t_final - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Index of the interval containing `t` and the fractional position in it.
    pub(crate) fn locate(&self, t: f64) -> (usize, f64) {
        let pos = ((t - self.t0) / self.dt()).clamp(0.0, self.n_steps as f64);
        let k = (pos.floor() as usize).min(self.n_steps - 1);
        (k, pos - k as f64)
    }
}

/// State values on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<State>,
    pub controls: Option<Vec<Controls>>,
}

impl Trajectory {
    /// Linear interpolation between nodes.
    pub fn state_at(&self, t: f64) -> State {
        let (k, w) = self.grid.locate(t);
        let a = self.states[k];
        let b = self.states[k + 1];
        State::new(
            a.s + w * (b.s - a.s),
            a.i + w * (b.i - a.i),
            a.r + w * (b.r - a.r),
        )
    }

    /// First node time at which `S` drops below `fraction · S(t0)`.
    pub fn depletion_time(&self, fraction: f64) -> Option<f64> {
        let threshold = fraction * self.states[0].s;
        self.states
            .iter()
            .position(|x| x.s < threshold)
            .map(|k| self.grid.time(k))
    }

    pub fn peak_i(&self) -> f64 {
        self.states
            .iter()
            .map(|x| x.i)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn last(&self) -> State {
        *self
            .states
            .last()
            .expect("trajectory has at least one node")
    }
}

/// Co-state values on every node, indexed forward in time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub grid: TimeGrid,
    pub costates: Vec<AdjointState>,
}

/// Classical four-stage Runge–Kutta step. A negative `dt` steps backward.
pub fn rk4_step<const N: usize, F>(rhs: F, x: &[f64; N], t: f64, dt: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let axpy = |a: &[f64; N], s: f64, b: &[f64; N]| -> [f64; N] {
        let mut out = *a;
        for (o, bi) in out.iter_mut().zip(b) {
            *o += s * bi;
        }
        out
    };
    let half = 0.5 * dt;
    let k1 = rhs(t, x);
    let k2 = rhs(t + half, &axpy(x, half, &k1));
    let k3 = rhs(t + half, &axpy(x, half, &k2));
    let k4 = rhs(t + dt, &axpy(x, dt, &k3));
    let mut out = *x;
    for j in 0..N {
        out[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

/// Integrates the state system from `x0` over `grid`. Without a schedule the
/// uncontrolled field is used; otherwise controls are linearly interpolated
/// between schedule nodes at every RK stage.
pub fn integrate_forward(
    x0: &State,
    schedule: Option<&ControlSchedule>,
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<Trajectory, DynamicsError> {
    let dt = grid.dt();
    let mut states = Vec::with_capacity(grid.len());
    states.push(*x0);
    let mut x = x0.to_array();
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        x = match schedule {
            None => rk4_step(
                |_, y: &[f64; 3]| uncontrolled_rhs(&State::from_array(*y), params).to_array(),
                &x,
                t,
                dt,
            ),
            Some(sched) => rk4_step(
                |tt, y: &[f64; 3]| {
                    controlled_rhs(&State::from_array(*y), &sched.at(tt), params).to_array()
                },
                &x,
                t,
                dt,
            ),
        };
        let next = State::from_array(x);
        if !next.is_finite() {
            return Err(DynamicsError::NonFiniteState {
                step: k + 1,
                t: grid.time(k + 1),
            });
        }
        states.push(next);
    }
    let controls = schedule.map(|s| grid.times().map(|t| s.at(t)).collect());
    Ok(Trajectory {
        grid: *grid,
        states,
        controls,
    })
}

/// Integrates the co-state system from `z_final` at `t_final` back to `t0`.
/// States between nodes are linearly interpolated from `states`.
pub fn integrate_backward(
    z_final: &AdjointState,
    states: &Trajectory,
    schedule: Option<&ControlSchedule>,
    params: &ModelParams,
    grid: &TimeGrid,
) -> Result<AdjointTrajectory, DynamicsError> {
    if states.grid != *grid || states.states.len() != grid.len() {
        return Err(DynamicsError::GridMismatch);
    }
    let dt = grid.dt();
    let mut costates = vec![AdjointState::ZERO; grid.len()];
    costates[grid.n_steps] = *z_final;
    let mut z = z_final.to_array();
    let rhs = |t: f64, y: &[f64; 3]| {
        let u = schedule.map_or(Controls::ZERO, |s| s.at(t));
        adjoint_rhs(
            &states.state_at(t),
            &AdjointState::from_array(*y),
            &u,
            params,
        )
        .to_array()
    };
    for k in (0..grid.n_steps).rev() {
        z = rk4_step(rhs, &z, grid.time(k + 1), -dt);
        let zk = AdjointState::from_array(z);
        if !zk.is_finite() {
            return Err(DynamicsError::NonFiniteState {
                step: k,
                t: grid.time(k),
            });
        }
        costates[k] = zk;
    }
    Ok(AdjointTrajectory {
        grid: *grid,
        costates,
    })
}

/// Summary of positivity and population-bound checks along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// Smallest compartment value seen at any node.
    pub min_component: f64,
    /// Largest total population `N = S + I + R`.
    pub max_total: f64,
    pub initial_total: f64,
    /// `Λ/φ`
    pub capacity: f64,
    /// `N0 ≤ Λ/φ`
    pub starts_in_region: bool,
    /// Every component stayed above `-POSITIVITY_TOL`.
    pub positive: bool,
    /// `N(t) ≤ max(N0, Λ/φ) + tol` at every node.
    pub bounded: bool,
    /// `N` never increased between consecutive nodes while above `Λ/φ`.
    pub decreasing_above_capacity: bool,
    pub tol: f64,
}

impl InvarianceReport {
    /// Trajectory started in the invariant region and never left it.
    pub fn stays_in_region(&self) -> bool {
        self.starts_in_region && self.positive && self.max_total <= self.capacity + self.tol
    }
}

pub fn monitor_invariance(traj: &Trajectory, params: &ModelParams) -> InvarianceReport {
    let tol = INVARIANCE_TOL;
    let capacity = params.capacity();
    let initial_total = traj.states[0].total();
    let mut min_component = f64::INFINITY;
    let mut max_total = f64::NEG_INFINITY;
    let mut decreasing = true;
    let mut prev_total = initial_total;
    for (k, x) in traj.states.iter().enumerate() {
        min_component = min_component.min(x.min_component());
        let n = x.total();
        max_total = max_total.max(n);
        if k > 0 && prev_total > capacity + tol && n > prev_total + tol {
            decreasing = false;
        }
        prev_total = n;
    }
    InvarianceReport {
        min_component,
        max_total,
        initial_total,
        capacity,
        starts_in_region: initial_total <= capacity,
        positive: min_component >= -POSITIVITY_TOL,
        bounded: max_total <= initial_total.max(capacity) + tol,
        decreasing_above_capacity: decreasing,
        tol,
    }
}
