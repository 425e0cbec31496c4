//! Crime/SIR compartmental model: parameters, Holling type II incidence,
//! controlled and uncontrolled vector fields, running cost, Hamiltonian and
//! the co-state (adjoint) field.
//!
//! Compartments are `S` (susceptible youth), `I` (youth involved in violent
//! dynamics) and `R` (youth that went through the juvenile justice system).
//! The three controls act as prevention (`u1` scales down incidence),
//! apprehension (`u2` scales up `gamma1`) and reintegration (`u3` scales up
//! `gamma2`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter `{name}` is invalid: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

/// The ten rates of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Inflow of adolescents into the program (individuals/period).
    pub lambda: f64,
    /// Natural program-exit rate.
    pub phi: f64,
    /// Extra exit rate of `I`.
    pub delta1: f64,
    /// Extra exit rate of `R` (facility risk).
    pub delta2: f64,
    /// Fraction of `R` returning to `S` on release.
    pub omega: f64,
    /// Facility exit rate.
    pub rho: f64,
    /// Apprehension rate.
    pub gamma1: f64,
    /// Desistance rate.
    pub gamma2: f64,
    /// Attack rate of the Holling response.
    pub alpha: f64,
    /// Handling time of the Holling response.
    pub beta: f64,
}

impl ModelParams {
    /// Field-data parameter set with the given handling time.
    pub fn table2(beta: f64) -> Self {
        Self {
            lambda: 100.0,
            phi: 0.27,
            delta1: 0.05,
            delta2: 0.02,
            omega: 0.3,
            rho: 0.2,
            gamma1: 0.05,
            gamma2: 0.1,
            alpha: 0.4,
            beta,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("lambda", self.lambda),
            ("phi", self.phi),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("omega", self.omega),
            ("rho", self.rho),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("{v} is not finite"),
                });
            }
            if v < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("{v} is negative"),
                });
            }
        }
        if self.phi <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "phi",
                reason: "must be strictly positive".into(),
            });
        }
        if self.omega > 1.0 {
            return Err(ModelError::InvalidParameter {
                name: "omega",
                reason: format!("{} exceeds 1", self.omega),
            });
        }
        Ok(())
    }

    /// `phi + delta2 + rho`, the total outflow rate of `R`.
    pub fn r_outflow(&self) -> f64 {
        self.phi + self.delta2 + self.rho
    }

    /// Carrying capacity `Λ/φ` of the total population.
    pub fn capacity(&self) -> f64 {
        self.lambda / self.phi
    }

    pub fn derived(&self) -> DerivedParams {
        let out = self.r_outflow();
        DerivedParams {
            sigma1: self.phi + self.delta1,
            sigma2: if out > 0.0 {
                self.gamma1 * self.rho / out
            } else {
                f64::NAN
            },
            gamma_total: self.gamma1 + self.gamma2,
        }
    }

    /// Holling type II incidence `h(S) = αS / (1 + αβS)`.
    pub fn holling(&self, s: f64) -> f64 {
        self.alpha * s / (1.0 + self.alpha * self.beta * s)
    }

    /// `h'(S) = α / (1 + αβS)²`.
    pub fn holling_deriv(&self, s: f64) -> f64 {
        let den = 1.0 + self.alpha * self.beta * s;
        self.alpha / (den * den)
    }
}

/// Grouped rates used throughout the equilibrium analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// `phi + delta1`
    pub sigma1: f64,
    /// `gamma1 * rho / (phi + delta2 + rho)`; NaN when the denominator vanishes.
    pub sigma2: f64,
    /// `gamma1 + gamma2`
    pub gamma_total: f64,
}

impl DerivedParams {
    /// Value of `h(S)` at any endemic equilibrium: `σ₁ + γ − (1−Ω)σ₂`.
    pub fn endemic_incidence(&self, omega: f64) -> f64 {
        self.sigma1 + self.gamma_total - (1.0 - omega) * self.sigma2
    }
}

/// Compartment sizes. Also used for their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl State {
    pub const fn new(s: f64, i: f64, r: f64) -> Self {
        Self { s, i, r }
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.r
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s, self.i, self.r]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.i.is_finite() && self.r.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.s.abs().max(self.i.abs()).max(self.r.abs())
    }

    pub fn min_component(&self) -> f64 {
        self.s.min(self.i).min(self.r)
    }
}

/// Effort levels of the three policies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl Controls {
    pub const ZERO: Controls = Controls::new(0.0, 0.0, 0.0);

    pub const fn new(u1: f64, u2: f64, u3: f64) -> Self {
        Self { u1, u2, u3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.u1, self.u2, self.u3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Linear blend `(1-w)·self + w·other`.
    pub fn lerp(&self, other: &Controls, w: f64) -> Controls {
        Controls::new(
            self.u1 + w * (other.u1 - self.u1),
            self.u2 + w * (other.u2 - self.u2),
            self.u3 + w * (other.u3 - self.u3),
        )
    }
}

/// Quadratic cost coefficients of the three controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

impl CostWeights {
    pub const fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Self { c1, c2, c3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(ModelError::InvalidParameter {
                    name,
                    reason: format!("cost weight {c} must be finite and > 0"),
                });
            }
        }
        Ok(())
    }
}

/// Co-state vector paired with `(S, I, R)`. Also used for its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointState {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl AdjointState {
    pub const ZERO: AdjointState = AdjointState::new(0.0, 0.0, 0.0);

    pub const fn new(z1: f64, z2: f64, z3: f64) -> Self {
        Self { z1, z2, z3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.z1, self.z2, self.z3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite() && self.z3.is_finite()
    }
}

pub fn holling(s: f64, params: &ModelParams) -> f64 {
    params.holling(s)
}

pub fn holling_deriv(s: f64, params: &ModelParams) -> f64 {
    params.holling_deriv(s)
}

pub fn uncontrolled_rhs(x: &State, p: &ModelParams) -> State {
    let inc = p.holling(x.s) * x.i;
    State {
        s: p.lambda - inc - p.phi * x.s + p.gamma2 * x.i + p.rho * p.omega * x.r,
        i: inc - (p.phi + p.delta1) * x.i - p.gamma1 * x.i - p.gamma2 * x.i
            + (1.0 - p.omega) * p.rho * x.r,
        r: p.gamma1 * x.i - p.r_outflow() * x.r,
    }
}

pub fn controlled_rhs(x: &State, u: &Controls, p: &ModelParams) -> State {
    let inc = (1.0 - u.u1) * p.holling(x.s) * x.i;
    let apprehended = (1.0 + u.u2) * p.gamma1 * x.i;
    let desisted = (1.0 + u.u3) * p.gamma2 * x.i;
    State {
        s: p.lambda - inc - p.phi * x.s + desisted + p.rho * p.omega * x.r,
        i: inc - (p.phi + p.delta1) * x.i - apprehended - desisted + (1.0 - p.omega) * p.rho * x.r,
        r: apprehended - p.r_outflow() * x.r,
    }
}

/// Integrand of the objective: `I − R + Σ c_k u_k² / 2`.
pub fn running_cost(x: &State, u: &Controls, w: &CostWeights) -> f64 {
    x.i - x.r + 0.5 * (w.c1 * u.u1 * u.u1 + w.c2 * u.u2 * u.u2 + w.c3 * u.u3 * u.u3)
}

pub fn hamiltonian(
    x: &State,
    u: &Controls,
    z: &AdjointState,
    p: &ModelParams,
    w: &CostWeights,
) -> f64 {
    let f = controlled_rhs(x, u, p);
    running_cost(x, u, w) + z.z1 * f.s + z.z2 * f.i + z.z3 * f.r
}

/// Co-state field `ż = −∂H/∂x`.
pub fn adjoint_rhs(x: &State, z: &AdjointState, u: &Controls, p: &ModelParams) -> AdjointState {
    let h = p.holling(x.s);
    let dh = p.holling_deriv(x.s);
    let keep = 1.0 - u.u1;
    let g1 = (1.0 + u.u2) * p.gamma1;
    let g2 = (1.0 + u.u3) * p.gamma2;

    // ∂H/∂S
    let d_s = keep * dh * x.i * (z.z2 - z.z1) - p.phi * z.z1;
    // ∂H/∂I
    let d_i =
        1.0 + z.z1 * (g2 - keep * h) + z.z2 * (keep * h - (p.phi + p.delta1) - g1 - g2) + z.z3 * g1;
    // ∂H/∂R
    let d_r = -1.0 + z.z1 * p.rho * p.omega + z.z2 * (1.0 - p.omega) * p.rho - z.z3 * p.r_outflow();

    AdjointState::new(-d_s, -d_i, -d_r)
}

/// `∂H/∂u_k` for k = 1, 2, 3.
pub fn control_gradient(
    x: &State,
    u: &Controls,
    z: &AdjointState,
    p: &ModelParams,
    w: &CostWeights,
) -> [f64; 3] {
    let fi = p.holling(x.s) * x.i;
    [
        w.c1 * u.u1 + fi * (z.z1 - z.z2),
        w.c2 * u.u2 - p.gamma1 * x.i * (z.z2 - z.z3),
        w.c3 * u.u3 + p.gamma2 * x.i * (z.z1 - z.z2),
    ]
}
