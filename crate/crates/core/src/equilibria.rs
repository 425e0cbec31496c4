//! Closed-form equilibria: the crime-free point `E0 = (Λ/φ, 0, 0)` and the
//! endemic point `E1`, together with the two sufficient existence
//! conditions.
//!
//! `E1` is obtained by inverting the Holling response: at equilibrium
//! `h(Ŝ) = c` with `c = σ1 + γ − (1−Ω)σ2`, and `h` is a Möbius map in `S`, so
//! `Ŝ = c / (α(1 − βc))` whenever `βc ≠ 1`.

use thiserror::Error;

use crate::model::{ModelParams, State};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NoEndemic,
    A1Endemic,
    A2Endemic,
}

/// Truth values of the existence inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conditions {
    /// `σ1 + γ1 − σ2 > 0`
    pub a1_dagger: bool,
    /// `σ1 + γ − (1−Ω)σ2 < h(Λ/φ)`
    pub a1_underdagger: bool,
    /// `h(Λ/φ) < σ1 + γ − (1−Ω)σ2 < min(1/β, γ2 + Ωσ2)`
    pub a2: bool,
}

impl Conditions {
    pub fn a1(&self) -> bool {
        self.a1_dagger && self.a1_underdagger
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub e0: State,
    pub e1: Option<State>,
    pub conditions: Conditions,
    pub regime: Regime,
    /// Value `c` that `h(Ŝ)` must equal at an endemic point.
    pub endemic_incidence: f64,
    /// `h(Λ/φ)`
    pub incidence_at_e0: f64,
    /// A condition held but `σ1 + γ1 − σ2 = 0` made `Î` undefined.
    pub degenerate: bool,
}

pub fn crime_free(params: &ModelParams) -> Result<State, EquilibriumError> {
    if params.phi <= 0.0 {
        return Err(EquilibriumError::DegenerateParams("phi must be > 0".into()));
    }
    Ok(State::new(params.lambda / params.phi, 0.0, 0.0))
}

pub fn check_conditions(params: &ModelParams) -> Conditions {
    let d = params.derived();
    let c = d.endemic_incidence(params.omega);
    let h0 = params.holling(params.capacity());
    let inv_beta = if params.beta > 0.0 {
        1.0 / params.beta
    } else {
        f64::INFINITY
    };
    Conditions {
        a1_dagger: d.sigma1 + params.gamma1 - d.sigma2 > 0.0,
        a1_underdagger: c < h0,
        a2: h0 < c && c < inv_beta.min(params.gamma2 + params.omega * d.sigma2),
    }
}

/// Computes both equilibria and classifies the existence regime.
pub fn endemic(params: &ModelParams) -> Result<EquilibriumReport, EquilibriumError> {
    let e0 = crime_free(params)?;
    if params.r_outflow() <= 0.0 {
        return Err(EquilibriumError::DegenerateParams(
            "phi + delta2 + rho must be > 0".into(),
        ));
    }
    let d = params.derived();
    let c = d.endemic_incidence(params.omega);
    let conditions = check_conditions(params);
    let regime = if conditions.a1() {
        Regime::A1Endemic
    } else if conditions.a2 {
        Regime::A2Endemic
    } else {
        Regime::NoEndemic
    };
    let mut report = EquilibriumReport {
        e0,
        e1: None,
        conditions,
        regime,
        endemic_incidence: c,
        incidence_at_e0: params.holling(params.capacity()),
        degenerate: false,
    };
    if regime == Regime::NoEndemic {
        return Ok(report);
    }

    let saturation = 1.0 - params.beta * c;
    if saturation == 0.0 || params.alpha == 0.0 {
        return Err(EquilibriumError::DegenerateParams(format!(
            "existence condition holds but h(S) = {c} cannot be inverted"
        )));
    }
    let denom = d.sigma1 + params.gamma1 - d.sigma2;
    if denom == 0.0 {
        report.regime = Regime::NoEndemic;
        report.degenerate = true;
        return Ok(report);
    }
    let s_hat = c / (params.alpha * saturation);
    let i_hat = (params.lambda - params.phi * s_hat) / denom;
    let r_hat = params.gamma1 * i_hat / params.r_outflow();
    report.e1 = Some(State::new(s_hat, i_hat, r_hat));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::uncontrolled_rhs;

    #[test]
    fn crime_free_values() {
        let p = ModelParams::table2(0.3);
        let e0 = crime_free(&p).unwrap();
        assert!((e0.s - 370.370_370_370_370_4).abs() < 1e-9);
        assert_eq!((e0.i, e0.r), (0.0, 0.0));
        assert!(uncontrolled_rhs(&e0, &p).max_abs() < 1e-12);
        let empty = ModelParams { lambda: 0.0, ..p };
        assert_eq!(crime_free(&empty).unwrap(), State::default());
        let bad = ModelParams { phi: 0.0, ..p };
        assert!(crime_free(&bad).is_err());
    }

    #[test]
    fn table2_beta03_endemic_point() {
        let p = ModelParams::table2(0.3);
        let rep = endemic(&p).unwrap();
        assert_eq!(rep.regime, Regime::A1Endemic);
        assert_eq!(
            rep.conditions,
            Conditions {
                a1_dagger: true,
                a1_underdagger: true,
                a2: false
            }
        );
        // c = 0.32 + 0.15 − 0.7·(0.01/0.49)
        let c = 0.47 - 0.7 * 0.01 / 0.49;
        assert!((rep.endemic_incidence - c).abs() < 1e-15);
        assert!((c - 0.455_71).abs() < 1e-5);
        let e1 = rep.e1.unwrap();
        let s_hat = c / (0.4 * (1.0 - 0.3 * c));
        let i_hat = (100.0 - 0.27 * s_hat) / (0.32 + 0.05 - 0.01 / 0.49);
        assert!((e1.s - s_hat).abs() < 1e-12 && (e1.s - 1.3197).abs() < 1e-4);
        assert!((e1.i - i_hat).abs() < 1e-10 && (e1.i - 285.0).abs() < 0.1);
        assert!((e1.r - 0.05 * i_hat / 0.49).abs() < 1e-10 && (e1.r - 29.08).abs() < 0.01);
        assert!(uncontrolled_rhs(&e1, &p).max_abs() <= 1e-10);
        assert!(e1.s < p.capacity());
        assert!((p.holling(e1.s) - c).abs() <= 1e-12 * c);
    }

    #[test]
    fn no_attack_no_endemic() {
        let p = ModelParams {
            alpha: 0.0,
            ..ModelParams::table2(0.3)
        };
        let rep = endemic(&p).unwrap();
        assert_eq!(rep.regime, Regime::NoEndemic);
        assert!(rep.e1.is_none());
    }

    #[test]
    fn no_release_reduces_dagger() {
        let p = ModelParams {
            rho: 0.0,
            ..ModelParams::table2(0.3)
        };
        let d = p.derived();
        assert_eq!(d.sigma2, 0.0);
        assert!(check_conditions(&p).a1_dagger);
    }

    #[test]
    fn a2_requires_negative_dagger() {
        // c − (γ2 + Ωσ2) = σ1 + γ1 − σ2, and σ2 < γ1 whenever φ > 0, so the
        // upper half of A2 can never hold for admissible parameters.
        let p = ModelParams {
            lambda: 1.0,
            phi: 0.1,
            delta1: 0.0,
            delta2: 0.0,
            omega: 1.0,
            rho: 50.0,
            gamma1: 2.0,
            gamma2: 0.5,
            alpha: 0.01,
            beta: 0.1,
        };
        let d = p.derived();
        let c = d.endemic_incidence(p.omega);
        let gap = c - (p.gamma2 + p.omega * d.sigma2);
        assert!((gap - (d.sigma1 + p.gamma1 - d.sigma2)).abs() < 1e-12);
        assert!(gap > 0.0);
        let cond = check_conditions(&p);
        assert!(cond.a1_dagger && !cond.a2);
    }
}
