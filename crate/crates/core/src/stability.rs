//! Local stability of the equilibria and the basic reproduction number.
//!
//! `E0` is classified by comparing `h(Λ/φ)` with the endemic incidence
//! threshold, `E1` through the Routh–Hurwitz condition `τ2·τ1 − d < 0` on its
//! characteristic cubic. Both verdicts are cross-checked against the
//! eigenvalues of the Jacobian computed by [`eigen3`].

use num_complex::Complex64;
use thiserror::Error;

use crate::equilibria::{endemic, EquilibriumError, Regime};
use crate::model::{ModelParams, State};

pub type Mat3 = [[f64; 3]; 3];

/// Margin below which a Routh–Hurwitz quantity or an eigenvalue real part is
/// treated as zero.
pub const MARGIN: f64 = 1e-9;
/// Smallest `|det V|` accepted by [`next_gen_r0`].
pub const SINGULAR_V_TOL: f64 = 1e-14;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum StabilityError {
    #[error("no endemic equilibrium exists for these parameters")]
    NoEndemicEquilibrium,
    #[error("transition matrix V is singular (det = {0:e})")]
    SingularV(f64),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    AsymptoticallyStable,
    Stable,
    Unstable,
    /// Too close to the stability boundary to decide.
    Indeterminate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::AsymptoticallyStable => "asymptotically_stable",
            Self::Stable => "stable",
            Self::Unstable => "unstable",
            Self::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedFormE0,
    RouthHurwitzE1,
    NumericEigen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub point: State,
    pub eigenvalues: [Complex64; 3],
    pub classification: Classification,
    pub method: Method,
    /// Basic reproduction number; set for `E0` analyses.
    pub r0: Option<f64>,
    /// Classification implied by the sign of the largest eigenvalue real part.
    pub eigen_classification: Classification,
}

impl StabilityReport {
    pub fn agrees_with_eigenvalues(&self) -> bool {
        self.classification == Classification::Indeterminate
            || self.eigen_classification == Classification::Indeterminate
            || self.classification == self.eigen_classification
    }
}

/// Coefficients of `p(λ) = −λ³ + τ2·λ² − τ1·λ + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCoeffs {
    pub tau2: f64,
    pub tau1: f64,
    pub d: f64,
}

impl CharCoeffs {
    /// Routh–Hurwitz quantity whose negativity means asymptotic stability (given `τ2 < 0`, `τ1 > 0`, `d < 0`).
    pub fn hurwitz_gap(&self) -> f64 {
        self.tau2 * self.tau1 - self.d
    }
}

/// Linearization of the uncontrolled field at `x`.
pub fn jacobian_at(x: &State, p: &ModelParams) -> Mat3 {
    let h = p.holling(x.s);
    let dh_i = p.holling_deriv(x.s) * x.i;
    [
        [-dh_i - p.phi, -h + p.gamma2, p.rho * p.omega],
        [
            dh_i,
            h - (p.phi + p.delta1) - (p.gamma1 + p.gamma2),
            (1.0 - p.omega) * p.rho,
        ],
        [0.0, p.gamma1, -p.r_outflow()],
    ]
}

pub fn trace(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

pub fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Sum of the three principal 2×2 minors.
pub fn principal_minor_sum(m: &Mat3) -> f64 {
    (m[0][0] * m[1][1] - m[0][1] * m[1][0])
        + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
        + (m[1][1] * m[2][2] - m[1][2] * m[2][1])
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// Inverse via the adjugate; `None` when the determinant vanishes.
pub fn inverse(m: &Mat3) -> Option<Mat3> {
    let dt = det(m);
    if dt == 0.0 || !dt.is_finite() {
        return None;
    }
    let c =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / dt)))
}

/// Eigenvalues of a 3×3 matrix from its characteristic cubic, sorted by
/// descending real part (ties: descending imaginary part).
pub fn eigen3(m: &Mat3) -> [Complex64; 3] {
    // λ³ + a λ² + b λ + c = 0
    let a = -trace(m);
    let b = principal_minor_sum(m);
    let c = -det(m);
    let mut roots = cubic_roots(a, b, c);
    roots.sort_by(|x, y| {
        y.re.partial_cmp(&x.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    roots
}

/// Roots of the monic cubic `λ³ + aλ² + bλ + c`.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = a / 3.0;
    // depressed: y³ + p y + q = 0 with λ = y − a/3
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let scale = 1.0_f64.max(a.abs()).max(b.abs().sqrt()).max(c.abs().cbrt());
    let p3 = p / 3.0;
    let q2 = q / 2.0;
    let disc = q2 * q2 + p3 * p3 * p3;

    let polish = |mut x: f64| {
        for _ in 0..3 {
            let f = ((x + a) * x + b) * x + c;
            let df = (3.0 * x + 2.0 * a) * x + b;
            if df == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            let next = x - step;
            let f_next = ((next + a) * next + b) * next + c;
            if f_next.abs() >= f.abs() {
                break;
            }
            x = next;
        }
        x
    };

    if p.abs() <= 1e-14 * scale * scale && q.abs() <= 1e-14 * scale * scale * scale {
        let r = Complex64::new(-shift, 0.0);
        return [r, r, r];
    }

    if disc <= 0.0 {
        // Three real roots: trigonometric form.
        let r = (-p3).sqrt();
        let cos_arg = if r == 0.0 {
            0.0
        } else {
            (-q2 / (r * r * r)).clamp(-1.0, 1.0)
        };
        let phi = cos_arg.acos();
        let two_pi = 2.0 * std::f64::consts::PI;
        let roots: [f64; 3] = std::array::from_fn(|k| {
            let y = 2.0 * r * ((phi - two_pi * k as f64) / 3.0).cos();
            polish(y - shift)
        });
        return roots.map(|x| Complex64::new(x, 0.0));
    }

    // One real root; the form avoids cancellation between the two cube roots.
    let sq = disc.sqrt();
    let big = -(q2.signum() * (q2.abs() + sq).cbrt());
    let small = if big == 0.0 { 0.0 } else { -p3 / big };
    let real = polish(big + small - shift);
    // Remaining pair: sum = −a − real, product = b − real·(sum).
    let sum = -a - real;
    let prod = b - real * sum;
    let half = sum / 2.0;
    let d = half * half - prod;
    if d >= 0.0 {
        let s = d.sqrt();
        let r1 = half + half.signum() * s;
        let r2 = if r1 == 0.0 { 0.0 } else { prod / r1 };
        [
            Complex64::new(real, 0.0),
            Complex64::new(r1, 0.0),
            Complex64::new(r2, 0.0),
        ]
    } else {
        let im = (-d).sqrt();
        [
            Complex64::new(real, 0.0),
            Complex64::new(half, im),
            Complex64::new(half, -im),
        ]
    }
}

/// Classification implied by the eigenvalue with the largest real part.
pub fn classify_by_eigenvalues(eigs: &[Complex64; 3]) -> Classification {
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re.abs() < MARGIN {
        Classification::Indeterminate
    } else if max_re < 0.0 {
        Classification::AsymptoticallyStable
    } else {
        Classification::Unstable
    }
}

/// Closed-form eigenvalues of the Jacobian at `E0`: `−φ` and the roots of
/// the `(I, R)` block.
pub fn e0_eigenvalues(params: &ModelParams) -> [Complex64; 3] {
    let d = params.derived();
    let out = params.r_outflow();
    let nu = params.holling(params.capacity()) - (d.sigma1 + d.gamma_total);
    let trace = nu - out;
    let disc = trace * trace + 4.0 * (nu * out + (1.0 - params.omega) * params.gamma1 * params.rho);
    let root = Complex64::new(disc, 0.0).sqrt();
    let mut eigs = [
        Complex64::new(-params.phi, 0.0),
        (Complex64::new(trace, 0.0) + root) / 2.0,
        (Complex64::new(trace, 0.0) - root) / 2.0,
    ];
    eigs.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal));
    eigs
}

pub fn classify_e0(params: &ModelParams) -> Result<StabilityReport, StabilityError> {
    let report = endemic(params)?;
    let gap = report.incidence_at_e0 - report.endemic_incidence;
    let classification = if gap > 0.0 {
        Classification::Unstable
    } else if gap < 0.0 {
        Classification::AsymptoticallyStable
    } else {
        Classification::Stable
    };
    let eigenvalues = e0_eigenvalues(params);
    let numeric = eigen3(&jacobian_at(&report.e0, params));
    Ok(StabilityReport {
        point: report.e0,
        eigenvalues,
        classification,
        method: Method::ClosedFormE0,
        r0: Some(next_gen_r0(params)?),
        eigen_classification: classify_by_eigenvalues(&numeric),
    })
}

/// Characteristic coefficients at `E1` from their closed forms.
pub fn char_coeffs_e1(params: &ModelParams) -> Result<CharCoeffs, StabilityError> {
    let report = endemic(params)?;
    let e1 = report.e1.ok_or(StabilityError::NoEndemicEquilibrium)?;
    Ok(char_coeffs_at(&e1, params))
}

fn char_coeffs_at(e1: &State, p: &ModelParams) -> CharCoeffs {
    let d = p.derived();
    let out = p.r_outflow();
    let dh_i = p.holling_deriv(e1.s) * e1.i;
    let leak = (1.0 - p.omega) * d.sigma2;
    CharCoeffs {
        tau2: -(dh_i + leak + 2.0 * p.phi + p.delta2 + p.rho),
        tau1: p.phi * (out + leak) + dh_i * (out + d.sigma1 + p.gamma1),
        d: (p.phi * e1.s - p.lambda) * out * p.holling_deriv(e1.s),
    }
}

pub fn classify_e1(params: &ModelParams) -> Result<StabilityReport, StabilityError> {
    let report = endemic(params)?;
    let e1 = report.e1.ok_or(StabilityError::NoEndemicEquilibrium)?;
    let coeffs = char_coeffs_at(&e1, params);
    let classification = match report.regime {
        Regime::A2Endemic => Classification::Unstable,
        _ => {
            let gap = coeffs.hurwitz_gap();
            if gap.abs() < MARGIN {
                Classification::Indeterminate
            } else if gap < 0.0 {
                Classification::AsymptoticallyStable
            } else {
                Classification::Unstable
            }
        }
    };
    let eigenvalues = eigen3(&jacobian_at(&e1, params));
    Ok(StabilityReport {
        point: e1,
        eigenvalues,
        classification,
        method: Method::RouthHurwitzE1,
        r0: None,
        eigen_classification: classify_by_eigenvalues(&eigenvalues),
    })
}

/// Splitting of the field into new infections `F` and transitions `V = V⁻ − V⁺`,
/// with compartments ordered `(I, R, S)`.
pub mod next_gen {
    use crate::model::ModelParams;

    /// New-infection terms `𝓕_i(I, R, S)`.
    pub fn new_infections(i: f64, _r: f64, s: f64, p: &ModelParams) -> [f64; 3] {
        [p.holling(s) * i, 0.0, 0.0]
    }

    /// Outflow terms `𝓥⁻_i`.
    pub fn outflows(i: f64, r: f64, s: f64, p: &ModelParams) -> [f64; 3] {
        [
            (p.phi + p.delta1 + p.gamma1 + p.gamma2) * i,
            p.r_outflow() * r,
            p.holling(s) * i + p.phi * s,
        ]
    }

    /// Inflow terms `𝓥⁺_i`.
    pub fn inflows(i: f64, r: f64, _s: f64, p: &ModelParams) -> [f64; 3] {
        [
            (1.0 - p.omega) * p.rho * r,
            p.gamma1 * i,
            p.lambda + p.gamma2 * i + p.rho * p.omega * r,
        ]
    }

    /// `F = ∂𝓕/∂x` at the infection-free point `(0, 0, Λ/φ)`.
    pub fn f_matrix(p: &ModelParams) -> super::Mat3 {
        [[p.holling(p.capacity()), 0.0, 0.0], [0.0; 3], [0.0; 3]]
    }

    /// `V = ∂(𝓥⁻ − 𝓥⁺)/∂x` at `(0, 0, Λ/φ)`.
    pub fn v_matrix(p: &ModelParams) -> super::Mat3 {
        [
            [
                p.phi + p.delta1 + (p.gamma1 + p.gamma2),
                -(1.0 - p.omega) * p.rho,
                0.0,
            ],
            [-p.gamma1, p.r_outflow(), 0.0],
            [p.holling(p.capacity()) - p.gamma2, -p.omega * p.rho, p.phi],
        ]
    }
}

/// Closed form of the spectral radius of `F·V⁻¹`.
pub fn r0_closed_form(p: &ModelParams) -> f64 {
    let out = p.r_outflow();
    let den = (p.phi + p.delta1 + p.gamma1 + p.gamma2) * out - (1.0 - p.omega) * p.rho * p.gamma1;
    out * p.holling(p.capacity()) / den.abs()
}

/// Next-generation matrix `F·V⁻¹`.
pub fn next_gen_matrix(p: &ModelParams) -> Result<Mat3, StabilityError> {
    let v = next_gen::v_matrix(p);
    let dv = det(&v);
    if dv.abs() < SINGULAR_V_TOL {
        return Err(StabilityError::SingularV(dv));
    }
    let v_inv = inverse(&v).ok_or(StabilityError::SingularV(dv))?;
    Ok(mat_mul(&next_gen::f_matrix(p), &v_inv))
}

/// Basic reproduction number: spectral radius of `F·V⁻¹`.
pub fn next_gen_r0(p: &ModelParams) -> Result<f64, StabilityError> {
    let k = next_gen_matrix(p)?;
    Ok(eigen3(&k).iter().map(|z| z.norm()).fold(0.0, f64::max))
}
