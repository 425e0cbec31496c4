//! Text artifacts: trajectory and sensitivity CSVs, the key/value analysis
//! report and static SVG line charts.
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{AdjointTrajectory, Trajectory};
use crate::equilibria::{endemic, Regime};
use crate::model::{ModelParams, State};
use crate::sensitivity::SensitivityEntry;
use crate::stability::{char_coeffs_e1, classify_e0, classify_e1, r0_closed_form, StabilityError};

pub const TRAJECTORY_HEADER: &str = "t,S,I,R";
pub const CONTROLLED_HEADER: &str = "t,S,I,R,u1,u2,u3,z1,z2,z3";
pub const SENSITIVITY_HEADER: &str = "parameter,metric,index,rel_step";

#[derive(Error, Debug, PartialEq)]
pub enum CsvError {
    #[error("empty document")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    Width {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: `{text}` is not a number")]
    Number { line: usize, text: String },
}

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,S,I,R` rows, extended with controls and co-states when both are given.
pub fn trajectory_csv(traj: &Trajectory, adjoint: Option<&AdjointTrajectory>) -> String {
    let extended = traj.controls.as_ref().zip(adjoint);
    let mut out = String::new();
    out.push_str(if extended.is_some() {
        CONTROLLED_HEADER
    } else {
        TRAJECTORY_HEADER
    });
    out.push('\n');
    for (k, (t, x)) in traj.grid.times().zip(&traj.states).enumerate() {
        let mut row = vec![t, x.s, x.i, x.r];
        if let Some((controls, adj)) = extended {
            row.extend(controls[k].to_array());
            row.extend(adj.costates[k].to_array());
        }
        push_row(&mut out, row.into_iter().map(fmt_num));
    }
    out
}

pub fn sensitivity_csv(entries: &[SensitivityEntry]) -> String {
    let mut out = format!("{SENSITIVITY_HEADER}\n");
    for e in entries {
        push_row(
            &mut out,
            [
                e.parameter.name().to_string(),
                e.metric.name().to_string(),
                fmt_num(e.index),
                fmt_num(e.rel_step),
            ]
            .into_iter(),
        );
    }
    out
}

fn push_row(out: &mut String, fields: impl Iterator<Item = String>) {
    for (k, f) in fields.enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&f);
    }
    out.push('\n');
}

/// Parses a numeric CSV with one header line.
pub fn read_numeric_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), CsvError> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or(CsvError::Empty)?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(CsvError::Width {
                line: k + 2,
                expected: header.len(),
                found: fields.len(),
            });
        }
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| CsvError::Number {
                    line: k + 2,
                    text: f.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn fmt_state(x: &State) -> String {
    format!("({}, {}, {})", fmt_num(x.s), fmt_num(x.i), fmt_num(x.r))
}

fn fmt_eigs(eigs: &[Complex64; 3]) -> String {
    eigs.iter()
        .map(|z| format!("{}{:+.16e}i", fmt_num(z.re), z.im))
        .collect::<Vec<_>>()
        .join(";")
}

/// Equilibria, existence conditions, stability verdicts and R0 as `key=value` lines.
pub fn analysis_report(params: &ModelParams) -> Result<String, StabilityError> {
    let eq = endemic(params)?;
    let e0 = classify_e0(params)?;
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    line("R0", fmt_num(e0.r0.unwrap_or(f64::NAN)));
    line("R0_closed_form", fmt_num(r0_closed_form(params)));
    line("E0", fmt_state(&eq.e0));
    line(
        "E1",
        eq.e1.as_ref().map_or_else(|| "none".to_string(), fmt_state),
    );
    line(
        "regime",
        match eq.regime {
            Regime::NoEndemic => "none",
            Regime::A1Endemic => "A1",
            Regime::A2Endemic => "A2",
        }
        .to_string(),
    );
    line("condition_A1_dagger", eq.conditions.a1_dagger.to_string());
    line(
        "condition_A1_underdagger",
        eq.conditions.a1_underdagger.to_string(),
    );
    line("condition_A2", eq.conditions.a2.to_string());
    line("incidence_at_E0", fmt_num(eq.incidence_at_e0));
    line("endemic_incidence", fmt_num(eq.endemic_incidence));
    line("eigenvalues_E0", fmt_eigs(&e0.eigenvalues));
    line("classification_E0", e0.classification.as_str().to_string());
    match classify_e1(params) {
        Ok(e1) => {
            let c = char_coeffs_e1(params)?;
            line("eigenvalues_E1", fmt_eigs(&e1.eigenvalues));
            line("tau2", fmt_num(c.tau2));
            line("tau1", fmt_num(c.tau1));
            line("d", fmt_num(c.d));
            line("hurwitz_gap", fmt_num(c.hurwitz_gap()));
            line("classification_E1", e1.classification.as_str().to_string());
        }
        Err(StabilityError::NoEndemicEquilibrium) => {
            line("eigenvalues_E1", "none".into());
            line("classification_E1", "none".into());
        }
        Err(e) => return Err(e),
    }
    Ok(out)
}

/// Minimal static line chart of several series over a common abscissa.
pub fn svg_line_chart(title: &str, x: &[f64], series: &[(&str, Vec<f64>)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    ];

    let finite = |v: &&f64| v.is_finite();
    let (x_lo, x_hi) = span(x.iter().filter(finite).copied());
    let (y_lo, y_hi) = span(
        series
            .iter()
            .flat_map(|(_, ys)| ys.iter().filter(finite).copied()),
    );
    let sx = |v: f64| PAD + (v - x_lo) / (x_hi - x_lo) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - y_lo) / (y_hi - y_lo) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for (v, anchor_x, anchor_y) in [
        (x_lo, sx(x_lo), H - PAD + 18.0),
        (x_hi, sx(x_hi), H - PAD + 18.0),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{anchor_x:.2}" y="{anchor_y:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:.3}</text>"#
        );
    }
    for v in [y_lo, y_hi] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            PAD - 4.0,
            sy(v) + 4.0
        );
    }
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&xv, &yv) in x.iter().zip(ys) {
            if !(xv.is_finite() && yv.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                sx(xv),
                sy(yv)
            );
            pen_down = true;
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            d.trim_end()
        );
        let ly = PAD + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#,
            W - PAD - 60.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// State and control charts for a trajectory.
pub fn trajectory_svgs(title: &str, traj: &Trajectory) -> Vec<(&'static str, String)> {
    let t: Vec<f64> = traj.grid.times().collect();
    let col = |f: fn(&State) -> f64| traj.states.iter().map(f).collect::<Vec<_>>();
    let mut charts = vec![(
        "states",
        svg_line_chart(
            title,
            &t,
            &[
                ("S", col(|x| x.s)),
                ("I", col(|x| x.i)),
                ("R", col(|x| x.r)),
            ],
        ),
    )];
    if let Some(u) = &traj.controls {
        let series: Vec<(&str, Vec<f64>)> = ["u1", "u2", "u3"]
            .into_iter()
            .enumerate()
            .map(|(k, name)| (name, u.iter().map(|c| c.to_array()[k]).collect()))
            .collect();
        charts.push((
            "controls",
            svg_line_chart(&format!("{title}: controls"), &t, &series),
        ));
    }
    charts
}
