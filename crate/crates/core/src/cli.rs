//! Command-line front end: `crimesir <subcommand> --config <path> [--out <dir>] [--svg]`.
//!
//! Exit codes: 0 success, 1 invalid input or failure, 2 the sweep solver did
//! not converge (outputs are still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, ScenarioConfig};
use crate::control::{forward_backward_sweep, uncontrolled_objective};
use crate::dynamics::integrate_forward;
use crate::model::ModelParams;
use crate::output::{analysis_report, fmt_num, sensitivity_csv, trajectory_csv, trajectory_svgs};
use crate::sensitivity::{rank_parameters, Metric, DEFAULT_REL_STEP};
use crate::stability::next_gen_r0;

/// Handling times visited by `sweep`.
pub const SWEEP_BETAS: [f64; 5] = [2.0, 1.0, 0.5, 0.3, 0.05];

/// Depletion threshold used in the sweep summary, as a fraction of `S0`.
pub const DEPLETION_FRACTION: f64 = 0.01;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "crimesir",
    version,
    about = "Crime-spread SIR model: simulation, analysis and optimal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the uncontrolled system and write trajectory.csv.
    Simulate(Common),
    /// Equilibria, existence conditions, stability and R0.
    Analyze(Common),
    /// Forward-backward sweep for the active controls.
    Optimize(Common),
    /// Normalized sensitivity indices of one output metric.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// final_i, peak_i, final_s, r0 or uncontrolled_objective
        #[arg(long, default_value = "final_i")]
        metric: String,
        #[arg(long, default_value_t = DEFAULT_REL_STEP)]
        rel_step: f64,
    },
    /// Repeat the simulation for each handling time in {2, 1, 0.5, 0.3, 0.05}.
    Sweep(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    config: String,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

struct Ctx {
    cfg: ScenarioConfig,
    out: PathBuf,
    svg: bool,
}

type Failure = (i32, String);

fn fail(e: impl std::fmt::Display) -> Failure {
    (EXIT_ERROR, e.to_string())
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, Failure> {
        let cfg = load_config(&common.config).map_err(fail)?;
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
        fs::create_dir_all(&out).map_err(|e| fail(format!("{}: {e}", out.display())))?;
        let svg = common.svg || cfg.output.emit_svg;
        Ok(Self { cfg, out, svg })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        write_file(&self.out.join(name), text)
    }
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf, Failure> {
    fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Parses `args` (including the program name) and runs the subcommand,
/// reporting to `stdout`/`stderr`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c, stdout),
        Command::Analyze(c) => analyze(c, stdout),
        Command::Optimize(c) => optimize(c, stdout, stderr),
        Command::Sensitivity {
            common,
            metric,
            rel_step,
        } => sensitivity(common, metric, *rel_step, stdout),
        Command::Sweep(c) => sweep(c, stdout),
    };
    match result {
        Ok(code) => code,
        Err((code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}

fn simulate(common: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = Ctx::new(common)?;
    let cfg = &ctx.cfg;
    let traj = integrate_forward(&cfg.initial_state(), None, &cfg.parameters, &cfg.grid())
        .map_err(fail)?;
    let path = ctx.write("trajectory.csv", &trajectory_csv(&traj, None))?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    if ctx.svg {
        for (name, svg) in trajectory_svgs("uncontrolled trajectory", &traj) {
            let path = ctx.write(&format!("trajectory_{name}.svg"), &svg)?;
            let _ = writeln!(stdout, "wrote {}", path.display());
        }
    }
    let last = traj.last();
    let _ = writeln!(
        stdout,
        "final S={} I={} R={}",
        fmt_num(last.s),
        fmt_num(last.i),
        fmt_num(last.r)
    );
    Ok(EXIT_OK)
}

fn analyze(common: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = Ctx::new(common)?;
    let report = analysis_report(&ctx.cfg.parameters).map_err(fail)?;
    let path = ctx.write("analysis.txt", &report)?;
    let _ = write!(stdout, "{report}");
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(EXIT_OK)
}

fn optimize(
    common: &Common,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let ctx = Ctx::new(common)?;
    let cfg = &ctx.cfg;
    let (x0, grid) = (cfg.initial_state(), cfg.grid());
    if !cfg.controls.active.iter().any(|&a| a) {
        let _ = writeln!(
            stderr,
            "warning: no active controls; the optimum is the uncontrolled trajectory"
        );
    }
    let res = forward_backward_sweep(
        &x0,
        &cfg.parameters,
        &cfg.weights(),
        &cfg.bounds(),
        cfg.controls.active,
        &grid,
        &cfg.sweep_options(),
    )
    .map_err(fail)?;
    let baseline = uncontrolled_objective(&x0, &cfg.parameters, &grid).map_err(fail)?;

    let path = ctx.write(
        "optimal.csv",
        &trajectory_csv(&res.state_traj, Some(&res.adjoint_traj)),
    )?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    let summary = format!(
        "controlled_objective={}\nuncontrolled_objective={}\nreduction={}\niterations={}\nconverged={}\nlast_change={}\nstationarity_residual={}\n",
        fmt_num(res.objective),
        fmt_num(baseline),
        fmt_num(1.0 - res.objective / baseline),
        res.iterations,
        res.converged,
        fmt_num(res.last_change),
        fmt_num(res.stationarity_residual),
    );
    let path = ctx.write("summary.txt", &summary)?;
    if ctx.svg {
        for (name, svg) in trajectory_svgs("optimal control", &res.state_traj) {
            ctx.write(&format!("optimal_{name}.svg"), &svg)?;
        }
    }
    let _ = write!(stdout, "{summary}");
    let _ = writeln!(stdout, "wrote {}", path.display());
    if !res.converged {
        let _ = writeln!(
            stderr,
            "warning: sweep stopped after {} iterations without converging (last change {:e})",
            res.iterations, res.last_change
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

fn sensitivity(
    common: &Common,
    metric: &str,
    rel_step: f64,
    stdout: &mut dyn Write,
) -> Result<i32, Failure> {
    let metric: Metric = metric.parse().map_err(fail)?;
    let ctx = Ctx::new(common)?;
    let cfg = &ctx.cfg;
    let entries = rank_parameters(
        metric,
        &cfg.parameters,
        &cfg.initial_state(),
        &cfg.grid(),
        rel_step,
    )
    .map_err(fail)?;
    let path = ctx.write("sensitivity.csv", &sensitivity_csv(&entries))?;
    for (rank, e) in entries.iter().enumerate() {
        let _ = writeln!(
            stdout,
            "{:2} {:<7} {:+.6}",
            rank + 1,
            e.parameter.name(),
            e.index
        );
    }
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(EXIT_OK)
}

struct SweepRow {
    beta: f64,
    depletion: Option<f64>,
    peak_i: f64,
    final_i: f64,
    r0: f64,
}

fn sweep(common: &Common, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = Ctx::new(common)?;
    let cfg = &ctx.cfg;
    let (x0, grid) = (cfg.initial_state(), cfg.grid());

    let results: Vec<Result<SweepRow, Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = SWEEP_BETAS
            .iter()
            .map(|&beta| {
                let ctx = &ctx;
                scope.spawn(move || {
                    let params = ModelParams {
                        beta,
                        ..ctx.cfg.parameters
                    };
                    params.validate().map_err(fail)?;
                    let traj = integrate_forward(&x0, None, &params, &grid).map_err(fail)?;
                    let tag = beta_tag(beta);
                    ctx.write(
                        &format!("sweep_beta_{tag}.csv"),
                        &trajectory_csv(&traj, None),
                    )?;
                    if ctx.svg {
                        for (name, svg) in trajectory_svgs(&format!("beta = {beta}"), &traj) {
                            ctx.write(&format!("sweep_beta_{tag}_{name}.svg"), &svg)?;
                        }
                    }
                    Ok(SweepRow {
                        beta,
                        depletion: traj.depletion_time(DEPLETION_FRACTION),
                        peak_i: traj.peak_i(),
                        final_i: traj.last().i,
                        r0: next_gen_r0(&params).map_err(fail)?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut summary = String::from("beta,depletion_time,peak_i,final_i,r0\n");
    for row in results {
        let row = row?;
        let depletion = row.depletion.map_or_else(|| "nan".to_string(), fmt_num);
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(row.beta),
            depletion,
            fmt_num(row.peak_i),
            fmt_num(row.final_i),
            fmt_num(row.r0)
        ));
        let _ = writeln!(
            stdout,
            "beta={:<5} depletion_time={} peak_I={:.3} final_I={:.3} R0={:.4}",
            row.beta,
            row.depletion
                .map_or_else(|| "none".to_string(), |t| format!("{t:.3}")),
            row.peak_i,
            row.final_i,
            row.r0
        );
    }
    let path = ctx.write("sweep_summary.csv", &summary)?;
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(EXIT_OK)
}

/// File-name fragment for a handling time, e.g. `0.05` -> `0p05`.
fn beta_tag(beta: f64) -> String {
    format!("{beta}").replace('.', "p").replace('-', "m")
}
