//! Command-line driver: load a model, run a solver, write plot-ready
//! CSV/JSON artifacts.
//!
//! Exit codes are a stable contract: 0 success, 2 validation failure,
//! 3 solver failure, 4 I/O failure.

use clap::{Parser, Subcommand, ValueEnum};
use drip_core::equilibrium::{self, Method};
use drip_core::{io, simulate};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "drip",
    about = "Solvers for dynamic information provision: induced payoffs, value functions, equilibrium funding policies, and belief-path simulation",
    version
)]
struct Cli {
    /// Directory for output artifacts (also via DRIP_OUT_DIR).
    #[arg(long, global = true, env = "DRIP_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Closed,
    Fd,
}

#[derive(Subcommand)]
enum Command {
    /// Write (p, u, cav u) for the model's induced flow payoff.
    Envelope {
        #[arg(long)]
        model: PathBuf,
        /// Number of sample points.
        #[arg(long, default_value_t = 1001)]
        grid: usize,
        /// Output CSV path (defaults to <out_dir>/envelope.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the value function and write it as CSV plus JSON.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Override the model's r*sigma^2.
        #[arg(long)]
        rsigma2: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        /// Finite-difference grid size (odd).
        #[arg(long, default_value_t = equilibrium::DEFAULT_GRID)]
        grid: usize,
        /// Output path prefix (defaults to <out_dir>/value).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Equilibrium summary at a prior: funding region, long-run and
    /// persuasion beliefs, values.
    Equilibrium {
        #[arg(long)]
        model: PathBuf,
        /// Prior for the long-run split (defaults to the model's p0).
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = equilibrium::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Comparative statics across a decreasing list of r*sigma^2 values.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated, strictly decreasing r*sigma^2 values.
        #[arg(long, value_delimiter = ',', required = true)]
        rsigma2: Vec<f64>,
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = equilibrium::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate belief paths under the equilibrium funding policy.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        /// Simulation horizon (defaults to 50/r).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write (t, p) traces of the first 100 paths.
        #[arg(long)]
        store_paths: bool,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long, default_value_t = equilibrium::DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification checks and invariant suites on a model;
    /// exits nonzero on any violation.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = equilibrium::DEFAULT_GRID)]
        grid: usize,
    },
    /// Write the bundled benchmark models as JSON files.
    Fixtures {
        /// Target directory (defaults to <out_dir>).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("error code={code} kind={kind}: {err}");
            ExitCode::from(code)
        }
    }
}

enum CliError {
    Core(drip_core::Error),
    Check(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Check(msg) => msg.fmt(f),
        }
    }
}

impl From<drip_core::Error> for CliError {
    fn from(e: drip_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(drip_core::Error::Io(e))
    }
}

fn classify(err: &CliError) -> (u8, &'static str) {
    use drip_core::Error::*;
    match err {
        CliError::Check(_) => (2, "validation"),
        CliError::Core(e) => match e {
            InvalidModel(_) | InvalidParameter(_) | Parse(_) | NotApplicable(_)
            | NotSingleCrossing(_, _) => (2, "validation"),
            NotAffine { .. } | TooManyBreakpoints(_) | NoValidConfiguration
            | NonConvergence { .. } => (3, "solver"),
            Io(_) => (4, "io"),
        },
    }
}

fn method_of(arg: MethodArg, grid: usize) -> Method {
    match arg {
        MethodArg::Auto => Method::Auto,
        MethodArg::Closed => Method::Closed,
        MethodArg::Fd => Method::Fd { n_points: grid },
    }
}

fn flow_payoff(model: &drip_core::ModelSpec) -> drip_core::Result<drip_core::PiecewiseFn> {
    let strat = drip_core::myopic_regular_strategy(model)?;
    drip_core::induced_flow_payoff(model, &strat)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out_dir = cli.out_dir;
    match cli.command {
        Command::Envelope { model, grid, out } => {
            if grid < 2 {
                return Err(CliError::Check("--grid must be at least 2".into()));
            }
            let spec = io::load_model(&model)?;
            let u = flow_payoff(&spec)?;
            let path = out.unwrap_or_else(|| out_dir.join("envelope.csv"));
            write(&path, &io::envelope_csv(&u, grid))
        }

        Command::Solve {
            model,
            rsigma2,
            method,
            grid,
            out,
        } => {
            let spec = io::load_model(&model)?;
            let u = flow_payoff(&spec)?;
            let rs2 = rsigma2.unwrap_or_else(|| spec.r_sigma2());
            let value = equilibrium::Value::solve(&u, rs2, method_of(method, grid))?;
            let prefix = out.unwrap_or_else(|| out_dir.join("value"));
            let (csv, json) = match &value {
                equilibrium::Value::Closed(v) => (
                    io::closed_value_csv(v, &u, 2001),
                    serde_json::to_string_pretty(v).expect("serializable"),
                ),
                equilibrium::Value::Grid(g) => (
                    io::grid_value_csv(g, drip_core::fd::default_contact_tol(&u)),
                    serde_json::to_string_pretty(g).expect("serializable"),
                ),
            };
            write(&prefix.with_extension("csv"), &csv)?;
            write(&prefix.with_extension("json"), &json)
        }

        Command::Equilibrium {
            model,
            prior,
            method,
            grid,
            out,
        } => {
            let mut spec = io::load_model(&model)?;
            if let Some(p0) = prior {
                spec.p0 = p0;
                spec.validate()?;
            }
            let report = equilibrium::equilibrium_report(&spec, method_of(method, grid))?;
            let path = out.unwrap_or_else(|| out_dir.join("equilibrium.json"));
            write(&path, &serde_json::to_string_pretty(&report).expect("serializable"))
        }

        Command::Sweep {
            model,
            rsigma2,
            prior,
            method,
            grid,
            out,
        } => {
            let mut spec = io::load_model(&model)?;
            if let Some(p0) = prior {
                spec.p0 = p0;
                spec.validate()?;
            }
            let table = equilibrium::sweep(&spec, &rsigma2, method_of(method, grid))?;
            let path = out.unwrap_or_else(|| out_dir.join("sweep.csv"));
            write(&path, &io::sweep_csv(&table))
        }

        Command::Simulate {
            model,
            prior,
            paths,
            dt,
            horizon,
            seed,
            store_paths,
            method,
            grid,
            out,
        } => {
            let spec = io::load_model(&model)?;
            let p0 = prior.unwrap_or(spec.p0);
            let u = flow_payoff(&spec)?;
            let value = equilibrium::Value::solve(&u, spec.r_sigma2(), method_of(method, grid))?;
            let policy = equilibrium::best_reply_policy(
                &value,
                &u,
                drip_core::fd::default_contact_tol(&u),
            );
            let (expected, _) = equilibrium::long_run_beliefs(&value, &u, p0);
            let cfg = simulate::SimConfig {
                dt,
                horizon: horizon.unwrap_or(50.0 / spec.r),
                n_paths: paths,
                seed,
                store_paths,
            };
            let result = simulate::simulate_paths(&u, spec.r, spec.sigma, &policy, p0, &cfg)?;
            let stats = simulate::absorption_stats(&result, &expected, p0);

            if let Some(stored) = &result.stored_paths {
                let dir = out_dir.join("paths");
                std::fs::create_dir_all(&dir)?;
                for (k, trace) in stored.iter().enumerate() {
                    let mut csv = String::from("t,p\n");
                    for &(t, p) in trace {
                        csv.push_str(&format!("{},{}\n", io::fmt_f64(t), io::fmt_f64(p)));
                    }
                    std::fs::write(dir.join(format!("path_{k:03}.csv")), csv)?;
                }
                println!("wrote {} path traces to {}", stored.len(), dir.display());
            }

            #[derive(serde::Serialize)]
            struct SimulationArtifact<'a> {
                config: &'a simulate::SimConfig,
                policy: &'a equilibrium::Policy,
                expected_long_run: drip_core::BeliefPair,
                #[serde(flatten)]
                result: &'a simulate::SimResult,
                z_scores: simulate::ZScores,
            }
            let mut slim = result.clone();
            slim.stored_paths = None;
            let artifact = SimulationArtifact {
                config: &cfg,
                policy: &policy,
                expected_long_run: expected,
                result: &slim,
                z_scores: stats,
            };
            let path = out.unwrap_or_else(|| out_dir.join("simulation.json"));
            write(&path, &serde_json::to_string_pretty(&artifact).expect("serializable"))
        }

        Command::Validate { model, grid } => {
            let spec = io::load_model(&model)?;
            validate(&spec, grid)
        }

        Command::Fixtures { dir } => {
            let dir = dir.unwrap_or(out_dir);
            let written = io::write_fixtures(&dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

/// Invariant suite for a loaded model. Prints one line per check and
/// fails with exit code 2 on the first violation.
fn validate(spec: &drip_core::ModelSpec, grid: usize) -> Result<(), CliError> {
    use drip_core::envelope::concave_envelope;

    let check = |name: &str, ok: bool, detail: String| -> Result<(), CliError> {
        if ok {
            println!("check {name}: ok");
            Ok(())
        } else {
            println!("check {name}: FAILED ({detail})");
            Err(CliError::Check(format!("{name}: {detail}")))
        }
    };

    let strat = drip_core::myopic_regular_strategy(spec)?;
    let u = drip_core::induced_flow_payoff(spec, &strat)?;

    // Myopia: on a fine grid, the induced payoff matches the best
    // principal payoff over agent-optimal actions (and dominates at
    // breakpoints).
    let mut worst = 0.0f64;
    for i in 0..=10_000 {
        let p = i as f64 / 10_000.0;
        let q = drip_core::phi_map(p, spec.p0, spec.p_a0)?;
        let best_fa = spec
            .f_a
            .iter()
            .map(|f| f.eval(q))
            .fold(f64::NEG_INFINITY, f64::max);
        let best_fp = spec
            .f_a
            .iter()
            .zip(&spec.f_p)
            .filter(|(fa, _)| best_fa - fa.eval(q) <= 1e-9)
            .map(|(_, fp)| fp.eval(p))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = u.eval_usc(p);
        let near_break = strat.breakpoints.iter().any(|b| (b - p).abs() < 1e-5);
        if near_break {
            worst = worst.max(best_fp - got - 1e-9);
        } else {
            worst = worst.max((got - best_fp).abs());
        }
    }
    check("myopic-argmax", worst <= 1e-8, format!("deviation {worst:.2e}"))?;

    // Prior map round trip.
    let mut worst = 0.0f64;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        let q = drip_core::phi_map(p, spec.p0, spec.p_a0)?;
        let back = drip_core::phi_map(q, spec.p_a0, spec.p0)?;
        worst = worst.max((back - p).abs());
    }
    check("prior-map-bijection", worst <= 1e-12, format!("roundtrip error {worst:.2e}"))?;

    // Envelope: majorant, idempotent, and untouched by random splits.
    let cav = concave_envelope(&u);
    let cav2 = concave_envelope(&cav);
    let mut majorant = 0.0f64;
    let mut idempotent = 0.0f64;
    for i in 0..=10_000 {
        let p = i as f64 / 10_000.0;
        majorant = majorant.max(u.eval_usc(p) - cav.eval_usc(p));
        idempotent = idempotent.max((cav.eval_usc(p) - cav2.eval_usc(p)).abs());
    }
    check("envelope-majorant", majorant <= 1e-9, format!("violation {majorant:.2e}"))?;
    check("envelope-idempotent", idempotent <= 1e-10, format!("drift {idempotent:.2e}"))?;
    let mut split_excess = 0.0f64;
    for k in 0..200 {
        let p0 = 0.005 + 0.99 * (k as f64 / 199.0);
        for (lo, hi) in [(p0 * 0.5, p0 + (1.0 - p0) * 0.5), (p0 * 0.1, p0 + (1.0 - p0) * 0.9)] {
            let gamma = (hi - p0) / (hi - lo);
            let split = gamma * u.eval_usc(lo) + (1.0 - gamma) * u.eval_usc(hi);
            split_excess = split_excess.max(split - cav.eval_usc(p0));
        }
    }
    check("envelope-minimal", split_excess <= 1e-9, format!("excess {split_excess:.2e}"))?;

    // Value function: exact verification when affine, grid checks
    // otherwise.
    let rs2 = spec.r_sigma2();
    if u.is_affine() {
        let v = drip_core::solve_closed_form(&u, rs2)?;
        let report = drip_core::verify_value(&v, &u, rs2);
        check(
            "value-verification",
            report.passes(drip_core::closed_form::VERIFY_TOL),
            format!("max violation {:.2e}", report.max_violation()),
        )?;
        let gv = drip_core::solve_fd(&u, rs2, grid)?;
        let mut sup = 0.0f64;
        for i in 0..gv.n_points {
            sup = sup.max((gv.values[i] - v.eval(gv.grid_point(i))).abs());
        }
        check("value-oracle-agreement", sup <= 5e-3, format!("sup gap {sup:.2e}"))?;
    } else {
        let gv = drip_core::solve_fd(&u, rs2, grid)?;
        check(
            "value-fd-residual",
            gv.residual <= 1e-8,
            format!("residual {:.2e}", gv.residual),
        )?;
        let mut lower = 0.0f64;
        let mut upper = 0.0f64;
        for i in 0..gv.n_points {
            let p = gv.grid_point(i);
            lower = lower.max(gv.u_grid[i] - gv.values[i]);
            upper = upper.max(gv.values[i] - cav.eval_usc(p));
        }
        check("value-sandwich-lower", lower <= 1e-9, format!("violation {lower:.2e}"))?;
        check("value-sandwich-upper", upper <= 1e-6, format!("violation {upper:.2e}"))?;
    }

    // Equilibrium: persuasion sandwich and the martingale split.
    let report = equilibrium::equilibrium_report(spec, Method::Auto)?;
    let sandwich = report.persuasion.lower <= report.long_run.lower + 1e-6
        && report.long_run.lower <= spec.p0 + 1e-12
        && spec.p0 <= report.long_run.upper + 1e-12
        && report.long_run.upper <= report.persuasion.upper + 1e-6;
    check("persuasion-sandwich", sandwich, format!("{report:?}"))?;
    let split = if report.long_run.is_degenerate() {
        0.0
    } else {
        (report.gamma * report.long_run.lower + (1.0 - report.gamma) * report.long_run.upper
            - spec.p0)
            .abs()
    };
    check("martingale-split", split <= 1e-9, format!("residual {split:.2e}"))?;
    if report.knife_edge {
        println!("note: near-indifference detected; long-run beliefs are tolerance-sensitive");
    }

    // Simulation: martingale mean within five standard errors on a
    // small deterministic run, and bit-identical on a rerun.
    let value = equilibrium::Value::solve(&u, rs2, Method::Auto)?;
    let policy =
        equilibrium::best_reply_policy(&value, &u, drip_core::fd::default_contact_tol(&u));
    let cfg = simulate::SimConfig {
        dt: 1e-3,
        horizon: 10.0 / spec.r,
        n_paths: 2000,
        seed: 1,
        store_paths: false,
    };
    let a = simulate::simulate_paths(&u, spec.r, spec.sigma, &policy, spec.p0, &cfg)?;
    let b = simulate::simulate_paths(&u, spec.r, spec.sigma, &policy, spec.p0, &cfg)?;
    let martingale_ok = a.se_terminal == 0.0
        || (a.mean_terminal - spec.p0).abs() <= 5.0 * a.se_terminal;
    check(
        "simulation-martingale",
        martingale_ok,
        format!("mean {} vs prior {}", a.mean_terminal, spec.p0),
    )?;
    check(
        "simulation-deterministic",
        a.mean_terminal.to_bits() == b.mean_terminal.to_bits()
            && a.n_absorbed_low == b.n_absorbed_low,
        "rerun differed".into(),
    )?;

    println!("all checks passed");
    Ok(())
}
