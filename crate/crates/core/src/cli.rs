//! Command-line front end. Every run writes its artifacts and a `manifest.json`
//! into the output directory.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 solver failure,
//! 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classifier::{admissibility, degree_bounds, moduli_dimension, normal_form, VortexDatum};
use crate::diagnostics::{
    dbar_defect, decay_table, energy, solve_report, Region, write_decay_csv, ReportOptions, SolveReport,
};
use crate::error::Error;
use crate::orbibundle::{check_orbifold_condition, transition_functions, uniform_loop_angles, OrbiBundleData};
use crate::pdegrid::FieldState;
use crate::solver::{
    exhaustion_solve, grid_for, heat_flow, newton_solve, radial_oracle, render, Problem, SolveConfig,
};
use crate::target::TorusTarget;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "VORTEX_THREADS";

/// Prefix of flags that override solve configuration keys, e.g.
/// `--solve.newton.residual_tol 1e-8`.
pub const CONFIG_FLAG_PREFIX: &str = "--solve.";

#[derive(Debug, Parser)]
#[command(name = "vortex", version, about = "Affine vortices for linear torus actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Output directory for reports and the manifest.
    #[arg(long, default_value = "vortex-out")]
    out: PathBuf,
    /// Seed for randomized measurements.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write plotting-ready CSV tables.
    #[arg(long)]
    emit_plots_data: bool,
}

#[derive(Debug, Clone, Args)]
struct SolveArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    datum: PathBuf,
    /// Solve configuration JSON; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Radius of the energy ball (half the outer radius by default).
    #[arg(long)]
    energy_radius: Option<f64>,
    /// Decay fit window as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    decay_window: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Admissibility, normal form and moduli dimension of a datum.
    Classify {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        datum: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Newton solve on the largest configured radius.
    Solve(SolveArgs),
    /// Heat-flow solve on the largest configured radius.
    Flow(SolveArgs),
    /// Solves on every configured radius and compares the solutions.
    Exhaust(SolveArgs),
    /// Radial vortex profile for a circle action.
    Oracle {
        #[arg(long, default_value_t = 1)]
        weight: i64,
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        degree: u32,
        /// Radial spacing of the output table.
        #[arg(long, default_value_t = 0.05)]
        spacing: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Invariant suite on a stored solution.
    Verify {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        /// Datum the solution was rendered from; enables the zero count.
        #[arg(long)]
        datum: Option<PathBuf>,
        /// Largest accepted residual norm.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Orbifold bundle data from the holonomy exponent `lambda` and order `n`.
    Bundle {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Classify { common, .. }
            | Command::Oracle { common, .. }
            | Command::Verify { common, .. }
            | Command::Bundle { common, .. } => common,
            Command::Solve(a) | Command::Flow(a) | Command::Exhaust(a) => &a.common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Classify { .. } => "classify",
            Command::Solve(_) => "solve",
            Command::Flow(_) => "flow",
            Command::Exhaust(_) => "exhaust",
            Command::Oracle { .. } => "oracle",
            Command::Verify { .. } => "verify",
            Command::Bundle { .. } => "bundle",
        }
    }
}

/// Failure of a run, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("verification failed: {}", .0.join(", "))]
    Verification(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 1,
            RunError::Solver(_) => 2,
            RunError::Verification(_) => 3,
        }
    }
}

fn input(e: impl std::fmt::Display) -> RunError {
    RunError::Input(e.to_string())
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Remaining arguments and `(key, value)` overrides.
pub type SplitArgs = (Vec<String>, Vec<(String, String)>);

/// Splits `--solve.a.b value` and `--solve.a.b=value` overrides from the rest
/// of the arguments.
pub fn split_config_flags(args: &[String]) -> std::result::Result<SplitArgs, String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix(CONFIG_FLAG_PREFIX) else {
            rest.push(a.clone());
            continue;
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| format!("missing value for {a}"))?;
                (key.to_string(), v.clone())
            }
        };
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(format!("malformed configuration flag {a}"));
        }
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

/// Applies dotted-path overrides to a configuration; values parse as JSON and
/// fall back to strings. Unknown keys are rejected on deserialization.
pub fn apply_overrides(config: &SolveConfig, overrides: &[(String, String)]) -> crate::Result<SolveConfig> {
    let mut v = serde_json::to_value(config)?;
    for (key, raw) in overrides {
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        let mut node = &mut v;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::Format(format!("configuration key {key} does not name an object field")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
        }
    }
    let out: SolveConfig = serde_json::from_value(v)?;
    out.validate()?;
    Ok(out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> RunResult<T> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("cannot parse {what} {}: {e}", path.display())))
}

fn load_target(path: &Path) -> RunResult<TorusTarget> {
    let t: TorusTarget = read_json(path, "target")?;
    t.ensure_valid().map_err(input)?;
    Ok(t)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> RunResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(input)?;
    fs::write(dir.join(name), text + "\n").map_err(|e| input(format!("cannot write {name}: {e}")))
}

fn write_csv_file(dir: &Path, name: &str, f: impl FnOnce(fs::File) -> crate::Result<()>) -> RunResult<()> {
    let file = fs::File::create(dir.join(name)).map_err(|e| input(format!("cannot write {name}: {e}")))?;
    f(file).map_err(input)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    arguments: &'a [String],
    inputs: Value,
    version: &'static str,
    seed: Option<u64>,
    threads: usize,
    exit_code: i32,
    error: Option<String>,
    /// Excluded from reproducibility comparisons.
    timestamps: Value,
}

struct Context {
    out: PathBuf,
    inputs: Value,
    seed: Option<u64>,
}

/// Parses arguments (without the program name) and runs; returns the exit code.
pub fn run(args: &[String]) -> i32 {
    let started = Instant::now();
    let wall_start = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let (rest, overrides) = match split_config_flags(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(std::iter::once("vortex".to_string()).chain(rest)) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    let common = cli.command.common().clone();
    if let Err(e) = fs::create_dir_all(&common.out) {
        eprintln!("error: cannot create output directory {}: {e}", common.out.display());
        return 1;
    }
    let mut ctx = Context { out: common.out.clone(), inputs: json!({}), seed: common.seed };
    let result = dispatch(&cli.command, &overrides, &common, &mut ctx);
    let (code, error) = match &result {
        Ok(()) => (0, None),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), Some(e.to_string()))
        }
    };
    let manifest = Manifest {
        command: cli.command.name(),
        arguments: args,
        inputs: ctx.inputs,
        version: env!("CARGO_PKG_VERSION"),
        seed: ctx.seed,
        threads: rayon::current_num_threads(),
        exit_code: code,
        error,
        timestamps: json!({ "started_unix": wall_start, "wall_time_seconds": started.elapsed().as_secs_f64() }),
    };
    if let Err(e) = write_json(&common.out, "manifest.json", &manifest) {
        eprintln!("error: {e}");
        return code.max(1);
    }
    code
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}={v} is not a thread count"))?;
    // a pool already exists when run twice in one process; keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: &Command, overrides: &[(String, String)], common: &Common, ctx: &mut Context) -> RunResult<()> {
    if !overrides.is_empty() && !matches!(cmd, Command::Solve(_) | Command::Flow(_) | Command::Exhaust(_)) {
        return Err(input("configuration flags apply only to solve, flow and exhaust"));
    }
    match cmd {
        Command::Classify { target, datum, .. } => classify(target, datum, ctx),
        Command::Solve(a) | Command::Flow(a) | Command::Exhaust(a) => solve(cmd.name(), a, overrides, common, ctx),
        Command::Oracle { weight, tau, degree, spacing, .. } => oracle(*weight, *tau, *degree, *spacing, common, ctx),
        Command::Verify { target, solution, datum, tol, .. } => verify(target, solution, datum.as_deref(), *tol, ctx),
        Command::Bundle { lambda, n, radius, samples, .. } => bundle(lambda, *n, *radius, *samples, ctx),
    }
}

fn classify(target: &Path, datum: &Path, ctx: &mut Context) -> RunResult<()> {
    let t = load_target(target)?;
    let d: VortexDatum = read_json(datum, "datum")?;
    ctx.inputs = json!({ "target": t, "datum": d });
    let adm = admissibility(&t, &d).map_err(input)?;
    let nf = if adm.admissible { Some(normal_form(&t, &d).map_err(input)?) } else { None };
    let report = json!({
        "admissibility": adm,
        "degree_bounds": degree_bounds(&t, &d.d),
        "normal_form": nf,
        "moduli_dimension": moduli_dimension(&t, &d.d),
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(input)?);
    write_json(&ctx.out, "classify.json", &report)
}

fn load_problem(
    a: &SolveArgs,
    overrides: &[(String, String)],
    ctx: &mut Context,
) -> RunResult<(TorusTarget, VortexDatum, SolveConfig)> {
    let t = load_target(&a.target)?;
    let d: VortexDatum = read_json(&a.datum, "datum")?;
    let adm = admissibility(&t, &d).map_err(input)?;
    if !adm.admissible {
        return Err(input(format!("datum is not admissible: {}", adm.reasons.join("; "))));
    }
    let base: SolveConfig = match &a.config {
        Some(p) => read_json(p, "configuration")?,
        None => SolveConfig::default(),
    };
    let mut cfg = apply_overrides(&base, overrides).map_err(input)?;
    if let Some(seed) = ctx.seed {
        cfg.certificate.seed = seed;
    }
    ctx.seed = Some(cfg.certificate.seed);
    ctx.inputs = json!({ "target": t, "datum": d, "config": cfg });
    Ok((t, d, cfg))
}

fn report_options(a: &SolveArgs, d: &VortexDatum) -> ReportOptions {
    ReportOptions {
        energy_radius: a.energy_radius,
        decay_window: a.decay_window.as_ref().map(|w| (w[0], w[1])),
        expected_degree: (d.polys.len() == 1).then(|| d.polys[0].degree().unwrap_or(0) as i64),
        ..ReportOptions::default()
    }
}

fn emit_state_tables(dir: &Path, s: &FieldState, t: &TorusTarget) -> RunResult<()> {
    write_csv_file(dir, "field.csv", |f| s.write_csv(std::io::BufWriter::new(f)))?;
    if s.grid.is_polar() {
        let table = decay_table(s, t).map_err(input)?;
        write_csv_file(dir, "decay.csv", |f| write_decay_csv(&table, f))?;
    }
    Ok(())
}

fn solve(
    name: &str,
    a: &SolveArgs,
    overrides: &[(String, String)],
    common: &Common,
    ctx: &mut Context,
) -> RunResult<()> {
    let (t, d, cfg) = load_problem(a, overrides, ctx)?;
    let opts = report_options(a, &d);
    let out = ctx.out.clone();
    if name == "exhaust" {
        let ex = exhaustion_solve(&t, &d, &cfg).map_err(RunError::Solver)?;
        let reports: Vec<SolveReport> = ex
            .solutions
            .iter()
            .map(|s| solve_report(s, &t, &opts))
            .collect::<crate::Result<_>>()
            .map_err(RunError::Solver)?;
        let last = ex.solutions.last().expect("at least one radius");
        last.save(out.join("solution.bin")).map_err(input)?;
        write_json(
            &out,
            "report.json",
            &json!({
                "radii": ex.radii,
                "work": ex.work,
                "compare_radius": ex.compare_radius,
                "comparisons": ex.comparisons,
                "converged": ex.converged,
                "cauchy": ex.cauchy,
                "diagnostics": reports,
            }),
        )?;
        if common.emit_plots_data {
            emit_state_tables(&out, last, &t)?;
        }
        if !ex.converged {
            return Err(RunError::Solver(Error::Diverged {
                iteration: ex.radii.len(),
                residual: ex.comparisons.last().map_or(f64::NAN, |c| c.abs_u_c0),
            }));
        }
        return Ok(());
    }
    let radius = *cfg.exhaustion.radii.last().expect("validated radii");
    let grid = grid_for(radius, cfg.exhaustion.resolution).map_err(input)?;
    let state = render(&t, &d, std::sync::Arc::new(grid)).map_err(input)?;
    let (solved, run) = if name == "flow" {
        let o = heat_flow(&state, &t, &cfg).map_err(RunError::Solver)?;
        if common.emit_plots_data {
            write_csv_file(&out, "trajectory.csv", |f| {
                let mut w = csv::Writer::from_writer(f);
                w.write_record(["t", "dt", "residual"])?;
                for s in &o.trajectory {
                    w.write_record([s.t.to_string(), s.dt.to_string(), s.residual.to_string()])?;
                }
                w.flush()?;
                Ok(())
            })?;
        }
        if !o.converged {
            return Err(RunError::Solver(Error::Diverged { iteration: o.accepted, residual: o.final_residual }));
        }
        let run = json!({
            "accepted": o.accepted,
            "rejected": o.rejected,
            "final_residual": o.final_residual,
            "trajectory": o.trajectory,
        });
        (o.state, run)
    } else {
        let o = newton_solve(&state, &t, &cfg).map_err(RunError::Solver)?;
        (o.state, json!({ "newton": o.report, "certificate": o.certificate }))
    };
    let report = solve_report(&solved, &t, &opts).map_err(RunError::Solver)?;
    solved.save(out.join("solution.bin")).map_err(input)?;
    write_json(&out, "report.json", &json!({ "radius": radius, "run": run, "diagnostics": report }))?;
    if common.emit_plots_data {
        emit_state_tables(&out, &solved, &t)?;
    }
    Ok(())
}

fn oracle(weight: i64, tau: f64, degree: u32, spacing: f64, common: &Common, ctx: &mut Context) -> RunResult<()> {
    ctx.inputs = json!({ "weight": weight, "tau": tau, "degree": degree, "spacing": spacing });
    if !(spacing > 0.0) {
        return Err(input("spacing must be positive"));
    }
    let p = radial_oracle(weight, tau, degree).map_err(RunError::Solver)?;
    write_csv_file(&ctx.out, "profile.csv", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["r", "f", "alpha", "energy_density"])?;
        for (r, fv, al) in p.table(spacing) {
            w.write_record([format!("{r:e}"), format!("{fv:e}"), format!("{al:e}"), format!("{:e}", p.energy_density(r))])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if !common.emit_plots_data {
        let summary = json!({
            "weight": weight,
            "tau": tau,
            "degree": degree,
            "f_inf": p.f_inf,
            "small_r_coefficient": p.c,
            "tail_coefficient": p.tail,
            "total_energy": p.total_energy(),
            "matching_residual": p.matching_residual,
        });
        write_json(&ctx.out, "oracle.json", &summary)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Invariants every stored vortex must satisfy.
fn invariant_suite(s: &FieldState, t: &TorusTarget, datum: Option<&VortexDatum>, tol: f64) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name, passed, detail: String| checks.push(Check { name, passed, detail });
    let finite = s.xi.iter().chain(&s.ax).chain(&s.ay).all(|v| v.is_finite()) && s.u.iter().all(|v| v.is_finite());
    push("finite_values", finite, String::new());
    if !finite {
        return checks;
    }
    let boundary = (0..s.grid.len())
        .filter(|&k| s.grid.is_boundary(k))
        .flat_map(|k| s.xi[k * s.rank..(k + 1) * s.rank].iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    push("gauge_vanishes_on_boundary", boundary == 0.0, format!("max |xi| on boundary {boundary:e}"));
    match Problem::new(s, t).and_then(|p| Ok(p.norm(&p.interior_residual(&s.xi)?))) {
        Ok(r) => push("vortex_equation", r <= tol, format!("residual {r:e}, tolerance {tol:e}")),
        Err(e) => push("vortex_equation", false, e.to_string()),
    }
    // holomorphicity is a property of the stored pair before the gauge acts
    let mut base = s.clone();
    base.xi.fill(0.0);
    match (dbar_defect(&base, t), energy(&base, t, &Region::All)) {
        (Ok(d), Ok(e)) => {
            let ratio = d / e.covariant.sqrt().max(1e-300);
            push("holomorphic_section", ratio <= 1e-2, format!("dbar norm {d:e}, relative {ratio:e}"));
        }
        (Err(e), _) | (_, Err(e)) => push("holomorphic_section", false, e.to_string()),
    }
    let opts = ReportOptions {
        expected_degree: datum.filter(|d| d.polys.len() == 1).map(|d| d.polys[0].degree().unwrap_or(0) as i64),
        ..ReportOptions::default()
    };
    match solve_report(s, t, &opts) {
        Ok(rep) => {
            let sum = rep.energy_by_term.0 + rep.energy_by_term.1 + rep.energy_by_term.2;
            push(
                "energy_terms_sum",
                (sum - rep.total_energy).abs() <= 1e-10 * rep.total_energy.abs().max(1.0),
                format!("total {:e}", rep.total_energy),
            );
            match (&rep.decay, &rep.decay_error) {
                (Some(d), _) => push("decay_bound", d.within_bound, format!("slope {:?}, bound {}", d.slope, d.bound)),
                (None, e) => push("decay_bound", false, e.clone().unwrap_or_default()),
            }
            match (&rep.limit, &rep.limit_error) {
                (Some(l), _) => {
                    push("limit_on_level_set", l.moment_norm < 1e-2, format!("|Phi(x0)| {:e}", l.moment_norm))
                }
                (None, e) => push("limit_on_level_set", false, e.clone().unwrap_or_default()),
            }
            if let Some(z) = &rep.zeros {
                if z.expected.is_some() {
                    push(
                        "zero_count",
                        z.matches_expected,
                        format!("winding {} expected {:?}", z.total_winding, z.expected),
                    );
                }
            }
        }
        Err(e) => push("diagnostics", false, e.to_string()),
    }
    checks
}

fn verify(target: &Path, solution: &Path, datum: Option<&Path>, tol: f64, ctx: &mut Context) -> RunResult<()> {
    let t = load_target(target)?;
    let d: Option<VortexDatum> = datum.map(|p| read_json(p, "datum")).transpose()?;
    ctx.inputs = json!({ "target": t, "solution": solution, "datum": d, "tol": tol });
    let checks = match FieldState::load(solution) {
        Ok(s) if s.check_target(&t).is_ok() => invariant_suite(&s, &t, d.as_ref(), tol),
        Ok(s) => vec![Check { name: "matches_target", passed: false, detail: s.check_target(&t).unwrap_err().to_string() }],
        // an unreadable solution fails the suite rather than the argument parsing
        Err(e) => vec![Check { name: "solution_readable", passed: false, detail: e.to_string() }],
    };
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    write_json(&ctx.out, "verify.json", &json!({ "passed": failed.is_empty(), "checks": checks }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Verification(failed))
    }
}

fn bundle(lambda: &[f64], n: u32, radius: f64, samples: usize, ctx: &mut Context) -> RunResult<()> {
    ctx.inputs = json!({ "lambda": lambda, "n": n, "radius": radius, "samples": samples });
    let data = OrbiBundleData { n, lambda: lambda.to_vec(), radius };
    let condition = n > 0 && check_orbifold_condition(lambda, n);
    let mut report = json!({
        "orbifold_condition": condition,
        "n_lambda": lambda.iter().map(|l| l * n as f64).collect::<Vec<_>>(),
    });
    if condition {
        data.validate().map_err(input)?;
        let sector = 2.0 * std::f64::consts::PI / n as f64;
        let thetas: Vec<f64> = uniform_loop_angles(samples.max(2)).iter().map(|t| t / n as f64).collect();
        let tr = transition_functions(&data, &thetas).map_err(input)?;
        report["holonomy"] = json!(data.holonomy());
        report["sector_angle"] = json!(sector);
        report["transition"] = json!(tr);
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(input)?);
    write_json(&ctx.out, "bundle.json", &report)?;
    if condition {
        Ok(())
    } else {
        Err(input(format!("n * lambda is not integral for n = {n}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_are_split_out() {
        let (rest, o) =
            split_config_flags(&strings(&["solve", "--solve.newton.max_iters", "7", "--out", "x", "--solve.flow.dt=0.5"]))
                .unwrap();
        assert_eq!(rest, strings(&["solve", "--out", "x"]));
        assert_eq!(o, vec![("newton.max_iters".into(), "7".into()), ("flow.dt".into(), "0.5".into())]);
        assert!(split_config_flags(&strings(&["--solve.newton.max_iters"])).is_err());
        assert!(split_config_flags(&strings(&["--solve..x", "1"])).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let o = vec![
            ("newton.residual_tol".to_string(), "1e-8".to_string()),
            ("exhaustion.radii".to_string(), "[4, 8]".to_string()),
            ("exhaustion.method".to_string(), "flow".to_string()),
        ];
        let c = apply_overrides(&SolveConfig::default(), &o).unwrap();
        assert_eq!(c.newton.residual_tol, 1e-8);
        assert_eq!(c.exhaustion.radii, vec![4.0, 8.0]);
        assert_eq!(c.exhaustion.method, crate::solver::Method::Flow);
        let bad = vec![("newton.no_such_key".to_string(), "1".to_string())];
        assert!(apply_overrides(&SolveConfig::default(), &bad).is_err());
    }

    #[test]
    fn usage_errors_exit_with_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(&strings(&["frobnicate"])), 1);
        assert_eq!(run(&strings(&["bundle", "--lambda", "0.3", "--n", "2", "--out", out])), 1);
        assert_eq!(run(&strings(&["bundle", "--lambda", "0.5,-1.5", "--n", "2", "--out", out])), 0);
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], "bundle");
        assert_eq!(manifest["exit_code"], 0);
    }
}
