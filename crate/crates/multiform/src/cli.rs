//! Command-line front end over the library: model inspection, flow
//! integration, closure and commutation checks, momentum recovery, and the
//! group-chart diagnostics, plus a few canned verification pipelines.
//!
//! Exit codes form the contract scripts can rely on: `0` for success, `2`
//! when a verification check exceeds its tolerance, `3` when a numerical
//! solver fails (divergent integration, stalled Newton), and `4` for usage
//! and input problems. Options resolve as flags over config-file values over
//! built-in defaults, and every randomized quantity derives from `--seed`,
//! so a fixed invocation produces byte-identical output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flows::{
    action, closure_check, flow_commutation, integrate_curve, write_trajectory_csv, FlowError,
    MultiTimeCurve, Trajectory,
};
use crate::legendre::{AlphaVector, LegendreError, MomentumSolver, VelocityField};
use crate::liegroup::{
    cross_consistency, integrate_group_flow, matrix_exp, mc_compatibility, moment_map_violation,
    write_group_trajectory_csv, AlgebraDefinition, GroupChart, GroupTrajectory, LieGroupError,
    DEFAULT_MC_STEP,
};
use crate::models::{self, CheckDrift, ModelBundle, ModelError, SampleSpec};
use crate::phase::{HamiltonianSystem, PhasePoint, SystemDefinition};

/// Hard failures split by exit code: usage and input problems exit 4,
/// numerical solver failures exit 3. Verification failures are not errors;
/// commands report those through their exit status directly.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 4,
            CliError::Solver(_) => 3,
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn flow_error(e: FlowError) -> CliError {
    match e {
        FlowError::NonFiniteState { .. } => CliError::Solver(e.to_string()),
        other => usage(other.to_string()),
    }
}

fn legendre_error(e: LegendreError) -> CliError {
    match e {
        LegendreError::SingularHessian { .. }
        | LegendreError::NoConvergence { .. }
        | LegendreError::DampingStalled { .. } => CliError::Solver(e.to_string()),
        other => usage(other.to_string()),
    }
}

fn group_error(e: LieGroupError) -> CliError {
    match e {
        LieGroupError::Flow(inner) => flow_error(inner),
        LieGroupError::SingularGroupElement => CliError::Solver(e.to_string()),
        other => usage(other.to_string()),
    }
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::LieGroup(inner) => group_error(inner),
        other => usage(other.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "multiform",
    version,
    about = "multi-time Hamiltonian flows, action closure checks, and group charts"
)]
struct Cli {
    #[command(flatten)]
    globals: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON file supplying defaults for tol, steps, points, seed, format
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Verification tolerance; each command has its own default
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Integration step count (default 2000)
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Sample count for randomized checks (default 100)
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Seed for every sampled quantity (default 42)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Data format for --out files
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Write trajectory or report data here (a directory for `report`)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// One header line, then one comma-separated row per sample
    Csv,
    /// One JSON object per line
    JsonLines,
}

impl OutputFormat {
    fn label(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "json-lines",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List built-in models or print one as JSON
    Models {
        #[command(subcommand)]
        action: ModelsAction,
    },
    /// Sample phase points and bound the pairwise bracket residuals
    CheckInvolutivity {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Integrate the multi-time flow along a piecewise-linear time path
    Flow {
        #[command(flatten)]
        model: ModelArgs,
        /// Time path as `t` nodes: `0,0;0.7,0;0.7,0.5`
        #[arg(long)]
        curve: String,
        /// Start state `p1,..,pm,q1,..,qm`; sampled from the seed if absent
        #[arg(long)]
        state: Option<String>,
    },
    /// Compare endpoint and action across two time paths with shared ends
    Closure {
        #[command(flatten)]
        model: ModelArgs,
        /// First time path
        #[arg(long)]
        curve: String,
        /// Second time path; must share both endpoints with the first
        #[arg(long)]
        curve_b: String,
        #[arg(long)]
        state: Option<String>,
    },
    /// Flow along two times in both orders and compare the endpoints
    Commute {
        #[command(flatten)]
        model: ModelArgs,
        /// First flow index, 1-based
        #[arg(long)]
        i: usize,
        /// Second flow index, 1-based
        #[arg(long)]
        j: usize,
        /// Duration along flow i
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        /// Duration along flow j
        #[arg(long, default_value_t = 0.7)]
        b: f64,
        #[arg(long)]
        state: Option<String>,
    },
    /// Recover momenta from on-shell velocity data by damped Newton
    Legendre {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        state: Option<String>,
        /// Weights contracting the Hamiltonian family, e.g. `1,0.2`
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Integrate the chart-twisted flow over group coordinates
    GroupFlow {
        #[command(flatten)]
        model: ModelArgs,
        /// Group-coordinate path as `tau` nodes: `0,0;0.4,0;0.4,0.6`
        #[arg(long)]
        curve: String,
        #[arg(long)]
        state: Option<String>,
    },
    /// Check chart flatness, the moment map, and twisted-flow commutation
    McCheck {
        #[command(flatten)]
        model: ModelArgs,
        /// Check the chart at this single point instead of sampling
        #[arg(long)]
        tau: Option<String>,
    },
    /// Run a canned verification pipeline
    Report {
        #[arg(long, value_enum)]
        name: ReportName,
    },
}

#[derive(Debug, Subcommand)]
enum ModelsAction {
    /// Names and one-line descriptions
    List,
    /// Print a model's system definition as JSON
    Show {
        #[command(flatten)]
        model: ModelArgs,
        /// Print the attached algebra definition instead
        #[arg(long)]
        algebra_json: bool,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in name (ho, ho-su2, toda-<m>, conformal, lorentz) or a system
    /// definition JSON file
    #[arg(long)]
    model: String,
    /// Algebra definition JSON, for group commands on file-based models
    #[arg(long, value_name = "PATH")]
    algebra: Option<PathBuf>,
    /// Chart: `single`, `product`, or `product:2,1` (1-based factor order)
    #[arg(long)]
    chart: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportName {
    /// Two staircase paths on a 3-site chain agree in endpoint and action
    TodaClosure,
    /// Chart-twisted invariants stay flat along random group paths
    ConformalInvariants,
    /// A straight flow reproduces the matrix group action, with its action
    LorentzAction,
}

#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    tol: Option<f64>,
    steps: Option<usize>,
    points: Option<usize>,
    seed: Option<u64>,
    format: Option<String>,
}

struct Settings {
    tol: Option<f64>,
    steps: usize,
    points: usize,
    seed: u64,
    format: OutputFormat,
    out: Option<PathBuf>,
}

fn resolve_settings(globals: &GlobalArgs) -> Result<Settings, CliError> {
    let config = match &globals.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))?;
            serde_json::from_str::<ConfigFile>(&text)
                .map_err(|e| usage(format!("config `{}`: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let format = match globals.format {
        Some(f) => f,
        None => match &config.format {
            Some(name) => <OutputFormat as ValueEnum>::from_str(name, true)
                .map_err(|_| usage(format!("config format `{name}`: use csv or json-lines")))?,
            None => OutputFormat::Csv,
        },
    };
    Ok(Settings {
        tol: globals.tol.or(config.tol),
        steps: globals.steps.or(config.steps).unwrap_or(2000),
        points: globals.points.or(config.points).unwrap_or(100),
        seed: globals.seed.or(config.seed).unwrap_or(42),
        format,
        out: globals.out.clone(),
    })
}

/// Parses argv and runs one command, returning the process exit code.
pub fn run(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; clap marks them for stdout
            let code = if err.use_stderr() { 4 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let settings = match resolve_settings(&cli.globals) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match execute(cli.command, &settings) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command, s: &Settings) -> Result<bool, CliError> {
    match command {
        Command::Models { action } => cmd_models(action, s),
        Command::CheckInvolutivity { model } => {
            let bundle = load_model(&model)?;
            cmd_check_involutivity(&bundle, s)
        }
        Command::Flow {
            model,
            curve,
            state,
        } => {
            let bundle = load_model(&model)?;
            cmd_flow(&bundle, &curve, state.as_deref(), s)
        }
        Command::Closure {
            model,
            curve,
            curve_b,
            state,
        } => {
            let bundle = load_model(&model)?;
            cmd_closure(&bundle, &curve, &curve_b, state.as_deref(), s)
        }
        Command::Commute {
            model,
            i,
            j,
            a,
            b,
            state,
        } => {
            let bundle = load_model(&model)?;
            cmd_commute(&bundle, i, j, a, b, state.as_deref(), s)
        }
        Command::Legendre {
            model,
            state,
            alpha,
        } => {
            let bundle = load_model(&model)?;
            cmd_legendre(&bundle, state.as_deref(), alpha.as_deref(), s)
        }
        Command::GroupFlow {
            model,
            curve,
            state,
        } => {
            let bundle = load_model(&model)?;
            cmd_group_flow(&bundle, &curve, state.as_deref(), s)
        }
        Command::McCheck { model, tau } => {
            let bundle = load_model(&model)?;
            cmd_mc_check(&bundle, tau.as_deref(), s)
        }
        Command::Report { name } => cmd_report(name, s),
    }
}

// ---- input parsing ----

fn parse_numbers(what: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{tok}` is not a number")))
        })
        .collect()
}

fn parse_curve(text: &str) -> Result<MultiTimeCurve, CliError> {
    let nodes = text
        .split(';')
        .map(|node| parse_numbers("curve node", node))
        .collect::<Result<Vec<_>, _>>()?;
    MultiTimeCurve::new(nodes).map_err(|e| usage(e.to_string()))
}

fn parse_state(text: &str, m: usize) -> Result<PhasePoint, CliError> {
    let values = parse_numbers("state", text)?;
    if values.len() != 2 * m {
        return Err(usage(format!(
            "state needs {} values (p1..p{m}, q1..q{m}), got {}",
            2 * m,
            values.len()
        )));
    }
    let (p, q) = values.split_at(m);
    PhasePoint::new(p.to_vec(), q.to_vec()).map_err(|e| usage(e.to_string()))
}

fn parse_chart(spec: &str, n: usize) -> Result<GroupChart, CliError> {
    if spec == "single" {
        return Ok(GroupChart::single());
    }
    if spec == "product" {
        return Ok(GroupChart::product((0..n).collect()));
    }
    if let Some(rest) = spec.strip_prefix("product:") {
        let order = parse_numbers("chart factor", rest)?
            .into_iter()
            .map(|v| {
                if v.fract() == 0.0 && v >= 1.0 {
                    Ok(v as usize - 1)
                } else {
                    Err(usage(format!(
                        "chart factor `{v}` must be a 1-based generator index"
                    )))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(GroupChart::product(order));
    }
    Err(usage(format!(
        "chart `{spec}` not recognized; use `single`, `product`, or `product:2,1`"
    )))
}

fn resolve_state(
    text: Option<&str>,
    bundle: &ModelBundle,
    seed: u64,
) -> Result<PhasePoint, CliError> {
    match text {
        Some(t) => parse_state(t, bundle.system.m()),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(bundle.sample_point(&mut rng))
        }
    }
}

fn load_model(args: &ModelArgs) -> Result<ModelBundle, CliError> {
    let mut bundle = match models::builtin(&args.model) {
        Ok(bundle) => {
            if args.algebra.is_some() {
                return Err(usage(format!(
                    "`{}` is built in and carries its own algebra; --algebra only applies to definition files",
                    args.model
                )));
            }
            bundle
        }
        Err(ModelError::Unknown { .. }) => load_model_file(args)?,
        Err(e) => return Err(usage(e.to_string())),
    };
    if let Some(spec) = &args.chart {
        let n = match &bundle.algebra {
            Some(algebra) => algebra.n(),
            None => bundle.system.n(),
        };
        bundle.chart = Some(parse_chart(spec, n)?);
    } else if bundle.chart.is_none() && bundle.algebra.is_some() {
        bundle.chart = Some(GroupChart::single());
    }
    Ok(bundle)
}

fn load_model_file(args: &ModelArgs) -> Result<ModelBundle, CliError> {
    let path = Path::new(&args.model);
    let text = fs::read_to_string(path).map_err(|e| {
        usage(format!(
            "`{}` is not a built-in model and cannot be read as a file: {e}",
            args.model
        ))
    })?;
    let definition = SystemDefinition::from_json(&text)
        .map_err(|e| usage(format!("`{}`: {e}", args.model)))?;
    let system = definition
        .to_system()
        .map_err(|e| usage(format!("`{}`: {e}", args.model)))?;
    let algebra = match &args.algebra {
        Some(algebra_path) => {
            let text = fs::read_to_string(algebra_path).map_err(|e| {
                usage(format!("cannot read `{}`: {e}", algebra_path.display()))
            })?;
            let definition = AlgebraDefinition::from_json(&text)
                .map_err(|e| usage(format!("`{}`: {e}", algebra_path.display())))?;
            Some(
                definition
                    .to_algebra()
                    .map_err(|e| usage(format!("`{}`: {e}", algebra_path.display())))?,
            )
        }
        None => None,
    };
    let name = path
        .file_stem()
        .map(|stem| stem.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.model.clone());
    Ok(ModelBundle {
        name,
        description: "user-supplied definition".into(),
        definition,
        system,
        algebra,
        chart: None,
        reference_checks: Vec::new(),
        sample: SampleSpec::plain(),
    })
}

// ---- output helpers ----

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn fmt_vec(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn chart_label(chart: &GroupChart) -> String {
    match chart {
        GroupChart::SingleExponential => "single-exponential".into(),
        GroupChart::ProductOfExponentials { order } => {
            let parts: Vec<String> = order.iter().map(|i| (i + 1).to_string()).collect();
            format!("product({})", parts.join(","))
        }
    }
}

fn print_reference_drifts(drifts: &[CheckDrift]) -> bool {
    let mut all = true;
    for d in drifts {
        println!(
            "check {}: drift {:.3e} (tol {:.3e}) .. {}",
            d.name,
            d.drift,
            d.tol,
            verdict(d.pass)
        );
        all &= d.pass;
    }
    all
}

fn create_out(path: &Path) -> Result<io::BufWriter<fs::File>, CliError> {
    let file = fs::File::create(path)
        .map_err(|e| usage(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(io::BufWriter::new(file))
}

fn write_trajectory_json_lines<W: io::Write>(
    sys: &HamiltonianSystem,
    traj: &Trajectory,
    mut out: W,
) -> io::Result<()> {
    let m = sys.m();
    for sample in traj.samples() {
        let (p, q) = sample.state.split_at(m);
        let h = sys.h_values(&sample.state);
        let line = serde_json::json!({ "s": sample.s, "t": sample.t, "p": p, "q": q, "h": h });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn write_group_trajectory_json_lines<W: io::Write>(
    sys: &HamiltonianSystem,
    traj: &GroupTrajectory,
    mut out: W,
) -> io::Result<()> {
    let m = sys.m();
    for sample in traj.samples() {
        let (p, q) = sample.state.split_at(m);
        let h = sys.h_values(&sample.state);
        let line = serde_json::json!({
            "s": sample.s, "tau": sample.tau, "p": p, "q": q, "h": h, "k": sample.k,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn write_plain_trajectory(
    sys: &HamiltonianSystem,
    traj: &Trajectory,
    path: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let mut out = create_out(path)?;
    match format {
        OutputFormat::Csv => write_trajectory_csv(sys, traj, &mut out),
        OutputFormat::JsonLines => write_trajectory_json_lines(sys, traj, &mut out),
    }
    .map_err(|e| usage(format!("cannot write `{}`: {e}", path.display())))?;
    println!(
        "wrote trajectory: {} ({}, {} samples)",
        path.display(),
        format.label(),
        traj.samples().len()
    );
    Ok(())
}

fn write_group_trajectory(
    sys: &HamiltonianSystem,
    traj: &GroupTrajectory,
    path: &Path,
    format: OutputFormat,
) -> Result<(), CliError> {
    let mut out = create_out(path)?;
    match format {
        OutputFormat::Csv => write_group_trajectory_csv(sys, traj, &mut out),
        OutputFormat::JsonLines => write_group_trajectory_json_lines(sys, traj, &mut out),
    }
    .map_err(|e| usage(format!("cannot write `{}`: {e}", path.display())))?;
    println!(
        "wrote trajectory: {} ({}, {} samples)",
        path.display(),
        format.label(),
        traj.samples().len()
    );
    Ok(())
}

// ---- commands ----

fn cmd_models(action: ModelsAction, s: &Settings) -> Result<bool, CliError> {
    match action {
        ModelsAction::List => {
            for name in models::builtin_names() {
                let bundle = models::builtin(name).map_err(model_error)?;
                println!("{name:<12}{}", bundle.description);
            }
            Ok(true)
        }
        ModelsAction::Show {
            model,
            algebra_json,
        } => {
            let bundle = load_model(&model)?;
            let text = if algebra_json {
                let algebra = bundle
                    .algebra
                    .as_ref()
                    .ok_or_else(|| usage(format!("model `{}` has no algebra", bundle.name)))?;
                AlgebraDefinition::from_algebra(algebra).to_json()
            } else {
                bundle.definition.to_json()
            };
            match &s.out {
                Some(path) => {
                    fs::write(path, text + "\n")
                        .map_err(|e| usage(format!("cannot write `{}`: {e}", path.display())))?;
                    println!("wrote definition: {}", path.display());
                }
                None => println!("{text}"),
            }
            Ok(true)
        }
    }
}

/// Worst sampled residual: raw pairwise brackets for plain families, the
/// bracket-vs-table gap for families that carry an algebra.
fn involutivity_residual(bundle: &ModelBundle, points: usize, seed: u64) -> Result<f64, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..points {
        let x = bundle.sample_point(&mut rng);
        let residual = match &bundle.algebra {
            None => {
                let brackets = bundle
                    .system
                    .involutivity_matrix(&x)
                    .map_err(|e| usage(e.to_string()))?;
                brackets.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
            }
            Some(algebra) => {
                moment_map_violation(&bundle.system, algebra, &x).map_err(group_error)?
            }
        };
        worst = worst.max(residual);
    }
    Ok(worst)
}

fn cmd_check_involutivity(bundle: &ModelBundle, s: &Settings) -> Result<bool, CliError> {
    let tol = s.tol.unwrap_or(1e-9);
    let label = match &bundle.algebra {
        None => "pairwise brackets",
        Some(_) => "moment map",
    };
    let worst = involutivity_residual(bundle, s.points, s.seed)?;
    println!("model: {}", bundle.name);
    println!("check: {label} over {} points (seed {})", s.points, s.seed);
    let pass = worst <= tol;
    println!(
        "max residual: {worst:.3e} (tol {tol:.3e}) .. {}",
        verdict(pass)
    );
    Ok(pass)
}

fn cmd_flow(
    bundle: &ModelBundle,
    curve_text: &str,
    state_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let curve = parse_curve(curve_text)?;
    let x0 = resolve_state(state_text, bundle, s.seed)?;
    let traj = integrate_curve(&bundle.system, &curve, &x0, s.steps).map_err(flow_error)?;
    let act = action(&bundle.system, &traj).map_err(flow_error)?;

    println!("model: {}", bundle.name);
    println!(
        "curve: {} nodes, {} steps",
        curve.nodes().len(),
        traj.steps()
    );
    let end = traj.endpoint();
    println!("start: p = {}, q = {}", fmt_vec(x0.p()), fmt_vec(x0.q()));
    println!("end:   p = {}, q = {}", fmt_vec(end.p()), fmt_vec(end.q()));
    println!("action: {act:.12}");

    let h0 = bundle.system.h_values(&traj.samples()[0].state);
    let mut drift = vec![0.0_f64; bundle.system.n()];
    for sample in traj.samples() {
        let h = bundle.system.h_values(&sample.state);
        for (d, (now, start)) in drift.iter_mut().zip(h.iter().zip(h0.iter())) {
            *d = d.max((now - start).abs());
        }
    }
    for (name, d) in bundle.system.names().iter().zip(drift.iter()) {
        println!("drift {name}: {d:.3e}");
    }

    let drifts = bundle.reference_drift(&traj).map_err(model_error)?;
    let pass = print_reference_drifts(&drifts);
    if let Some(path) = &s.out {
        write_plain_trajectory(&bundle.system, &traj, path, s.format)?;
    }
    Ok(pass)
}

fn cmd_closure(
    bundle: &ModelBundle,
    curve_text: &str,
    curve_b_text: &str,
    state_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let tol = s.tol.unwrap_or(1e-6);
    let curve_a = parse_curve(curve_text)?;
    let curve_b = parse_curve(curve_b_text)?;
    let x0 = resolve_state(state_text, bundle, s.seed)?;
    let report =
        closure_check(&bundle.system, &x0, &curve_a, &curve_b, s.steps).map_err(flow_error)?;

    println!("model: {}", bundle.name);
    println!("steps: {} per path", s.steps);
    println!("action a: {:.12}", report.action_a);
    println!("action b: {:.12}", report.action_b);
    let endpoint_pass = report.endpoint_gap <= tol;
    let action_pass = report.action_gap <= tol;
    println!(
        "endpoint gap: {:.3e} (tol {tol:.3e}) .. {}",
        report.endpoint_gap,
        verdict(endpoint_pass)
    );
    println!(
        "action gap: {:.3e} (tol {tol:.3e}) .. {}",
        report.action_gap,
        verdict(action_pass)
    );
    Ok(endpoint_pass && action_pass)
}

fn cmd_commute(
    bundle: &ModelBundle,
    i: usize,
    j: usize,
    a: f64,
    b: f64,
    state_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let n = bundle.system.n();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(usage(format!("flow indices are 1..={n}, got i={i}, j={j}")));
    }
    if i == j {
        return Err(usage("flow indices must differ"));
    }
    let tol = s.tol.unwrap_or(1e-6);
    let x0 = resolve_state(state_text, bundle, s.seed)?;
    let report =
        flow_commutation(&bundle.system, i - 1, j - 1, a, b, &x0, s.steps).map_err(flow_error)?;

    println!("model: {}", bundle.name);
    println!(
        "flows: {} for {a}, {} for {b}, both orders, {} steps each leg",
        bundle.system.names()[i - 1],
        bundle.system.names()[j - 1],
        s.steps
    );
    let pass = report.gap <= tol;
    println!(
        "endpoint gap: {:.3e} (tol {tol:.3e}) .. {}",
        report.gap,
        verdict(pass)
    );
    Ok(pass)
}

fn cmd_legendre(
    bundle: &ModelBundle,
    state_text: Option<&str>,
    alpha_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let n = bundle.system.n();
    let tol = s.tol.unwrap_or(1e-6);
    let alpha = match alpha_text {
        Some(text) => {
            let values = parse_numbers("alpha", text)?;
            if values.len() != n {
                return Err(usage(format!(
                    "alpha needs {n} weights, got {}",
                    values.len()
                )));
            }
            AlphaVector::new(values).map_err(|e| usage(e.to_string()))?
        }
        None => {
            let mut values = vec![0.0; n];
            values[0] = 1.0;
            AlphaVector::new(values).expect("unit weight vector is valid")
        }
    };
    let x = resolve_state(state_text, bundle, s.seed)?;
    let solver = MomentumSolver::new(&bundle.system, alpha.clone()).map_err(legendre_error)?;
    let vf = VelocityField::on_shell(&bundle.system, &x).map_err(legendre_error)?;
    let solution = solver.solve(&vf, None).map_err(legendre_error)?;

    let momentum_gap = solution
        .p
        .iter()
        .zip(x.p().iter())
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    let margin = solver
        .convexity_margin(&solution.p, x.q())
        .map_err(legendre_error)?;
    let roundtrip = solver.roundtrip(&x).map_err(legendre_error)?;

    println!("model: {}", bundle.name);
    println!("alpha: {}", fmt_vec(alpha.coefficients()));
    println!(
        "newton: {} iterations, final residual {:.3e}",
        solution.iterations,
        solution.final_residual()
    );
    let pass = momentum_gap <= tol;
    println!(
        "momentum gap: {momentum_gap:.3e} (tol {tol:.3e}) .. {}",
        verdict(pass)
    );
    println!("convexity margin: {margin:.6}");
    println!(
        "euler roundtrip: momentum gap {:.3e}, hamiltonian gap {:.3e} (finite-difference route, informational)",
        roundtrip.momentum_gap, roundtrip.hamiltonian_gap
    );
    Ok(pass)
}

fn require_group(
    bundle: &ModelBundle,
) -> Result<(&crate::liegroup::LieAlgebra, &GroupChart), CliError> {
    let algebra = bundle.algebra.as_ref().ok_or_else(|| {
        usage(format!(
            "model `{}` has no algebra; supply --algebra (and optionally --chart)",
            bundle.name
        ))
    })?;
    let chart = bundle
        .chart
        .as_ref()
        .expect("model loading applies a default chart whenever an algebra exists");
    Ok((algebra, chart))
}

fn cmd_group_flow(
    bundle: &ModelBundle,
    curve_text: &str,
    state_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let (algebra, chart) = require_group(bundle)?;
    let curve = parse_curve(curve_text)?;
    let x0 = resolve_state(state_text, bundle, s.seed)?;
    let traj = integrate_group_flow(&bundle.system, algebra, chart, &curve, &x0, s.steps)
        .map_err(group_error)?;

    println!("model: {}", bundle.name);
    println!("chart: {}", chart_label(chart));
    println!(
        "curve: {} nodes, {} steps",
        curve.nodes().len(),
        traj.steps()
    );
    let end = traj.endpoint();
    println!("start: p = {}, q = {}", fmt_vec(x0.p()), fmt_vec(x0.q()));
    println!("end:   p = {}, q = {}", fmt_vec(end.p()), fmt_vec(end.q()));

    let drifts = bundle.reference_drift_group(&traj).map_err(model_error)?;
    let pass = print_reference_drifts(&drifts);
    if let Some(path) = &s.out {
        write_group_trajectory(&bundle.system, &traj, path, s.format)?;
    }
    Ok(pass)
}

fn cmd_mc_check(
    bundle: &ModelBundle,
    tau_text: Option<&str>,
    s: &Settings,
) -> Result<bool, CliError> {
    let (algebra, chart) = require_group(bundle)?;
    let tol = s.tol.unwrap_or(1e-6);
    let n = algebra.n();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    let taus: Vec<Vec<f64>> = match tau_text {
        Some(text) => vec![parse_numbers("tau", text)?],
        None => (0..s.points.min(20))
            .map(|_| (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect())
            .collect(),
    };

    let mut worst_flat = 0.0_f64;
    for tau in &taus {
        let violation = mc_compatibility(algebra, chart, tau, DEFAULT_MC_STEP).map_err(group_error)?;
        worst_flat = worst_flat.max(violation);
    }

    let mut worst_moment = 0.0_f64;
    for _ in 0..s.points {
        let x = bundle.sample_point(&mut rng);
        let violation = moment_map_violation(&bundle.system, algebra, &x).map_err(group_error)?;
        worst_moment = worst_moment.max(violation);
    }

    let mut worst_cross = 0.0_f64;
    let cross_pairs = taus.len().min(3);
    for tau in taus.iter().take(cross_pairs) {
        let x = bundle.sample_point(&mut rng);
        let violation = cross_consistency(&bundle.system, algebra, chart, tau, &x, DEFAULT_MC_STEP)
            .map_err(group_error)?;
        worst_cross = worst_cross.max(violation);
    }

    println!("model: {}", bundle.name);
    println!("chart: {}", chart_label(chart));
    let flat_pass = worst_flat <= tol;
    let moment_pass = worst_moment <= tol;
    let cross_pass = worst_cross <= tol;
    println!(
        "flatness: max violation {worst_flat:.3e} over {} charts (tol {tol:.3e}) .. {}",
        taus.len(),
        verdict(flat_pass)
    );
    println!(
        "moment map: max violation {worst_moment:.3e} over {} points .. {}",
        s.points,
        verdict(moment_pass)
    );
    println!(
        "cross-consistency: max violation {worst_cross:.3e} over {cross_pairs} pairs .. {}",
        verdict(cross_pass)
    );
    Ok(flat_pass && moment_pass && cross_pass)
}

// ---- canned reports ----

fn cmd_report(name: ReportName, s: &Settings) -> Result<bool, CliError> {
    if let Some(dir) = &s.out {
        fs::create_dir_all(dir)
            .map_err(|e| usage(format!("cannot create `{}`: {e}", dir.display())))?;
    }
    match name {
        ReportName::TodaClosure => report_toda_closure(s),
        ReportName::ConformalInvariants => report_conformal_invariants(s),
        ReportName::LorentzAction => report_lorentz_action(s),
    }
}

fn report_toda_closure(s: &Settings) -> Result<bool, CliError> {
    let tol = s.tol.unwrap_or(1e-6);
    let bundle = models::builtin("toda-3").map_err(model_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let x0 = bundle.sample_point(&mut rng);
    let curve_a =
        MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.8, 0.0], vec![0.8, 0.5]])
            .expect("fixed staircase is a valid curve");
    let curve_b =
        MultiTimeCurve::new(vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.8, 0.5]])
            .expect("fixed staircase is a valid curve");

    println!("report: toda-closure");
    println!("model: {} (seed {})", bundle.name, s.seed);

    let invol = involutivity_residual(&bundle, s.points, s.seed)?;
    let invol_pass = invol <= 1e-9;
    println!(
        "involutivity: max residual {invol:.3e} over {} points (tol 1.000e-9) .. {}",
        s.points,
        verdict(invol_pass)
    );

    let report =
        closure_check(&bundle.system, &x0, &curve_a, &curve_b, s.steps).map_err(flow_error)?;
    let endpoint_pass = report.endpoint_gap <= tol;
    let action_pass = report.action_gap <= tol;
    println!(
        "two staircases to (0.8, 0.5), {} steps each:",
        s.steps
    );
    println!("  action a: {:.12}", report.action_a);
    println!("  action b: {:.12}", report.action_b);
    println!(
        "  endpoint gap: {:.3e} (tol {tol:.3e}) .. {}",
        report.endpoint_gap,
        verdict(endpoint_pass)
    );
    println!(
        "  action gap: {:.3e} (tol {tol:.3e}) .. {}",
        report.action_gap,
        verdict(action_pass)
    );

    if let Some(dir) = &s.out {
        for (label, curve) in [("path_a", &curve_a), ("path_b", &curve_b)] {
            let traj = integrate_curve(&bundle.system, curve, &x0, s.steps).map_err(flow_error)?;
            let ext = match s.format {
                OutputFormat::Csv => "csv",
                OutputFormat::JsonLines => "jsonl",
            };
            write_plain_trajectory(&bundle.system, &traj, &dir.join(format!("{label}.{ext}")), s.format)?;
        }
    }
    Ok(invol_pass && endpoint_pass && action_pass)
}

fn report_conformal_invariants(s: &Settings) -> Result<bool, CliError> {
    let bundle = models::builtin("conformal").map_err(model_error)?;
    let (algebra, chart) = require_group(&bundle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);

    println!("report: conformal-invariants");
    println!("model: {} (seed {})", bundle.name, s.seed);
    println!("chart: {}", chart_label(chart));

    let mut all = true;
    for run in 1..=3 {
        let x0 = bundle.sample_point(&mut rng);
        let mid: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let end: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let curve = MultiTimeCurve::new(vec![vec![0.0, 0.0], mid, end])
            .map_err(flow_error)?;
        let traj = integrate_group_flow(&bundle.system, algebra, chart, &curve, &x0, s.steps)
            .map_err(group_error)?;
        println!("run {run}: q0 = {:.6}, p0 = {:.6}", x0.q()[0], x0.p()[0]);
        let drifts = bundle.reference_drift_group(&traj).map_err(model_error)?;
        for d in &drifts {
            println!(
                "  check {}: drift {:.3e} (tol {:.3e}) .. {}",
                d.name,
                d.drift,
                d.tol,
                verdict(d.pass)
            );
            all &= d.pass;
        }
        if let Some(dir) = &s.out {
            let ext = match s.format {
                OutputFormat::Csv => "csv",
                OutputFormat::JsonLines => "jsonl",
            };
            write_group_trajectory(
                &bundle.system,
                &traj,
                &dir.join(format!("run_{run}.{ext}")),
                s.format,
            )?;
        }
    }
    Ok(all)
}

fn report_lorentz_action(s: &Settings) -> Result<bool, CliError> {
    let tol = s.tol.unwrap_or(1e-8);
    let bundle = models::builtin("lorentz").map_err(model_error)?;
    let algebra = bundle
        .algebra
        .as_ref()
        .expect("the lorentz bundle carries its algebra");
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let x0 = bundle.sample_point(&mut rng);
    let t: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let curve = MultiTimeCurve::new(vec![vec![0.0; 6], t.clone()])
        .expect("straight segment is a valid curve");

    println!("report: lorentz-action");
    println!("model: {} (seed {})", bundle.name, s.seed);
    println!("direction: {}", fmt_vec(&t));

    let traj = integrate_curve(&bundle.system, &curve, &x0, s.steps).map_err(flow_error)?;
    let act = action(&bundle.system, &traj).map_err(flow_error)?;
    // For bilinear generators the one-form vanishes on shell: p dq/ds equals
    // the contracted Hamiltonians exactly, so the action must come out zero.
    let action_pass = act.abs() <= 1e-10;
    println!(
        "action: {act:.12} (bilinear generators integrate to zero, tol 1.000e-10) .. {}",
        verdict(action_pass)
    );

    let mut generator = nalgebra::DMatrix::zeros(4, 4);
    for (k, tk) in t.iter().enumerate() {
        generator += algebra.basis_matrix(k) * *tk;
    }
    let lambda = matrix_exp(&(-&generator));
    let inv_transpose = matrix_exp(&generator.transpose());
    let end = traj.endpoint();
    let mut endpoint_gap = 0.0_f64;
    for mu in 0..4 {
        let q_exact: f64 = (0..4).map(|nu| lambda[(mu, nu)] * x0.q()[nu]).sum();
        let p_exact: f64 = (0..4).map(|nu| inv_transpose[(mu, nu)] * x0.p()[nu]).sum();
        endpoint_gap = endpoint_gap
            .max((end.q()[mu] - q_exact).abs())
            .max((end.p()[mu] - p_exact).abs());
    }
    let endpoint_pass = endpoint_gap <= tol;
    println!(
        "endpoint vs matrix action: gap {endpoint_gap:.3e} (tol {tol:.3e}) .. {}",
        verdict(endpoint_pass)
    );

    let drifts = bundle.reference_drift(&traj).map_err(model_error)?;
    let mut all = endpoint_pass && action_pass;
    for d in &drifts {
        println!(
            "check {}: drift {:.3e} (tol {:.3e}) .. {}",
            d.name,
            d.drift,
            d.tol,
            verdict(d.pass)
        );
        all &= d.pass;
    }

    if let Some(dir) = &s.out {
        let ext = match s.format {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        };
        write_plain_trajectory(
            &bundle.system,
            &traj,
            &dir.join(format!("trajectory.{ext}")),
            s.format,
        )?;
    }
    Ok(all)
}
