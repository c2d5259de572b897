//! Command-line front end: Steklov spectra, zeta values, invariants,
//! variation formulas and the deformation flow, with CSV/JSON output.
//!
//! Exit codes: 0 success, 1 failed identity check, 2 invalid input,
//! 3 numerical failure, 4 flow monotonicity violation.

mod checks;
mod expr;

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use steklov::dtn::{smoothing_difference, spectrum, SteklovSpectrum};
use steklov::fixtures::random_factor;
use steklov::flow::{integrate, monitor_report, FlowError, FlowOptions, FlowTrajectory};
use steklov::harmonics::{normalize, ConformalFactor, HarmonicsError};
use steklov::zeta::{
    first_variation_flow_from_parts, first_variation_general, kogan_zeta_minus1,
    second_variation_at_one, zeta_diff_from_spectrum, zeta_invariant_algebraic, ZetaError,
};
use steklov::TrigPoly;

#[derive(Parser)]
#[command(name = "steklov", version, about = "Steklov spectra, zeta values and the deformation flow of conformal factors on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Function input: a path to a JSON file, or inline JSON
    /// ({"degree": N, "coefficients": [[re, im], ...]} or {"samples": [...]})
    #[arg(long)]
    input: Option<String>,
    /// Function input as an expression, e.g. "1 + 0.3*cos(1*t) + 0.1*sin(3*t)"
    #[arg(long, conflicts_with = "input")]
    expr: Option<String>,
    /// Seed of the random fixture used when neither --input nor --expr is given
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,
    /// Output path (stdout when omitted); files are written atomically
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress informational messages
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Steklov eigenvalues of the input factor
    Spectrum {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Operator truncation N (modes |k| ≤ N)
        #[arg(long, default_value_t = 64)]
        degree: usize,
    },
    /// Regularized zeta difference over an s-grid
    Zeta {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 64)]
        degree: usize,
        /// Comma-separated list of real arguments
        #[arg(long, default_value = "-3,-2,-1.5,-1,-0.5,0.5,2,3", allow_hyphen_values = true)]
        s: String,
    },
    /// Mean coefficient, Kogan's ζ_a(−1) and the algebraic invariants
    Invariants {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Number of algebraic invariants Z_1..Z_M
        #[arg(long, default_value_t = 2)]
        zm: usize,
    },
    /// First variation of ζ along the flow (or a supplied direction);
    /// --second evaluates the second variation at a = 1
    Variation {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 64)]
        degree: usize,
        #[arg(long, default_value = "-2,-1,0.5,2", allow_hyphen_values = true)]
        s: String,
        /// Zero-mean deformation direction g (expression); defaults to the
        /// flow direction g = iHa
        #[arg(long)]
        direction: Option<String>,
        /// Evaluate the second variation at a = 1 along --direction instead
        #[arg(long, requires = "direction")]
        second: bool,
    },
    /// Integrate the zeta-decreasing deformation flow
    Flow {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Truncation used for the zeta probes
        #[arg(long, default_value_t = 64)]
        degree: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 100.0)]
        tau_max: f64,
        /// Convergence tolerance on ‖α − 1‖_∞
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Comma-separated zeta probe arguments
        #[arg(long, default_value = "-2,2", allow_hyphen_values = true)]
        probes: String,
        /// RK4 micro-steps between recorded states
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Run the seeded identity suite
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate the checks without running them
        #[arg(long)]
        list: bool,
        /// Test hook: corrupt the Λ matrix to exercise the failure path
        #[arg(long, hide = true)]
        corrupt_lambda: bool,
        #[arg(long)]
        quiet: bool,
    },
}

enum CliError {
    /// exit 2
    Input(String),
    /// exit 3
    Numerical(String),
    /// exit 4
    FlowViolation(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::FlowViolation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) | CliError::FlowViolation(m) => m,
        }
    }
}

impl From<HarmonicsError> for CliError {
    fn from(e: HarmonicsError) -> Self {
        match e {
            HarmonicsError::NonPositiveSample { .. }
            | HarmonicsError::NonRealCoefficients { .. }
            | HarmonicsError::InvalidMobiusParameter { .. } => CliError::Input(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ZetaError> for CliError {
    fn from(e: ZetaError) -> Self {
        match e {
            ZetaError::MeanNotZero { .. } | ZetaError::PoleAtOne => CliError::Input(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum { input, output, degree } => cmd_spectrum(&input, &output, degree),
        Command::Zeta { input, output, degree, s } => cmd_zeta(&input, &output, degree, &s),
        Command::Invariants { input, output, zm } => cmd_invariants(&input, &output, zm),
        Command::Variation { input, output, degree, s, direction, second } => {
            cmd_variation(&input, &output, degree, &s, direction.as_deref(), second)
        }
        Command::Flow { input, output, degree, dt, tau_max, tol, probes, stride } => {
            cmd_flow(&input, &output, degree, dt, tau_max, tol, &probes, stride)
        }
        Command::Check { seed, list, corrupt_lambda, quiet } => {
            cmd_check(seed, list, corrupt_lambda, quiet)
        }
    }
}

// ---------------------------------------------------------------------------
// input and output plumbing
// ---------------------------------------------------------------------------

fn load_series(args: &InputArgs) -> Result<TrigPoly, CliError> {
    if let Some(src) = &args.expr {
        return expr::parse_expr(src).map_err(CliError::Input);
    }
    if let Some(input) = &args.input {
        let text = if serde_json::from_str::<serde_json::Value>(input).is_ok() {
            input.clone()
        } else {
            std::fs::read_to_string(input)
                .map_err(|e| CliError::Input(format!("cannot read {input}: {e}")))?
        };
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("invalid JSON: {e}")))?;
        return TrigPoly::from_json(&value).map_err(CliError::Input);
    }
    Ok(random_factor(args.seed, 6).series().clone())
}

fn load_factor(args: &InputArgs) -> Result<ConformalFactor, CliError> {
    let series = load_series(args)?;
    Ok(normalize(&series, 0)?)
}

fn parse_grid(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad number `{tok}` in grid")))
        })
        .collect()
}

fn check_truncation(n: usize) -> Result<(), CliError> {
    if n < 8 {
        return Err(CliError::Input(format!("truncation N = {n} is below the minimum 8")));
    }
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Numerical(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Numerical(format!("cannot finalize {}: {e}", path.display())))
}

fn emit(output: &OutputArgs, contents: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// One row of labeled values rendered to CSV or JSON; `None` renders empty.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    fn render(&self, format: &str) -> String {
        if format == "json" {
            let rows: Vec<serde_json::Value> = self
                .rows
                .iter()
                .map(|row| {
                    let mut object = serde_json::Map::new();
                    for (name, value) in self.columns.iter().zip(row.iter()) {
                        let v = match value {
                            Some(x) => serde_json::json!(x),
                            None => serde_json::Value::Null,
                        };
                        object.insert(name.to_string(), v);
                    }
                    serde_json::Value::Object(object)
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&rows).expect("serializable");
            text.push('\n');
            text
        } else {
            let mut text = self.columns.join(",");
            text.push('\n');
            for row in &self.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        Some(x) => format!("{x:.15e}"),
                        None => String::new(),
                    })
                    .collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            text
        }
    }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_spectrum(input: &InputArgs, output: &OutputArgs, degree: usize) -> Result<(), CliError> {
    check_truncation(degree)?;
    let a = load_factor(input)?;
    let spec = spectrum(&a, degree).map_err(|e| CliError::Numerical(e.to_string()))?;
    let text = if output.format == "json" {
        let rows: Vec<serde_json::Value> = (0..spec.len())
            .map(|k| {
                let target = SteklovSpectrum::asymptotic_integer(k);
                serde_json::json!({
                    "k": k,
                    "lambda_k": spec.eigenvalue(k),
                    "asymptotic_integer": target,
                    "residual": (spec.eigenvalue(k) - target as f64).abs(),
                })
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&rows).expect("serializable");
        text.push('\n');
        text
    } else {
        let mut text = String::from("k,lambda_k,asymptotic_integer,residual\n");
        for k in 0..spec.len() {
            let target = SteklovSpectrum::asymptotic_integer(k);
            text.push_str(&format!(
                "{k},{:.15e},{target},{:.15e}\n",
                spec.eigenvalue(k),
                (spec.eigenvalue(k) - target as f64).abs()
            ));
        }
        text
    };
    emit(output, &text)
}

fn cmd_zeta(input: &InputArgs, output: &OutputArgs, degree: usize, s: &str) -> Result<(), CliError> {
    check_truncation(degree)?;
    let grid = parse_grid(s)?;
    let a = load_factor(input)?;
    let spec = spectrum(&a, degree).map_err(|e| CliError::Numerical(e.to_string()))?;
    let rows = grid
        .iter()
        .map(|&s| {
            let v = zeta_diff_from_spectrum(&spec, s);
            vec![Some(s), Some(v.diff), v.zeta_a, Some(v.tail_estimate)]
        })
        .collect();
    let table = Table {
        columns: vec!["s", "diff", "zeta_a", "tail_estimate"],
        rows,
    };
    emit(output, &table.render(&output.format))
}

fn cmd_invariants(input: &InputArgs, output: &OutputArgs, zm: usize) -> Result<(), CliError> {
    let a = load_factor(input)?;
    let mut rows = vec![
        vec![Some(0.0), Some(a.series().coeff(0).re)],
        vec![Some(1.0), Some(kogan_zeta_minus1(&a)?)],
    ];
    for m in 1..=zm {
        rows.push(vec![Some((m + 1) as f64), Some(zeta_invariant_algebraic(&a, m)?)]);
    }
    // first column doubles as the row index in CSV; JSON gets labeled rows
    if output.format == "json" {
        let mut object = serde_json::Map::new();
        object.insert("hat_a0".to_string(), serde_json::json!(rows[0][1].unwrap()));
        object.insert("zeta_minus1".to_string(), serde_json::json!(rows[1][1].unwrap()));
        let zs: Vec<f64> = rows[2..].iter().map(|r| r[1].unwrap()).collect();
        object.insert("z_minus_2m".to_string(), serde_json::json!(zs));
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(object))
            .expect("serializable");
        text.push('\n');
        return emit(output, &text);
    }
    let mut text = String::from("component,value\n");
    text.push_str(&format!("hat_a0,{:.15e}\n", rows[0][1].unwrap()));
    text.push_str(&format!("zeta_minus1,{:.15e}\n", rows[1][1].unwrap()));
    for (m, row) in rows[2..].iter().enumerate() {
        text.push_str(&format!("z_{},{:.15e}\n", m + 1, row[1].unwrap()));
    }
    emit(output, &text)
}

fn cmd_variation(
    input: &InputArgs,
    output: &OutputArgs,
    degree: usize,
    s: &str,
    direction: Option<&str>,
    second: bool,
) -> Result<(), CliError> {
    check_truncation(degree)?;
    let grid = parse_grid(s)?;

    if second {
        let beta = expr::parse_expr(direction.expect("clap requires direction"))
            .map_err(CliError::Input)?;
        let rows = grid
            .iter()
            .map(|&s| Ok(vec![Some(s), Some(second_variation_at_one(&beta, s)?)]))
            .collect::<Result<Vec<_>, CliError>>()?;
        let table = Table { columns: vec!["s", "d2zeta_dtau2"], rows };
        return emit(output, &table.render(&output.format));
    }

    let a = load_factor(input)?;
    let rows = match direction {
        Some(src) => {
            let g = expr::parse_expr(src).map_err(CliError::Input)?;
            grid.iter()
                .map(|&s| Ok(vec![Some(s), Some(first_variation_general(&a, &g, s, degree)?)]))
                .collect::<Result<Vec<_>, CliError>>()?
        }
        None => {
            let spec = spectrum(&a, degree).map_err(|e| CliError::Numerical(e.to_string()))?;
            let delta =
                smoothing_difference(&a, degree).map_err(|e| CliError::Numerical(e.to_string()))?;
            grid.iter()
                .map(|&s| vec![Some(s), Some(first_variation_flow_from_parts(&spec, &delta, s))])
                .collect()
        }
    };
    let table = Table { columns: vec!["s", "dzeta_dtau"], rows };
    emit(output, &table.render(&output.format))
}

fn flow_csv(traj: &FlowTrajectory, probes: &[f64]) -> String {
    let mut header = String::from("tau,hat_a0,mean_integral,normalization_residual,dist_to_one");
    for s in probes {
        header.push_str(&format!(",zeta_diff@s={s}"));
    }
    header.push('\n');
    let mut text = header;
    for state in &traj.states {
        let mut row = format!(
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            state.tau,
            state.factor.series().coeff(0).re,
            state.diagnostics.mean_integral,
            state.diagnostics.normalization_residual,
            state.factor.distance_to_one(),
        );
        for (_, diff) in &state.diagnostics.zeta_probes {
            row.push_str(&format!(",{diff:.15e}"));
        }
        text.push_str(&row);
        text.push('\n');
    }
    text
}

fn flow_sidecar(traj: &FlowTrajectory) -> String {
    let states: Vec<serde_json::Value> = traj
        .states
        .iter()
        .map(|state| {
            serde_json::json!({
                "tau": state.tau,
                "function": state.factor.series().to_coefficient_json(),
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&serde_json::json!({ "states": states }))
        .expect("serializable");
    text.push('\n');
    text
}

fn flow_summary(traj: &FlowTrajectory) -> String {
    let report = monitor_report(traj);
    let mut text = serde_json::to_string_pretty(&serde_json::json!({
        "converged": traj.converged,
        "final_distance": traj.final_distance,
        "tau_end": traj.states.last().map(|s| s.tau),
        "recorded_states": traj.states.len(),
        "monitors": {
            "max_normalization_drift": report.max_normalization_drift,
            "max_mean_increase": report.max_mean_increase,
            "max_zeta_probe_increase": report.max_zeta_probe_increase,
            "max_snapshot_increase": report.max_snapshot_increase,
            "mean_identity_residual": report.mean_identity_residual,
        },
    }))
    .expect("serializable");
    text.push('\n');
    text
}

#[allow(clippy::too_many_arguments)]
fn cmd_flow(
    input: &InputArgs,
    output: &OutputArgs,
    degree: usize,
    dt: f64,
    tau_max: f64,
    tol: f64,
    probes: &str,
    stride: usize,
) -> Result<(), CliError> {
    check_truncation(degree)?;
    if dt <= 0.0 || tau_max <= 0.0 || tol <= 0.0 || stride == 0 {
        return Err(CliError::Input("dt, tau-max, tol and stride must be positive".to_string()));
    }
    let probe_grid = parse_grid(probes)?;
    let a = load_factor(input)?;
    let opts = FlowOptions {
        dt,
        tau_max,
        convergence_tol: tol,
        zeta_probes: probe_grid.clone(),
        truncation: degree,
        record_stride: stride,
        snapshot_invariants: 2,
    };
    let traj = integrate(&a, &opts).map_err(|e| match e {
        FlowError::StepCollapse { tau, detail } => {
            CliError::FlowViolation(format!("offending step at tau = {tau}: {detail}"))
        }
        other => CliError::Numerical(other.to_string()),
    })?;

    let csv = flow_csv(&traj, &probe_grid);
    match &output.out {
        Some(path) => {
            write_atomic(path, &csv)?;
            write_atomic(&path.with_extension("states.json"), &flow_sidecar(&traj))?;
            write_atomic(&path.with_extension("summary.json"), &flow_summary(&traj))?;
            if !output.quiet {
                eprintln!(
                    "flow: converged = {}, final distance = {:.3e}, {} states",
                    traj.converged,
                    traj.final_distance,
                    traj.states.len()
                );
            }
        }
        None => {
            print!("{csv}");
            if !output.quiet {
                eprint!("{}", flow_summary(&traj));
            }
        }
    }
    Ok(())
}

fn cmd_check(seed: u64, list: bool, corrupt_lambda: bool, quiet: bool) -> Result<(), CliError> {
    if list {
        for name in checks::CHECK_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let ctx = checks::CheckContext { seed, corrupt_lambda };
    if checks::run_all(&ctx, quiet) {
        Ok(())
    } else {
        // direct exit: a failed identity is its own exit class
        std::process::exit(1);
    }
}
