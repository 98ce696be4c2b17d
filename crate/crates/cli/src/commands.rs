use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use lojax_core::descent::{self, classify_rate, random_start, resolve_x_star, solve_rgd, verify_conditions, RgdOptions};
use lojax_core::io::{self, to_canonical_json, ProblemFile, Provenance, ReadError};
use lojax_core::loja::scan_caps;
use lojax_core::{
    brute_force_stationary, certify, enumerate_stationary, make_case3, make_example1, make_random, CertifyOptions,
    Error as CoreError, Problem, SpherePoint,
};
use serde_json::{json, Value};

use crate::{CertifyArgs, Cli, Command, EstimateArgs, GenArgs, Kind, OracleArgs, SolveArgs, StationaryArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Schema(CoreError),
    #[error("{0}")]
    Analysis(CoreError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Analysis(_) => 2,
            CliError::Io(_) | CliError::Schema(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Schema { .. } => CliError::Schema(e),
            CoreError::InsufficientData { .. } => CliError::Usage(format!(
                "{e}; increase --samples or widen --radii"
            )),
            other => CliError::Analysis(other),
        }
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Io(m) => CliError::Io(m),
            ReadError::Format(e) => CliError::Schema(e),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Ctx<'a> {
    quiet: bool,
    prov: Provenance,
    output: Option<&'a Path>,
}

impl Ctx<'_> {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("lojax: {msg}");
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match self.output {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string())),
        }
    }

    /// Writes `report` with the provenance attached under `provenance`.
    fn emit_report(&self, mut report: Value) -> Result<()> {
        report
            .as_object_mut()
            .expect("reports are objects")
            .insert("provenance".into(), self.prov.to_value());
        self.emit(&to_canonical_json(&report)?)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Stationary(_) => "stationary",
        Command::Estimate(_) => "estimate",
        Command::Run(_) => "run",
        Command::Rate(_) => "rate",
        Command::Oracle(_) => "oracle",
        Command::Certify(_) => "certify",
    }
}

fn output_of(c: &Command) -> Option<&Path> {
    match c {
        Command::Gen(a) => a.output.as_deref(),
        Command::Stationary(a) => a.output.as_deref(),
        Command::Estimate(a) => a.output.as_deref(),
        Command::Run(a) | Command::Rate(a) => a.output.as_deref(),
        Command::Oracle(a) => a.output.as_deref(),
        Command::Certify(a) => a.output.as_deref(),
    }
}

pub fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let config = serde_json::to_value(&cli.command).expect("arguments serialize");
    let config = config.as_object().and_then(|m| m.values().next().cloned()).unwrap_or(config);
    let ctx = Ctx {
        quiet: cli.quiet,
        prov: Provenance::new(command_name(&cli.command), config),
        output: output_of(&cli.command),
    };
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Stationary(a) => stationary(&ctx, a),
        Command::Estimate(a) => estimate(&ctx, a),
        Command::Run(a) => run(&ctx, a),
        Command::Rate(a) => rate(&ctx, a),
        Command::Oracle(a) => oracle(&ctx, a),
        Command::Certify(a) => return certify_cmd(&ctx, a),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<Problem> {
    Ok(io::read_problem(path)?.problem)
}

fn problem_summary(p: &Problem) -> Value {
    json!({"n": p.n(), "kind": p.meta.kind, "seed": p.meta.seed})
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let mut file = match a.kind {
        Kind::Example1 => ProblemFile::new(make_example1()),
        Kind::Random => ProblemFile::new(make_random(a.n, a.seed, (a.eig_lo, a.eig_hi), a.g_scale)?),
        Kind::Gzero => ProblemFile::new(make_random(a.n, a.seed, (a.eig_lo, a.eig_hi), 0.0)?),
        Kind::Case3 => {
            let inst = make_case3(a.n, a.seed, a.lambda_star)?;
            let mut f = ProblemFile::new(inst.problem);
            f.designated_point = Some(inst.x_star.into_vec());
            f
        }
    };
    file.provenance = Some(ctx.prov.to_value());
    ctx.progress(&format!("generated {} instance, n = {}", file.problem.meta.kind, file.problem.n()));
    ctx.emit(&file.to_json()?)
}

fn stationary(ctx: &Ctx, a: &StationaryArgs) -> Result<()> {
    let p = load(&a.input)?;
    let set = enumerate_stationary(&p, a.tol)?;
    ctx.progress(&format!("{} stationary points", set.points.len()));
    let mut report = serde_json::to_value(&set).expect("stationary set serializes");
    report["problem"] = problem_summary(&p);
    ctx.emit_report(report)
}

fn estimate(ctx: &Ctx, a: &EstimateArgs) -> Result<()> {
    let p = load(&a.input)?;
    let set = enumerate_stationary(&p, lojax_core::stationary::DEFAULT_TOL)?;
    let sp = set.points.get(a.point).ok_or_else(|| {
        CliError::Usage(format!(
            "point index {} out of range ({} stationary points)",
            a.point,
            set.points.len()
        ))
    })?;
    ctx.progress(&format!("sampling {} radii × {} samples", a.sampling.radii.len(), a.sampling.samples));
    let scan = scan_caps(&p, sp, &a.sampling.radii, a.sampling.samples, a.sampling.seed)?;
    let est = scan.estimate()?;
    let mut report = serde_json::to_value(&est).expect("estimate serializes");
    report["point_index"] = json!(a.point);
    report["x"] = json!(sp.x.as_slice());
    report["predicted_theta"] = json!(sp.predicted_theta);
    report["ratio_profile"] = json!(scan.ratio_profile(sp.predicted_theta));
    ctx.emit_report(report)
}

fn solve(ctx: &Ctx, a: &SolveArgs) -> Result<(Problem, descent::DescentTrace, SpherePoint)> {
    let p = load(&a.input)?;
    let x0 = match &a.x0 {
        Some(v) => SpherePoint::new(v.clone())?,
        None => random_start(p.n(), a.seed)?,
    };
    let opts = RgdOptions {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        alpha0: a.alpha0,
        backtrack_ratio: a.backtrack_ratio,
        armijo_c: a.armijo_c,
    };
    let trace = solve_rgd(&p, &x0, opts)?;
    let x_star = resolve_x_star(&p, trace.final_iterate())?;
    ctx.progress(&format!("{} steps, stop reason {:?}", trace.n_steps(), trace.stop_reason));
    Ok((p, trace, x_star))
}

fn run(ctx: &Ctx, a: &SolveArgs) -> Result<()> {
    let (_, trace, x_star) = solve(ctx, a)?;
    ctx.emit(&io::trace_to_csv(&trace, Some(&x_star), Some(&ctx.prov)))
}

fn rate(ctx: &Ctx, a: &SolveArgs) -> Result<()> {
    let (p, trace, x_star) = solve(ctx, a)?;
    let mut report = json!({
        "stop_reason": trace.stop_reason,
        "n_steps": trace.n_steps(),
        "x_star": x_star.as_slice(),
        "final_distance": trace.final_iterate().distance(&x_star),
        "tail_step_fraction": trace.tail_step_fraction(0.1),
        "problem": problem_summary(&p),
    });
    match classify_rate(&trace, &x_star) {
        Ok(r) => {
            let v = serde_json::to_value(&r).expect("rate report serializes");
            for (k, val) in v.as_object().unwrap() {
                report[k] = val.clone();
            }
        }
        // non-convergence is data, not a failure
        Err(e) => {
            report["regime"] = Value::Null;
            report["diagnostic"] = json!(e.to_string());
        }
    }
    match verify_conditions(&trace) {
        Ok(c) => {
            report["C1_hat"] = json!(c.c1_hat);
            report["C2_hat"] = json!(c.c2_hat);
            report["violations"] = json!(c.violations);
        }
        Err(e) => report["conditions_diagnostic"] = json!(e.to_string()),
    }
    ctx.emit_report(report)
}

fn oracle(ctx: &Ctx, a: &OracleArgs) -> Result<()> {
    let p = load(&a.input)?;
    let grid = a.grid.unwrap_or(if p.n() == 2 { 10_000 } else { 120 });
    let set = brute_force_stationary(&p, grid)?;
    ctx.progress(&format!("{} stationary points on a grid of {grid}", set.points.len()));
    let mut report = serde_json::to_value(&set).expect("stationary set serializes");
    report["problem"] = problem_summary(&p);
    ctx.emit_report(report)
}

fn certify_cmd(ctx: &Ctx, a: &CertifyArgs) -> Result<ExitCode> {
    let p = load(&a.input)?;
    let opts = CertifyOptions {
        radii: a.sampling.radii.clone(),
        samples: a.sampling.samples,
        seed: a.sampling.seed,
        tol: a.tol,
    };
    let r = certify(&p, &opts)?;
    for v in &r.points {
        ctx.progress(&format!(
            "point {}: predicted {} measured {} → {}",
            v.index,
            v.predicted_theta,
            v.measured_theta.map_or("n/a".into(), |t| format!("{t:.4}")),
            if v.pass { "pass" } else { "FAIL" }
        ));
    }
    let mut report = serde_json::to_value(&r).expect("certify report serializes");
    report["problem"] = problem_summary(&p);
    ctx.emit_report(report)?;
    Ok(if r.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
