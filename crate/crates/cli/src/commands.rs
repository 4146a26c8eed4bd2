//! Command-line surface: argument parsing and the five subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use riskcalc_core::{
    avar_lower, avar_upper, cdf, certify, constraint_values,
    dominates_first_order, dominates_second_order, first_order_margin, in_b, integrated_cdf,
    lorenz, lorenz_conjugate, quantile, second_order_margin, selftest, solve, uniform_dominance_margin,
    CertifyOptions, DecisionPoint, ProblemSpec, RandomVariable, SolverOptions,
};
use serde_json::{json, Map, Value};

use crate::diag::{Code, Diagnostic};
use crate::problem::{parse_problem, ProblemFile};
use crate::report::{blocks, num, nums, InputInfo, Report};

type Outcome = Result<(Report, i32), Diagnostic>;

#[derive(Debug, Parser)]
#[command(name = "riskcalc", version, about = "Risk measures, Lorenz dominance and certified risk minimization on finite scenario sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    problem: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Feasibility tolerance for `solve`, certificate tolerance for `certify`.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,
    /// Solver iteration budget.
    #[arg(long, global = true, value_name = "N")]
    iters: Option<usize>,
    /// Seed for `selftest`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distribution, quantile, shortfall, Lorenz and AVaR values of the
    /// file's variables.
    Eval(EvalArgs),
    /// First- and second-order dominance verdicts and margins.
    Dominance(DominanceArgs),
    /// Solve the dominance-constrained problem.
    Solve,
    /// Build an optimality certificate at a point.
    Certify(CertifyArgs),
    /// Run the property checks at reduced scale.
    Selftest,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Only evaluate this variable.
    #[arg(long, value_name = "NAME")]
    var: Option<String>,
    /// P[Z ≤ η]; repeatable.
    #[arg(long, value_name = "eta=X")]
    cdf: Vec<String>,
    /// Left p-quantile.
    #[arg(long, value_name = "p=P")]
    quantile: Vec<String>,
    /// E[(η − Z)+].
    #[arg(long = "integrated-cdf", value_name = "eta=X")]
    integrated_cdf: Vec<String>,
    /// Absolute Lorenz curve at p.
    #[arg(long, value_name = "p=P")]
    lorenz: Vec<String>,
    /// Conjugate of the integrated CDF at p ∈ [0, 1].
    #[arg(long = "lorenz-conjugate", value_name = "p=P")]
    lorenz_conjugate: Vec<String>,
    /// Lower-tail AVaR of a profit, −L(p)/p.
    #[arg(long = "avar-lower", value_name = "p=P")]
    avar_lower: Vec<String>,
    /// Upper-tail AVaR of a loss.
    #[arg(long = "avar-upper", value_name = "p=P")]
    avar_upper: Vec<String>,
}

#[derive(Debug, Args)]
struct DominanceArgs {
    /// Name of the dominating candidate (default `X`, else the first variable).
    #[arg(long, value_name = "NAME")]
    x: Option<String>,
    /// Name of the benchmark (default `Y`, else the second variable).
    #[arg(long, value_name = "NAME")]
    y: Option<String>,
    /// Decision at which to compare `G(x)` with the benchmark.
    #[arg(long, value_name = "X1,X2,...")]
    point: Option<String>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// Point to certify; defaults to the file's candidate, else the solver's output.
    #[arg(long, value_name = "X1,X2,...")]
    point: Option<String>,
}

/// Parses `argv`, runs the command and writes the report. Returns the exit
/// code: 0 success, 1 infeasible or uncertified, 2 input error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    2
                }
            };
        }
    };
    match execute(&cli) {
        Ok((report, code)) => {
            let text = report.render();
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &text)
                    .map_err(|e| Diagnostic::new(Code::Io, path.display().to_string(), e.to_string())),
                None => stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| Diagnostic::new(Code::Io, "<stdout>", e.to_string())),
            };
            match written {
                Ok(()) => code,
                Err(d) => {
                    let _ = writeln!(stderr, "{d}");
                    2
                }
            }
        }
        Err(d) => {
            let _ = writeln!(stderr, "{d}");
            2
        }
    }
}

fn execute(cli: &Cli) -> Outcome {
    if let Some(t) = cli.tol {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Diagnostic::new(Code::Argument, "--tol", format!("tolerance {t} must be positive")));
        }
    }
    if cli.iters == Some(0) {
        return Err(Diagnostic::new(Code::Argument, "--iters", "iteration budget must be positive"));
    }
    match &cli.command {
        Command::Selftest => cmd_selftest(cli),
        Command::Eval(a) => cmd_eval(cli, &load(cli)?, a),
        Command::Dominance(a) => cmd_dominance(&load(cli)?, a),
        Command::Solve => cmd_solve(cli, &load(cli)?),
        Command::Certify(a) => cmd_certify(cli, &load(cli)?, a),
    }
}

struct Loaded {
    file: ProblemFile,
    input: InputInfo,
}

fn load(cli: &Cli) -> Result<Loaded, Diagnostic> {
    let path = cli
        .problem
        .as_ref()
        .ok_or_else(|| Diagnostic::new(Code::Argument, "--problem", "this command needs --problem FILE"))?;
    let file = parse_problem(path)?;
    let input = InputInfo {
        path: path.display().to_string(),
        sha256: file.digest.clone(),
    };
    Ok(Loaded { file, input })
}

fn report(command: &str, loaded: Option<&Loaded>) -> Report {
    let mut r = Report::new(command);
    r.input = loaded.map(|l| l.input.clone());
    r
}

fn model(command: &str) -> impl Fn(riskcalc_core::RiskError) -> Diagnostic + '_ {
    move |e| Diagnostic::model(command, e)
}

/// Accepts `key=value` or a bare value.
fn parse_request(flag: &str, key: &str, raw: &str) -> Result<f64, Diagnostic> {
    let value = match raw.split_once('=') {
        Some((k, v)) if k.trim() == key => v,
        Some((k, _)) => {
            return Err(Diagnostic::new(
                Code::Argument,
                flag,
                format!("expected {key}=VALUE, got key {:?}", k.trim()),
            ))
        }
        None => raw,
    };
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| Diagnostic::new(Code::Argument, flag, format!("cannot read {value:?} as a number")))?;
    if !v.is_finite() {
        return Err(Diagnostic::new(Code::NonFinite, flag, "value must be finite"));
    }
    Ok(v)
}

fn parse_point(flag: &str, raw: &str) -> Result<Vec<f64>, Diagnostic> {
    raw.split(',')
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Diagnostic::new(Code::Argument, flag, format!("cannot read {s:?} as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Diagnostic::new(Code::NonFinite, flag, "coordinates must be finite"))
            }
        })
        .collect()
}

fn decision(spec: &ProblemSpec, flag: &str, flat: &[f64]) -> Result<DecisionPoint, Diagnostic> {
    if flat.len() != spec.total_dim() {
        return Err(Diagnostic::new(
            Code::Dimension,
            flag,
            format!("expected {} coordinates, got {}", spec.total_dim(), flat.len()),
        ));
    }
    let x = spec.decision(flat).map_err(|e| Diagnostic::model(flag, e))?;
    if !spec.in_box(&x) {
        return Err(Diagnostic::new(Code::Box, flag, "point lies outside the feasible box"));
    }
    Ok(x)
}

fn level_domain(flag: &str, p: f64, closed_at_zero: bool) -> Result<(), Diagnostic> {
    let ok = if closed_at_zero {
        (0.0..=1.0).contains(&p)
    } else {
        p > 0.0 && p <= 1.0
    };
    if ok {
        Ok(())
    } else {
        let dom = if closed_at_zero { "[0, 1]" } else { "(0, 1]" };
        Err(Diagnostic::new(Code::LevelDomain, flag, format!("level {p} outside {dom}")))
    }
}

fn cmd_eval(_cli: &Cli, loaded: &Loaded, a: &EvalArgs) -> Outcome {
    let file = &loaded.file;
    let mut targets: Vec<(String, RandomVariable)> = file.variables.clone();
    if targets.is_empty() {
        if let Some(spec) = &file.spec {
            targets.push(("benchmark".to_string(), spec.constraint().benchmark().clone()));
        }
    }
    if let Some(name) = &a.var {
        targets.retain(|(n, _)| n == name);
        if targets.is_empty() {
            return Err(Diagnostic::new(Code::Argument, "--var", format!("no variable named {name:?}")));
        }
    }
    if targets.is_empty() {
        return Err(Diagnostic::new(Code::Missing, "variables", "no variables to evaluate"));
    }
    type Eval = fn(&RandomVariable, f64) -> Result<Value, riskcalc_core::RiskError>;
    let requests: [(&str, &str, &str, &Vec<String>, Option<bool>, Eval); 7] = [
        ("cdf", "--cdf", "eta", &a.cdf, None, |z, v| Ok(num(cdf(z, v)))),
        ("quantile", "--quantile", "p", &a.quantile, Some(false), |z, v| Ok(num(quantile(z, v)?))),
        ("integrated_cdf", "--integrated-cdf", "eta", &a.integrated_cdf, None, |z, v| {
            Ok(num(integrated_cdf(z, v)))
        }),
        ("lorenz", "--lorenz", "p", &a.lorenz, None, |z, v| {
            Ok(lorenz(z, v).finite().map_or_else(|| num(f64::INFINITY), num))
        }),
        ("lorenz_conjugate", "--lorenz-conjugate", "p", &a.lorenz_conjugate, Some(true), |z, v| {
            Ok(num(lorenz_conjugate(z, v)?))
        }),
        ("avar_lower", "--avar-lower", "p", &a.avar_lower, Some(false), |z, v| Ok(num(avar_lower(z, v)?))),
        ("avar_upper", "--avar-upper", "p", &a.avar_upper, Some(false), |z, v| Ok(num(avar_upper(z, v)?))),
    ];
    let mut parsed: Vec<(&str, &str, Vec<f64>, Eval)> = Vec::new();
    for (name, flag, key, raw, domain, f) in requests {
        let mut pts = Vec::with_capacity(raw.len());
        for r in raw {
            let v = parse_request(flag, key, r)?;
            if let Some(closed) = domain {
                level_domain(flag, v, closed)?;
            }
            pts.push(v);
        }
        if !pts.is_empty() {
            parsed.push((name, key, pts, f));
        }
    }
    let mut out = Vec::new();
    for (name, z) in &targets {
        let mut entry = Map::new();
        entry.insert("name".into(), json!(name));
        entry.insert("expectation".into(), num(z.expectation()));
        for (fname, key, pts, f) in &parsed {
            let mut vals = Vec::with_capacity(pts.len());
            for &v in pts {
                vals.push(json!({ *key: num(v), "value": f(z, v).map_err(model("eval"))? }));
            }
            entry.insert((*fname).into(), Value::Array(vals));
        }
        out.push(Value::Object(entry));
    }
    let mut r = report("eval", Some(loaded));
    r.results = json!({ "variables": out });
    Ok((r, 0))
}

fn pick_variable<'a>(file: &'a ProblemFile, flag: &str, name: Option<&String>, default: &str, index: usize) -> Result<Option<(String, &'a RandomVariable)>, Diagnostic> {
    if let Some(n) = name {
        return file
            .variable(n)
            .map(|v| Some((n.clone(), v)))
            .ok_or_else(|| Diagnostic::new(Code::Argument, flag, format!("no variable named {n:?}")));
    }
    if let Some(v) = file.variable(default) {
        return Ok(Some((default.to_string(), v)));
    }
    Ok(file.variables.get(index).map(|(n, v)| (n.clone(), v)))
}

fn cmd_dominance(loaded: &Loaded, a: &DominanceArgs) -> Outcome {
    let file = &loaded.file;
    let mut results = Map::new();
    let point = match &a.point {
        Some(raw) => Some(parse_point("--point", raw)?),
        None => file.candidate.clone().or_else(|| file.slater_point.clone()),
    };
    let x = pick_variable(file, "--x", a.x.as_ref(), "X", 0)?;
    let y = pick_variable(file, "--y", a.y.as_ref(), "Y", 1)?;
    let pair: Option<(String, RandomVariable, String, RandomVariable)> = match (x, y) {
        (Some((xn, xv)), Some((yn, yv))) => Some((xn, xv.clone(), yn, yv.clone())),
        _ => None,
    };
    let mut constraint = None;
    if let (Some(spec), Some(flat)) = (&file.spec, &point) {
        let xp = decision(spec, "--point", flat)?;
        let g = spec.constraint_integrand();
        let c = spec.constraint();
        let gz = g.evaluate(&xp).map_err(model("dominance"))?;
        let values = constraint_values(g, &xp, c).map_err(model("dominance"))?;
        let margin = uniform_dominance_margin(g, &xp, c).map_err(model("dominance"))?;
        constraint = Some((gz.clone(), json!({
            "point": nums(flat),
            "grid": nums(c.grid()),
            "values": nums(&values),
            "in_b": in_b(&gz, c.benchmark(), c),
            "uniform_margin": num(margin),
            "cq_holds": margin > 0.0,
        })));
    }
    let (xn, xv, yn, yv) = match (pair, &constraint, &file.spec) {
        (Some(p), _, _) => p,
        (None, Some((gz, _)), Some(spec)) => (
            "G(x)".to_string(),
            gz.clone(),
            "benchmark".to_string(),
            spec.constraint().benchmark().clone(),
        ),
        _ => {
            return Err(Diagnostic::new(
                Code::Missing,
                "variables",
                "dominance needs two variables, or a problem with a point",
            ))
        }
    };
    let fsd = dominates_first_order(&xv, &yv).map_err(model("dominance"))?;
    let ssd = dominates_second_order(&xv, &yv).map_err(model("dominance"))?;
    results.insert("x".into(), json!(xn));
    results.insert("y".into(), json!(yn));
    results.insert("first_order".into(), json!(fsd));
    results.insert("second_order".into(), json!(ssd));
    results.insert("first_order_margin".into(), num(first_order_margin(&xv, &yv)));
    results.insert("second_order_margin".into(), num(second_order_margin(&xv, &yv)));
    if let Some((_, c)) = constraint {
        results.insert("constraint".into(), c);
    }
    let mut r = report("dominance", Some(loaded));
    r.results = Value::Object(results);
    Ok((r, 0))
}

fn solver_options(cli: &Cli, file: &ProblemFile) -> SolverOptions {
    let mut opts = file.solver.clone();
    if let Some(n) = cli.iters {
        opts.max_iter = n;
    }
    if let Some(t) = cli.tol {
        opts.tol_feas = t;
    }
    opts
}

fn solver_tolerances(opts: &SolverOptions) -> Map<String, Value> {
    let mut t = Map::new();
    t.insert("tol_feas".into(), num(opts.tol_feas));
    t.insert("max_iter".into(), json!(opts.max_iter));
    t.insert("epoch_len".into(), json!(opts.epoch_len));
    t
}

fn cmd_solve(cli: &Cli, loaded: &Loaded) -> Outcome {
    let spec = loaded.file.spec()?;
    let opts = solver_options(cli, &loaded.file);
    let sol = solve(spec, &opts).map_err(model("solve"))?;
    let mut r = report("solve", Some(loaded));
    r.tolerances = solver_tolerances(&opts);
    r.status = if sol.feasible { "ok" } else { "infeasible" }.to_string();
    r.results = json!({
        "x": nums(&sol.x.flatten()),
        "blocks": blocks(sol.x.block_values()),
        "objective": num(sol.objective),
        "max_violation": num(sol.max_violation),
        "feasible": sol.feasible,
        "iterations": sol.iterations,
        "trace": sol.trace.iter().map(|t| json!({"iteration": t.iteration, "objective": num(t.objective)})).collect::<Vec<_>>(),
    });
    Ok((r, if sol.feasible { 0 } else { 1 }))
}

fn cmd_certify(cli: &Cli, loaded: &Loaded, a: &CertifyArgs) -> Outcome {
    let file = &loaded.file;
    let spec = file.spec()?;
    let mut tolerances = Map::new();
    let (flat, source) = match (&a.point, &file.candidate) {
        (Some(raw), _) => (parse_point("--point", raw)?, "argument"),
        (None, Some(c)) => (c.clone(), "candidate"),
        (None, None) => {
            let opts = solver_options(cli, file);
            tolerances = solver_tolerances(&opts);
            let sol = solve(spec, &opts).map_err(model("certify"))?;
            (sol.x.flatten(), "solve")
        }
    };
    let x = decision(spec, "--point", &flat)?;
    let opts = CertifyOptions {
        tol: cli.tol.unwrap_or(CertifyOptions::default().tol),
        ..CertifyOptions::default()
    };
    let cert = certify(spec, &x, &opts).map_err(model("certify"))?;
    let objective = spec.objective_value(&x).map_err(model("certify"))?;
    tolerances.insert("tol".into(), num(opts.tol));
    tolerances.insert("act_tol".into(), num(opts.act_tol));
    tolerances.insert("bound_tol".into(), num(opts.bound_tol));
    let pairs = |v: &[(f64, f64)]| -> Value {
        Value::Array(v.iter().map(|(p, w)| json!({"level": num(*p), "weight": num(*w)})).collect())
    };
    let mut r = report("certify", Some(loaded));
    r.tolerances = tolerances;
    r.status = if cert.accepted { "certified" } else { "uncertified" }.to_string();
    r.results = json!({
        "point": nums(&flat),
        "point_source": source,
        "objective": num(objective),
        "accepted": cert.accepted,
        "kappa": num(cert.kappa),
        "weights": pairs(&cert.weights),
        "nu": pairs(&cert.nu),
        "multipliers": cert.multipliers.iter().map(|m| json!({
            "level": num(m.level),
            "eta": num(m.eta),
            "constraint_value": num(m.constraint_value),
        })).collect::<Vec<_>>(),
        "residual": num(cert.residual),
        "complementarity_gap": num(cert.complementarity_gap),
        "feasible": cert.feasible,
        "max_violation": num(cert.max_violation),
        "active_levels": nums(&cert.active_levels),
        "objective_gradient": blocks(&cert.objective_gradient),
        "normal": blocks(&cert.normal),
        "iterations": cert.iterations,
        "fw_gap": num(cert.fw_gap),
    });
    Ok((r, if cert.accepted { 0 } else { 1 }))
}

fn cmd_selftest(cli: &Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    let checks = selftest::run(seed).map_err(model("selftest"))?;
    let passed = checks.iter().all(|c| c.passed);
    let mut r = report("selftest", None);
    r.status = if passed { "ok" } else { "failed" }.to_string();
    r.results = json!({
        "seed": seed,
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "passed": c.passed,
            "cases": c.cases,
            "worst": num(c.worst),
        })).collect::<Vec<_>>(),
    });
    Ok((r, if passed { 0 } else { 1 }))
}
