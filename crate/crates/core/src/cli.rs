//! Batch command-line frontend.
//!
//! [`run`] parses arguments, executes one subcommand and returns the exit code
//! together with everything that would have been written to stdout and
//! stderr. The `bicausal` binary is a thin wrapper around it.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence, 4 undefined
//! quantity, 5 verification failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::bicausal_dp::{
    evaluate_policy, extract_greedy_coupling, value_iterate, verify_fixed_point,
    verify_optimal_coupling, CouplingKernel, ProblemSpec, Regime, ValueTable, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::chain::{validate_kernel, StateSpace, TransitionKernel};
use crate::concentration::{mcdiarmid_bound, variance_proxy, BoundRequest, ProxyMode};
use crate::couplings::{
    check_sticky, classic_coupling, independent_coupling, validate_coupling, wasserstein_coupling,
};
use crate::error::Error;
use crate::exact_ot::{CostTable, TransportPlan};
use crate::noncausal::{noncausal_cost_series, two_state_closed_forms, W_FORMULA_CAVEAT};
use crate::simulate::{estimate_coupling_time, SimulationConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_UNDEFINED: i32 = 4;
pub const EXIT_VERIFY_FAILED: i32 = 5;

/// Default tolerance for `verify`: the fixed-point residual bound used in acceptance checks.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "bicausal",
    version,
    about = "Bicausal optimal transport between finite-state Markov chains"
)]
pub struct Cli {
    /// Worker threads for Bellman sweeps and simulation (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for W_bc by value iteration and extract an optimal coupling.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        json: bool,
        /// Also write the value table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Build a named coupling, validate it and evaluate its cost.
    Couple {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: CouplingKind,
        #[arg(long)]
        json: bool,
    },
    /// Non-causal cost from the maximal-coupling series.
    Noncausal {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Concentration bound for Hamming-Lipschitz path functionals.
    Bound {
        file: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = ProxyArg::Doeblin)]
        proxy: ProxyArg,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo coupling time under a named coupling.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: CouplingKind,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Check a value table and coupling produced by `solve --json`.
    Verify {
        file: PathBuf,
        table_file: PathBuf,
        coupling_file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CouplingKind {
    Classic,
    Independent,
    Wasserstein,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProxyArg {
    Series,
    Dp,
    Doeblin,
}

impl From<ProxyArg> for ProxyMode {
    fn from(p: ProxyArg) -> Self {
        match p {
            ProxyArg::Series => ProxyMode::NoncausalSeries,
            ProxyArg::Dp => ProxyMode::BicausalDp,
            ProxyArg::Doeblin => ProxyMode::Doeblin,
        }
    }
}

/// Captured result of one CLI invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn undefined(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_UNDEFINED,
            message: message.into(),
        }
    }
}

type CmdResult = std::result::Result<(i32, String), Failure>;

pub fn run<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let rendered = err.render().to_string();
            return if err.use_stderr() {
                CliOutput {
                    code: EXIT_INPUT,
                    stdout: String::new(),
                    stderr: rendered,
                }
            } else {
                CliOutput {
                    code: EXIT_OK,
                    stdout: rendered,
                    stderr: String::new(),
                }
            };
        }
    };
    let outcome = match cli.threads {
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::input(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok((code, stdout)) => CliOutput {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(f) => CliOutput {
            code: f.code,
            stdout: String::new(),
            stderr: format!("error: {}\n", f.message),
        },
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Solve {
            file,
            tol,
            max_iter,
            json,
            csv,
        } => cmd_solve(&file, tol, max_iter, json, csv.as_deref()),
        Command::Couple { file, kind, json } => cmd_couple(&file, kind, json),
        Command::Noncausal { file, tol, json } => cmd_noncausal(&file, tol, json),
        Command::Bound {
            file,
            n,
            t,
            proxy,
            json,
        } => cmd_bound(&file, n, t, proxy.into(), json),
        Command::Simulate {
            file,
            kind,
            samples,
            horizon,
            seed,
            json,
        } => cmd_simulate(&file, kind, samples, horizon, seed, json),
        Command::Verify {
            file,
            table_file,
            coupling_file,
            tol,
            json,
        } => cmd_verify(&file, &table_file, &coupling_file, tol, json),
    }
}

// ---------------------------------------------------------------------------
// problem files

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CostField {
    Named(String),
    Matrix(Vec<Vec<f64>>),
}

/// On-disk problem description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub states: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "P_prime", default)]
    pub p_prime: Option<Vec<Vec<f64>>>,
    pub x0: String,
    pub x0_prime: String,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub cost: Option<CostField>,
}

fn default_beta() -> f64 {
    1.0
}

/// A parsed problem: labels plus the validated instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: StateSpace,
    pub spec: ProblemSpec,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| {
            format!(
                "malformed problem file at line {}, column {}: {e}",
                e.line(),
                e.column()
            )
        })
    }

    pub fn into_problem(self) -> Result<Problem, String> {
        let space =
            StateSpace::new(self.states.clone()).map_err(|e| format!("field states: {e}"))?;
        let n = space.len();
        let kernel = |field: &str, m: &[Vec<f64>]| -> Result<TransitionKernel, String> {
            if m.len() != n {
                return Err(format!("field {field}: {} rows for {n} states", m.len()));
            }
            validate_kernel(m).map_err(|e| match e {
                Error::RowSumViolation { row, sum } => format!(
                    "field {field}: row {row} (state {:?}) sums to {sum}, expected 1",
                    space.label(row)
                ),
                Error::NegativeEntry { row, col, value } => format!(
                    "field {field}: row {row} (state {:?}), column {col} is negative ({value})",
                    space.label(row)
                ),
                other => format!("field {field}: {other}"),
            })
        };
        let p = kernel("P", &self.p)?;
        let p_prime = match &self.p_prime {
            Some(m) => kernel("P_prime", m)?,
            None => p.clone(),
        };
        let x0 = space
            .index_of(&self.x0)
            .map_err(|e| format!("field x0: {e}"))?;
        let x0_prime = space
            .index_of(&self.x0_prime)
            .map_err(|e| format!("field x0_prime: {e}"))?;
        let cost = match &self.cost {
            None => CostTable::discrete_metric(n),
            Some(CostField::Named(name)) if name == "discrete" => CostTable::discrete_metric(n),
            Some(CostField::Named(name)) => {
                return Err(format!(
                    "field cost: unknown cost {name:?}, expected \"discrete\" or a matrix"
                ))
            }
            Some(CostField::Matrix(m)) => {
                if m.len() != n {
                    return Err(format!("field cost: {} rows for {n} states", m.len()));
                }
                for (i, row) in m.iter().enumerate() {
                    if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                        return Err(format!(
                            "field cost: row {i} (state {:?}), column {j} must be finite and nonnegative",
                            space.label(i)
                        ));
                    }
                }
                CostTable::from_rows(m).map_err(|e| format!("field cost: {e}"))?
            }
        };
        let spec = ProblemSpec::new(p, p_prime, x0, x0_prime, cost, self.beta)
            .map_err(|e| format!("field beta: {e}"))?;
        Ok(Problem { space, spec })
    }
}

pub fn load_problem(path: &Path) -> Result<Problem, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ProblemFile::parse(&text)?.into_problem()
}

fn load(path: &Path) -> Result<Problem, Failure> {
    load_problem(path).map_err(Failure::input)
}

// ---------------------------------------------------------------------------
// JSON helpers

/// Finite numbers as JSON numbers, `+∞` as the string `"inf"`.
pub fn ext_to_json(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!("inf")
    }
}

pub fn ext_from_json(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) if s == "inf" || s == "Infinity" => Some(f64::INFINITY),
        _ => None,
    }
}

fn matrix_to_json(rows: &[Vec<f64>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Array(r.iter().map(|&v| ext_to_json(v)).collect()))
            .collect(),
    )
}

fn matrix_from_json(v: &Value, n: usize, what: &str) -> Result<Vec<Vec<f64>>, String> {
    let rows = v
        .as_array()
        .ok_or_else(|| format!("{what}: expected an array of rows"))?;
    if rows.len() != n {
        return Err(format!("{what}: {} rows for {n} states", rows.len()));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row
                .as_array()
                .ok_or_else(|| format!("{what}: row {i} is not an array"))?;
            if row.len() != n {
                return Err(format!(
                    "{what}: row {i} has {} entries, expected {n}",
                    row.len()
                ));
            }
            row.iter()
                .enumerate()
                .map(|(j, x)| {
                    ext_from_json(x)
                        .ok_or_else(|| format!("{what}: entry ({i}, {j}) is not a number"))
                })
                .collect()
        })
        .collect()
}

fn plan_rows(plan: &TransportPlan) -> Vec<Vec<f64>> {
    plan.masses()
        .chunks_exact(plan.len())
        .map(<[f64]>::to_vec)
        .collect()
}

/// `{ x: { x': [[mass]] } }` keyed by state labels.
pub fn coupling_to_json(space: &StateSpace, q: &CouplingKernel) -> Value {
    let n = space.len();
    let mut outer = Map::new();
    for x in 0..n {
        let mut inner = Map::new();
        for x2 in 0..n {
            inner.insert(
                space.label(x2).to_string(),
                matrix_to_json(&plan_rows(q.plan(x, x2))),
            );
        }
        outer.insert(space.label(x).to_string(), Value::Object(inner));
    }
    Value::Object(outer)
}

pub fn coupling_from_json(
    space: &StateSpace,
    spec: &ProblemSpec,
    v: &Value,
) -> Result<CouplingKernel, String> {
    let n = space.len();
    let outer = v.as_object().ok_or("coupling: expected an object")?;
    let mut plans = Vec::with_capacity(n * n);
    for x in 0..n {
        let lx = space.label(x);
        let inner = outer
            .get(lx)
            .and_then(Value::as_object)
            .ok_or_else(|| format!("coupling: missing state {lx:?}"))?;
        for x2 in 0..n {
            let lx2 = space.label(x2);
            let m = inner
                .get(lx2)
                .ok_or_else(|| format!("coupling: missing pair ({lx}, {lx2})"))?;
            let rows = matrix_from_json(m, n, &format!("coupling ({lx}, {lx2})"))?;
            let plan = TransportPlan::from_parts(
                rows.concat(),
                spec.p().row_distribution(x),
                spec.p_prime().row_distribution(x2),
            )
            .map_err(|e| e.to_string())?;
            plans.push(plan);
        }
    }
    CouplingKernel::new(plans).map_err(|e| e.to_string())
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::input(format!(
            "{}: malformed JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// human-readable formatting

fn fmt_ext(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".to_string()
    }
}

fn format_table(space: &StateSpace, rows: &[Vec<f64>], indent: &str) -> String {
    let width = space
        .labels()
        .iter()
        .map(String::len)
        .chain(rows.iter().flatten().map(|&v| fmt_ext(v).len()))
        .max()
        .unwrap_or(1)
        .max(8);
    let label_width = space.labels().iter().map(String::len).max().unwrap_or(1);
    let mut out = String::new();
    let _ = write!(out, "{indent}{:label_width$}", "");
    for l in space.labels() {
        let _ = write!(out, "  {l:>width$}");
    }
    out.push('\n');
    for (x, row) in rows.iter().enumerate() {
        let _ = write!(out, "{indent}{:<label_width$}", space.label(x));
        for &v in row {
            let _ = write!(out, "  {:>width$}", fmt_ext(v));
        }
        out.push('\n');
    }
    out
}

fn format_coupling(space: &StateSpace, q: &CouplingKernel) -> String {
    let n = space.len();
    let mut out = String::new();
    for x in 0..n {
        for x2 in 0..n {
            let _ = writeln!(out, "  from ({}, {}):", space.label(x), space.label(x2));
            out.push_str(&format_table(space, &plan_rows(q.plan(x, x2)), "    "));
        }
    }
    out
}

fn pair_label(space: &StateSpace, x: usize, x2: usize) -> String {
    format!("({}, {})", space.label(x), space.label(x2))
}

fn write_csv(path: &Path, space: &StateSpace, table: &ValueTable) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["state".to_string()];
    header.extend(space.labels().iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (x, row) in table.to_rows().iter().enumerate() {
        let mut record = vec![space.label(x).to_string()];
        record.extend(row.iter().map(|&v| {
            if v.is_finite() {
                format!("{v:?}")
            } else {
                "inf".into()
            }
        }));
        w.write_record(&record).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// commands

fn cmd_solve(path: &Path, tol: f64, max_iter: usize, json: bool, csv: Option<&Path>) -> CmdResult {
    let Problem { space, spec } = load(path)?;
    let report = value_iterate(&spec, tol, max_iter).map_err(|e| Failure::input(e.to_string()))?;
    let coupling = extract_greedy_coupling(&report.value_table, &spec)
        .map_err(|e| Failure::input(e.to_string()))?;
    if let Some(csv_path) = csv {
        write_csv(csv_path, &space, &report.value_table)?;
    }
    let code = if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    let (x0, x0p) = (spec.x0(), spec.x0_prime());
    let regime = match report.regime {
        Regime::Discounted => "discounted",
        Regime::Undiscounted => "undiscounted",
    };
    if json {
        let flagged: Vec<Value> = report
            .infinite_flags
            .iter()
            .map(|&(a, b)| json!([space.label(a), space.label(b)]))
            .collect();
        let doc = json!({
            "states": space.labels(),
            "x0": space.label(x0),
            "x0_prime": space.label(x0p),
            "beta": spec.beta(),
            "w_bc": matrix_to_json(&report.value_table.to_rows()),
            "value": ext_to_json(report.value_at(x0, x0p)),
            "iterations": report.iterations,
            "residual": ext_to_json(report.residual),
            "converged": report.converged,
            "coupling": coupling_to_json(&space, &coupling),
            "flags": {
                "regime": regime,
                "possibly_infinite": flagged,
            },
        });
        return Ok((code, to_pretty(&doc)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "W_bc (beta = {}, {regime})", spec.beta());
    out.push_str(&format_table(&space, &report.value_table.to_rows(), ""));
    let _ = writeln!(
        out,
        "W_bc{} = {}",
        pair_label(&space, x0, x0p),
        fmt_ext(report.value_at(x0, x0p))
    );
    let _ = writeln!(out, "iterations: {}", report.iterations);
    let _ = writeln!(out, "residual: {:.3e}", report.residual);
    let _ = writeln!(out, "converged: {}", report.converged);
    if report.infinite_flags.is_empty() {
        let _ = writeln!(out, "possibly infinite: none");
    } else {
        let list: Vec<String> = report
            .infinite_flags
            .iter()
            .map(|&(a, b)| pair_label(&space, a, b))
            .collect();
        let _ = writeln!(out, "possibly infinite: {}", list.join(" "));
    }
    let _ = writeln!(out, "optimal coupling:");
    out.push_str(&format_coupling(&space, &coupling));
    Ok((code, out))
}

fn build_coupling(kind: CouplingKind, spec: &ProblemSpec) -> Result<CouplingKernel, Failure> {
    match kind {
        CouplingKind::Classic => {
            if !spec.same_kernel() {
                return Err(Failure::input("the classic coupling needs P_prime = P"));
            }
            Ok(classic_coupling(spec.p()))
        }
        CouplingKind::Independent => Ok(independent_coupling(spec.p(), spec.p_prime())),
        CouplingKind::Wasserstein => Ok(wasserstein_coupling(spec.p(), spec.p_prime())),
        CouplingKind::Optimal => {
            let report = value_iterate(spec, DEFAULT_TOL, DEFAULT_MAX_ITER)
                .map_err(|e| Failure::input(e.to_string()))?;
            if !report.converged {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: format!(
                        "value iteration did not converge in {} iterations (residual {:.3e})",
                        report.iterations, report.residual
                    ),
                });
            }
            extract_greedy_coupling(&report.value_table, spec)
                .map_err(|e| Failure::input(e.to_string()))
        }
    }
}

fn kind_name(kind: CouplingKind) -> &'static str {
    match kind {
        CouplingKind::Classic => "classic",
        CouplingKind::Independent => "independent",
        CouplingKind::Wasserstein => "wasserstein",
        CouplingKind::Optimal => "optimal",
    }
}

fn cmd_couple(path: &Path, kind: CouplingKind, json: bool) -> CmdResult {
    let Problem { space, spec } = load(path)?;
    let q = build_coupling(kind, &spec)?;
    let valid = validate_coupling(&q, spec.p(), spec.p_prime(), 1e-9);
    let sticky = spec.same_kernel().then(|| check_sticky(&q, spec.p(), 1e-9));
    let value = evaluate_policy(&q, &spec).map_err(|e| Failure::input(e.to_string()))?;
    let (x0, x0p) = (spec.x0(), spec.x0_prime());
    if json {
        let doc = json!({
            "kind": kind_name(kind),
            "states": space.labels(),
            "coupling": coupling_to_json(&space, &q),
            "valid": valid,
            "sticky": sticky,
            "policy_value": matrix_to_json(&value.to_rows()),
            "value": ext_to_json(value.get(x0, x0p)),
        });
        return Ok((EXIT_OK, to_pretty(&doc)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "{} coupling", kind_name(kind));
    out.push_str(&format_coupling(&space, &q));
    let _ = writeln!(out, "valid coupling: {valid}");
    let _ = writeln!(
        out,
        "sticky: {}",
        sticky.map_or("n/a (P_prime differs from P)".to_string(), |s| s
            .to_string())
    );
    let _ = writeln!(out, "policy value (beta = {}):", spec.beta());
    out.push_str(&format_table(&space, &value.to_rows(), ""));
    let _ = writeln!(
        out,
        "policy value at {} = {}",
        pair_label(&space, x0, x0p),
        fmt_ext(value.get(x0, x0p))
    );
    Ok((EXIT_OK, out))
}

fn cmd_noncausal(path: &Path, tol: f64, json: bool) -> CmdResult {
    let Problem { space, spec } = load(path)?;
    if !spec.same_kernel() {
        return Err(Failure::input(
            "the maximal-coupling series needs P_prime = P",
        ));
    }
    let (x0, x0p) = (spec.x0(), spec.x0_prime());
    let series = match noncausal_cost_series(spec.p(), x0, x0p, spec.beta(), tol) {
        Ok(s) => s,
        Err(Error::NoContraction) => {
            return Err(Failure::undefined(
                "no power of P contracts in total variation (periodic or reducible chain); the undiscounted series is not certified",
            ))
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    let forms = if space.len() == 2 {
        two_state_closed_forms(spec.p()).ok()
    } else {
        None
    };
    if json {
        let closed = forms.map(|f| {
            json!({
                "w_bc_formula": f.w_bc_formula,
                "w_formula": f.w_formula,
                "w_formula_caveat": f.w_formula_caveat,
                "caveat": W_FORMULA_CAVEAT,
            })
        });
        let doc = json!({
            "pair": [space.label(x0), space.label(x0p)],
            "beta": spec.beta(),
            "value": series.value,
            "terms_used": series.terms_used,
            "tail_bound": series.tail_bound,
            "closed_forms": closed,
        });
        return Ok((EXIT_OK, to_pretty(&doc)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "non-causal cost (maximal-coupling series)");
    let _ = writeln!(out, "  pair: {}", pair_label(&space, x0, x0p));
    let _ = writeln!(out, "  beta: {}", spec.beta());
    let _ = writeln!(out, "  value: {:.6}", series.value);
    let _ = writeln!(out, "  terms used: {}", series.terms_used);
    let _ = writeln!(out, "  tail bound: {:.3e}", series.tail_bound);
    if let Some(f) = forms {
        let _ = writeln!(
            out,
            "two-state closed forms at pair ({}, {})",
            space.label(0),
            space.label(1)
        );
        let _ = writeln!(out, "  w_bc formula: {:.6}", f.w_bc_formula);
        let _ = writeln!(
            out,
            "  w formula: {:.6}{}",
            f.w_formula,
            if f.w_formula_caveat { "  [CAVEAT]" } else { "" }
        );
        if f.w_formula_caveat {
            let _ = writeln!(out, "  caveat: {W_FORMULA_CAVEAT}");
        }
    }
    Ok((EXIT_OK, out))
}

fn cmd_bound(path: &Path, n: u64, t: f64, mode: ProxyMode, json: bool) -> CmdResult {
    let Problem { spec, .. } = load(path)?;
    let req = BoundRequest::new(n, t, mode).map_err(|e| Failure::input(e.to_string()))?;
    let proxy = match variance_proxy(&spec, mode) {
        Ok(v) => v,
        Err(Error::NotCouplingInstance) => {
            return Err(Failure::input(
                "bounds need a coupling-time instance: P_prime = P, discrete cost, beta = 1",
            ))
        }
        Err(e @ Error::NoContraction) => {
            return Err(Failure::undefined(format!("proxy {mode}: {e}")))
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    let bound = match mcdiarmid_bound(&req, proxy) {
        Ok(b) => b,
        Err(Error::InfiniteProxy) => {
            return Err(Failure::undefined(format!(
                "proxy {mode} is infinite; the bound degenerates to 2"
            )))
        }
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    if json {
        let doc = json!({
            "proxy_mode": mode.to_string(),
            "proxy": proxy,
            "n": n,
            "t": t,
            "bound": bound,
        });
        return Ok((EXIT_OK, to_pretty(&doc)));
    }
    let mut out = String::new();
    let _ = writeln!(out, "proxy ({mode}): {proxy:.6}");
    let _ = writeln!(out, "n = {n}, t = {t}");
    let _ = writeln!(out, "P(|f - E f| >= t) <= {bound:.6}");
    Ok((EXIT_OK, out))
}

fn cmd_simulate(
    path: &Path,
    kind: CouplingKind,
    samples: u64,
    horizon: u64,
    seed: u64,
    json: bool,
) -> CmdResult {
    let Problem { space, spec } = load(path)?;
    let cfg =
        SimulationConfig::new(samples, horizon, seed).map_err(|e| Failure::input(e.to_string()))?;
    let q = build_coupling(kind, &spec)?;
    let (x0, x0p) = (spec.x0(), spec.x0_prime());
    let stats =
        estimate_coupling_time(&q, x0, x0p, &cfg).map_err(|e| Failure::input(e.to_string()))?;
    if json {
        let doc = json!({
            "kind": kind_name(kind),
            "pair": [space.label(x0), space.label(x0p)],
            "samples": stats.samples,
            "horizon": horizon,
            "seed": seed,
            "mean": if stats.mean.is_nan() { Value::Null } else { json!(stats.mean) },
            "std_error": if stats.std_error.is_nan() { Value::Null } else { json!(stats.std_error) },
            "censored": stats.censored,
        });
        return Ok((EXIT_OK, to_pretty(&doc)));
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "coupling time under the {} coupling from {}",
        kind_name(kind),
        pair_label(&space, x0, x0p)
    );
    let _ = writeln!(out, "  samples: {}", stats.samples);
    let _ = writeln!(out, "  mean: {:.6}", stats.mean);
    let _ = writeln!(out, "  std error: {:.6}", stats.std_error);
    let _ = writeln!(
        out,
        "  censored (not coupled by step {horizon}): {}",
        stats.censored
    );
    Ok((EXIT_OK, out))
}

fn cmd_verify(
    path: &Path,
    table_path: &Path,
    coupling_path: &Path,
    tol: f64,
    json: bool,
) -> CmdResult {
    let Problem { space, spec } = load(path)?;
    let n = space.len();
    let table_doc = read_json(table_path)?;
    let rows = table_doc
        .get("w_bc")
        .ok_or_else(|| Failure::input(format!("{}: missing field w_bc", table_path.display())))
        .and_then(|v| matrix_from_json(v, n, "w_bc").map_err(Failure::input))?;
    let table = ValueTable::from_rows(&rows).map_err(|e| Failure::input(format!("w_bc: {e}")))?;
    let coupling_doc = read_json(coupling_path)?;
    let q = coupling_doc
        .get("coupling")
        .ok_or_else(|| {
            Failure::input(format!(
                "{}: missing field coupling",
                coupling_path.display()
            ))
        })
        .and_then(|v| coupling_from_json(&space, &spec, v).map_err(Failure::input))?;

    let fp = verify_fixed_point(&table, &spec, tol).map_err(|e| Failure::input(e.to_string()))?;
    let (optimal, coupling_error) = match verify_optimal_coupling(&q, &table, &spec, tol) {
        Ok(ok) => (ok, None),
        Err(e @ Error::InvalidCoupling { .. }) => (false, Some(e.to_string())),
        Err(e) => return Err(Failure::input(e.to_string())),
    };
    let passed = fp.all_ok() && optimal;
    let code = if passed { EXIT_OK } else { EXIT_VERIFY_FAILED };
    if json {
        let doc = json!({
            "residual": ext_to_json(fp.residual),
            "is_fixed_point": fp.is_fixed_point,
            "diagonal_ok": fp.diagonal_ok,
            "finite_ok": fp.finite_ok,
            "coupling_optimal": optimal,
            "coupling_error": coupling_error,
            "passed": passed,
        });
        return Ok((code, to_pretty(&doc)));
    }
    let opt = |b: Option<bool>| b.map_or("n/a".to_string(), |b| b.to_string());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "fixed-point residual: {:.3e} (tol {tol:e})",
        fp.residual
    );
    let _ = writeln!(out, "fixed point: {}", fp.is_fixed_point);
    let _ = writeln!(out, "zero diagonal: {}", opt(fp.diagonal_ok));
    let _ = writeln!(out, "finite: {}", opt(fp.finite_ok));
    let _ = writeln!(out, "coupling optimal: {optimal}");
    if let Some(e) = coupling_error {
        let _ = writeln!(out, "coupling error: {e}");
    }
    let _ = writeln!(
        out,
        "verification: {}",
        if passed { "PASSED" } else { "FAILED" }
    );
    Ok((code, out))
}

/// Row-major table from a value table file, for callers outside the CLI.
pub fn read_value_table(path: &Path, n: usize) -> Result<ValueTable, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let rows = matrix_from_json(doc.get("w_bc").ok_or("missing field w_bc")?, n, "w_bc")?;
    ValueTable::from_rows(&rows).map_err(|e| e.to_string())
}
