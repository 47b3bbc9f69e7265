//! Command-line front end. Every command writes one JSON or CSV artifact,
//! to `--output` (atomically) or to stdout.
//!
//! Exit status: 0 on success (including inconclusive checks), 1 when a check
//! fails or a solver gives up, 2 on input or usage errors.

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::datum::BLDatum;
use crate::error::{Error, Result};
use crate::finiteness::{finiteness_check, FinitenessMode, Verdict};
use crate::functional::{ball_inequality_check, bl_functional, BoxDomain, InputTuple, Method, QuadratureSpec};
use crate::gaussian::{check_delta, scale_gaussian, solve_extremiser, u_radius, ExtremiserOptions, ExtremiserResult, Init};
use crate::io::{build_tuple, csv_table, fmt_num, parse_inputs, read_datum, write_output};
use crate::nonlinear::checks::axis_grid;
use crate::nonlinear::localized::Certification;
use crate::nonlinear::registry::{from_linear, lookup, lookup_with, DEFAULT_YOUNG_P};
use crate::nonlinear::{
    base_case_check, check_submersion, lie_group_young, perturbation_check, recursive_step_check, Group,
    LocalizedProblem, NonlinearDatum,
};
use crate::schedule::{
    accumulated_factor, choose_delta0, final_bound, kappa_evolution, schedule, ExponentParams, ScheduleParams,
};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "BL_SCALES_THREADS";

const DEFAULT_GRID: usize = 256;
const DEFAULT_SAMPLES: usize = 1_000_000;
const DEFAULT_BUDGET: usize = 4096;
const SUBMERSION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Gaussian constant of a datum.
    Constant,
    /// Gaussian constant with the extremising blocks.
    Extremiser,
    /// Subspace criterion and simplicity.
    Finiteness,
    /// Quadrature of the functional on given inputs.
    Functional,
    /// Ball's inequality on a pair of input tuples.
    BallCheck,
    /// Localized checks on a nonlinear datum over a list of scales.
    Nonlinear,
    /// Young's inequality near the identity of a Lie group.
    YoungLie,
    /// Scale schedule, accumulated losses and κ growth.
    Schedule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    BaseCase,
    Recursive,
    Perturbation,
    Submersion,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "bl-scales", version, about = "Brascamp–Lieb constants, localized checks and scale schedules")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Datum JSON: {"n", "maps" (row-major), "exponents"}.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Input functions JSON for `functional` and `ball-check`.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// tensor-grid, monte-carlo or importance.
    #[arg(long)]
    pub method: Option<Method>,
    /// Points per axis (grid) or samples (Monte Carlo).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Integration box as lo:hi (every axis) or lo:hi,lo:hi,...
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1.0)]
    pub damping: f64,
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.4)]
    pub beta_prime: f64,
    /// Initial scale; chosen from ε when omitted.
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Σ p_j; taken from the datum when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Vec<f64>,
    /// euclidean:d, heisenberg or affine-2d.
    #[arg(long)]
    pub group: Option<String>,
    /// Registry tag of a nonlinear datum.
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long, value_enum)]
    pub check: Option<Check>,
    /// Exponents as numbers or fractions, e.g. 2/3,2/3,2/3.
    #[arg(long, value_delimiter = ',')]
    pub exponents: Vec<String>,
    /// exact-lattice, rank-one-exact or randomized.
    #[arg(long)]
    pub mode: Option<FinitenessMode>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Treat g as a near-extremiser and run the consequence checks.
    #[arg(long)]
    pub near_extremiser: bool,
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass | Status::Inconclusive => 0,
            Status::Fail => 1,
        }
    }
}

pub struct Artifact {
    pub contents: String,
    pub status: Status,
}

/// 1 for failed computations, 2 for bad input.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SingularM { .. }
        | Error::Diverged { .. }
        | Error::MaxIterExceeded { .. }
        | Error::Unsolved { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Uncertified { .. }
        | Error::LinearizationTooLarge { .. } => 1,
        _ => 2,
    }
}

/// Parse `args`, run, write the artifact and return the exit status.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return 2;
    }
    match run(&cli).and_then(|a| write_output(cli.output.as_deref(), &a.contents).map(|_| a.status)) {
        Ok(s) => {
            if s == Status::Inconclusive {
                eprintln!("inconclusive: holds with slack below 3 combined standard errors");
            } else if s == Status::Fail {
                eprintln!("check failed");
            }
            s.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameters(format!("{THREADS_ENV} = `{v}` is not a thread count")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Artifact> {
    match cli.command {
        Command::Constant => cmd_constant(cli, false),
        Command::Extremiser => cmd_constant(cli, true),
        Command::Finiteness => cmd_finiteness(cli),
        Command::Functional => cmd_functional(cli),
        Command::BallCheck => cmd_ball(cli),
        Command::Nonlinear => cmd_nonlinear(cli),
        Command::YoungLie => cmd_young_lie(cli),
        Command::Schedule => cmd_schedule(cli),
    }
}

fn json_artifact(v: Value, status: Status) -> Result<Artifact> {
    let mut contents = serde_json::to_string_pretty(&v).expect("json values serialize");
    contents.push('\n');
    Ok(Artifact { contents, status })
}

fn require_datum(cli: &Cli) -> Result<BLDatum> {
    match &cli.input {
        Some(p) => read_datum(p),
        None => Err(Error::InvalidParameters(format!("`{}` needs --input", command_name(cli.command)))),
    }
}

fn command_name(c: Command) -> String {
    c.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn extremiser_options(cli: &Cli) -> ExtremiserOptions {
    ExtremiserOptions { tol: cli.tol, max_iter: cli.max_iter, damping: cli.damping }
}

fn exponent_params(cli: &Cli) -> Result<ExponentParams> {
    ExponentParams::new(cli.alpha, cli.beta, cli.beta_prime)
}

/// A number or a fraction a/b.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::InvalidParameters(format!("`{s}` is not a number"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn young_exponents(cli: &Cli) -> Result<Option<[f64; 3]>> {
    if cli.exponents.is_empty() {
        return Ok(None);
    }
    let v: Vec<f64> = cli.exponents.iter().map(|s| parse_number(s)).collect::<Result<_>>()?;
    let p: [f64; 3] = v
        .try_into()
        .map_err(|v: Vec<f64>| Error::InvalidParameters(format!("expected 3 exponents, got {}", v.len())))?;
    Ok(Some(p))
}

/// `lo:hi` for every axis or one `lo:hi` per axis.
pub fn parse_domain(s: &str, dim: usize) -> Result<BoxDomain> {
    let bad = || Error::InvalidParameters(format!("bad domain `{s}`, expected lo:hi[,lo:hi...]"));
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part.split_once(':').ok_or_else(bad)?;
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(a < b) {
            return Err(bad());
        }
        lo.push(a);
        hi.push(b);
    }
    if lo.len() == 1 {
        lo = vec![lo[0]; dim];
        hi = vec![hi[0]; dim];
    }
    if lo.len() != dim {
        return Err(Error::DimensionMismatch { what: "domain", expected: dim, found: lo.len() });
    }
    Ok(BoxDomain::new(lo, hi))
}

fn quadrature(cli: &Cli, default: Method, dim: usize) -> Result<QuadratureSpec> {
    let method = cli.method.unwrap_or(default);
    let mut q = match method {
        Method::TensorGrid => QuadratureSpec::grid(cli.resolution.unwrap_or(DEFAULT_GRID)),
        Method::MonteCarlo => QuadratureSpec::monte_carlo(cli.resolution.unwrap_or(DEFAULT_SAMPLES), cli.seed),
        Method::Importance => QuadratureSpec::importance(cli.resolution.unwrap_or(DEFAULT_SAMPLES), cli.seed, None),
    };
    q.seed = cli.seed;
    if let Some(d) = &cli.domain {
        q = q.with_domain(parse_domain(d, dim)?);
    }
    q.validate()?;
    Ok(q)
}

fn quadrature_json(q: &QuadratureSpec) -> Value {
    json!({
        "method": q.method,
        "resolution": q.resolution,
        "seed": q.seed,
        "domain": q.domain.as_ref().map(|d| json!({"lo": d.lo, "hi": d.hi})),
    })
}

fn cmd_constant(cli: &Cli, full: bool) -> Result<Artifact> {
    let d = require_datum(cli)?;
    let opts = extremiser_options(cli);
    let r = solve_extremiser(&d, &Init::Isotropic, &opts)?;
    let mut v = json!({
        "command": command_name(cli.command),
        "seed": cli.seed,
        "n": d.n,
        "dims": d.dims(),
        "exponents": d.exponents,
        "bl_value": r.bl_value,
        "converged": r.converged,
        "iterations": r.iterations,
        "residual": r.residual,
        "tol": r.tol,
        "max_iter": opts.max_iter,
        "damping": opts.damping,
    });
    if full {
        v["gaussians"] = serde_json::to_value(&r.gaussians).expect("gaussians serialize");
        v["m_matrix"] = json!(crate::linalg::rows_of(&r.m_matrix));
    }
    json_artifact(v, Status::Pass)
}

fn default_mode(d: &BLDatum) -> FinitenessMode {
    if d.maps.iter().all(|l| l.nrows() == 1) && d.m() <= crate::finiteness::MAX_RANK_ONE_MAPS {
        FinitenessMode::RankOneExact
    } else {
        FinitenessMode::ExactLattice
    }
}

fn cmd_finiteness(cli: &Cli) -> Result<Artifact> {
    let d = require_datum(cli)?;
    let mode = cli.mode.unwrap_or_else(|| default_mode(&d));
    let r = finiteness_check(&d, mode, cli.budget, cli.seed)?;
    let verdict = r.verdict();
    if verdict == Verdict::Infinite {
        if let Some(w) = &r.violating_subspace {
            eprintln!("infinite: witness subspace spanned by {w:?}");
        }
    }
    let v = json!({
        "command": "finiteness",
        "seed": cli.seed,
        "mode": mode,
        "budget": cli.budget,
        "verdict": verdict,
        "report": r,
    });
    json_artifact(v, Status::Pass)
}

fn read_inputs(cli: &Cli) -> Result<crate::io::InputsFile> {
    match &cli.inputs {
        Some(p) => parse_inputs(&std::fs::read_to_string(p)?),
        None => Err(Error::InvalidParameters(format!("`{}` needs --inputs", command_name(cli.command)))),
    }
}

fn cmd_functional(cli: &Cli) -> Result<Artifact> {
    let d = require_datum(cli)?;
    let inputs = read_inputs(cli)?;
    let f = build_tuple(&inputs.f)?;
    let q = quadrature(cli, Method::TensorGrid, d.n)?;
    let r = bl_functional(&d, &f, &q)?;
    let v = json!({
        "command": "functional",
        "seed": cli.seed,
        "quadrature": quadrature_json(&q),
        "value": r.value,
        "stderr": r.stderr,
        "error_estimate": r.error_estimate,
        "numerator": r.numerator.value,
        "masses": r.masses,
        "boundary_fraction": r.boundary_fraction,
        "domain": {"lo": r.domain.lo, "hi": r.domain.hi},
    });
    json_artifact(v, Status::Pass)
}

/// Origin plus ±0.5 along each axis.
fn default_ball_grid(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]];
    for i in 0..n {
        for s in [-0.5, 0.5] {
            let mut x = vec![0.0; n];
            x[i] = s;
            out.push(x);
        }
    }
    out
}

fn cmd_ball(cli: &Cli) -> Result<Artifact> {
    let d = require_datum(cli)?;
    let inputs = read_inputs(cli)?;
    let f = build_tuple(&inputs.f)?;
    let g = match &inputs.g {
        Some(g) => build_tuple(g)?,
        None => return Err(Error::InvalidParameters("ball-check needs `g` in the inputs file".into())),
    };
    let grid = inputs.x_grid.clone().unwrap_or_else(|| default_ball_grid(d.n));
    let q = quadrature(cli, Method::TensorGrid, d.n)?;
    let r = ball_inequality_check(&d, &f, &g, &grid, &q, cli.near_extremiser)?;
    let consequences_hold = [&r.convolution_monotone, &r.localization_monotone]
        .iter()
        .all(|c| c.as_ref().is_none_or(|c| c.holds));
    let status = if !r.holds || !consequences_hold {
        Status::Fail
    } else if r.lhs > r.rhs || r.gap_in_errors < 3.0 {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let v = json!({
        "command": "ball-check",
        "seed": cli.seed,
        "quadrature": quadrature_json(&q),
        "near_extremiser": cli.near_extremiser,
        "inconclusive": status == Status::Inconclusive,
        "report": r,
    });
    json_artifact(v, status)
}

fn nonlinear_datum(cli: &Cli) -> Result<NonlinearDatum> {
    match (&cli.tag, &cli.input) {
        (Some(t), _) => match young_exponents(cli)? {
            Some(p) => lookup_with(t, p),
            None => lookup(t),
        },
        (None, Some(p)) => from_linear("input", &read_datum(p)?),
        (None, None) => Err(Error::InvalidParameters("`nonlinear` needs --tag or --input".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum RowStatus {
    Pass,
    Inconclusive,
    Fail,
    Skipped,
}

#[derive(Debug, Serialize)]
struct NonlinearRow {
    delta: f64,
    status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<Value>,
}

fn status_of(holds: bool, inconclusive: bool) -> RowStatus {
    match (holds, inconclusive) {
        (false, _) => RowStatus::Fail,
        (true, true) => RowStatus::Inconclusive,
        (true, false) => RowStatus::Pass,
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

struct NonlinearCtx<'a> {
    nd: &'a NonlinearDatum,
    u: Vec<f64>,
    ext: ExtremiserResult,
    centers: Vec<Vec<f64>>,
    params: ExponentParams,
    q: QuadratureSpec,
    cert: Certification,
    kappa: f64,
}

impl NonlinearCtx<'_> {
    /// Extremiser of the linearization scaled to ρ and centred at B(u).
    fn family(&self, rho: f64) -> Result<InputTuple> {
        Ok(InputTuple::from_gaussians(&scale_gaussian(&self.ext.gaussians, rho)?, Some(&self.centers)))
    }

    fn row(&self, check: Check, delta: f64, mu: Option<f64>, seed: u64) -> Result<(RowStatus, Value)> {
        let nd = self.nd;
        match check {
            Check::BaseCase => {
                let mu = mu.unwrap_or_else(|| self.params.threshold(delta));
                let lp = LocalizedProblem::new(self.u.clone(), delta, mu, self.kappa)?;
                let r = base_case_check(nd, &lp, &self.params, &self.family(delta)?, &self.q, &self.cert)?;
                Ok((status_of(r.holds, r.inconclusive), to_value(&r)))
            }
            Check::Recursive => {
                let mu = mu.unwrap_or_else(|| 0.01 * self.params.threshold(delta));
                let lp = LocalizedProblem::new(self.u.clone(), delta, mu, self.kappa)?;
                let grid = axis_grid(&self.u, delta, 0.5);
                let family = [self.family(delta)?];
                let r = recursive_step_check(nd, &lp, &self.params, Some(&self.ext), &family, &grid, &self.q, &self.cert)?;
                let inconclusive = r.inputs.iter().any(|i| i.inconclusive);
                Ok((status_of(r.holds(), inconclusive), to_value(&r)))
            }
            Check::Perturbation => {
                // Generic direction: (1, 2, ..., n) normalized.
                let r = u_radius(delta);
                let w: Vec<f64> = (1..=nd.n).map(|i| i as f64).collect();
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let y: Vec<f64> = self.u.iter().zip(&w).map(|(c, wi)| c + r * wi / norm).collect();
                let g = scale_gaussian(&self.ext.gaussians, delta.powf(self.params.alpha))?;
                let rep = perturbation_check(nd, &self.u, &y, delta, &g, &self.q, &self.params, None)?;
                let inconclusive = rep.ok && rep.margin < 3.0 * (rep.lhs_stderr.powi(2) + rep.rhs_stderr.powi(2)).sqrt();
                Ok((status_of(rep.ok, inconclusive), to_value(&rep)))
            }
            Check::Submersion => {
                let r = u_radius(delta);
                let checks: Vec<_> = nd
                    .submersions
                    .iter()
                    .enumerate()
                    .map(|(j, s)| check_submersion(s, r, SUBMERSION_SAMPLES, seed.wrapping_add(j as u64)))
                    .collect();
                let ok = checks.iter().all(|c| c.ok());
                Ok((status_of(ok, false), to_value(&checks)))
            }
        }
    }
}

fn cmd_nonlinear(cli: &Cli) -> Result<Artifact> {
    let nd = nonlinear_datum(cli)?;
    let check = cli.check.unwrap_or(Check::Recursive);
    let params = exponent_params(cli)?;
    let deltas = if cli.deltas.is_empty() { vec![0.2, 0.1, 0.05] } else { cli.deltas.clone() };
    for &d in &deltas {
        check_delta(d)?;
    }
    let kappa = cli.kappa.unwrap_or(2.0);
    if !(kappa >= 1.0) {
        return Err(Error::InvalidParameters(format!("kappa = {kappa} must be at least 1")));
    }
    if let Some(mu) = cli.mu {
        if !(mu > 0.0) {
            return Err(Error::NonPositive { name: "mu", value: mu });
        }
    }
    nd.validate()?;
    let u = nd.base_point().to_vec();
    let lin = nd.linearization(&u)?;
    let ext = solve_extremiser(&lin, &Init::Isotropic, &extremiser_options(cli))?;
    let centers = nd.submersions.iter().map(|s| s.eval(&u)).collect();
    let ctx = NonlinearCtx {
        nd: &nd,
        u: u.clone(),
        ext,
        centers,
        params,
        q: quadrature(cli, Method::Importance, nd.n)?,
        cert: Certification { seed: cli.seed, ..Certification::default() },
        kappa,
    };

    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let row = match ctx.row(check, delta, cli.mu, cli.seed) {
            Ok((status, report)) => NonlinearRow { delta, status, error: None, report: Some(report) },
            Err(e) if exit_code(&e) == 2 && !matches!(e, Error::ThresholdViolated { .. } | Error::OutsideNeighbourhood { .. }) => {
                return Err(e)
            }
            Err(e) => NonlinearRow { delta, status: RowStatus::Skipped, error: Some(e.to_string()), report: None },
        };
        rows.push(row);
    }
    let largest = rows
        .iter()
        .filter(|r| matches!(r.status, RowStatus::Pass | RowStatus::Inconclusive))
        .map(|r| r.delta)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    let status = if rows.iter().any(|r| r.status == RowStatus::Fail) {
        Status::Fail
    } else if rows.iter().any(|r| r.status == RowStatus::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let v = json!({
        "command": "nonlinear",
        "seed": cli.seed,
        "datum": nd.name,
        "check": check,
        "base_point": u,
        "exponents": nd.exponents,
        "params": params,
        "kappa": kappa,
        "quadrature": quadrature_json(&ctx.q),
        "linear_bl_value": ctx.ext.bl_value,
        "rows": rows,
        "largest_passing_delta": largest,
    });
    json_artifact(v, status)
}

fn cmd_young_lie(cli: &Cli) -> Result<Artifact> {
    let group: Group = cli.group.as_deref().unwrap_or("heisenberg").parse()?;
    let p = young_exponents(cli)?.unwrap_or(DEFAULT_YOUNG_P);
    let deltas = if cli.deltas.is_empty() { vec![0.2, 0.1, 0.05] } else { cli.deltas.clone() };
    for &d in &deltas {
        check_delta(d)?;
    }
    let q = quadrature(cli, Method::Importance, group.dim())?;
    let rows = lie_group_young(group, p, &deltas, &q)?;
    let header = [
        ("seed", cli.seed.to_string()),
        ("group", group.tag()),
        ("exponents", p.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(";")),
        ("method", format!("{:?}", q.method)),
        ("resolution", q.resolution.to_string()),
    ];
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![fmt_num(r.delta), fmt_num(r.ratio), fmt_num(r.stderr), fmt_num(r.bound), fmt_num(r.slack)])
        .collect();
    let contents = csv_table(&header, &["delta", "ratio", "stderr", "bound", "slack"], &table)?;
    Ok(Artifact { contents, status: Status::Pass })
}

fn cmd_schedule(cli: &Cli) -> Result<Artifact> {
    let exponents = exponent_params(cli)?;
    let sigma = match (cli.sigma, &cli.input) {
        (Some(s), _) => s,
        (None, Some(p)) => read_datum(p)?.sigma(),
        (None, None) => 2.0,
    };
    let delta0 = match cli.delta0 {
        Some(d) => d,
        None => choose_delta0(cli.epsilon, sigma, exponents.alpha, exponents.beta)?,
    };
    let mu = cli.mu.unwrap_or(1e-4);
    let kappa0 = cli.kappa.unwrap_or(2.0);
    let params = ScheduleParams::new(exponents, delta0, mu, cli.epsilon, sigma);
    let s = schedule(&params)?;
    let kappas = kappa_evolution(&params, s.k_star, kappa0)?;
    let acc = accumulated_factor(&params, s.k_star)?;
    let mut table = Vec::with_capacity(s.k_star + 1);
    for k in 0..=s.k_star {
        let running = accumulated_factor(&params, k)?.product;
        table.push(vec![k.to_string(), fmt_num(s.deltas[k]), fmt_num(kappas[k]), fmt_num(running)]);
    }
    let mut header = vec![
        ("seed", cli.seed.to_string()),
        ("alpha", fmt_num(exponents.alpha)),
        ("beta", fmt_num(exponents.beta)),
        ("beta_prime", fmt_num(exponents.beta_prime)),
        ("delta0", fmt_num(delta0)),
        ("delta0_chosen", cli.delta0.is_none().to_string()),
        ("mu", fmt_num(mu)),
        ("epsilon", fmt_num(cli.epsilon)),
        ("sigma", fmt_num(sigma)),
        ("kappa0", fmt_num(kappa0)),
        ("k_star", s.k_star.to_string()),
        ("product", fmt_num(acc.product)),
        ("log_bound", fmt_num(acc.log_bound)),
        ("final_bound", fmt_num(final_bound(cli.epsilon, sigma))),
    ];
    for a in params.assumptions() {
        header.push(("assumption", a));
    }
    let contents = csv_table(&header, &["k", "delta_k", "kappa_k", "running_product"], &table)?;
    Ok(Artifact { contents, status: Status::Pass })
}
