use std::f64::consts::LN_2;
use std::path::{Path, PathBuf};

use queuecap::capacity::{default_lambda_grid, gap_verdict, sweep, CurveDocument};
use queuecap::dist::{Pmf, RateParams, ServiceModel, ServiceSpec, Tau};
use queuecap::entmax::{
    dual_bisection, oracle_grid_search, Diagnostics, EntMaxError, EntMaxProblem, Mode, SolverOptions, Truncation,
};
use queuecap::kkt::{
    deviations, receq_residuals, recursion_closed_form, residual_full, residual_gfeedback, toeplitz_build,
    toeplitz_homogeneous_null,
};
use queuecap::queuesim::{reduction_check, run_trace, trial_rng, FeedbackView, FnPolicy, PmfSampler, XSchedule};
use queuecap::{EntMaxSolution64, StationarityReport64};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::args::{
    Command, GapArgs, KktArgs, ModeArg, OracleArgs, ProgramArgs, RecursionArgs, ServiceRef, SimulateArgs, SolveArgs,
    SweepArgs, SweepFormat, TableFormat, ToeplitzArgs,
};
use crate::{read_json, CliError};

pub struct Context {
    pub options: SolverOptions,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    /// Primary output: the `--out` file, or stdout.
    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<(), CliError> {
        self.emit(&to_json(value))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("out: cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

pub fn dispatch(ctx: &Context, command: &Command) -> Result<(), CliError> {
    match command {
        Command::Solve(a) => solve(ctx, a),
        Command::Sweep(a) => cmd_sweep(ctx, a),
        Command::Gap(a) => gap(ctx, a),
        Command::Kkt(a) => kkt(ctx, a),
        Command::Recursion(a) => recursion(ctx, a),
        Command::Toeplitz(a) => toeplitz(ctx, a),
        Command::Simulate(a) => simulate(ctx, a),
        Command::Oracle(a) => oracle(ctx, a),
    }
}

fn resolve_service(r: &ServiceRef) -> Result<ServiceSpec, CliError> {
    match r {
        ServiceRef::Inline(spec) => Ok(spec.clone()),
        ServiceRef::Name(name) => match ServiceSpec::builtin(name) {
            Some(spec) => Ok(spec),
            None => {
                let path = Path::new(name);
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "service: `{name}` is neither a builtin (uniform12, uniform0123, geom, geom-trunc<N>) nor a file"
                    )));
                }
                read_json(path, "service file")
            }
        },
    }
}

fn load_service(r: &ServiceRef) -> Result<(ServiceSpec, ServiceModel<f64>), CliError> {
    let spec = resolve_service(r)?;
    let model = spec.build().map_err(|e| CliError::Config(format!("service: {e}")))?;
    Ok((spec, model))
}

fn mode_of(p: &ProgramArgs) -> Result<Mode, CliError> {
    match (p.mode, p.tau) {
        (ModeArg::Full, _) => Ok(Mode::Full),
        (ModeArg::Gfb, Some(tau)) => Ok(Mode::GFeedback { tau }),
        (ModeArg::Gfb, None) => Err(CliError::Config("tau: --mode gfb needs --tau".into())),
    }
}

/// Budget `q` from `--lambda` or `--budget`.
fn budget_of(p: &ProgramArgs, service: &ServiceModel<f64>) -> Result<f64, CliError> {
    match (p.lambda, p.budget) {
        (Some(l), None) => {
            let rate = RateParams::for_service(service, l, Tau::Infinite)
                .map_err(|e| CliError::Config(format!("lambda: {e}")))?;
            Ok(rate.budget_q)
        }
        (None, Some(q)) if q >= 0.0 && q.is_finite() => Ok(q),
        (None, Some(q)) => Err(CliError::Config(format!("budget: {q} must be finite and nonnegative"))),
        (None, None) => Err(CliError::Config("lambda: one of --lambda or --budget is required".into())),
        (Some(_), Some(_)) => Err(CliError::Config("lambda: --lambda and --budget are exclusive".into())),
    }
}

fn problem_of(p: &ProgramArgs, service: &ServiceModel<f64>, options: &SolverOptions) -> Result<EntMaxProblem<f64>, CliError> {
    let q = budget_of(p, service)?;
    Ok(EntMaxProblem::with_budget(service.pmf.clone(), q, mode_of(p)?).options(*options))
}

fn stationarity(sol: &EntMaxSolution64, service: &ServiceModel<f64>) -> Result<StationarityReport64, CliError> {
    Ok(match sol.mode {
        Mode::Full => residual_full(sol, service)?,
        Mode::GFeedback { tau } => residual_gfeedback(sol, service, tau)?,
    })
}

/// Written by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOutput {
    pub service: ServiceSpec,
    pub lambda: Option<f64>,
    /// `λ (H(W+S) - H(S))` in bits per slot when `λ` is given.
    pub rate_bits: Option<f64>,
    pub solution: EntMaxSolution64,
    pub stationarity: StationarityReport64,
}

/// Written by `solve` in place of [`SolveOutput`] when the solver fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveFailure {
    pub status: String,
    pub message: String,
    pub diagnostics: Option<Diagnostics>,
}

fn solve(ctx: &Context, a: &SolveArgs) -> Result<(), CliError> {
    let (spec, service) = load_service(&a.program.service)?;
    let mut problem = problem_of(&a.program, &service, &ctx.options)?;
    if let Some(n) = a.window {
        problem = problem.truncation(Truncation::Fixed(n));
    }
    let sol = match dual_bisection(&problem) {
        Ok(s) => s,
        Err(e @ (EntMaxError::NoConvergence(_) | EntMaxError::TruncationInsufficient { .. })) => {
            let diagnostics = match &e {
                EntMaxError::NoConvergence(d) => Some((**d).clone()),
                _ => None,
            };
            ctx.emit_json(&SolveFailure { status: "no-convergence".into(), message: e.to_string(), diagnostics })?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let report = stationarity(&sol, &service)?;
    let rate_bits = a.program.lambda.map(|l| l * (sol.entropy_value - service.entropy()) / LN_2);
    eprintln!(
        "H = {:.12} nats  beta = {:.6e}  alpha = {:.6e}  kkt = {:.2e}  err = {:.2e}  n_in = {}",
        sol.entropy_value,
        sol.multiplier_mean,
        sol.multiplier_norm,
        report.max_abs_residual,
        sol.error_bound,
        sol.truncation_report.n_in
    );
    ctx.emit_json(&SolveOutput { service: spec, lambda: a.program.lambda, rate_bits, solution: sol, stationarity: report })
}

fn cmd_sweep(ctx: &Context, a: &SweepArgs) -> Result<(), CliError> {
    let (_, service) = load_service(&a.service)?;
    if a.taus.is_empty() {
        return Err(CliError::Config("taus: at least one value is required".into()));
    }
    let grid = match &a.grid {
        Some(g) => g.clone(),
        None if a.points == 0 => return Err(CliError::Config("points: must be positive".into())),
        None => default_lambda_grid(service.rate_mu, a.points),
    };
    let curve = sweep(&service, &a.taus, &grid, &ctx.options)?;
    eprintln!("{:>10}  {:>12}  {:>12}  {:>12}  verdict", "lambda", "C_F bits", "bound bits", "gap bits");
    for r in &curve.rows {
        eprintln!(
            "{:>10.6}  {:>12.8}  {:>12.8}  {:>12.4e}  {}",
            r.lambda,
            r.c_full_bits,
            r.g_bits.last().copied().unwrap_or(f64::NAN),
            r.gap_bits.unwrap_or(f64::NAN),
            r.verdict.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    eprintln!("sup C_F = {:.10} bits at lambda = {:.8}", curve.sup_full.1, curve.sup_full.0);
    match a.format {
        SweepFormat::Csv => ctx.emit(&curve.to_csv()),
        SweepFormat::Json => ctx.emit_json(&CurveDocument::new(&service, &ctx.options, curve)),
    }
}

fn gap(ctx: &Context, a: &GapArgs) -> Result<(), CliError> {
    let (_, service) = load_service(&a.service)?;
    let report = gap_verdict(&service, a.lambda, a.tau, &ctx.options)?;
    eprintln!(
        "lambda = {}  tau = {}  C_F = {:.10} bits  bound = {:.10} bits",
        report.lambda, report.tau, report.cf_bits, report.g_bits
    );
    println!("{}", report.verdict_line());
    if let Some(p) = &ctx.out {
        write_file(p, &to_json(&report))?;
    }
    Ok(())
}

fn kkt(ctx: &Context, a: &KktArgs) -> Result<(), CliError> {
    let (_, service) = load_service(&a.program.service)?;
    let sol = match &a.solution {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("solution {}: {e}", path.display())))?;
            // a full `solve` output or a bare solution
            match serde_json::from_str::<SolveOutput>(&text) {
                Ok(o) => o.solution,
                Err(_) => serde_json::from_str::<EntMaxSolution64>(&text)
                    .map_err(|e| CliError::Config(format!("solution {}: {e}", path.display())))?,
            }
        }
        None => dual_bisection(&problem_of(&a.program, &service, &ctx.options)?)?,
    };
    let report = stationarity(&sol, &service)?;
    eprintln!("{:>5}  {:>14}  {:>12}  active", "n", "input mass", "residual");
    for (n, r) in report.residuals.iter().enumerate() {
        let active = report.active_set.binary_search(&n).is_ok();
        eprintln!("{n:>5}  {:>14.6e}  {:>12.3e}  {}", sol.input_law.get(n), r, if active { "*" } else { "" });
    }
    eprintln!("max residual {:.3e} (tolerance {:.1e})", report.max_abs_residual, a.tol);
    ctx.emit_json(&report)?;
    if report.max_abs_residual > a.tol {
        return Err(CliError::Numerical(format!(
            "stationarity residual {:.3e} exceeds {:.1e}",
            report.max_abs_residual, a.tol
        )));
    }
    Ok(())
}

/// Written by `recursion --format json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecursionOutput {
    pub q: f64,
    pub gamma: f64,
    pub delta: f64,
    pub x: Vec<f64>,
    /// Recurrence residual at `n = 1..`.
    pub residuals: Vec<f64>,
    /// `x_n - (1 + γ + nδ)`.
    pub deviations: Vec<f64>,
}

fn recursion(ctx: &Context, a: &RecursionArgs) -> Result<(), CliError> {
    let x = recursion_closed_form(a.q, a.gamma, a.delta, a.n)?;
    let residuals = receq_residuals(a.q, a.gamma, a.delta, &x);
    let dev = deviations(&x, a.gamma, a.delta);
    match a.format {
        TableFormat::Table => {
            let mut t = format!("{:>4}  {:>22}  {:>12}  {:>22}\n", "n", "x_n", "residual", "deviation");
            for n in 0..x.len() {
                let r = if n == 0 { String::from("-") } else { format!("{:.3e}", residuals[n - 1]) };
                t.push_str(&format!("{n:>4}  {:>22.15e}  {r:>12}  {:>+22.15e}\n", x[n], dev[n]));
            }
            ctx.emit(&t)
        }
        TableFormat::Json => ctx.emit_json(&RecursionOutput {
            q: a.q,
            gamma: a.gamma,
            delta: a.delta,
            x,
            residuals,
            deviations: dev,
        }),
    }
}

/// Written by `toeplitz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToeplitzOutput {
    pub q: Vec<f64>,
    pub n: usize,
    pub delta: f64,
    pub rhs: Vec<f64>,
    pub solution: Vec<f64>,
    /// `‖A z - b‖∞`.
    pub residual: f64,
    pub only_zero_solution: bool,
    pub diagonal: f64,
    pub sigma_min: f64,
}

fn toeplitz(ctx: &Context, a: &ToeplitzArgs) -> Result<(), CliError> {
    let law = match (&a.q, &a.service, a.tau) {
        (Some(q), None, _) => Pmf::new(q.clone()).map_err(|e| CliError::Config(format!("q: {e}")))?,
        (None, Some(s), Some(tau)) => load_service(s)?.1.pmf.threshold_transform(tau as usize),
        _ => return Err(CliError::Config("q: give either --q or --service with --tau".into())),
    };
    let sys = toeplitz_build(&law, a.n, a.delta)?;
    let verdict = toeplitz_homogeneous_null(&sys)?;
    let z = sys.solve_rhs()?;
    let residual = sys.apply(&z).iter().zip(&sys.rhs).fold(0.0f64, |m, (x, b)| m.max((x - b).abs()));
    eprintln!(
        "n = {}  q_0 = {}  sigma_min = {:.6e}  homogeneous solution only zero: {}  residual = {:.3e}",
        sys.n, verdict.diagonal, verdict.sigma_min, verdict.only_zero_solution, residual
    );
    ctx.emit_json(&ToeplitzOutput {
        q: sys.q.clone(),
        n: sys.n,
        delta: sys.delta,
        rhs: sys.rhs.clone(),
        solution: z,
        residual,
        only_zero_solution: verdict.only_zero_solution,
        diagonal: verdict.diagonal,
        sigma_min: verdict.sigma_min,
    })
}

fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<(), CliError> {
    let (_, service) = load_service(&a.service)?;
    let schedule = match &a.x_fixed {
        Some(x) if x.is_empty() => return Err(CliError::Config("x_fixed: needs at least one offset".into())),
        Some(x) => XSchedule::Fixed(x.clone()),
        None => XSchedule::Uniform { max: a.x_max, packets: a.packets },
    };
    let report = reduction_check(&schedule, &service.pmf, a.tau, a.trials, ctx.seed)?;
    eprintln!(
        "tau = {}  trials = {}  packets checked = {}  max discrepancy = {}",
        report.tau, report.trials, report.packets_checked, report.max_discrepancy
    );
    if let Some(path) = &a.trace {
        write_file(path, &first_trace(&schedule, &service, a.tau, ctx.seed)?)?;
    }
    ctx.emit_json(&report)?;
    if report.max_discrepancy != 0 {
        return Err(CliError::Numerical(format!("reduction discrepancy {}", report.max_discrepancy)));
    }
    Ok(())
}

/// A trace driven by `a_i = c_{i-1} + X_i` with its own draws from `seed`.
fn first_trace(schedule: &XSchedule, service: &ServiceModel<f64>, tau: Tau, seed: u64) -> Result<String, CliError> {
    let mut rng = trial_rng(seed, 0);
    let sampler = PmfSampler::new(&service.pmf)?;
    let offsets: Vec<u64> = match schedule {
        XSchedule::Fixed(x) => x.clone(),
        XSchedule::Uniform { max, packets } => (0..*packets).map(|_| rng.gen_range(0..=*max)).collect(),
    };
    let services: Vec<u64> = offsets.iter().map(|_| sampler.sample(&mut rng)).collect();
    let policy = FnPolicy(|_, i, fb: &FeedbackView<'_>| fb.last_c() + offsets[i]);
    let mut trace = run_trace(&policy, 0, &services, tau)?;
    trace.seed = Some(seed);
    Ok(trace.to_csv())
}

fn oracle(ctx: &Context, a: &OracleArgs) -> Result<(), CliError> {
    let (_, service) = load_service(&a.program.service)?;
    let problem = problem_of(&a.program, &service, &ctx.options)?;
    let sol = oracle_grid_search(&problem, a.cap, a.resolution)?;
    eprintln!(
        "H = {:.10} nats on {{0..={}}} at resolution {}  (loss bound {:.3e}, {} grid points)",
        sol.entropy_value, sol.support_cap, sol.resolution, sol.lipschitz_bound, sol.grid_points
    );
    ctx.emit_json(&sol)
}
