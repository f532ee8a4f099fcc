use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use qhdalm::driver::{self, bench, DriverError, SamplerKind, SolveReport, SolverConfig};
use qhdalm::embedding::IsingModel;
use qhdalm::hydrogen::{self, HydrogenError, HydrogenSolution};
use qhdalm::model::{ModelError, NlpProblem, ScalarExpr, Variable};
use qhdalm::qhd::{self, Grid, Propagator, QhdSchedule, WaveState};
use qhdalm::sb::{self, SbParams};

use crate::output::{self, num, CliError};
use crate::{
    HydrogenArgs, HydrogenMethod, MakeTablesArgs, QhdDemoArgs, SamplerArg, SbBenchArgs, SolveArgs, SolverFlags, Suite,
};

fn driver_error(e: DriverError) -> CliError {
    match e {
        DriverError::Problem(diags) => {
            let details = diags.iter().map(|d| json!(d)).collect();
            CliError::input("invalid-problem", "problem failed validation").with_details(details)
        }
        DriverError::Config(m) => CliError::input("invalid-config", m),
        e @ (DriverError::TooManyVariables { .. } | DriverError::InitialPoint { .. }) => {
            CliError::input("invalid-config", e.to_string())
        }
        e => CliError::runtime(e.to_string()),
    }
}

fn model_error(e: ModelError) -> CliError {
    CliError::input("invalid-problem", e.to_string())
}

fn hydrogen_error(e: HydrogenError) -> CliError {
    match e {
        HydrogenError::Invalid(fields) => {
            let details = fields
                .iter()
                .map(|f| json!({ "field": f.field, "message": f.message }))
                .collect();
            CliError::input("invalid-params", "hydrogen parameters failed validation").with_details(details)
        }
        e @ (HydrogenError::Io { .. } | HydrogenError::Parse(_) | HydrogenError::Dimension { .. }) => {
            CliError::input("invalid-params", e.to_string())
        }
        e => CliError::runtime(e.to_string()),
    }
}

fn load_problem(path: &Path) -> Result<NlpProblem, CliError> {
    NlpProblem::from_json(&output::read_text(path)?).map_err(model_error)
}

fn solver_config(flags: &SolverFlags) -> Result<SolverConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(p) => serde_json::from_str(&output::read_text(p)?)
            .map_err(|e| CliError::input("invalid-config", format!("{}: {e}", p.display())))?,
        None => SolverConfig::default(),
    };
    cfg.seed = flags.seed;
    if let Some(s) = flags.sampler {
        cfg.sampler = match s {
            SamplerArg::Auto => SamplerKind::Auto,
            SamplerArg::QhdDense => SamplerKind::QhdDense,
            SamplerArg::Sb => SamplerKind::Sb,
            SamplerArg::Random => SamplerKind::Random,
        };
    }
    let alm = &mut cfg.alm;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(cfg.levels, flags.levels);
    set!(alm.rho0, flags.rho0);
    set!(alm.gamma, flags.gamma);
    set!(alm.rho_max, flags.rho_max);
    set!(alm.eta, flags.eta);
    set!(alm.tol_feas, flags.tol_feas);
    set!(alm.tol_stat, flags.tol_stat);
    set!(alm.max_outer, flags.max_outer);
    if flags.project_mu {
        alm.project_mu = true;
    }
    if flags.time_budget.is_some() {
        cfg.time_budget = flags.time_budget;
    }
    cfg.validate().map_err(driver_error)?;
    Ok(cfg)
}

fn trace_rows(report: &SolveReport) -> Vec<Vec<String>> {
    report
        .iterations
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                num(r.objective),
                num(r.true_infeasibility),
                num(r.max_violation),
                num(r.rho_min),
                num(r.rho_max),
                r.sampler_best.map(num).unwrap_or_default(),
                r.sampler_fallback.to_string(),
                num(r.refined_best),
                num(r.stationarity),
                r.candidates.to_string(),
            ]
        })
        .collect()
}

const TRACE_HEADER: [&str; 11] = [
    "k",
    "objective",
    "true_infeasibility",
    "max_violation",
    "rho_min",
    "rho_max",
    "sampler_best",
    "sampler_fallback",
    "refined_best",
    "stationarity",
    "candidates",
];

pub fn solve(a: SolveArgs) -> Result<i32, CliError> {
    output::check_input(&a.problem)?;
    if let Some(c) = &a.solver.config {
        output::check_input(c)?;
    }
    output::check_output(&a.out)?;
    if let Some(t) = &a.trace {
        output::check_output(t)?;
    }
    let problem = load_problem(&a.problem)?;
    let cfg = solver_config(&a.solver)?;
    info!("solving {} ({} variables)", a.problem.display(), problem.dim());
    let report = if a.baseline {
        driver::baseline_alm(&problem, &cfg)
    } else {
        driver::solve(&problem, &cfg)
    }
    .map_err(driver_error)?;
    output::emit_text(Some(&a.out), &report.to_json())?;
    output::write_meta(&a.out, json!(report.timings))?;
    if let Some(t) = &a.trace {
        output::write_csv(t, &TRACE_HEADER, trace_rows(&report))?;
    }
    info!("status {:?}, objective {}", report.status, report.objective);
    Ok(report.status.exit_code())
}

#[derive(Serialize)]
struct SbReport {
    format_version: u32,
    n_spins: usize,
    params: SbParams,
    best_energy: f64,
    best_replica: usize,
    best_spins: Vec<i8>,
    replica_energies: Vec<f64>,
    clamp_events: usize,
}

pub fn sb_bench(a: SbBenchArgs) -> Result<i32, CliError> {
    output::check_input(&a.ising)?;
    for p in [&a.out, &a.trajectory].into_iter().flatten() {
        output::check_output(p)?;
    }
    let ising = IsingModel::from_edge_list(&output::read_text(&a.ising)?)
        .map_err(|e| CliError::input("invalid-ising", e.to_string()))?;
    let mut params = sb::auto_params(&ising);
    macro_rules! set {
        ($($f:ident),*) => {
            $(if let Some(v) = a.$f {
                params.$f = v;
            })*
        };
    }
    set!(
        replicas,
        steps,
        dt,
        kerr,
        detuning,
        xi0,
        pump_start,
        pump_end,
        init_amplitude
    );
    params.seed = a.seed;
    if a.trajectory.is_some() {
        params.trajectory_every = a.trajectory_every;
    }
    params
        .validate()
        .map_err(|e| CliError::input("invalid-params", e.to_string()))?;
    let started = std::time::Instant::now();
    let result = sb::run(&ising, &params).map_err(|e| CliError::runtime(e.to_string()))?;
    let elapsed = started.elapsed().as_secs_f64();
    let report = SbReport {
        format_version: 1,
        n_spins: ising.n_spins(),
        params: params.clone(),
        best_energy: result.best_energy,
        best_replica: result.best_replica,
        best_spins: result.best_spins.clone(),
        replica_energies: result.replica_energies.clone(),
        clamp_events: result.clamp_events,
    };
    output::emit_text(a.out.as_deref(), &output::to_json(&report))?;
    if let Some(out) = &a.out {
        output::write_meta(out, json!({ "total": elapsed }))?;
    }
    if let (Some(path), Some(traj)) = (&a.trajectory, &result.trajectory) {
        let mut header = vec!["step".to_string()];
        header.extend((0..ising.n_spins()).map(|i| format!("x{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = traj.iter().enumerate().map(|(k, xs)| {
            let mut r = vec![(k * params.trajectory_every).to_string()];
            r.extend(xs.iter().map(|&v| num(v)));
            r
        });
        output::write_csv(path, &header, rows)?;
    }
    Ok(0)
}

fn demo_problem() -> NlpProblem {
    let x = ScalarExpr::var(0);
    NlpProblem::box_constrained(
        vec![Variable::new("x", 0.0, 1.0)],
        (x + ScalarExpr::constant(-0.7)).powi(2),
    )
}

pub fn qhd_demo(a: QhdDemoArgs) -> Result<i32, CliError> {
    if let Some(p) = &a.problem {
        output::check_input(p)?;
    }
    for p in [Some(&a.observables), Some(&a.distribution), a.out.as_ref()]
        .into_iter()
        .flatten()
    {
        output::check_output(p)?;
    }
    if a.every == 0 {
        return Err(CliError::input("invalid-params", "--every must be at least 1"));
    }
    let problem = match &a.problem {
        Some(p) => load_problem(p)?,
        None => demo_problem(),
    };
    let diags = problem.validate();
    if !diags.is_empty() {
        return Err(driver_error(DriverError::Problem(diags)));
    }
    if !problem.is_box_only() {
        return Err(CliError::input(
            "invalid-problem",
            "qhd-demo takes a box-constrained problem; use solve for constrained ones",
        ));
    }
    let bad = |e: qhd::QhdError| CliError::input("invalid-params", e.to_string());
    let bounds = problem.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let grid = Grid::new(a.points, bounds).map_err(bad)?;
    let sched = QhdSchedule::with_ratio(a.time, a.dt, a.ratio);
    sched.validate().map_err(bad)?;
    let potential = qhd::discretize_potential(&problem.objective, &grid).map_err(bad)?;
    let prop = Propagator::new(&grid, potential.clone()).map_err(bad)?;

    let mut rows = Vec::new();
    let psi0 = WaveState::uniform(&grid);
    let observe = |step: usize, t: f64, psi: &[_]| {
        if !(step + 1).is_multiple_of(a.every) && step + 1 != sched.steps() {
            return;
        }
        let probs: Vec<f64> = psi.iter().map(|c: &qhdalm::qhd::Complex64| c.norm_sqr()).collect();
        let norm: f64 = probs.iter().sum();
        let ef: f64 = probs.iter().zip(&potential).map(|(p, v)| p * v).sum::<f64>() / norm;
        let mut r = vec![(step + 1).to_string(), num(t), num(norm), num(ef)];
        for axis in 0..grid.dim() {
            let mean: f64 = probs
                .iter()
                .enumerate()
                .map(|(i, p)| p * grid.point(i)[axis])
                .sum::<f64>()
                / norm;
            r.push(num(mean));
        }
        rows.push(r);
    };
    let psi = prop
        .evolve_with(&psi0, &sched, observe)
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let names: Vec<String> = problem.variables.iter().map(|v| format!("mean_{}", v.name)).collect();
    let mut header = vec!["step", "t", "norm", "expected_f"];
    header.extend(names.iter().map(String::as_str));
    output::write_csv(&a.observables, &header, rows)?;

    let probs = psi.probabilities();
    let mut dheader: Vec<&str> = problem.variables.iter().map(|v| v.name.as_str()).collect();
    dheader.push("f");
    dheader.push("probability");
    let drows = probs.iter().enumerate().map(|(i, p)| {
        let mut r: Vec<String> = grid.point(i).into_iter().map(num).collect();
        r.push(num(potential[i]));
        r.push(num(*p));
        r
    });
    output::write_csv(&a.distribution, &dheader, drows)?;

    let peak = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
    let argmin = (0..potential.len()).fold(0, |b, i| if potential[i] < potential[b] { i } else { b });
    let summary = json!({
        "format_version": 1,
        "points": a.points,
        "steps": sched.steps(),
        "final_norm": psi.norm_sqr(),
        "expected_f": psi.expectation(&potential),
        "mean_position": psi.mean_position(),
        "most_likely_point": grid.point(peak),
        "grid_minimizer": grid.point(argmin),
        "grid_minimum": potential[argmin],
    });
    output::emit_text(a.out.as_deref(), &output::to_json(&summary))?;
    Ok(0)
}

#[derive(Serialize)]
struct HydrogenReport<'a> {
    format_version: u32,
    method: &'a str,
    seed: u64,
    horizon: usize,
    schedule: &'a HydrogenSolution,
    solve: &'a SolveReport,
}

fn schedule_path(a: &HydrogenArgs) -> PathBuf {
    a.schedule
        .clone()
        .unwrap_or_else(|| a.out.with_extension("schedule.csv"))
}

pub fn hydrogen(a: HydrogenArgs) -> Result<i32, CliError> {
    output::check_input(&a.params)?;
    let sched_path = schedule_path(&a);
    output::check_output(&a.out)?;
    output::check_output(&sched_path)?;
    let base = hydrogen::load_params(&a.params).map_err(hydrogen_error)?;
    let params = match a.horizon {
        Some(n) => base.with_horizon(n).map_err(hydrogen_error)?,
        None => base,
    };
    params.validate().map_err(hydrogen_error)?;
    let problem = hydrogen::build(&params).map_err(hydrogen_error)?;
    let cfg = SolverConfig {
        seed: a.seed,
        ..SolverConfig::default()
    };
    info!("hydrogen: {} slots, {} variables", params.horizon(), problem.dim());
    let report = match a.method {
        HydrogenMethod::QhdAlm => driver::solve(&problem, &cfg),
        HydrogenMethod::Alm => driver::baseline_alm(&problem, &cfg),
        HydrogenMethod::Multistart => driver::multistart_refine(&problem, a.starts, &cfg),
    }
    .map_err(driver_error)?;
    let sol = HydrogenSolution::from_point(&params, &report.solution, &report.slacks).map_err(hydrogen_error)?;
    let out = HydrogenReport {
        format_version: 1,
        method: &report.method,
        seed: a.seed,
        horizon: params.horizon(),
        schedule: &sol,
        solve: &report,
    };
    output::emit_text(Some(&a.out), &output::to_json(&out))?;
    output::write_meta(&a.out, json!(report.timings))?;

    let header = [
        "slot",
        "c_power",
        "p_renewable",
        "p_el",
        "p_buy",
        "lambda",
        "storage_end",
    ];
    let rows = (0..params.horizon()).map(|t| {
        vec![
            t.to_string(),
            num(params.c_power[t]),
            num(params.p_renewable[t]),
            num(sol.p_el[t]),
            num(sol.p_buy[t]),
            num(sol.lambda[t]),
            num(sol.storage[t + 1]),
        ]
    });
    output::write_csv(&sched_path, &header, rows)?;
    info!(
        "objective {} (profit {}), max violation {:e}",
        sol.objective,
        sol.profit,
        sol.feasibility.max()
    );
    Ok(report.status.exit_code())
}

pub const TABLE_HEADER: [&str; 7] = [
    "problem",
    "method",
    "seed",
    "objective",
    "true_infeasibility",
    "outer_iterations",
    "status",
];

fn status_label(s: driver::Status) -> String {
    match json!(s) {
        Value::String(v) => v,
        v => v.to_string(),
    }
}

pub fn make_tables(a: MakeTablesArgs) -> Result<i32, CliError> {
    if let Some(p) = &a.out {
        output::check_output(p)?;
    }
    if a.seeds == 0 {
        return Err(CliError::input("invalid-params", "--seeds must be at least 1"));
    }
    let rows = match a.suite {
        Suite::Small => bench::small_suite(a.seeds).map_err(driver_error)?,
    };
    let mut methods: Vec<&str> = Vec::new();
    for r in &rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.problem.clone(),
                r.method.clone(),
                r.seed.to_string(),
                format!("{:.9}", r.objective),
                format!("{:.3e}", r.true_infeasibility),
                r.outer_iterations.to_string(),
                status_label(r.status),
            ]
        })
        .collect();
    for m in methods {
        let objs: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.objective).collect();
        let problem = rows[0].problem.clone();
        out.push(vec![
            problem,
            m.to_string(),
            "median".into(),
            format!("{:.9}", bench::median(objs)),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    let text = output::csv_text(&TABLE_HEADER, out)?;
    output::emit_text(a.out.as_deref(), &text)?;
    Ok(0)
}
