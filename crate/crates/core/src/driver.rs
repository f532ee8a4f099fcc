//! Outer loop: augmented Lagrangian, global sampling, local refinement,
//! multiplier update.
//!
//! Each outer iteration builds the box-constrained augmented problem over
//! `(x, s)`, draws candidate points from a sampler (dense QHD for at most
//! three variables, otherwise SB on an Ising encoding), adds the incumbent
//! and a few uniform random points, refines every candidate with projected
//! gradient and keeps the one with the lowest augmented value.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alm::{self, AlmError, AlmSettings, AlmState, HistoryEntry, Multipliers, PenaltySchedule};
use crate::embedding::{self, uniform_levels, EmbeddingError};
use crate::model::{to_separable, Diagnostic, ModelError, NlpProblem, Point, Sense, Tape};
use crate::qhd::{self, Grid, QhdError, QhdSchedule, WaveState};
use crate::refine::{self, RefineError, RefineParams};
use crate::sb::{self, SbError, SbParams};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Dense QHD when the augmented problem has at most three variables, SB otherwise.
    #[default]
    Auto,
    QhdDense,
    Sb,
    /// No global sampler; random candidates only.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialPoint {
    #[default]
    Midpoint,
    /// Uniform in the box, drawn from the run seed.
    Random,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QhdSettings {
    pub total_time: f64,
    pub dt: f64,
    /// Factor by which the kinetic weight falls and the potential weight rises.
    pub ratio: f64,
    /// Grid points per axis; by default 64, 32 or 16 for 1, 2 or 3 variables.
    pub points: Option<usize>,
    pub shots: usize,
}

impl Default for QhdSettings {
    fn default() -> Self {
        Self {
            total_time: 10.0,
            dt: 0.01,
            ratio: 1000.0,
            points: None,
            shots: 128,
        }
    }
}

/// Replacements for individual fields of the automatically chosen SB parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbOverrides {
    pub kerr: Option<f64>,
    pub detuning: Option<f64>,
    pub xi0: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub replicas: Option<usize>,
    pub init_amplitude: Option<f64>,
}

impl SbOverrides {
    pub fn apply(&self, p: &mut SbParams) {
        if let Some(v) = self.kerr {
            p.kerr = v;
        }
        if let Some(v) = self.detuning {
            p.detuning = v;
            p.pump_end = 2.0 * v;
        }
        if let Some(v) = self.xi0 {
            p.xi0 = v;
        }
        if let Some(v) = self.dt {
            p.dt = v;
        }
        if let Some(v) = self.steps {
            p.steps = v;
        }
        if let Some(v) = self.replicas {
            p.replicas = v;
        }
        if let Some(v) = self.init_amplitude {
            p.init_amplitude = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub sampler: SamplerKind,
    /// Levels per variable in the Ising encoding.
    pub levels: usize,
    /// Trust-window shrink factor per outer iteration for the SB path.
    pub trust_shrink: f64,
    pub qhd: QhdSettings,
    pub sb: SbOverrides,
    pub alm: AlmSettings,
    pub refine: RefineParams,
    pub seed: u64,
    /// Best sampled points kept per iteration.
    pub sampler_candidates: usize,
    /// Uniform random points added per iteration.
    pub random_candidates: usize,
    pub initial_point: InitialPoint,
    pub initial_multipliers: Option<Multipliers>,
    /// Wall-clock limit in seconds; reaching it ends the run as max-iter.
    pub time_budget: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerKind::Auto,
            levels: 8,
            trust_shrink: 0.5,
            qhd: QhdSettings::default(),
            sb: SbOverrides::default(),
            alm: AlmSettings::default(),
            // the augmented subproblems of coupled models are badly
            // conditioned; a short budget leaves them unsolved and the
            // penalty then escalates on a stale violation
            refine: RefineParams {
                max_iters: 50_000,
                ..RefineParams::default()
            },
            seed: 0,
            sampler_candidates: 4,
            random_candidates: 3,
            initial_point: InitialPoint::Midpoint,
            initial_multipliers: None,
            time_budget: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        self.alm.validate().map_err(DriverError::Config)?;
        self.refine.validate()?;
        if self.levels < 2 {
            return bad("levels must be at least 2".into());
        }
        if !(self.trust_shrink > 0.0 && self.trust_shrink <= 1.0) {
            return bad("trust_shrink must lie in (0, 1]".into());
        }
        if self.qhd.shots == 0 {
            return bad("qhd.shots must be at least 1".into());
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0) {
                return bad("time_budget must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    #[error("invalid problem: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Problem(Vec<Diagnostic>),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("dense QHD needs at most {max} variables including slacks, problem has {got}")]
    TooManyVariables { got: usize, max: usize },
    #[error("initial point has length {got}, problem has {want} variables")]
    InitialPoint { got: usize, want: usize },
    #[error(transparent)]
    Alm(#[from] AlmError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Sampler failures are recoverable: the iteration falls back to random candidates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Qhd(#[from] QhdError),
    #[error(transparent)]
    Sb(#[from] SbError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("potential is not finite at {0:?}")]
    NonFinite(Point),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    /// Penalties at their cap with no violation progress.
    Stalled,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIter => 2,
            Status::Stalled => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Original objective, in the problem's own sense.
    pub objective: f64,
    pub true_infeasibility: f64,
    pub max_violation: f64,
    /// `h_j + s_j` per inequality.
    pub slack_residuals: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Lowest augmented value among sampled points.
    pub sampler_best: Option<f64>,
    pub sampler_fallback: bool,
    /// Augmented value of the refined incumbent.
    pub refined_best: f64,
    pub stationarity: f64,
    pub candidates: usize,
}

/// Seconds spent per stage of one outer iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub build: f64,
    pub sample: f64,
    pub refine: f64,
    pub update: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.build + self.sample + self.refine + self.update
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub iterations: Vec<StageTimes>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub format_version: u32,
    pub method: String,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub variables: Vec<String>,
    pub iterations: Vec<IterationRecord>,
    pub solution: Point,
    pub slacks: Vec<f64>,
    pub objective: f64,
    pub true_infeasibility: f64,
    pub stationarity: f64,
    pub multipliers: Multipliers,
    pub status: Status,
    /// Wall-clock data; kept out of the serialized report so that it stays
    /// reproducible.
    #[serde(skip)]
    pub timings: Timings,
}

fn derive_seed(seed: u64, k: usize, salt: u64) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn uniform_point(problem: &NlpProblem, rng: &mut ChaCha8Rng) -> Point {
    problem
        .variables
        .iter()
        .map(|v| v.lower + rng.random::<f64>() * v.width())
        .collect()
}

fn finite_value(tape: &Tape, x: &[f64]) -> f64 {
    match tape.evaluate(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

/// Keeps the `count` distinct points with the lowest augmented value.
fn best_distinct(aug: &NlpProblem, points: Vec<Point>, count: usize) -> (Vec<Point>, Option<f64>) {
    let tape = Tape::compile(&aug.objective);
    let mut scored: Vec<(f64, Point)> = points.into_iter().map(|p| (finite_value(&tape, &p), p)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.dedup_by(|a, b| a.1 == b.1);
    let best = scored.first().map(|s| s.0).filter(|v| v.is_finite());
    (scored.into_iter().take(count).map(|s| s.1).collect(), best)
}

/// Shots from dense QHD over the box mapped to the unit cube, with the
/// potential rescaled to `[0, 1]`.
pub fn qhd_sample(aug: &NlpProblem, settings: &QhdSettings, seed: u64) -> Result<Vec<Point>, SamplerError> {
    let d = aug.dim();
    let points = settings.points.unwrap_or(match d {
        1 => 64,
        2 => 32,
        _ => 16,
    });
    let grid = Grid::new(points, vec![(0.0, 1.0); d])?;
    let lower = aug.lower();
    let width: Vec<f64> = aug.variables.iter().map(|v| v.width()).collect();
    let to_box = |u: &[f64]| -> Point { u.iter().zip(&lower).zip(&width).map(|((u, l), w)| l + u * w).collect() };
    let tape = Tape::compile(&aug.objective);
    let mut pot = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let x = to_box(&grid.point(idx));
        let v = tape.evaluate(&x).map_err(|source| QhdError::Potential {
            point: x.clone(),
            source,
        })?;
        if !v.is_finite() {
            return Err(SamplerError::NonFinite(x));
        }
        pot.push(v);
    }
    let (lo, hi) = pot
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    for v in &mut pot {
        *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
    }
    let sched = QhdSchedule::with_ratio(settings.total_time, settings.dt, settings.ratio);
    let psi = qhd::evolve(&WaveState::uniform(&grid), &pot, &sched)?;
    Ok(qhd::sample(&psi, settings.shots, seed)
        .iter()
        .map(|u| to_box(u))
        .collect())
}

/// Per-variable level window of width `width[i]` around `center`, shifted to stay in the box.
fn trust_levels(aug: &NlpProblem, center: &[f64], width: &[f64], r: usize) -> Vec<Vec<f64>> {
    aug.variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = width[i].min(v.width());
            let lo = (center[i] - 0.5 * w).max(v.lower).min(v.upper - w);
            let hi = (lo + w).min(v.upper);
            if hi > lo {
                uniform_levels(lo, hi, r)
            } else {
                vec![v.lower, v.upper.max(v.lower + f64::EPSILON)]
            }
        })
        .collect()
}

/// Replica readouts of SB on the Ising encoding of the augmented objective
/// (or of its quadratic model at `center` when it is not separable).
pub fn sb_sample(
    aug: &NlpProblem,
    center: &[f64],
    width: &[f64],
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<Point>, SamplerError> {
    let form = match to_separable(&aug.objective).into_form() {
        Some(f) => f,
        None => embedding::quadratic_model(aug, center)?.to_separable(),
    };
    let levels = trust_levels(aug, center, width, cfg.levels);
    let (ising, enc) = embedding::encode(&form, &levels)?;
    let mut params = sb::auto_params(&ising);
    params.xi0 = sb::row_norm_xi0(&ising, params.detuning);
    params.seed = seed;
    cfg.sb.apply(&mut params);
    let mut enc = enc;
    enc.fixed = center.to_vec();
    if ising.n_spins() == 0 {
        return Ok(vec![center.to_vec()]);
    }
    let res = sb::run(&ising, &params)?;
    Ok(res.replica_spins.iter().map(|s| embedding::decode(s, &enc)).collect())
}

fn resolve_sampler(kind: SamplerKind, dim: usize) -> SamplerKind {
    match kind {
        SamplerKind::Auto if dim <= qhd::MAX_DIM => SamplerKind::QhdDense,
        SamplerKind::Auto => SamplerKind::Sb,
        k => k,
    }
}

struct Prepared {
    original: NlpProblem,
    problem: NlpProblem,
    caps: Vec<f64>,
    state: AlmState,
}

fn prepare(problem: &NlpProblem, cfg: &SolverConfig, rng: &mut ChaCha8Rng) -> Result<Prepared, DriverError> {
    let diags = problem.validate();
    if !diags.is_empty() {
        return Err(DriverError::Problem(diags));
    }
    cfg.validate()?;
    let p = problem.normalized();
    let caps = alm::slack_caps(&p, cfg.seed);
    let mut state = AlmState::initial(&p, &caps, &cfg.alm);
    let n = p.dim();
    let x0: Option<Point> = match &cfg.initial_point {
        InitialPoint::Midpoint => None,
        InitialPoint::Random => Some(uniform_point(&p, rng)),
        InitialPoint::Given(v) => {
            if v.len() != n {
                return Err(DriverError::InitialPoint { got: v.len(), want: n });
            }
            let mut v = v.clone();
            p.project(&mut v);
            Some(v)
        }
    };
    if let Some(x0) = x0 {
        // slacks start where they close each inequality, within their box
        for (j, h) in p.inequalities.iter().enumerate() {
            let hv = h.evaluate(&x0).unwrap_or(0.0);
            state.incumbent[n + j] = (-hv).clamp(0.0, caps[j]);
        }
        state.incumbent[..n].copy_from_slice(&x0);
    }
    if let Some(m) = &cfg.initial_multipliers {
        if m.lambda.len() != p.equalities.len() || m.mu.len() != p.inequalities.len() {
            return Err(DriverError::Config(
                "initial multiplier lengths do not match the constraints".into(),
            ));
        }
        state.multipliers = m.clone();
    }
    Ok(Prepared {
        original: problem.clone(),
        problem: p,
        caps,
        state,
    })
}

fn original_objective(original: &NlpProblem, x: &[f64]) -> Result<f64, ModelError> {
    original.objective.evaluate(x)
}

fn run_loop(problem: &NlpProblem, cfg: &SolverConfig, method: &str) -> Result<SolveReport, DriverError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let Prepared {
        original,
        problem: p,
        caps,
        mut state,
    } = prepare(problem, cfg, &mut rng)?;
    let n = p.dim();
    let total_dim = n + caps.len();
    let sampler = resolve_sampler(cfg.sampler, total_dim);
    if sampler == SamplerKind::QhdDense && total_dim > qhd::MAX_DIM {
        return Err(DriverError::TooManyVariables {
            got: total_dim,
            max: qhd::MAX_DIM,
        });
    }
    let has_constraints = !p.equalities.is_empty() || !p.inequalities.is_empty();
    let mut width: Vec<f64> = p
        .variables
        .iter()
        .map(|v| v.width())
        .chain(caps.iter().copied())
        .collect();
    let full_width = width.clone();

    let mut timings = Timings {
        setup: started.elapsed().as_secs_f64(),
        ..Default::default()
    };
    let mut records = Vec::new();
    let mut prev_violation = f64::INFINITY;
    let mut prev_objective: Option<f64> = None;
    let mut no_progress = 0;
    let mut status = Status::MaxIter;
    let mut last_stationarity = f64::INFINITY;

    for k in 0..cfg.alm.max_outer {
        if let Some(budget) = cfg.time_budget {
            if k > 0 && started.elapsed().as_secs_f64() >= budget {
                log::info!("time budget of {budget}s reached after {k} iterations");
                break;
            }
        }
        let mut times = StageTimes::default();
        let t0 = Instant::now();
        let aug = alm::build_augmented(&p, &state.multipliers, &state.penalties, &caps)?;
        times.build = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let sample_seed = derive_seed(cfg.seed, k, 2);
        let sampled = match sampler {
            SamplerKind::QhdDense => Some(qhd_sample(&aug, &cfg.qhd, sample_seed)),
            SamplerKind::Sb => Some(sb_sample(&aug, &state.incumbent, &width, cfg, sample_seed)),
            SamplerKind::Random | SamplerKind::Auto => None,
        };
        let mut fallback = false;
        let (mut candidates, sampler_best) = match sampled {
            Some(Ok(mut pts)) => {
                for x in &mut pts {
                    aug.project(x);
                }
                best_distinct(&aug, pts, cfg.sampler_candidates)
            }
            Some(Err(e)) => {
                log::warn!("sampler failed at outer iteration {k}: {e}; using random candidates");
                fallback = true;
                let pts = (0..cfg.sampler_candidates)
                    .map(|_| uniform_point(&aug, &mut rng))
                    .collect();
                (pts, None)
            }
            None => (Vec::new(), None),
        };
        candidates.insert(0, state.incumbent.clone());
        for _ in 0..cfg.random_candidates {
            candidates.push(uniform_point(&aug, &mut rng));
        }
        times.sample = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let refined: Vec<Result<refine::RefineResult, RefineError>> = candidates
            .par_iter()
            .map(|x0| refine::minimize(&aug, x0, &cfg.refine))
            .collect();
        let mut best: Option<refine::RefineResult> = None;
        for r in refined {
            match r {
                Ok(r) if r.objective.is_finite() => {
                    if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                        best = Some(r);
                    }
                }
                Ok(_) => {}
                Err(RefineError::Start(e)) => log::debug!("candidate skipped: {e}"),
                Err(e) => return Err(e.into()),
            }
        }
        let best = match best {
            Some(b) => b,
            None => refine::minimize(&aug, &state.incumbent, &cfg.refine)?,
        };
        times.refine = t2.elapsed().as_secs_f64();

        let t3 = Instant::now();
        state.incumbent = best.x_final.clone();
        let res = alm::residuals(&p, &state.incumbent)?;
        let objective = original_objective(&original, &state.incumbent[..n])?;
        last_stationarity = best.stationarity;
        state.record(HistoryEntry {
            objective,
            max_violation: res.max_violation,
            stationarity: best.stationarity,
        });
        records.push(IterationRecord {
            k,
            objective,
            true_infeasibility: res.true_infeasibility,
            max_violation: res.max_violation,
            slack_residuals: res.per_constraint[p.equalities.len()..].to_vec(),
            rho_min: if has_constraints { state.penalties.min() } else { 0.0 },
            rho_max: state.penalties.max(),
            sampler_best,
            sampler_fallback: fallback,
            refined_best: best.objective,
            stationarity: best.stationarity,
            candidates: candidates.len(),
        });

        let settled = match prev_objective {
            _ if !has_constraints => true,
            Some(prev) => (objective - prev).abs() <= cfg.alm.tol_obj,
            None => false,
        };
        if res.true_infeasibility <= cfg.alm.tol_feas && best.stationarity <= cfg.alm.tol_stat && settled {
            status = Status::Converged;
            times.update = t3.elapsed().as_secs_f64();
            timings.iterations.push(times);
            break;
        }
        prev_objective = Some(objective);

        if has_constraints {
            state.multipliers = alm::update_multipliers(
                &state.multipliers,
                &state.penalties,
                &p,
                &state.incumbent,
                cfg.alm.project_mu,
            )?;
            if state.penalties.at_cap() && res.max_violation >= prev_violation {
                no_progress += 1;
            } else {
                no_progress = 0;
            }
            // once feasible to tolerance a larger penalty only hurts the inner solve
            if res.max_violation > cfg.alm.tol_feas {
                state.penalties = alm::grow_penalty(&state.penalties, prev_violation, res.max_violation);
            }
            prev_violation = res.max_violation;
        }
        for (w, full) in width.iter_mut().zip(&full_width) {
            *w = (*w * cfg.trust_shrink).max(1e-3 * full);
        }
        times.update = t3.elapsed().as_secs_f64();
        timings.iterations.push(times);
        if no_progress >= 3 {
            status = Status::Stalled;
            break;
        }
    }

    let solution = state.incumbent[..n].to_vec();
    let slacks = state.incumbent[n..].to_vec();
    let res = alm::residuals(&p, &state.incumbent)?;
    timings.total = started.elapsed().as_secs_f64();
    Ok(SolveReport {
        format_version: REPORT_FORMAT_VERSION,
        method: method.to_string(),
        sampler,
        seed: cfg.seed,
        variables: original.variables.iter().map(|v| v.name.clone()).collect(),
        iterations: records,
        objective: original_objective(&original, &solution)?,
        solution,
        slacks,
        true_infeasibility: res.true_infeasibility,
        stationarity: last_stationarity,
        multipliers: state.multipliers,
        status,
        timings,
    })
}

/// Full sampler-assisted augmented Lagrangian solve.
pub fn solve(problem: &NlpProblem, cfg: &SolverConfig) -> Result<SolveReport, DriverError> {
    run_loop(problem, cfg, "qhd-alm")
}

/// The same outer loop without a global sampler: incumbent plus random candidates.
pub fn baseline_alm(problem: &NlpProblem, cfg: &SolverConfig) -> Result<SolveReport, DriverError> {
    let cfg = SolverConfig {
        sampler: SamplerKind::Random,
        ..cfg.clone()
    };
    run_loop(problem, &cfg, "alm")
}

/// `n_starts` uniform random starts, each refined on the augmented problem
/// with zero multipliers and penalty `rho0`; the lowest augmented value wins.
/// Start `i` is the same for every `n_starts > i`.
pub fn multistart_refine(
    problem: &NlpProblem,
    n_starts: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport, DriverError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let diags = problem.validate();
    if !diags.is_empty() {
        return Err(DriverError::Problem(diags));
    }
    cfg.validate()?;
    if n_starts == 0 {
        return Err(DriverError::Config("n_starts must be at least 1".into()));
    }
    let p = problem.normalized();
    let caps = alm::slack_caps(&p, cfg.seed);
    let mult = Multipliers::zeros(&p);
    let rho = PenaltySchedule::uniform(&p, &cfg.alm);
    let aug = alm::build_augmented(&p, &mult, &rho, &caps)?;
    let setup = started.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let starts: Vec<Point> = (0..n_starts).map(|_| uniform_point(&aug, &mut rng)).collect();
    let sample = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let results: Vec<Result<refine::RefineResult, RefineError>> = starts
        .par_iter()
        .map(|x0| refine::minimize(&aug, x0, &cfg.refine))
        .collect();
    let mut best: Option<refine::RefineResult> = None;
    for r in results {
        match r {
            Ok(r) if r.objective.is_finite() => {
                if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                    best = Some(r);
                }
            }
            Ok(_) | Err(RefineError::Start(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let best = best.ok_or_else(|| DriverError::Config("no start could be evaluated".into()))?;
    let refine_time = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let n = p.dim();
    let res = alm::residuals(&p, &best.x_final)?;
    let solution = best.x_final[..n].to_vec();
    let objective = problem.objective.evaluate(&solution)?;
    let record = IterationRecord {
        k: 0,
        objective,
        true_infeasibility: res.true_infeasibility,
        max_violation: res.max_violation,
        slack_residuals: res.per_constraint[p.equalities.len()..].to_vec(),
        rho_min: rho.min().min(rho.max()),
        rho_max: rho.max(),
        sampler_best: None,
        sampler_fallback: false,
        refined_best: best.objective,
        stationarity: best.stationarity,
        candidates: n_starts,
    };
    let status = if res.true_infeasibility <= cfg.alm.tol_feas && best.stationarity <= cfg.alm.tol_stat {
        Status::Converged
    } else {
        Status::MaxIter
    };
    let update = t2.elapsed().as_secs_f64();
    Ok(SolveReport {
        format_version: REPORT_FORMAT_VERSION,
        method: "multistart".into(),
        sampler: SamplerKind::Random,
        seed: cfg.seed,
        variables: problem.variables.iter().map(|v| v.name.clone()).collect(),
        iterations: vec![record],
        solution,
        slacks: best.x_final[n..].to_vec(),
        objective,
        true_infeasibility: res.true_infeasibility,
        stationarity: best.stationarity,
        multipliers: mult,
        status,
        timings: Timings {
            setup,
            iterations: vec![StageTimes {
                build: 0.0,
                sample,
                refine: refine_time,
                update,
            }],
            total: started.elapsed().as_secs_f64(),
        },
    })
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Objective with the sign flipped for maximization problems, i.e. the
    /// value that was actually minimized.
    pub fn minimized_objective(&self, sense: Sense) -> f64 {
        match sense {
            Sense::Min => self.objective,
            Sense::Max => -self.objective,
        }
    }
}

/// Benchmark problems and the comparison table behind `make-tables`.
pub mod bench {
    use super::*;
    use crate::model::{ScalarExpr, Variable};

    /// Styblinski-Tang in two variables on `[-5, 5]²`.
    pub fn styblinski_tang_2d() -> NlpProblem {
        let term = |i: usize| {
            let x = ScalarExpr::var(i);
            (x.clone().powi(4) + x.clone().powi(2).scaled(-16.0) + x.scaled(5.0)).scaled(0.5)
        };
        NlpProblem::box_constrained(
            vec![Variable::new("x", -5.0, 5.0), Variable::new("y", -5.0, 5.0)],
            term(0) + term(1),
        )
    }

    /// Styblinski-Tang restricted to the circle `x² + y² = 25`.
    pub fn styblinski_tang_circle() -> NlpProblem {
        let mut p = styblinski_tang_2d();
        let circle = ScalarExpr::var(0).powi(2) + ScalarExpr::var(1).powi(2) + ScalarExpr::constant(-25.0);
        p.equalities.push(circle);
        p
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ComparisonRow {
        pub problem: String,
        pub method: String,
        pub seed: u64,
        pub objective: f64,
        pub true_infeasibility: f64,
        pub outer_iterations: usize,
        pub status: Status,
    }

    fn row(problem: &str, seed: u64, r: &SolveReport) -> ComparisonRow {
        ComparisonRow {
            problem: problem.to_string(),
            method: r.method.clone(),
            seed,
            objective: r.objective,
            true_infeasibility: r.true_infeasibility,
            outer_iterations: r.iterations.len(),
            status: r.status,
        }
    }

    /// Per-seed sampler-assisted runs and single-start baseline runs (random
    /// initial point, no extra random candidates) on the circle-constrained
    /// Styblinski-Tang problem.
    pub fn small_suite(seeds: u64) -> Result<Vec<ComparisonRow>, DriverError> {
        let p = styblinski_tang_circle();
        let name = "styblinski-tang-circle";
        let mut rows = Vec::new();
        for seed in 0..seeds {
            let cfg = SolverConfig {
                seed,
                ..SolverConfig::default()
            };
            rows.push(row(name, seed, &solve(&p, &cfg)?));
            let single = SolverConfig {
                seed,
                random_candidates: 0,
                initial_point: InitialPoint::Random,
                ..SolverConfig::default()
            };
            rows.push(row(name, seed, &baseline_alm(&p, &single)?));
        }
        Ok(rows)
    }

    pub fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}
