//! Augmented Lagrangian reformulation with explicit slacks.
//!
//! Inequalities `h_j(x) <= 0` become `h_j(x) + s_j = 0` with `s_j` in
//! `[0, S_cap_j]`, and the problem over `(x, s)` is penalized as
//!
//! ```text
//! f + sum λ_i g_i + sum μ_j (h_j + s_j) + sum ρ_i/2 g_i^2 + sum ρ_j/2 (h_j + s_j)^2
//! ```
//!
//! leaving a box-constrained problem.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NlpProblem, Point, ScalarExpr, Variable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// One per equality.
    pub lambda: Vec<f64>,
    /// One per inequality.
    pub mu: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(problem: &NlpProblem) -> Self {
        Self {
            lambda: vec![0.0; problem.equalities.len()],
            mu: vec![0.0; problem.inequalities.len()],
        }
    }

    fn check(&self, problem: &NlpProblem) -> Result<(), AlmError> {
        if self.lambda.len() != problem.equalities.len() || self.mu.len() != problem.inequalities.len() {
            return Err(AlmError::Dimension(format!(
                "multipliers ({}, {}) vs constraints ({}, {})",
                self.lambda.len(),
                self.mu.len(),
                problem.equalities.len(),
                problem.inequalities.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub rho_eq: Vec<f64>,
    pub rho_ineq: Vec<f64>,
    /// Growth factor, > 1.
    pub gamma: f64,
    pub rho_max: f64,
    /// Growth happens only when violation fails to drop below `eta` times
    /// its previous value.
    pub eta: f64,
}

impl PenaltySchedule {
    pub fn uniform(problem: &NlpProblem, settings: &AlmSettings) -> Self {
        Self {
            rho_eq: vec![settings.rho0; problem.equalities.len()],
            rho_ineq: vec![settings.rho0; problem.inequalities.len()],
            gamma: settings.gamma,
            rho_max: settings.rho_max,
            eta: settings.eta,
        }
    }

    pub fn min(&self) -> f64 {
        self.rho_eq
            .iter()
            .chain(&self.rho_ineq)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.rho_eq.iter().chain(&self.rho_ineq).copied().fold(0.0, f64::max)
    }

    pub fn at_cap(&self) -> bool {
        self.rho_eq.iter().chain(&self.rho_ineq).all(|&r| r >= self.rho_max)
    }
}

/// Outer-loop settings. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlmSettings {
    pub rho0: f64,
    pub gamma: f64,
    pub rho_max: f64,
    pub eta: f64,
    pub tol_feas: f64,
    pub tol_stat: f64,
    /// Objective change between consecutive outer iterations counted as settled.
    pub tol_obj: f64,
    pub max_outer: usize,
    /// Clip inequality multipliers at zero after each update.
    pub project_mu: bool,
}

impl Default for AlmSettings {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            gamma: 10.0,
            rho_max: 1e8,
            eta: 0.25,
            tol_feas: 1e-6,
            tol_stat: 1e-6,
            tol_obj: 1e-8,
            max_outer: 50,
            project_mu: false,
        }
    }
}

impl AlmSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho0 > 0.0) {
            return Err("rho0 must be positive".into());
        }
        if !(self.gamma > 1.0) {
            return Err("gamma must exceed 1".into());
        }
        if !(self.rho_max >= self.rho0) {
            return Err("rho_max must be at least rho0".into());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err("eta must lie in (0, 1]".into());
        }
        if !(self.tol_feas > 0.0 && self.tol_stat > 0.0 && self.tol_obj >= 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.max_outer == 0 {
            return Err("max_outer must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub objective: f64,
    pub max_violation: f64,
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmState {
    pub k: usize,
    pub multipliers: Multipliers,
    pub penalties: PenaltySchedule,
    /// Original variables followed by slacks.
    pub incumbent: Point,
    pub history: Vec<HistoryEntry>,
}

impl AlmState {
    /// Zero multipliers, uniform penalties, incumbent at the box midpoint.
    pub fn initial(problem: &NlpProblem, slack_caps: &[f64], settings: &AlmSettings) -> Self {
        let mut incumbent = problem.midpoint();
        incumbent.extend(slack_caps.iter().map(|c| 0.5 * c));
        Self {
            k: 0,
            multipliers: Multipliers::zeros(problem),
            penalties: PenaltySchedule::uniform(problem, settings),
            incumbent,
            history: Vec::new(),
        }
    }

    pub fn record(&mut self, entry: HistoryEntry) {
        self.history.push(entry);
        self.k += 1;
    }
}

/// Upper bounds for the slack variables: `max(1, 2 max|h_j|)` over 64
/// Latin-hypercube samples of the box, per inequality.
pub fn slack_caps(problem: &NlpProblem, seed: u64) -> Vec<f64> {
    const SAMPLES: usize = 64;
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut s: Vec<usize> = (0..SAMPLES).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    let mut caps = vec![1.0_f64; problem.inequalities.len()];
    let mut x = vec![0.0; n];
    for k in 0..SAMPLES {
        for (i, v) in problem.variables.iter().enumerate() {
            let u = (strata[i][k] as f64 + rng.random::<f64>()) / SAMPLES as f64;
            x[i] = v.lower + u * v.width();
        }
        for (cap, h) in caps.iter_mut().zip(&problem.inequalities) {
            if let Ok(v) = h.evaluate(&x) {
                *cap = cap.max(2.0 * v.abs());
            }
        }
    }
    caps
}

/// Builds the box-constrained augmented problem over `(x, s)`.
///
/// `problem` must already be in minimization sense. Slack `j` is appended as
/// variable `dim + j` with bounds `[0, slack_caps[j]]`.
pub fn build_augmented(
    problem: &NlpProblem,
    m: &Multipliers,
    rho: &PenaltySchedule,
    slack_caps: &[f64],
) -> Result<NlpProblem, AlmError> {
    m.check(problem)?;
    if rho.rho_eq.len() != problem.equalities.len() || rho.rho_ineq.len() != problem.inequalities.len() {
        return Err(AlmError::Dimension("penalty vector lengths".into()));
    }
    if slack_caps.len() != problem.inequalities.len() {
        return Err(AlmError::Dimension(format!(
            "{} slack caps for {} inequalities",
            slack_caps.len(),
            problem.inequalities.len()
        )));
    }
    let n = problem.dim();
    let mut terms = vec![problem.objective.clone()];
    for ((g, &lam), &r) in problem.equalities.iter().zip(&m.lambda).zip(&rho.rho_eq) {
        if lam != 0.0 {
            terms.push(g.clone().scaled(lam));
        }
        terms.push(g.clone().powi(2).scaled(0.5 * r));
    }
    for (j, ((h, &mu), &r)) in problem.inequalities.iter().zip(&m.mu).zip(&rho.rho_ineq).enumerate() {
        let residual = h.clone() + ScalarExpr::var(n + j);
        if mu != 0.0 {
            terms.push(residual.clone().scaled(mu));
        }
        terms.push(residual.powi(2).scaled(0.5 * r));
    }
    let mut variables = problem.variables.clone();
    variables.extend(
        slack_caps
            .iter()
            .enumerate()
            .map(|(j, &cap)| Variable::new(format!("slack_{j}"), 0.0, cap)),
    );
    Ok(NlpProblem::box_constrained(variables, ScalarExpr::sum(terms)))
}

/// Equality residuals followed by `h_j + s_j`.
fn residual_vector(problem: &NlpProblem, x_slack: &[f64]) -> Result<Vec<f64>, AlmError> {
    let n = problem.dim();
    if x_slack.len() != n + problem.inequalities.len() {
        return Err(AlmError::Dimension(format!(
            "point has length {}, expected {}",
            x_slack.len(),
            n + problem.inequalities.len()
        )));
    }
    let x = &x_slack[..n];
    let mut out = Vec::with_capacity(problem.equalities.len() + problem.inequalities.len());
    for g in &problem.equalities {
        out.push(g.evaluate(x)?);
    }
    for (j, h) in problem.inequalities.iter().enumerate() {
        out.push(h.evaluate(x)? + x_slack[n + j]);
    }
    Ok(out)
}

/// `λ_i += ρ_i g_i(x)`, `μ_j += ρ_j (h_j(x) + s_j)`.
pub fn update_multipliers(
    m: &Multipliers,
    rho: &PenaltySchedule,
    problem: &NlpProblem,
    x_slack: &[f64],
    project_mu: bool,
) -> Result<Multipliers, AlmError> {
    m.check(problem)?;
    let r = residual_vector(problem, x_slack)?;
    let (re, ri) = r.split_at(problem.equalities.len());
    let lambda = m
        .lambda
        .iter()
        .zip(&rho.rho_eq)
        .zip(re)
        .map(|((l, p), g)| l + p * g)
        .collect();
    let mu =
        m.mu.iter()
            .zip(&rho.rho_ineq)
            .zip(ri)
            .map(|((u, p), h)| {
                let v = u + p * h;
                if project_mu {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect();
    Ok(Multipliers { lambda, mu })
}

/// Multiplies every penalty by `gamma` (capped) unless the violation shrank
/// by at least the factor `eta`.
pub fn grow_penalty(rho: &PenaltySchedule, violation_prev: f64, violation_now: f64) -> PenaltySchedule {
    if violation_now <= rho.eta * violation_prev {
        return rho.clone();
    }
    let grow = |r: &f64| (r * rho.gamma).min(rho.rho_max).max(*r);
    PenaltySchedule {
        rho_eq: rho.rho_eq.iter().map(grow).collect(),
        rho_ineq: rho.rho_ineq.iter().map(grow).collect(),
        ..rho.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max(|g_i|, |h_j + s_j|)`.
    pub max_violation: f64,
    /// Equality residuals then slack residuals `h_j + s_j`.
    pub per_constraint: Vec<f64>,
    /// `max(|g_i|, max(0, h_j))`, ignoring slacks.
    pub true_infeasibility: f64,
}

pub fn residuals(problem: &NlpProblem, x_slack: &[f64]) -> Result<Residuals, AlmError> {
    let per_constraint = residual_vector(problem, x_slack)?;
    let max_violation = per_constraint.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let n = problem.dim();
    let ne = problem.equalities.len();
    let mut true_infeasibility = per_constraint[..ne].iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    for (j, _) in problem.inequalities.iter().enumerate() {
        let h = per_constraint[ne + j] - x_slack[n + j];
        true_infeasibility = true_infeasibility.max(h.max(0.0));
    }
    Ok(Residuals {
        max_violation,
        per_constraint,
        true_infeasibility,
    })
}
