//! Projected-gradient local refinement on box-constrained problems.
//!
//! Iterates `x+ = P(x - a * grad f(x))` where `P` clips to the box, with
//! Armijo backtracking along the projection arc. The trial step after the
//! first iteration is the Barzilai-Borwein step `s.s / s.y`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NlpProblem, Point, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineParams {
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub c1: f64,
    /// Backtracking factor, in (0, 1).
    pub beta: f64,
    pub initial_step: f64,
    /// Stop once the projected-gradient norm falls to this value.
    pub tol_stat: f64,
    /// Consecutive failed backtracks that end the run as stalled.
    pub max_backtracks: usize,
    /// Armijo reference is the largest objective over this many recent
    /// iterates. 1 gives a monotone objective sequence.
    pub nonmonotone_window: usize,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            c1: 1e-4,
            beta: 0.5,
            initial_step: 1.0,
            tol_stat: 1e-6,
            max_backtracks: 30,
            nonmonotone_window: 1,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |what: &str| Err(RefineError::InvalidParams(what.to_string()));
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0, 1)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.tol_stat > 0.0) {
            return bad("tol_stat must be positive");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if self.nonmonotone_window == 0 {
            return bad("nonmonotone_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineResult {
    pub x_final: Point,
    pub objective: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub line_search_failures: usize,
    /// True when a line search ran out of backtracks.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("invalid refine parameters: {0}")]
    InvalidParams(String),
    #[error("starting point has length {got}, problem has {want} variables")]
    Dimension { got: usize, want: usize },
    #[error("objective not evaluable at the starting point: {0}")]
    Start(#[from] ModelError),
}

fn project_step(problem: &NlpProblem, x: &[f64], g: &[f64], step: f64) -> Point {
    x.iter()
        .zip(g)
        .zip(&problem.variables)
        .map(|((xi, gi), v)| v.clamp(xi - step * gi))
        .collect()
}

fn stationarity_from_grad(problem: &NlpProblem, x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(&problem.variables)
        .map(|((xi, gi), v)| (xi - v.clamp(xi - gi)).abs())
        .fold(0.0, f64::max)
}

/// `|| x - P(x - grad f(x)) ||_inf`, zero exactly at box-KKT points.
pub fn projected_grad_norm(problem: &NlpProblem, x: &[f64]) -> Result<f64, ModelError> {
    let g = problem.objective.gradient(x)?;
    Ok(stationarity_from_grad(problem, x, &g))
}

/// Minimizes the objective of a box-only problem from `x0`.
///
/// Constraint lists on `problem` are ignored. The objective sequence is
/// monotonically non-increasing and every iterate lies in the box.
pub fn minimize(problem: &NlpProblem, x0: &[f64], params: &RefineParams) -> Result<RefineResult, RefineError> {
    params.validate()?;
    if x0.len() != problem.dim() {
        return Err(RefineError::Dimension {
            got: x0.len(),
            want: problem.dim(),
        });
    }
    let f = Tape::compile(&problem.objective);
    let mut x = x0.to_vec();
    problem.project(&mut x);
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut stat = stationarity_from_grad(problem, &x, &g);
    let mut step = params.initial_step;
    let mut failures = 0;
    let mut stalled = false;
    let mut iterations = 0;
    let mut recent = std::collections::VecDeque::from([fx]);
    // with a nonmonotone window the last iterate need not be the best one
    let mut best = (x.clone(), fx, stat);

    while iterations < params.max_iters && stat > params.tol_stat {
        let mut alpha = step;
        let mut accepted = None;
        let reference = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..params.max_backtracks {
            let trial = project_step(problem, &x, &g, alpha);
            let decrease: f64 = g.iter().zip(&trial).zip(&x).map(|((gi, t), xi)| gi * (t - xi)).sum();
            if let Ok((ft, gt)) = f.value_and_gradient(&trial) {
                if ft <= reference + params.c1 * decrease {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            failures += 1;
            alpha *= params.beta;
        }
        let Some((xn, fnew, gn)) = accepted else {
            stalled = true;
            break;
        };
        iterations += 1;
        // Barzilai-Borwein trial step for the next iteration
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..x.len() {
            let s = xn[i] - x[i];
            let y = gn[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (alpha / params.beta).min(1e12)
        };
        let moved = ss > 0.0;
        x = xn;
        fx = fnew;
        if recent.len() == params.nonmonotone_window {
            recent.pop_front();
        }
        recent.push_back(fx);
        g = gn;
        stat = stationarity_from_grad(problem, &x, &g);
        if fx < best.1 || (fx == best.1 && stat < best.2) {
            best = (x.clone(), fx, stat);
        }
        if !moved && stat > params.tol_stat {
            stalled = true;
            break;
        }
    }

    if stat > params.tol_stat && best.1 < fx {
        (x, fx, stat) = best;
    }
    Ok(RefineResult {
        x_final: x,
        objective: fx,
        stationarity: stat,
        iterations,
        line_search_failures: failures,
        stalled,
    })
}
