//! Power-to-hydrogen scheduling with power-dependent electrolyzer efficiency.
//!
//! Per time slot `t` the decision variables are electrolyzer power `p_el_t`,
//! grid purchase `p_buy_t`, the storage level after the slot `s_{t+1}` and
//! the efficiency `λ_t` in percent. The initial level `s_0` is a parameter.
//!
//! The efficiency is capped by two fitted curves of the operating power:
//!
//! ```text
//! cap1(p) = m1 + m2 P_max + m3 exp(m4 · 100 p / P_max)
//! cap2(p) = (n1 + n2 exp(c / I(p))) / U(p),   c = n3 + n4 T + n5 T²
//! I(p)    = i1 - i2 exp(i3 p) + i4 p
//! U(p)    = u1 + u2 p - u3 p² + u4 p³ - u5 p⁴
//! ```
//!
//! Expressions have no division, so the second cap enters the problem as
//! `λ U(p) - n1 - n2 exp(c r(p)) <= 0` where `r` is a polynomial fit of
//! `1 / I` on `[0, P_max]` (see [`ReciprocalFit`]).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NlpProblem, Point, ScalarExpr, Sense, Variable};

pub const PARAMS_FORMAT_VERSION: u32 = 1;
/// Smallest admissible cell voltage on the power sweep.
pub const MIN_CELL_VOLTAGE: f64 = 1e-6;
const SWEEP: usize = 256;
/// Largest relative error accepted for the `1 / I` polynomial.
pub const FIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HydrogenError {
    #[error("invalid hydrogen parameters: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("cell current {current:e} at p_el = {p_el} is too close to zero")]
    Singular { p_el: f64, current: f64 },
    #[error("p_el = {0} lies outside [0, P_max]")]
    OutOfRange(f64),
    #[error("could not fit 1/I to {FIT_TOLERANCE:e} relative error (best {0:e})")]
    Fit(f64),
    #[error("could not read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parameter file is not valid: {0}")]
    Parse(String),
    #[error("point has length {got}, expected {want}")]
    Dimension { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn default_version() -> u32 {
    PARAMS_FORMAT_VERSION
}

/// Scheduling data and fitted electrolyzer coefficients. Vectors hold one
/// entry per time slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydrogenParams {
    #[serde(default = "default_version")]
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Slot length in hours.
    pub dt: f64,
    /// Electricity price per kWh, per slot.
    pub c_power: Vec<f64>,
    /// Value of stored hydrogen per unit.
    pub c_hyo: f64,
    /// Renewable power per slot (kW).
    pub p_renewable: Vec<f64>,
    /// Hydrogen withdrawn per slot.
    pub demand: Vec<f64>,
    pub m_ac: f64,
    pub k_ac: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_0: f64,
    /// Electrolyzer capacity (kW).
    pub p_max: f64,
    /// kWh per unit of hydrogen.
    pub hhv: f64,
    /// Cell temperature (°C).
    pub t_cell: f64,
    pub i: [f64; 4],
    pub u: [f64; 5],
    pub m: [f64; 4],
    pub n: [f64; 5],
}

impl HydrogenParams {
    pub fn horizon(&self) -> usize {
        self.c_power.len()
    }

    /// The first `n` slots.
    pub fn with_horizon(&self, n: usize) -> Result<Self, HydrogenError> {
        if n == 0 || n > self.horizon() {
            return Err(HydrogenError::Invalid(vec![FieldError {
                field: "horizon".into(),
                message: format!("must be between 1 and {}", self.horizon()),
            }]));
        }
        let mut p = self.clone();
        p.c_power.truncate(n);
        p.p_renewable.truncate(n);
        p.demand.truncate(n);
        Ok(p)
    }

    /// Cell current fit `I(p)`.
    pub fn cell_current(&self, p: f64) -> f64 {
        let i = &self.i;
        i[0] - i[1] * (i[2] * p).exp() + i[3] * p
    }

    /// Cell voltage fit `U(p)`.
    pub fn cell_voltage(&self, p: f64) -> f64 {
        let u = &self.u;
        u[0] + u[1] * p - u[2] * p * p + u[3] * p.powi(3) - u[4] * p.powi(4)
    }

    /// `n3 + n4 T + n5 T²`.
    pub fn temperature_factor(&self) -> f64 {
        self.n[2] + self.n[3] * self.t_cell + self.n[4] * self.t_cell * self.t_cell
    }

    /// Upper bound used for `p_buy`: the most the electrolyzer can draw.
    pub fn p_buy_cap(&self) -> f64 {
        (self.m_ac * self.p_max + self.k_ac).max(0.0)
    }

    fn sweep(&self) -> impl Iterator<Item = f64> + '_ {
        (0..SWEEP).map(move |k| self.p_max * k as f64 / (SWEEP - 1) as f64)
    }

    pub fn validate(&self) -> Result<(), HydrogenError> {
        let mut errs: Vec<FieldError> = Vec::new();
        fn push(errs: &mut Vec<FieldError>, field: &str, message: String) {
            errs.push(FieldError {
                field: field.into(),
                message,
            })
        }
        if self.format_version != PARAMS_FORMAT_VERSION {
            push(
                &mut errs,
                "format_version",
                format!("unsupported version {}", self.format_version),
            );
        }
        let n = self.horizon();
        if n == 0 {
            push(&mut errs, "c_power", "horizon must be at least one slot".into());
        }
        for (name, v) in [("p_renewable", &self.p_renewable), ("demand", &self.demand)] {
            if v.len() != n {
                push(
                    &mut errs,
                    name,
                    format!("length {} does not match c_power length {n}", v.len()),
                );
            }
        }
        for (name, v) in [
            ("c_power", &self.c_power),
            ("p_renewable", &self.p_renewable),
            ("demand", &self.demand),
        ] {
            if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                push(&mut errs, name, format!("entry {k} is not finite"));
            }
        }
        if self.p_renewable.iter().any(|&v| v < 0.0) {
            push(&mut errs, "p_renewable", "entries must be non-negative".into());
        }
        if self.m_ac * self.p_max + self.k_ac <= 0.0 {
            push(&mut errs, "m_ac", "m_ac * p_max + k_ac must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            push(&mut errs, "dt", "must be positive".into());
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            push(&mut errs, "p_max", "must be positive".into());
        }
        if !(self.hhv > 0.0 && self.hhv.is_finite()) {
            push(&mut errs, "hhv", "must be positive".into());
        }
        if !(self.s_min <= self.s_0 && self.s_0 <= self.s_max) {
            push(
                &mut errs,
                "s_0",
                format!("must lie in [s_min, s_max] = [{}, {}]", self.s_min, self.s_max),
            );
        }
        let scalars = [
            ("c_hyo", self.c_hyo),
            ("m_ac", self.m_ac),
            ("k_ac", self.k_ac),
            ("s_min", self.s_min),
            ("s_max", self.s_max),
            ("t_cell", self.t_cell),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                push(&mut errs, name, "must be finite".into());
            }
        }
        for (name, v) in [
            ("i", &self.i[..]),
            ("u", &self.u[..]),
            ("m", &self.m[..]),
            ("n", &self.n[..]),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                push(&mut errs, name, "coefficients must be finite".into());
            }
        }
        if errs.is_empty() {
            let low_u = self.sweep().map(|p| self.cell_voltage(p)).fold(f64::INFINITY, f64::min);
            if !(low_u > MIN_CELL_VOLTAGE) {
                push(
                    &mut errs,
                    "u",
                    format!("cell voltage must stay above {MIN_CELL_VOLTAGE:e} on [0, p_max], minimum is {low_u:e}"),
                );
            }
            let currents: Vec<f64> = self.sweep().map(|p| self.cell_current(p)).collect();
            let same_sign = currents.iter().all(|&c| c > 1e-9) || currents.iter().all(|&c| c < -1e-9);
            if !same_sign {
                push(
                    &mut errs,
                    "i",
                    "cell current must stay away from zero on [0, p_max]".into(),
                );
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HydrogenError::Invalid(errs))
        }
    }

    pub fn from_json(src: &str) -> Result<Self, HydrogenError> {
        let p: HydrogenParams = serde_json::from_str(src).map_err(|e| HydrogenError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }
}

pub fn load_params(path: &Path) -> Result<HydrogenParams, HydrogenError> {
    let src = std::fs::read_to_string(path).map_err(|e| HydrogenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    HydrogenParams::from_json(&src)
}

pub fn save_params(params: &HydrogenParams, path: &Path) -> Result<(), HydrogenError> {
    std::fs::write(path, params.to_json() + "\n").map_err(|e| HydrogenError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// The two efficiency caps at operating power `p_el`, from the closed forms.
pub fn efficiency_caps(p_el: f64, params: &HydrogenParams) -> Result<(f64, f64), HydrogenError> {
    if !(0.0..=params.p_max).contains(&p_el) {
        return Err(HydrogenError::OutOfRange(p_el));
    }
    let m = &params.m;
    let cap1 = m[0] + m[1] * params.p_max + m[2] * (m[3] * (100.0 * p_el / params.p_max)).exp();
    let current = params.cell_current(p_el);
    if current.abs() < 1e-9 {
        return Err(HydrogenError::Singular { p_el, current });
    }
    let n = &params.n;
    let cap2 = (n[0] + n[1] * (params.temperature_factor() / current).exp()) / params.cell_voltage(p_el);
    Ok((cap1, cap2))
}

/// Polynomial `r(z) = sum_k c_k z^k`, `z = 2 p / P_max - 1`, fitted to `1 / I(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalFit {
    pub coefficients: Vec<f64>,
    pub max_relative_error: f64,
}

impl ReciprocalFit {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn evaluate(&self, p: f64, p_max: f64) -> f64 {
        let z = 2.0 * p / p_max - 1.0;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    /// Horner form in `z` as an expression of variable `var`.
    pub fn expr(&self, var: usize, p_max: f64) -> ScalarExpr {
        let z = ScalarExpr::var(var).affine(2.0 / p_max, -1.0);
        let mut it = self.coefficients.iter().rev();
        let mut e = ScalarExpr::constant(*it.next().expect("non-empty fit"));
        for &c in it {
            e = ScalarExpr::product(vec![z.clone(), e]).affine(1.0, c);
        }
        e
    }
}

/// Chebyshev interpolant of degree `deg` converted to monomials in `z`.
fn chebyshev_monomials(f: &dyn Fn(f64) -> f64, deg: usize) -> Vec<f64> {
    let m = deg + 1;
    let nodes: Vec<f64> = (0..m)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
        .collect();
    let vals: Vec<f64> = nodes.iter().map(|&z| f(z)).collect();
    let mut cheb = vec![0.0; m];
    for (k, ck) in cheb.iter_mut().enumerate() {
        let s: f64 = (0..m)
            .map(|j| vals[j] * (k as f64 * std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
            .sum();
        *ck = 2.0 * s / m as f64;
    }
    cheb[0] *= 0.5;
    // monomial coefficients of T_k via T_{k+1} = 2 z T_k - T_{k-1}
    let mut out = vec![0.0; m];
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    prev[0] = 1.0;
    if m > 1 {
        cur[1] = 1.0;
    }
    for (k, &ck) in cheb.iter().enumerate() {
        let tk = if k == 0 { &prev } else { &cur };
        for (o, t) in out.iter_mut().zip(tk) {
            *o += ck * t;
        }
        if k >= 1 && k + 1 < m {
            let mut next = vec![0.0; m];
            for i in 0..m - 1 {
                next[i + 1] += 2.0 * cur[i];
            }
            for i in 0..m {
                next[i] -= prev[i];
            }
            prev = std::mem::replace(&mut cur, next);
        }
    }
    out
}

/// Fits `1 / I(p)` with the lowest even degree (8 to 48) that meets
/// [`FIT_TOLERANCE`] on a 4x oversampled sweep of `[0, P_max]`.
pub fn reciprocal_current_fit(params: &HydrogenParams) -> Result<ReciprocalFit, HydrogenError> {
    let pm = params.p_max;
    let f = |z: f64| 1.0 / params.cell_current(0.5 * (z + 1.0) * pm);
    let mut best = f64::INFINITY;
    for deg in (8..=48).step_by(2) {
        let coefficients = chebyshev_monomials(&f, deg);
        let fit = ReciprocalFit {
            coefficients,
            max_relative_error: 0.0,
        };
        let err = (0..4 * SWEEP)
            .map(|k| {
                let p = pm * k as f64 / (4 * SWEEP - 1) as f64;
                let want = 1.0 / params.cell_current(p);
                ((fit.evaluate(p, pm) - want) / want).abs()
            })
            .fold(0.0, f64::max);
        if err <= FIT_TOLERANCE {
            return Ok(ReciprocalFit {
                max_relative_error: err,
                ..fit
            });
        }
        best = best.min(err);
    }
    Err(HydrogenError::Fit(best))
}

/// Variable indices of slot `t` in the dynamic-efficiency problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotVars {
    pub p_el: usize,
    pub p_buy: usize,
    /// Storage level after the slot.
    pub s_next: usize,
    pub lambda: usize,
}

pub fn slot_vars(t: usize) -> SlotVars {
    SlotVars {
        p_el: 4 * t,
        p_buy: 4 * t + 1,
        s_next: 4 * t + 2,
        lambda: 4 * t + 3,
    }
}

fn c(v: f64) -> ScalarExpr {
    ScalarExpr::constant(v)
}

fn x(i: usize) -> ScalarExpr {
    ScalarExpr::var(i)
}

fn voltage_expr(params: &HydrogenParams, var: usize) -> ScalarExpr {
    let u = &params.u;
    c(u[0])
        + x(var).scaled(u[1])
        + x(var).powi(2).scaled(-u[2])
        + x(var).powi(3).scaled(u[3])
        + x(var).powi(4).scaled(-u[4])
}

/// `cap1(p)` as an expression.
fn cap1_expr(params: &HydrogenParams, var: usize) -> ScalarExpr {
    let m = &params.m;
    c(m[0] + m[1] * params.p_max) + x(var).scaled(m[3] * 100.0 / params.p_max).exp().scaled(m[2])
}

/// `-C_hyo (s_N - s_0) + sum_t C_t p_buy_t` with `per_slot` variables per slot.
fn objective(params: &HydrogenParams, per_slot: usize) -> ScalarExpr {
    let n = params.horizon();
    let s_last = per_slot * (n - 1) + 2;
    let mut obj = vec![x(s_last).affine(-params.c_hyo, params.c_hyo * params.s_0)];
    for t in 0..n {
        obj.push(x(per_slot * t + 1).scaled(params.c_power[t]));
    }
    ScalarExpr::sum(obj)
}

fn storage_before(params: &HydrogenParams, per_slot: usize, t: usize) -> ScalarExpr {
    if t == 0 {
        c(params.s_0)
    } else {
        x(per_slot * (t - 1) + 2)
    }
}

fn balance(params: &HydrogenParams, t: usize, p_el: usize, p_buy: usize) -> ScalarExpr {
    x(p_buy) + c(params.p_renewable[t] - params.k_ac) + x(p_el).scaled(-params.m_ac)
}

/// Builds the dynamic-efficiency problem (minimization of cost minus
/// hydrogen value). Equalities per slot: storage recursion then power
/// balance. Inequalities per slot: voltage-weighted cap 2 then cap 1.
pub fn build(params: &HydrogenParams) -> Result<NlpProblem, HydrogenError> {
    params.validate()?;
    let fit = reciprocal_current_fit(params)?;
    let n = params.horizon();
    let mut variables = Vec::with_capacity(4 * n);
    for t in 0..n {
        variables.push(Variable::new(format!("p_el_{t}"), 0.0, params.p_max));
        variables.push(Variable::new(format!("p_buy_{t}"), 0.0, params.p_buy_cap()));
        variables.push(Variable::new(format!("s_{}", t + 1), params.s_min, params.s_max));
        variables.push(Variable::new(format!("lambda_{t}"), 0.0, 100.0));
    }
    let mut problem = NlpProblem::box_constrained(variables, objective(params, 4));
    let rate = params.dt / (100.0 * params.hhv);
    let temp = params.temperature_factor();
    let nn = &params.n;
    for t in 0..n {
        let v = slot_vars(t);
        let produced = ScalarExpr::product(vec![x(v.p_el), x(v.lambda)]).scaled(-rate);
        problem
            .equalities
            .push(x(v.s_next) - storage_before(params, 4, t) + produced + c(params.demand[t]));
        problem.equalities.push(balance(params, t, v.p_el, v.p_buy));

        let lam_u = ScalarExpr::product(vec![x(v.lambda), voltage_expr(params, v.p_el)]);
        let cap2_num = c(nn[0]) + fit.expr(v.p_el, params.p_max).scaled(temp).exp().scaled(nn[1]);
        problem.inequalities.push(lam_u - cap2_num);
        problem.inequalities.push(x(v.lambda) - cap1_expr(params, v.p_el));
    }
    Ok(problem)
}

/// Linear variant with a fixed efficiency `lambda_fixed` (percent): per slot
/// `p_el_t`, `p_buy_t`, `s_{t+1}`, no efficiency variables and no caps.
pub fn fixed_efficiency_variant(params: &HydrogenParams, lambda_fixed: f64) -> Result<NlpProblem, HydrogenError> {
    params.validate()?;
    if !(lambda_fixed > 0.0 && lambda_fixed <= 100.0) {
        return Err(HydrogenError::Invalid(vec![FieldError {
            field: "lambda_fixed".into(),
            message: "must lie in (0, 100]".into(),
        }]));
    }
    let n = params.horizon();
    let mut variables = Vec::with_capacity(3 * n);
    for t in 0..n {
        variables.push(Variable::new(format!("p_el_{t}"), 0.0, params.p_max));
        variables.push(Variable::new(format!("p_buy_{t}"), 0.0, params.p_buy_cap()));
        variables.push(Variable::new(format!("s_{}", t + 1), params.s_min, params.s_max));
    }
    let mut problem = NlpProblem::box_constrained(variables, objective(params, 3));
    let rate = params.dt * lambda_fixed / (100.0 * params.hhv);
    for t in 0..n {
        let (p_el, p_buy, s_next) = (3 * t, 3 * t + 1, 3 * t + 2);
        problem
            .equalities
            .push(x(s_next) - storage_before(params, 3, t) + x(p_el).scaled(-rate) + c(params.demand[t]));
        problem.equalities.push(balance(params, t, p_el, p_buy));
    }
    Ok(problem)
}

/// Largest residual per constraint family at a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub storage: f64,
    pub power_balance: f64,
    /// `max(0, λ_t - min(cap1, cap2))` from the closed-form caps.
    pub efficiency_cap: f64,
    /// Largest distance outside a variable bound.
    pub bounds: f64,
}

impl Feasibility {
    pub fn max(&self) -> f64 {
        self.storage
            .max(self.power_balance)
            .max(self.efficiency_cap)
            .max(self.bounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydrogenSolution {
    pub p_el: Vec<f64>,
    pub p_buy: Vec<f64>,
    /// `s_0, ..., s_N`.
    pub storage: Vec<f64>,
    pub lambda: Vec<f64>,
    pub slacks: Vec<f64>,
    /// Cost minus hydrogen value, the minimized quantity.
    pub objective: f64,
    /// Hydrogen value minus cost.
    pub profit: f64,
    pub feasibility: Feasibility,
}

impl HydrogenSolution {
    /// Reads a point of the dynamic-efficiency problem.
    pub fn from_point(params: &HydrogenParams, point: &[f64], slacks: &[f64]) -> Result<Self, HydrogenError> {
        let n = params.horizon();
        if point.len() != 4 * n {
            return Err(HydrogenError::Dimension {
                got: point.len(),
                want: 4 * n,
            });
        }
        let pick = |k: usize| (0..n).map(|t| point[4 * t + k]).collect::<Vec<f64>>();
        let (p_el, p_buy, lambda) = (pick(0), pick(1), pick(3));
        let mut storage = vec![params.s_0];
        storage.extend(pick(2));

        let mut f = Feasibility {
            storage: 0.0,
            power_balance: 0.0,
            efficiency_cap: 0.0,
            bounds: 0.0,
        };
        let outside = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
        for t in 0..n {
            let made = params.dt * p_el[t] * (lambda[t] / 100.0) / params.hhv;
            f.storage = f
                .storage
                .max((storage[t + 1] - storage[t] - made + params.demand[t]).abs());
            f.power_balance = f
                .power_balance
                .max((p_buy[t] + params.p_renewable[t] - params.m_ac * p_el[t] - params.k_ac).abs());
            f.bounds = f
                .bounds
                .max(outside(p_el[t], 0.0, params.p_max))
                .max(outside(p_buy[t], 0.0, params.p_buy_cap()))
                .max(outside(storage[t + 1], params.s_min, params.s_max))
                .max(outside(lambda[t], 0.0, 100.0));
            let (c1, c2) = efficiency_caps(p_el[t].clamp(0.0, params.p_max), params)?;
            f.efficiency_cap = f.efficiency_cap.max((lambda[t] - c1.min(c2)).max(0.0));
        }
        let cost: f64 = p_buy.iter().zip(&params.c_power).map(|(p, c)| p * c).sum();
        let profit = params.c_hyo * (storage[n] - params.s_0) - cost;
        Ok(Self {
            p_el,
            p_buy,
            storage,
            lambda,
            slacks: slacks.to_vec(),
            objective: -profit,
            profit,
            feasibility: f,
        })
    }
}

/// The problem is posed as minimization; this is the sense tag it carries.
pub const SENSE: Sense = Sense::Min;

/// Expands a fixed-efficiency point (three variables per slot) into the
/// dynamic layout with `λ_t = lambda_fixed`.
pub fn expand_fixed_point(point: &[f64], lambda_fixed: f64) -> Point {
    point.chunks(3).flat_map(|c| [c[0], c[1], c[2], lambda_fixed]).collect()
}
