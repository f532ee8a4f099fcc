//! Dense simulation of quantum Hamiltonian descent on a tensor-product grid.
//!
//! The Hamiltonian is `H(t) = e^{φt} (-½ L) + e^{χt} F`, with `L` the
//! Dirichlet finite-difference Laplacian (a Kronecker sum of 1-D stencils)
//! and `F` the objective sampled on the grid. Time stepping is Strang
//! splitting: half potential phase, exact kinetic step, half potential
//! phase, with both coefficients frozen at the step midpoint.
//!
//! The kinetic exponential is applied in the sine eigenbasis of the 1-D
//! stencil, which diagonalizes every axis at once. It is exactly unitary up
//! to rounding, so norm drift measures rounding only.

use std::f64::consts::PI;

pub use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, Point, ScalarExpr};

/// Largest grid the simulator will allocate.
pub const MAX_GRID_POINTS: usize = 1 << 22;
/// Highest dimension the dense path supports.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QhdError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("potential evaluation failed at grid point {point:?}: {source}")]
    Potential { point: Vec<f64>, source: ModelError },
    #[error("norm drifted by {drift:e} in one step at t = {time}; use a smaller dt")]
    StepSize { drift: f64, time: f64 },
    #[error("state length {got} does not match grid size {want}")]
    Dimension { got: usize, want: usize },
}

/// `points` nodes per dimension, endpoints included, over each `(lower, upper)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    pub bounds: Vec<(f64, f64)>,
}

impl Grid {
    pub fn new(points: usize, bounds: Vec<(f64, f64)>) -> Result<Self, QhdError> {
        if points < 2 {
            return Err(QhdError::Grid("need at least 2 points per dimension".into()));
        }
        if bounds.is_empty() || bounds.len() > MAX_DIM {
            return Err(QhdError::Grid(format!(
                "dimension {} outside 1..={MAX_DIM}",
                bounds.len()
            )));
        }
        let total = (points as u128).pow(bounds.len() as u32);
        if total > MAX_GRID_POINTS as u128 {
            return Err(QhdError::Grid(format!(
                "{total} grid points exceed the limit of {MAX_GRID_POINTS}"
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(QhdError::Grid(format!("dimension {i} has bad bounds [{lo}, {hi}]")));
            }
        }
        Ok(Self { points, bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points - 1) as f64
    }

    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        if k + 1 == self.points {
            hi
        } else {
            lo + k as f64 * self.spacing(axis)
        }
    }

    /// Multi-index of flat index `idx` (row-major, first axis slowest).
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.points;
            idx /= self.points;
        }
        out
    }

    pub fn point(&self, idx: usize) -> Point {
        self.multi_index(idx)
            .into_iter()
            .enumerate()
            .map(|(axis, k)| self.coordinate(axis, k))
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim() - 1 - axis) as u32)
    }
}

/// Normalized amplitudes over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub grid: Grid,
    pub amplitudes: Vec<Complex64>,
}

impl WaveState {
    /// Equal amplitude on every grid point.
    pub fn uniform(grid: &Grid) -> Self {
        let n = grid.len();
        let a = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        Self {
            grid: grid.clone(),
            amplitudes: vec![a; n],
        }
    }

    /// All probability on flat index `idx`.
    pub fn delta(grid: &Grid, idx: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.len()];
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Self {
            grid: grid.clone(),
            amplitudes,
        }
    }

    pub fn from_amplitudes(grid: &Grid, amplitudes: Vec<Complex64>) -> Result<Self, QhdError> {
        if amplitudes.len() != grid.len() {
            return Err(QhdError::Dimension {
                got: amplitudes.len(),
                want: grid.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            amplitudes,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|<self|other>|`.
    pub fn fidelity(&self, other: &WaveState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    /// `<f>` for a diagonal operator.
    pub fn expectation(&self, diagonal: &[f64]) -> f64 {
        self.amplitudes
            .iter()
            .zip(diagonal)
            .map(|(a, f)| a.norm_sqr() * f)
            .sum()
    }

    /// Mean position per axis.
    pub fn mean_position(&self) -> Point {
        let mut out = vec![0.0; self.grid.dim()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (o, c) in out.iter_mut().zip(self.grid.point(idx)) {
                *o += p * c;
            }
        }
        out
    }
}

/// Time-dependent coefficients `e^{φt}` (kinetic) and `e^{χt}` (potential).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QhdSchedule {
    pub phi: f64,
    pub chi: f64,
    pub total_time: f64,
    pub dt: f64,
}

impl QhdSchedule {
    /// Kinetic weight falls and potential weight rises by `ratio` over `total_time`.
    pub fn with_ratio(total_time: f64, dt: f64, ratio: f64) -> Self {
        let rate = ratio.ln() / total_time;
        Self {
            phi: -rate,
            chi: rate,
            total_time,
            dt,
        }
    }

    pub fn steps(&self) -> usize {
        (self.total_time / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), QhdError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(QhdError::Schedule("dt must be positive".into()));
        }
        if !(self.total_time >= 0.0) {
            return Err(QhdError::Schedule("total time must be non-negative".into()));
        }
        let steps = self.total_time / self.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(QhdError::Schedule(format!(
                "total time {} is not an integer number of steps of {}",
                self.total_time, self.dt
            )));
        }
        if !((self.phi * self.total_time).exp() > 0.0) || !(self.chi * self.total_time).exp().is_finite() {
            return Err(QhdError::Schedule("coefficients underflow or overflow".into()));
        }
        Ok(())
    }

    pub fn kinetic_weight(&self, t: f64) -> f64 {
        (self.phi * t).exp()
    }

    pub fn potential_weight(&self, t: f64) -> f64 {
        (self.chi * t).exp()
    }
}

impl Default for QhdSchedule {
    fn default() -> Self {
        Self::with_ratio(10.0, 1e-3, 1000.0)
    }
}

/// Samples `f` at every grid point; `f` must reference only variables
/// `0..grid.dim()`.
pub fn discretize_potential(f: &ScalarExpr, grid: &Grid) -> Result<Vec<f64>, QhdError> {
    if f.arity() > grid.dim() {
        return Err(QhdError::Grid(format!(
            "potential references {} variables, grid has {}",
            f.arity(),
            grid.dim()
        )));
    }
    (0..grid.len())
        .map(|idx| {
            let p = grid.point(idx);
            f.evaluate(&p)
                .map_err(|source| QhdError::Potential { point: p, source })
        })
        .collect()
}

/// Dirichlet finite-difference Laplacian on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    grid: Grid,
}

/// Builds the Laplacian: per axis the `(1, -2, 1) / h²` stencil with zero
/// values outside the box, summed over axes.
pub fn laplacian(grid: &Grid) -> Laplacian {
    Laplacian { grid: grid.clone() }
}

impl Laplacian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Dense `N x N` stencil of one axis.
    pub fn axis_matrix(&self, axis: usize) -> Vec<Vec<f64>> {
        let n = self.grid.points;
        let inv_h2 = 1.0 / self.grid.spacing(axis).powi(2);
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = -2.0 * inv_h2;
            if i > 0 {
                m[i][i - 1] = inv_h2;
            }
            if i + 1 < n {
                m[i][i + 1] = inv_h2;
            }
        }
        m
    }

    /// Closed-form eigenvalues `-(2/h²)(1 - cos(kπ/(N+1)))`, `k = 1..N`.
    pub fn axis_eigenvalues(&self, axis: usize) -> Vec<f64> {
        let n = self.grid.points;
        let h2 = self.grid.spacing(axis).powi(2);
        (1..=n)
            .map(|k| -(2.0 / h2) * (1.0 - (k as f64 * PI / (n + 1) as f64).cos()))
            .collect()
    }

    /// Stencil along one axis only.
    pub fn apply_axis(&self, axis: usize, psi: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.points;
        let stride = self.grid.stride(axis);
        let inv_h2 = 1.0 / self.grid.spacing(axis).powi(2);
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let k = (idx / stride) % n;
            let mut acc = psi[idx] * (-2.0);
            if k > 0 {
                acc += psi[idx - stride];
            }
            if k + 1 < n {
                acc += psi[idx + stride];
            }
            *o = acc * inv_h2;
        }
        out
    }

    /// `L psi`, the Kronecker sum of the axis stencils.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for axis in 0..self.grid.dim() {
            for (o, v) in out.iter_mut().zip(self.apply_axis(axis, psi)) {
                *o += v;
            }
        }
        out
    }
}

/// Strang-split propagator for one fixed grid and potential.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid,
    potential: Vec<f64>,
    /// Orthonormal sine basis, symmetric, one per axis (all axes share `N`).
    basis: Vec<f64>,
    /// Stencil eigenvalue sum for each flat spectral index.
    spectrum: Vec<f64>,
}

impl Propagator {
    pub fn new(grid: &Grid, potential: Vec<f64>) -> Result<Self, QhdError> {
        if potential.len() != grid.len() {
            return Err(QhdError::Dimension {
                got: potential.len(),
                want: grid.len(),
            });
        }
        let n = grid.points;
        let norm = (2.0 / (n + 1) as f64).sqrt();
        let mut basis = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                basis[j * n + k] = norm * (((j + 1) * (k + 1)) as f64 * PI / (n + 1) as f64).sin();
            }
        }
        let lap = laplacian(grid);
        let eig: Vec<Vec<f64>> = (0..grid.dim()).map(|a| lap.axis_eigenvalues(a)).collect();
        let spectrum = (0..grid.len())
            .map(|idx| {
                grid.multi_index(idx)
                    .iter()
                    .enumerate()
                    .map(|(axis, &k)| eig[axis][k])
                    .sum()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            potential,
            basis,
            spectrum,
        })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Applies the (self-inverse) sine transform along every axis in place.
    fn transform(&self, psi: &mut [Complex64]) {
        let n = self.grid.points;
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.grid.dim() {
            let stride = self.grid.stride(axis);
            let block = stride * n;
            for base in (0..psi.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = psi[start + j * stride];
                    }
                    for j in 0..n {
                        let row = &self.basis[j * n..(j + 1) * n];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (b, l) in row.iter().zip(&line) {
                            acc += l * b;
                        }
                        psi[start + j * stride] = acc;
                    }
                }
            }
        }
    }

    /// `exp(-i dt a (-½ L))` applied exactly.
    pub fn kinetic_step(&self, psi: &mut [Complex64], kinetic_weight: f64, dt: f64) {
        self.transform(psi);
        for (a, &lam) in psi.iter_mut().zip(&self.spectrum) {
            let theta = -dt * kinetic_weight * (-0.5 * lam);
            *a *= Complex64::from_polar(1.0, theta);
        }
        self.transform(psi);
    }

    pub fn potential_phase(&self, psi: &mut [Complex64], potential_weight: f64, dt: f64) {
        for (a, &f) in psi.iter_mut().zip(&self.potential) {
            *a *= Complex64::from_polar(1.0, -dt * potential_weight * f);
        }
    }

    /// One Strang step with frozen weights; `dt` may be negative.
    pub fn step(&self, psi: &mut [Complex64], kinetic_weight: f64, potential_weight: f64, dt: f64) {
        self.potential_phase(psi, potential_weight, 0.5 * dt);
        self.kinetic_step(psi, kinetic_weight, dt);
        self.potential_phase(psi, potential_weight, 0.5 * dt);
    }

    /// Full evolution under `sched`. `observe(step, t, state)` runs after
    /// every step.
    pub fn evolve_with(
        &self,
        psi0: &WaveState,
        sched: &QhdSchedule,
        mut observe: impl FnMut(usize, f64, &[Complex64]),
    ) -> Result<WaveState, QhdError> {
        sched.validate()?;
        if psi0.amplitudes.len() != self.grid.len() {
            return Err(QhdError::Dimension {
                got: psi0.amplitudes.len(),
                want: self.grid.len(),
            });
        }
        let mut psi = psi0.amplitudes.clone();
        let mut norm = psi0.norm_sqr();
        for step in 0..sched.steps() {
            let t_mid = (step as f64 + 0.5) * sched.dt;
            self.step(
                &mut psi,
                sched.kinetic_weight(t_mid),
                sched.potential_weight(t_mid),
                sched.dt,
            );
            let now: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
            let drift = (now - norm).abs();
            if drift > 1e-6 || !now.is_finite() {
                return Err(QhdError::StepSize {
                    drift,
                    time: (step + 1) as f64 * sched.dt,
                });
            }
            norm = now;
            observe(step, (step + 1) as f64 * sched.dt, &psi);
        }
        Ok(WaveState {
            grid: self.grid.clone(),
            amplitudes: psi,
        })
    }
}

/// Evolves `psi0` under the discretized Hamiltonian built from `potential`.
pub fn evolve(psi0: &WaveState, potential: &[f64], sched: &QhdSchedule) -> Result<WaveState, QhdError> {
    Propagator::new(&psi0.grid, potential.to_vec())?.evolve_with(psi0, sched, |_, _, _| {})
}

/// Draws `count` grid points with probability `|psi|^2`.
pub fn sample(psi: &WaveState, count: usize, seed: u64) -> Vec<Point> {
    let weights = psi.probabilities();
    let Ok(dist) = WeightedIndex::new(&weights) else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| psi.grid.point(dist.sample(&mut rng))).collect()
}
