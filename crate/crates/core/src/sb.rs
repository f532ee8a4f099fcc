//! Adiabatic simulated bifurcation for Ising models.
//!
//! One nonlinear oscillator per spin, integrated with symplectic Euler while
//! the pump ramps past the detuning. Spins are read out as `sign(x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::IsingModel;

pub type SpinConfig = Vec<i8>;

/// Positions are clamped to this magnitude; the momentum is zeroed on clamp.
pub const CLAMP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SbError {
    #[error("invalid SB parameters: {0}")]
    InvalidParams(String),
    #[error("all {replicas} replicas diverged to the position clamp; try a smaller dt (currently {dt})")]
    Unstable { replicas: usize, dt: f64 },
    #[error("Ising model has no spins")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbParams {
    /// Kerr coefficient.
    pub kerr: f64,
    pub detuning: f64,
    pub xi0: f64,
    pub pump_start: f64,
    pub pump_end: f64,
    pub dt: f64,
    pub steps: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Initial `x` and `y` are drawn from `uniform(-a0, a0)`.
    pub init_amplitude: f64,
    /// Record `x` every this many steps for the best replica; 0 disables.
    pub trajectory_every: usize,
}

impl Default for SbParams {
    fn default() -> Self {
        Self {
            kerr: 1.0,
            detuning: 1.0,
            xi0: 0.5,
            pump_start: 0.0,
            pump_end: 2.0,
            dt: 0.01,
            steps: 2000,
            replicas: 32,
            seed: 0,
            init_amplitude: 0.1,
            trajectory_every: 0,
        }
    }
}

impl SbParams {
    pub fn validate(&self) -> Result<(), SbError> {
        let bad = |m: &str| Err(SbError::InvalidParams(m.to_string()));
        if !(self.kerr > 0.0) {
            return bad("kerr must be positive");
        }
        if !(self.detuning > 0.0) {
            return bad("detuning must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.pump_end >= self.detuning) {
            return bad("pump_end must reach the detuning for bifurcation to occur");
        }
        if !self.xi0.is_finite() || !self.pump_start.is_finite() || !(self.init_amplitude >= 0.0) {
            return bad("xi0, pump_start and init_amplitude must be finite (init_amplitude >= 0)");
        }
        Ok(())
    }

    /// Pump value used at step `k` of `steps` (0-based); reaches `pump_end`
    /// on the last step.
    pub fn pump(&self, k: usize) -> f64 {
        let frac = (k + 1) as f64 / self.steps as f64;
        self.pump_start + (self.pump_end - self.pump_start) * frac
    }
}

/// Standard deviation of the upper-triangle couplings, zeros included.
pub fn coupling_std(ising: &IsingModel) -> f64 {
    let n = ising.n_spins();
    let pairs = n * n.saturating_sub(1) / 2;
    if pairs == 0 {
        return 0.0;
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for (_, _, v) in ising.couplings() {
        s += v;
        s2 += v * v;
    }
    let mean = s / pairs as f64;
    (s2 / pairs as f64 - mean * mean).max(0.0).sqrt()
}

/// Default parameters scaled to the coupling spread of `ising`.
pub fn auto_params(ising: &IsingModel) -> SbParams {
    let n = ising.n_spins().max(1);
    let sigma = coupling_std(ising);
    let detuning = 1.0;
    let xi0 = if sigma > 0.0 {
        0.5 * detuning / (sigma * (n as f64).sqrt())
    } else {
        0.5
    };
    SbParams {
        xi0,
        pump_end: 2.0 * detuning,
        detuning,
        ..SbParams::default()
    }
}

/// `ξ0 = 0.5 Δ / rms_i sqrt(sum_j J_ij² + h_i²)`: the auto rule measured on
/// row norms, which stays sensible when fields dominate the couplings.
pub fn row_norm_xi0(ising: &IsingModel, detuning: f64) -> f64 {
    let n = ising.n_spins();
    let mut acc = 0.0;
    for i in 0..n {
        acc += ising.row(i).iter().map(|(_, v)| v * v).sum::<f64>() + ising.h[i] * ising.h[i];
    }
    let rms = (acc / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        0.5 * detuning / rms
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl OscillatorState {
    /// Uniform random start for one replica. Replica `r` draws from stream
    /// `r` of the seeded generator, so adding replicas never changes earlier ones.
    pub fn random(n: usize, amplitude: f64, seed: u64, replica: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica as u64);
        let mut draw = || amplitude * (2.0 * rng.random::<f64>() - 1.0);
        let x = (0..n).map(|_| draw()).collect();
        let y = (0..n).map(|_| draw()).collect();
        Self { x, y }
    }

    pub fn spins(&self) -> SpinConfig {
        self.x.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect()
    }
}

/// Counters from one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub clamp_events: usize,
    /// Components sitting on the clamp after the last step.
    pub clamped_at_end: usize,
}

/// Integrates the oscillator network in place without validating `params`
/// beyond what the arithmetic needs. `observer(k, state)` runs after step `k`.
pub fn integrate(
    ising: &IsingModel,
    params: &SbParams,
    state: &mut OscillatorState,
    mut observer: impl FnMut(usize, &OscillatorState),
) -> IntegrationStats {
    let n = ising.n_spins();
    let (kerr, det, xi0, dt) = (params.kerr, params.detuning, params.xi0, params.dt);
    let mut stats = IntegrationStats::default();
    for k in 0..params.steps {
        let p = params.pump(k);
        for i in 0..n {
            let xi = state.x[i];
            let field = ising.local_field(i, &state.x) + ising.h[i];
            state.y[i] += dt * (-kerr * xi * xi * xi + (p - det) * xi + xi0 * field);
        }
        for i in 0..n {
            let xi = state.x[i] + dt * det * state.y[i];
            if xi.abs() > CLAMP {
                state.x[i] = CLAMP.copysign(xi);
                state.y[i] = 0.0;
                stats.clamp_events += 1;
            } else {
                state.x[i] = xi;
            }
        }
        observer(k, state);
    }
    stats.clamped_at_end = state.x.iter().filter(|v| v.abs() >= CLAMP).count();
    stats
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbResult {
    pub best_spins: SpinConfig,
    pub best_energy: f64,
    pub best_replica: usize,
    pub replica_energies: Vec<f64>,
    pub replica_spins: Vec<SpinConfig>,
    pub clamp_events: usize,
    /// Downsampled `x` snapshots of the best replica.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trajectory: Option<Vec<Vec<f64>>>,
}

pub fn energy(ising: &IsingModel, s: &[i8]) -> f64 {
    ising.energy(s)
}

struct ReplicaOutcome {
    spins: SpinConfig,
    energy: f64,
    stats: IntegrationStats,
    trajectory: Option<Vec<Vec<f64>>>,
}

fn run_replica(ising: &IsingModel, params: &SbParams, r: usize) -> ReplicaOutcome {
    let n = ising.n_spins();
    let mut state = OscillatorState::random(n, params.init_amplitude, params.seed, r);
    let every = params.trajectory_every;
    let mut traj = (every > 0).then(|| vec![state.x.clone()]);
    let stats = integrate(ising, params, &mut state, |k, s| {
        if let Some(t) = traj.as_mut() {
            if (k + 1) % every == 0 {
                t.push(s.x.clone());
            }
        }
    });
    let spins = state.spins();
    let energy = ising.energy(&spins);
    ReplicaOutcome {
        spins,
        energy,
        stats,
        trajectory: traj,
    }
}

/// Runs all replicas in parallel and keeps the lowest-energy one (lowest
/// replica index on ties).
pub fn run(ising: &IsingModel, params: &SbParams) -> Result<SbResult, SbError> {
    params.validate()?;
    let n = ising.n_spins();
    if n == 0 {
        return Err(SbError::Empty);
    }
    let outcomes: Vec<ReplicaOutcome> = (0..params.replicas)
        .into_par_iter()
        .map(|r| run_replica(ising, params, r))
        .collect();
    if outcomes.iter().all(|o| o.stats.clamped_at_end == n) {
        return Err(SbError::Unstable {
            replicas: params.replicas,
            dt: params.dt,
        });
    }
    let mut best = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.energy < outcomes[best].energy {
            best = r;
        }
    }
    let clamp_events = outcomes.iter().map(|o| o.stats.clamp_events).sum();
    let replica_energies = outcomes.iter().map(|o| o.energy).collect();
    let mut replica_spins: Vec<SpinConfig> = Vec::with_capacity(outcomes.len());
    let mut trajectory = None;
    for (r, o) in outcomes.into_iter().enumerate() {
        if r == best {
            trajectory = o.trajectory;
        }
        replica_spins.push(o.spins);
    }
    let best_spins = replica_spins[best].clone();
    Ok(SbResult {
        best_energy: ising.energy(&best_spins),
        best_spins,
        best_replica: best,
        replica_energies,
        replica_spins,
        clamp_events,
        trajectory,
    })
}
