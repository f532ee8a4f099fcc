mod common;

use common::{gaussian_ising, ising_ground};
use proptest::prelude::*;
use qhdalm::embedding::IsingModel;
use qhdalm::sb::{self, SbError, SbParams};

#[test]
fn recovers_ground_state_of_random_12_spin_instances() {
    let mut hits = 0;
    for seed in 0..100 {
        let m = gaussian_ising(12, 1000 + seed, false);
        let (ground, _) = ising_ground(&m);
        let params = SbParams {
            replicas: 32,
            seed,
            ..sb::auto_params(&m)
        };
        let r = sb::run(&m, &params).unwrap();
        assert!(r.best_energy >= ground - 1e-9);
        if (r.best_energy - ground).abs() <= 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100 ground states");
}

#[test]
fn single_field_aligns_spin() {
    for h in [1.0, -0.4] {
        let mut m = IsingModel::new(1);
        m.h[0] = h;
        let r = sb::run(&m, &sb::auto_params(&m)).unwrap();
        assert_eq!(r.best_spins, vec![if h > 0.0 { 1 } else { -1 }]);
        assert_eq!(r.best_energy, -h.abs());
    }
}

/// Fields act like couplings to an extra spin pinned at +1: the ground energy
/// of the field model equals that of the ancilla model, whose two degenerate
/// ground states map back by a global flip.
#[test]
fn fields_match_ancilla_construction() {
    for seed in 0..10 {
        let m = gaussian_ising(9, 400 + seed, true);
        let n = m.n_spins();
        let mut anc = IsingModel::new(n + 1);
        for (i, j, v) in m.couplings() {
            anc.add_coupling(i, j, v);
        }
        for i in 0..n {
            anc.add_coupling(i, n, m.h[i]);
        }
        let (e_field, _) = ising_ground(&m);
        let (e_anc, s_anc) = ising_ground(&anc);
        assert!((e_field - e_anc).abs() < 1e-12);
        let flip: i8 = s_anc[n];
        let mapped: Vec<i8> = s_anc[..n].iter().map(|&v| v * flip).collect();
        assert!((m.energy(&mapped) - e_field).abs() < 1e-12);
    }
}

#[test]
fn energy_matches_brute_force_formula() {
    let mut m = gaussian_ising(8, 3, true);
    m.offset = 1.25;
    let (ground, spins) = ising_ground(&m);
    assert!((sb::energy(&m, &spins) - ground).abs() < 1e-12);
}

#[test]
fn reported_energies_match_reported_spins() {
    let m = gaussian_ising(12, 77, true);
    let r = sb::run(&m, &sb::auto_params(&m)).unwrap();
    assert_eq!(r.replica_spins.len(), r.replica_energies.len());
    for (s, e) in r.replica_spins.iter().zip(&r.replica_energies) {
        assert_eq!(sb::energy(&m, s), *e);
    }
    assert_eq!(r.best_spins, r.replica_spins[r.best_replica]);
}

#[test]
fn oversized_step_is_reported_as_unstable() {
    let m = gaussian_ising(6, 9, false);
    let params = SbParams {
        dt: 5.0,
        xi0: 50.0,
        ..sb::auto_params(&m)
    };
    match sb::run(&m, &params) {
        Err(SbError::Unstable { replicas, .. }) => assert_eq!(replicas, params.replicas),
        other => panic!("expected instability, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn replicas_are_a_prefix_of_larger_runs(seed in any::<u64>(), k in 1usize..8) {
        let m = gaussian_ising(9, seed, true);
        let base = SbParams { seed, steps: 300, ..sb::auto_params(&m) };
        let small = sb::run(&m, &SbParams { replicas: k, ..base.clone() }).unwrap();
        let large = sb::run(&m, &SbParams { replicas: k + 5, ..base }).unwrap();
        prop_assert_eq!(&small.replica_energies[..], &large.replica_energies[..k]);
        prop_assert_eq!(&small.replica_spins[..], &large.replica_spins[..k]);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let m = gaussian_ising(10, seed ^ 0x55, false);
        let p = SbParams { seed, steps: 400, trajectory_every: 50, ..sb::auto_params(&m) };
        prop_assert_eq!(sb::run(&m, &p).unwrap(), sb::run(&m, &p).unwrap());
    }
}
