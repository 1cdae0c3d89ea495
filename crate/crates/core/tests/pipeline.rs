use mps_ensembles_core::circuits::{generate_finite, CircuitSpec, Family};
use mps_ensembles_core::mps::{read_mps, write_mps};
use mps_ensembles_core::replica::{replica_trace, replica_traces_finite, BlockLayout, ReplicaOptions};
use mps_ensembles_core::spectra::site_spectrum;
use mps_ensembles_core::MpsState64;

fn monitored(seed: u64) -> MpsState64 {
    let spec = CircuitSpec::new(Family::Monitored, 8, 2, 4, 8, seed).with_p(0.2);
    generate_finite::<f64>(&spec).unwrap().0
}

#[test]
fn serialized_state_round_trips() {
    let state = monitored(3);
    let mut buf = Vec::new();
    write_mps(&state, &mut buf).unwrap();
    let back = read_mps(buf.as_slice()).unwrap();
    assert_eq!(back.bond_dims(), state.bond_dims());
    assert!((back.fidelity(&state).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn half_chain_purity_matches_schmidt_values() {
    for seed in 0..4 {
        let mut state = monitored(seed);
        let mask: Vec<bool> = (0..8).map(|i| i < 4).collect();
        let traced = replica_trace(&state, &mask, 2, &ReplicaOptions::default()).unwrap();
        let schmidt: f64 = state.schmidt_values_at(4).unwrap().values.iter().map(|s| s.powi(4)).sum();
        assert!((traced - schmidt).abs() < 1e-10, "seed {seed}: {traced} vs {schmidt}");
    }
}

#[test]
fn finite_traces_are_physical() {
    let state = monitored(5);
    let layout = BlockLayout::centered(8, 2).unwrap();
    let t = replica_traces_finite(&state, &layout, 2, &ReplicaOptions::default()).unwrap();
    assert!(t.mutual_info() >= -1e-12);
    assert!(t.ab <= 1.0 + 1e-12 && t.a <= 1.0 + 1e-12 && t.b <= 1.0 + 1e-12);
}

#[test]
fn schmidt_gauge_spectrum_has_unit_leading_eigenvalue() {
    let state = monitored(7);
    let s = site_spectrum(&state, 4, 1e-10, false).unwrap();
    let lead = s.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!((lead - 1.0).abs() < 1e-8, "{lead}");
    assert!(s.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-8));
}
