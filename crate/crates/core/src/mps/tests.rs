use super::uniform::{canonicalize_uniform, left_map, FixedPointOptions};
use super::*;
use crate::circuits::haar_unitary;
use crate::oracle::StateVector;
use crate::rng::{ginibre, substream, StreamRole};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn rng(seed: u64) -> ChaCha8Rng {
    substream(seed, 0, StreamRole::Gates)
}

/// Random, non-canonical, unnormalized finite MPS.
fn random_mps(n: usize, d: usize, chi: usize, seed: u64) -> MpsState<f64> {
    let mut r = rng(seed);
    let bond = |i: usize| chi.min(d.pow(i.min(n - i) as u32));
    let tensors = (0..n)
        .map(|i| {
            let (l, rr) = (bond(i), bond(i + 1));
            Tensor3::from_left_matrix(ginibre(l * d, rr, &mut r), d)
        })
        .collect();
    MpsState::from_tensors(tensors, None, false).unwrap()
}

fn normalized_random(n: usize, d: usize, chi: usize, seed: u64) -> MpsState<f64> {
    let mut s = random_mps(n, d, chi, seed);
    s.canonicalize_mut(0).unwrap();
    s.normalize().unwrap();
    s
}

fn sv_of(s: &MpsState<f64>) -> StateVector<f64> {
    StateVector::from_amplitudes(s.len(), s.d(), s.to_statevector().unwrap()).unwrap()
}

fn sv_fidelity(a: &StateVector<f64>, b: &StateVector<f64>) -> f64 {
    a.inner(b).norm_sqr() / (a.norm_sqr() * b.norm_sqr())
}

fn max_amp_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn swap_gate() -> ComplexMatrix<f64> {
    ComplexMatrix::from_fn(4, 4, |i, j| {
        let (a, b) = (i / 2, i % 2);
        if j == b * 2 + a {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

#[test]
fn product_states() {
    let zero = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let s = MpsState::product_state(&[zero.clone(), zero.clone(), zero]).unwrap();
    assert_eq!(s.bond_dims(), vec![1, 1, 1, 1]);
    assert!((s.norm_sqr().unwrap() - 1.0).abs() < 1e-14);
    for k in 1..4 {
        assert!(s.entropy_profile(k).unwrap().iter().all(|x| x.abs() < 1e-14));
    }

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = MpsState::product_state(&[vec![c(h, 0.0), c(h, 0.0)]]).unwrap();
    assert_eq!(plus.tensor(0).as_slice(), &[c(h, 0.0), c(h, 0.0)]);

    assert!(MpsState::<f64>::product_state(&[vec![c(1.0, 0.0), c(1.0, 0.0)]]).is_err());
}

#[test]
fn canonicalize_isometries() {
    let s = random_mps(6, 2, 4, 1);
    let can = s.canonicalize(3).unwrap();
    for i in 0..3 {
        assert!(can.tensor(i).left_isometry_defect() < 1e-10);
    }
    for i in 4..6 {
        assert!(can.tensor(i).right_isometry_defect() < 1e-10);
    }
    assert!(can.fidelity(&s).unwrap() > 1.0 - 1e-10);
    // Canonicalizing a canonical state leaves it unchanged up to gauge.
    assert!(can.canonicalize(3).unwrap().fidelity(&can).unwrap() > 1.0 - 1e-12);
}

#[test]
fn stepwise_center_moves_preserve_state() {
    let mut s = normalized_random(8, 2, 8, 2);
    let reference = sv_of(&s);
    for target in 0..8 {
        s.move_center_to(target).unwrap();
        assert!(sv_fidelity(&sv_of(&s), &reference) > 1.0 - 1e-9);
    }
}

#[test]
fn identity_and_swap_gates() {
    let mut s = normalized_random(4, 2, 4, 3);
    let before = s.clone();
    s.move_center_to(1).unwrap();
    s.apply_two_site_gate(&ComplexMatrix::identity(4), 1, 16).unwrap();
    assert!(s.fidelity(&before).unwrap() > 1.0 - 1e-12);

    let one = vec![c(0.0, 0.0), c(1.0, 0.0)];
    let zero = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let mut p = MpsState::product_state(&[zero.clone(), one.clone()]).unwrap();
    p.apply_two_site_gate(&swap_gate(), 0, 4).unwrap();
    let want = MpsState::product_state(&[one, zero]).unwrap();
    assert!(p.fidelity(&want).unwrap() > 1.0 - 1e-14);
}

#[test]
fn gate_rejects_bad_input() {
    let mut s = MpsState::<f64>::zero_state(3, 2);
    let mut bad = ComplexMatrix::identity(4);
    bad[(0, 0)] = c(2.0, 0.0);
    assert!(matches!(s.apply_two_site_gate(&bad, 0, 4), Err(Error::NonUnitary(_))));
    assert!(s.apply_two_site_gate(&ComplexMatrix::identity(4), 2, 4).is_err());
}

#[test]
fn untruncated_gates_match_statevector() {
    let mut r = rng(4);
    let mut s = MpsState::<f64>::zero_state(6, 2);
    let mut sv = StateVector::zero_state(6, 2).unwrap();
    for layer in 0..4 {
        for site in (layer % 2..5).step_by(2) {
            let g = haar_unitary(4, &mut r);
            s.move_center_to(site).unwrap();
            s.apply_two_site_gate(&g, site, 64).unwrap();
            sv.apply_two_site(&g, site).unwrap();
        }
    }
    assert!(max_amp_diff(&s.to_statevector().unwrap(), sv.amplitudes()) < 1e-10);
}

#[test]
fn measurement_basics() {
    let mut s = MpsState::<f64>::zero_state(2, 2);
    assert_eq!(s.site_probabilities(0).unwrap(), vec![1.0, 0.0]);
    assert_eq!(s.measure_site_with(0, 0.999).unwrap(), 0);

    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = MpsState::product_state(&[vec![c(h, 0.0), c(h, 0.0)]]).unwrap();
    let mut r = rng(5);
    let shots = 10_000;
    let ones: usize = (0..shots)
        .map(|_| plus.clone().measure_site(0, &mut r).unwrap())
        .sum();
    let sigma = (shots as f64 * 0.25).sqrt();
    assert!((ones as f64 - shots as f64 / 2.0).abs() < 3.0 * sigma);

    assert!(s.site_probabilities(1).is_err());
}

#[test]
fn measurement_matches_statevector_projection() {
    for (seed, u) in [(6, 0.2), (7, 0.8), (8, 0.5)] {
        let mut s = normalized_random(4, 2, 4, seed);
        let mut sv = sv_of(&s);
        s.move_center_to(2).unwrap();
        let a = s.measure_site_with(2, u).unwrap();
        let b = sv.measure_with(2, u);
        assert_eq!(a, b);
        assert!(max_amp_diff(&s.to_statevector().unwrap(), sv.amplitudes()) < 1e-10);
    }
}

#[test]
fn bell_pair_entropy() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = vec![c(1.0, 0.0), c(0.0, 0.0)];
    let mut s = MpsState::product_state(&[zero.clone(), zero]).unwrap();
    // CNOT · (H ⊗ I)
    let g = ComplexMatrix::from_fn(4, 4, |i, j| {
        let hm = |a: usize, b: usize| if a == 1 && b == 1 { -h } else { h };
        let (a, b, x, y) = (i / 2, i % 2, j / 2, j % 2);
        c(if b == (a ^ y) { hm(a, x) } else { 0.0 }, 0.0)
    });
    s.apply_two_site_gate(&g, 0, 4).unwrap();
    assert!((s.renyi_entropy(1, 2).unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!((s.renyi_entropy(1, 1).unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!(s.renyi_entropy(0, 2).is_err());
}

#[test]
fn per_layer_truncation_matches_per_gate() {
    let mut r = rng(9);
    let mut a = MpsState::<f64>::zero_state(10, 2);
    let mut b = a.clone();
    for layer in 0..8 {
        let sites: Vec<usize> = (layer % 2..9).step_by(2).collect();
        let gates: Vec<_> = sites.iter().map(|_| haar_unitary::<f64, _>(4, &mut r)).collect();
        for (g, &s) in gates.iter().zip(&sites) {
            a.move_center_to(s).unwrap();
            a.apply_two_site_gate(g, s, 4).unwrap();
        }
        for (g, &s) in gates.iter().zip(&sites) {
            b.move_center_to(s).unwrap();
            b.apply_two_site_gate(g, s, usize::MAX).unwrap();
        }
        b.truncate_sweep(4).unwrap();
    }
    assert_eq!(a.bond_dims(), b.bond_dims());
    assert!(a.fidelity(&b).unwrap() > 1.0 - 1e-10);
}

#[test]
fn zero_schmidt_values_are_kept_explicitly() {
    // A product state acted on by the identity keeps bond min(chi, 2, 2) = 2.
    let mut s = MpsState::<f64>::zero_state(3, 2);
    let kept = s.apply_two_site_gate(&ComplexMatrix::identity(4), 0, 8).unwrap();
    assert_eq!(kept.len(), 2);
    assert_eq!(kept[1], 0.0);
    assert_eq!(s.bond_dims()[1], 2);
}

#[test]
fn schmidt_gauge_tensor_is_left_canonical_and_zeroes_nulls() {
    let s = normalized_random(8, 2, 4, 10);
    let a = s.schmidt_gauge_tensor(4, DEFAULT_NULL_TOL).unwrap();
    assert!(a.left_isometry_defect() < 1e-10);

    let mut p = MpsState::<f64>::zero_state(6, 2);
    for site in 0..5 {
        p.move_center_to(site).unwrap();
        p.apply_two_site_gate(&ComplexMatrix::identity(4), site, 4).unwrap();
    }
    let t = p.schmidt_gauge_tensor(3, DEFAULT_NULL_TOL).unwrap();
    let nonzero = t.as_slice().iter().filter(|z| z.norm() > 0.0).count();
    assert_eq!(nonzero, 1);
}

#[test]
fn container_roundtrip() {
    let s = normalized_random(5, 2, 4, 11);
    let mut buf = Vec::new();
    write_mps(&s, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"MPSE");
    let back = read_mps(buf.as_slice()).unwrap();
    assert_eq!(back, s);
    buf[0] = b'X';
    assert!(matches!(read_mps(buf.as_slice()), Err(Error::Format(_))));
}

#[test]
fn container_sidecar_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.mps");
    let s = normalized_random(4, 2, 2, 12);
    let spec = serde_json::json!({"family": "rmps", "chi": 2});
    write_mps_with_sidecar(&s, &spec, &path).unwrap();
    let (back, side): (_, serde_json::Value) = read_sidecar(&path).unwrap();
    assert_eq!(back, s);
    assert_eq!(side, spec);
}

#[test]
fn uniform_canonical_form() {
    let mut r = rng(13);
    let cell = vec![
        Tensor3::<f64>::from_left_matrix(ginibre(6, 3, &mut r), 2),
        Tensor3::<f64>::from_left_matrix(ginibre(6, 3, &mut r), 2),
    ];
    let can = canonicalize_uniform(&cell, &FixedPointOptions::default()).unwrap();
    for (j, t) in can.state.tensors().iter().enumerate() {
        assert!(t.left_isometry_defect() < 1e-10);
        let s2: f64 = can.schmidt[j].iter().map(|s| s * s).sum();
        assert!((s2 - 1.0).abs() < 1e-10);
        assert!(can.schmidt[j].windows(2).all(|w| w[0] >= w[1]));
    }
    // Identity is a left fixed point of every site.
    let t = &can.state.tensors()[0];
    let fixed = left_map(t, &ComplexMatrix::identity(t.left())).unwrap();
    assert!(fixed.sub(&ComplexMatrix::identity(t.right())).unwrap().max_abs() < 1e-10);
}

#[test]
fn renyi_limits() {
    let s = [0.8f64.sqrt(), 0.2f64.sqrt()];
    let vn = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
    assert!((renyi_from_schmidt(&s, 1).unwrap() - vn).abs() < 1e-14);
    let r2 = -(0.64f64 + 0.04).ln();
    assert!((renyi_from_schmidt(&s, 2).unwrap() - r2).abs() < 1e-14);
    assert_eq!(renyi_from_schmidt(&[1.0, 0.0], 1).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn circuits_match_statevector(n in 2usize..=8, seed in any::<u64>(), layers in 1usize..5) {
        let chi = 2usize.pow(n.div_ceil(2) as u32);
        let mut r = rng(seed);
        let mut s = MpsState::<f64>::zero_state(n, 2);
        let mut sv = StateVector::zero_state(n, 2).unwrap();
        for layer in 0..layers {
            for site in (layer % 2..n - 1).step_by(2) {
                let g = haar_unitary(4, &mut r);
                s.move_center_to(site).unwrap();
                s.apply_two_site_gate(&g, site, chi).unwrap();
                sv.apply_two_site(&g, site).unwrap();
            }
        }
        prop_assert!(max_amp_diff(&s.to_statevector().unwrap(), sv.amplitudes()) < 1e-10);
    }

    #[test]
    fn truncation_renormalizes(seed in any::<u64>(), chi in 1usize..4) {
        let mut s = normalized_random(6, 2, 8, seed);
        s.move_center_to(2).unwrap();
        let g = haar_unitary(4, &mut rng(seed ^ 7));
        let kept = s.apply_two_site_gate(&g, 2, chi).unwrap();
        let total: f64 = kept.iter().map(|x| x * x).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        prop_assert!((s.norm_sqr().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn entropy_is_gauge_invariant(seed in any::<u64>(), c1 in 0usize..6, cut in 1usize..6) {
        let base = normalized_random(6, 2, 4, seed);
        let mut a = base.canonicalize(c1).unwrap();
        let mut b = base.canonicalize(5 - c1).unwrap();
        let sa = renyi_from_schmidt(&a.schmidt_values_at(cut).unwrap().values, 2).unwrap();
        let sb = renyi_from_schmidt(&b.schmidt_values_at(cut).unwrap().values, 2).unwrap();
        prop_assert!((sa - sb).abs() < 1e-9);
    }
}

#[test]
fn measurement_frequencies_follow_born_rule() {
    let s = normalized_random(4, 2, 4, 14);
    let mut s = s;
    s.move_center_to(1).unwrap();
    let p1 = s.site_probabilities(1).unwrap()[1];
    let mut r = rng(15);
    let shots = 10_000;
    let hits: usize = (0..shots).map(|_| s.clone().measure_site(1, &mut r).unwrap()).sum();
    let sigma = (shots as f64 * p1 * (1.0 - p1)).sqrt();
    assert!((hits as f64 - shots as f64 * p1).abs() < 5.0 * sigma);
}
