use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::circuits::rmps_tensor;
use crate::linalg::{kron, matmul};
use crate::mps::uniform::canonicalize_uniform;
use crate::rng::complex_normal;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn random_tensor(chi: usize, d: usize, seed: u64) -> Tensor3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor3::from_fn(chi, d, chi, |_, _, _| complex_normal(&mut rng))
}

fn kron_oracle(a: &Tensor3<f64>) -> ComplexMatrix<f64> {
    let chi = a.left();
    let mut t = ComplexMatrix::zeros(chi * chi, chi * chi);
    for s in 0..a.d() {
        t = t.add(&kron(&a.slice(s).conj(), &a.slice(s)).unwrap()).unwrap();
    }
    t
}

fn spec_of(vals: &[f64]) -> TransferSpectrum {
    TransferSpectrum {
        eigenvalues: vals.iter().map(|&x| c(x, 0.0)).collect(),
        chi: 1,
        site: None,
        spec: None,
        unit_eigenvalues_removed: false,
        unit_count: vals.iter().filter(|x| x.abs() > 1.0 - UNIT_TOL).count(),
    }
}

#[test]
fn transfer_matrix_matches_kron_sum() {
    let a = random_tensor(3, 2, 1);
    let t = transfer_matrix(&a).unwrap();
    assert!(t.sub(&kron_oracle(&a)).unwrap().max_abs() < 1e-12);
}

#[test]
fn transfer_apply_matches_dense() {
    let a = random_tensor(4, 3, 2);
    let t = transfer_matrix(&a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let v: Vec<Complex<f64>> = (0..16).map(|_| complex_normal(&mut rng)).collect();
    let dense = t.apply(&v).unwrap();
    let fast = transfer_apply(&a, &v).unwrap();
    for (x, y) in dense.iter().zip(&fast) {
        assert!((x - y).norm() < 1e-12);
    }
    let op = ComplexMatrix::from_fn(3, 3, |i, j| c(i as f64 - j as f64, (i * j) as f64));
    let t_op = transfer_matrix_with(&a, Some(&op), &Tolerances::default()).unwrap();
    let dense = t_op.apply(&v).unwrap();
    let fast = transfer_apply_op(&a, Some(&op), &v).unwrap();
    for (x, y) in dense.iter().zip(&fast) {
        assert!((x - y).norm() < 1e-11);
    }
}

#[test]
fn rmps_spectrum_is_contractive_with_unit_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for chi in [2, 4, 8] {
        let a = rmps_tensor::<f64, _>(chi, chi, 2, &mut rng);
        let s = spectrum(&a, false).unwrap();
        assert_eq!(s.eigenvalues.len(), chi * chi);
        assert!(s.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-8));
        assert!(s.unit_count >= 1);
        assert!(s.eigenvalues.iter().any(|z| (z - c(1.0, 0.0)).norm() < 1e-8));
        let removed = spectrum(&a, true).unwrap();
        assert_eq!(removed.eigenvalues.len(), chi * chi - s.unit_count);
        assert!(removed.eigenvalues.iter().all(|z| z.norm() <= 1.0 - UNIT_TOL));
    }
}

#[test]
fn padded_product_tensor_spectrum() {
    let a = Tensor3::<f64>::basis(2, 0).padded(4, 4);
    let s = spectrum(&a, false).unwrap();
    let ones = s.eigenvalues.iter().filter(|z| (*z - c(1.0, 0.0)).norm() < 1e-12).count();
    let zeros = s.eigenvalues.iter().filter(|z| z.norm() < 1e-12).count();
    assert_eq!((ones, zeros), (1, 15));
}

#[test]
fn non_square_bonds_rejected() {
    let a = Tensor3::<f64>::zeros(2, 2, 3);
    assert!(transfer_matrix(&a).is_err());
}

#[test]
fn cap_is_enforced() {
    let a = random_tensor(5, 2, 4);
    let tol = Tolerances {
        dense_cap: 16,
        ..Tolerances::default()
    };
    assert!(matches!(
        spectrum_with(&a, false, &tol),
        Err(Error::AboveCap { dim: 25, cap: 16 })
    ));
}

#[test]
fn radial_density_delta_and_normalization() {
    let d = radial_density(&[spec_of(&[0.5])], DEFAULT_BINS).unwrap();
    assert_eq!(d.bins(), 100);
    assert_eq!(d.density.iter().filter(|&&x| x > 0.0).count(), 1);
    assert!(d.density[50] > 0.0);
    assert!((d.integral() - 1.0).abs() < 1e-12);
    assert!(radial_density(&[], 10).is_err());
}

#[test]
fn density_difference_checks_binning() {
    let a = radial_density(&[spec_of(&[0.1, 0.9])], 10).unwrap();
    let b = radial_density(&[spec_of(&[0.1, 0.1])], 10).unwrap();
    let diff = density_difference(&a, &b).unwrap();
    assert!((diff[1] + 5.0).abs() < 1e-12);
    assert!((diff[9] - 5.0).abs() < 1e-12);
    assert!((diff.iter().sum::<f64>()).abs() < 1e-12);
    let c20 = radial_density(&[spec_of(&[0.1])], 20).unwrap();
    assert!(density_difference(&a, &c20).is_err());
}

#[test]
fn small_eig_fraction_edges() {
    let s = spec_of(&[1.0, 0.05, 0.3, 0.6]);
    assert!((small_eig_fraction(&[s.clone()], 1.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((small_eig_fraction(&[s.clone()], 0.1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(small_eig_fraction(&[spec_of(&[1.0, -1.0])], 0.5).unwrap(), 0.0);
    assert!(small_eig_fraction(&[s], 0.0).is_err());
    assert!(small_eig_fraction(&[], 0.5).is_err());
}

#[test]
fn spectral_gap_known_values() {
    let (gap, xi) = spectral_gap(&[c(1.0, 0.0), c(0.0, 0.5), c(0.1, 0.0)]).unwrap();
    assert!((gap - 0.5).abs() < 1e-15);
    assert!((xi - 1.0 / 2f64.ln()).abs() < 1e-12);
    let (gap, xi) = spectral_gap(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert_eq!((gap, xi), (1.0, 0.0));
    assert!(spectral_gap(&[c(1.0, 0.0)]).is_err());
}

fn canonical_random(chi: usize, seed: u64) -> MpsState<f64> {
    let a = random_tensor(chi, 2, seed);
    canonicalize_uniform(&[a], &FixedPointOptions::default())
        .unwrap()
        .state
}

#[test]
fn correlator_routes_agree_and_decay() {
    let state = canonical_random(3, 11);
    let z = ComplexMatrix::from_diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
    let t = transfer_matrix(state.tensor(0)).unwrap();
    let vals: Vec<Complex<f64>> = crate::linalg::eig_general(&t, false).unwrap().values;
    let (gap, _) = spectral_gap(&vals).unwrap();
    let lam2 = 1.0 - gap;
    let c0 = connected_correlator(&state, &z, 0).unwrap().direct.norm();
    for r in [0, 1, 2, 5, 10, 20] {
        let paths = connected_correlator(&state, &z, r).unwrap();
        let eig = paths.eigen.unwrap();
        assert!((eig - paths.direct).norm() < 1e-9 * (1.0 + paths.direct.norm()), "r={r}");
        assert!(paths.direct.norm() <= 10.0 * (c0 + 1e-12) * lam2.powi(r as i32) + 1e-12);
    }
}

#[test]
fn correlator_matches_dense_power_oracle() {
    let state = canonical_random(2, 5);
    let a = state.tensor(0);
    let x = ComplexMatrix::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let t = transfer_matrix(a).unwrap();
    let t_x = transfer_matrix_with(a, Some(&x), &Tolerances::default()).unwrap();
    // Dominant right eigenvector of T by dense power of the matrix itself.
    let mut p = t.clone();
    for _ in 0..12 {
        p = matmul(&p, &p).unwrap();
    }
    let l: Vec<Complex<f64>> = ComplexMatrix::<f64>::identity(2).into_vec();
    let rvec = p.column(0);
    let norm: Complex<f64> = l.iter().zip(&rvec).map(|(a, b)| a * b).sum();
    let rvec: Vec<Complex<f64>> = rvec.iter().map(|z| z / norm).collect();
    let ev = |m: &ComplexMatrix<f64>| -> Complex<f64> {
        let v = m.apply(&rvec).unwrap();
        l.iter().zip(&v).map(|(a, b)| a * b).sum()
    };
    let r = 3;
    let mut chain = t_x.clone();
    for _ in 0..r {
        chain = matmul(&chain, &t).unwrap();
    }
    chain = matmul(&chain, &t_x).unwrap();
    let oracle = ev(&chain) - ev(&t_x) * ev(&t_x);
    let got = connected_correlator(&state, &x, r).unwrap();
    assert!((got.direct - oracle).norm() < 1e-10);
}

#[test]
fn identity_operator_has_no_connected_part() {
    let state = canonical_random(3, 17);
    let id = ComplexMatrix::<f64>::identity(2);
    let p = connected_correlator(&state, &id, 4).unwrap();
    assert!(p.direct.norm() < 1e-10);
    assert!(p.eigen.unwrap().norm() < 1e-10);
}

#[test]
fn correlator_above_cap_keeps_direct_route() {
    let state = canonical_random(3, 19);
    let z = ComplexMatrix::from_diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
    let tol = Tolerances {
        dense_cap: 4,
        ..Tolerances::default()
    };
    let p = connected_correlator_with(&state, &z, 2, &tol).unwrap();
    assert!(p.eigen.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rmps_eigenvalues_inside_disk(seed in any::<u64>(), chi in 1usize..6, d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rmps_tensor::<f64, _>(chi, chi, d, &mut rng);
        let s = spectrum(&a, false).unwrap();
        prop_assert!(s.eigenvalues.iter().all(|z| z.norm() <= 1.0 + 1e-8));
        let dens = radial_density(&[s], DEFAULT_BINS).unwrap();
        prop_assert!((dens.integral() - 1.0).abs() < 1e-12);
    }
}
