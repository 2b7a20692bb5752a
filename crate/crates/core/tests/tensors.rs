mod common;

use nmss_core::tensors::{contract, expm_antihermitian, svd_truncate, ComplexMatrix, Tensor};
use nmss_core::C64;
use proptest::prelude::*;

#[test]
fn discarded_weight_matches_gram_eigenvalues() {
    let mut rng = common::rng(7);
    for _ in 0..20 {
        let m = common::random_matrix(&mut rng, 4, 4);
        let svd = svd_truncate(&m, 2, 0.0).unwrap();
        let gram = common::to_nalgebra(&m.adjoint().matmul(&m).unwrap());
        let mut eig: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((svd.discarded_weight - (eig[2] + eig[3])).abs() < 1e-10);
        assert!((svd.singular_values[0].powi(2) - eig[0]).abs() < 1e-10);
        assert!((svd.singular_values[1].powi(2) - eig[1]).abs() < 1e-10);
    }
}

/// Truncated power series, independent of any decomposition.
fn expm_series(g: &ComplexMatrix) -> ComplexMatrix {
    let n = g.rows();
    let mut term = ComplexMatrix::identity(n);
    let mut sum = ComplexMatrix::identity(n);
    for k in 1..60 {
        term = term.matmul(g).unwrap().scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term).unwrap();
    }
    sum
}

#[test]
fn half_pi_x_rotation_flips_ground_to_excited() {
    let i = C64::i();
    let h = std::f64::consts::FRAC_PI_2;
    let g = ComplexMatrix::new(2, 2, vec![C64::new(0.0, 0.0), -i * h, -i * h, C64::new(0.0, 0.0)]).unwrap();
    let u = expm_antihermitian(&g).unwrap();
    let image = u.mat_vec(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
    assert!((image[0]).norm() < 1e-14);
    assert!((image[1] + i).norm() < 1e-14);
    let series = expm_series(&g);
    assert!(common::max_diff(u.data(), series.data()) < 1e-13);
}

#[test]
fn expm_matches_power_series_on_random_generators() {
    let mut rng = common::rng(11);
    for n in [2, 3, 6, 18] {
        let g = common::random_generator(&mut rng, n).scale(C64::new(0.3, 0.0));
        let u = expm_antihermitian(&g).unwrap();
        assert!(common::max_diff(u.data(), expm_series(&g).data()) < 1e-11, "n = {n}");
    }
}

#[test]
fn three_tensor_chain_in_both_orders() {
    let mut rng = common::rng(3);
    let a = Tensor::new(vec![2, 3], common::random_matrix(&mut rng, 2, 3).into_data()).unwrap();
    let b = Tensor::new(vec![3, 2, 2], common::random_matrix(&mut rng, 3, 4).into_data()).unwrap();
    let c = Tensor::new(vec![2, 3], common::random_matrix(&mut rng, 2, 3).into_data()).unwrap();
    // T[i, k, m] = Σ_j Σ_l a[i, j] b[j, k, l] c[l, m]
    let left = contract(&contract(&a, &b, &[(1, 0)]).unwrap(), &c, &[(2, 0)]).unwrap();
    let right = contract(&a, &contract(&b, &c, &[(2, 0)]).unwrap(), &[(1, 0)]).unwrap();
    assert_eq!(left.dims(), &[2, 2, 3]);
    assert_eq!(right.dims(), &[2, 2, 3]);
    for i in 0..2 {
        for k in 0..2 {
            for m in 0..3 {
                let mut brute = C64::new(0.0, 0.0);
                for j in 0..3 {
                    for l in 0..2 {
                        brute += a.get(&[i, j]) * b.get(&[j, k, l]) * c.get(&[l, m]);
                    }
                }
                assert!((left.get(&[i, k, m]) - brute).norm() < 1e-12);
                assert!((right.get(&[i, k, m]) - brute).norm() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_rank_svd_reconstructs(seed in any::<u64>(), rows in 1usize..7, cols in 1usize..7) {
        let mut rng = common::rng(seed);
        let m = common::random_matrix(&mut rng, rows, cols);
        let svd = svd_truncate(&m, rows.min(cols), 0.0).unwrap();
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm();
        prop_assert!(err < 1e-10, "error {}", err);
        prop_assert!(svd.discarded_weight < 1e-20);
    }

    #[test]
    fn expm_inverse_and_unitarity(seed in any::<u64>(), n in 1usize..19, scale in 0.01f64..5.0) {
        let mut rng = common::rng(seed);
        let g = common::random_generator(&mut rng, n).scale(C64::new(scale, 0.0));
        let u = expm_antihermitian(&g).unwrap();
        let v = expm_antihermitian(&g.scale(C64::new(-1.0, 0.0))).unwrap();
        let err = u.matmul(&v).unwrap().sub(&ComplexMatrix::identity(n)).unwrap().max_abs();
        prop_assert!(err < 1e-9, "error {}", err);
        prop_assert!(u.unitarity_residual() < 1e-10);
    }

    #[test]
    fn contract_is_bilinear(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let mut rng = common::rng(seed);
        let alpha = C64::new(re, im);
        let a = Tensor::new(vec![2, 3, 2], common::random_matrix(&mut rng, 2, 6).into_data()).unwrap();
        let b = Tensor::new(vec![3, 2], common::random_matrix(&mut rng, 3, 2).into_data()).unwrap();
        let scaled = contract(&a.scale(alpha), &b, &[(1, 0)]).unwrap();
        let base = contract(&a, &b, &[(1, 0)]).unwrap().scale(alpha);
        prop_assert!(common::max_diff(scaled.data(), base.data()) < 1e-12);
        let scaled_b = contract(&a, &b.scale(alpha), &[(1, 0)]).unwrap();
        prop_assert!(common::max_diff(scaled_b.data(), base.data()) < 1e-12);
    }
}
