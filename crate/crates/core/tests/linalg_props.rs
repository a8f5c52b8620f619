use ppp_core::linalg::{operator_norm, principal_sqrt, spectral_radius, Matrix, Subspace};
use ppp_core::sampling::{random_matrix, random_psd, random_subspace, random_vector, rng};
use proptest::prelude::*;

fn subspace_and_rank() -> impl Strategy<Value = (u64, usize, usize)> {
    (1usize..9).prop_flat_map(|d| (any::<u64>(), Just(d), 0..=d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent((seed, d, k) in subspace_and_rank()) {
        let mut r = rng(seed);
        let s = random_subspace(&mut r, d, k);
        let v = random_vector(&mut r, d);
        let p = s.project(&v).unwrap();
        prop_assert!((s.project(&p).unwrap() - &p).norm() <= 1e-12);
    }

    #[test]
    fn basis_is_orthonormal((seed, d, k) in subspace_and_rank()) {
        let s = random_subspace(&mut rng(seed), d, k);
        prop_assert_eq!(s.basis().ncols(), s.rank());
        prop_assert!(s.rank() <= d);
        let gram = s.basis().transpose() * s.basis();
        let defect = (gram - Matrix::identity(s.rank(), s.rank())).amax();
        prop_assert!(defect <= 1e-12);
    }

    #[test]
    fn complement_projections_sum_to_identity((seed, d, k) in subspace_and_rank()) {
        let mut r = rng(seed);
        let s = random_subspace(&mut r, d, k);
        let c = s.complement();
        prop_assert_eq!(s.rank() + c.rank(), d);
        for _ in 0..100 {
            let v = random_vector(&mut r, d);
            let sum = s.project(&v).unwrap() + c.project(&v).unwrap();
            prop_assert!((sum - &v).norm() <= 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn sum_and_intersection_are_dual(seed in any::<u64>(), d in 1usize..9, k1 in 0usize..9, k2 in 0usize..9) {
        let mut r = rng(seed);
        let s1 = random_subspace(&mut r, d, k1.min(d));
        let s2 = random_subspace(&mut r, d, k2.min(d));
        let lhs = s1.sum(&s2).unwrap().complement();
        let rhs = s1.complement().intersect(&s2.complement()).unwrap();
        prop_assert!(lhs.equality_residual(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn principal_sqrt_squares_back(seed in any::<u64>(), n in 1usize..11, rank in 0usize..11) {
        let mut r = rng(seed);
        let g = random_matrix(&mut r, n, rank.min(n));
        let a = if rank == 0 { random_psd(&mut r, n) } else { &g * g.transpose() };
        let root = principal_sqrt(&a).unwrap();
        prop_assert!((&root * &root - &a).norm() <= 1e-9 * a.norm().max(1.0));
        prop_assert!((&root - root.transpose()).amax() <= 1e-12 * root.amax().max(1.0));
    }

    #[test]
    fn norm_dominates_spectral_radius(seed in any::<u64>(), n in 1usize..10) {
        let a = random_matrix(&mut rng(seed), n, n);
        prop_assert!(operator_norm(&a) >= spectral_radius(&a).unwrap() - 1e-9);
    }
}

#[test]
fn trivial_and_full_subspaces_are_complements() {
    let full = Subspace::full(4);
    let trivial = Subspace::trivial(4);
    assert_eq!(full.complement().rank(), 0);
    assert!(trivial.complement().equality_residual(&full).unwrap() <= 1e-15);
    assert!(full.intersect(&trivial).unwrap().is_trivial());
}
