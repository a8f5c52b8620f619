use ppp_core::linalg::{Matrix, Vector};
use ppp_core::monotone::{inverse_resolvent, resolvent, Resolvent, ResolventOp};
use ppp_core::sampling::{random_matrix, random_psd, random_subspace, random_vector, rng, uniform, uniform_int, SeededRng};
use proptest::prelude::*;

fn stock_operators(r: &mut SeededRng, d: usize) -> Vec<ResolventOp> {
    let k = uniform_int(r, 0, d);
    let s = random_subspace(r, d, k);
    let skew = {
        let g = random_matrix(r, d, d);
        &g - g.transpose()
    };
    let psd = random_psd(r, d);
    vec![
        ResolventOp::zero(d),
        ResolventOp::normal_cone(s.clone()),
        ResolventOp::normal_cone_affine(s, random_vector(r, d)).unwrap(),
        ResolventOp::normal_cone_point(random_vector(r, d)).unwrap(),
        ResolventOp::linear_monotone(&psd + &skew).unwrap(),
        ResolventOp::scaled(uniform(r, 0.1, 5.0), ResolventOp::linear_monotone(psd).unwrap()).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stock_resolvents_are_firmly_nonexpansive(seed in any::<u64>(), d in 1usize..7) {
        let mut r = rng(seed);
        for op in stock_operators(&mut r, d) {
            for _ in 0..200 {
                let (x, y) = (random_vector(&mut r, d) * 3.0, random_vector(&mut r, d));
                let (jx, jy) = (resolvent(&op, &x).unwrap(), resolvent(&op, &y).unwrap());
                let dj = &jx - &jy;
                prop_assert!(dj.norm_squared() <= (&x - &y).dot(&dj) + 1e-9, "{:?}", op);
            }
        }
    }

    #[test]
    fn inverse_resolvent_matches_direct_solve(seed in any::<u64>(), d in 1usize..7, tau in 0.05f64..20.0) {
        let mut r = rng(seed);
        let g = random_matrix(&mut r, d, d);
        let b = random_psd(&mut r, d) + Matrix::identity(d, d) * 0.5 + (&g - g.transpose());
        let x = random_vector(&mut r, d);
        let op = ResolventOp::linear_monotone(b.clone()).unwrap();
        let via_identity = inverse_resolvent(&op, tau, &x).unwrap();
        let system = Matrix::identity(d, d) + b.try_inverse().unwrap() * tau;
        let direct = system.lu().solve(&x).unwrap();
        prop_assert!((via_identity - direct).norm() <= 1e-9 * x.norm().max(1.0));
    }

    #[test]
    fn normal_cone_resolvent_splits_orthogonally(seed in any::<u64>(), d in 1usize..9, k in 0usize..9) {
        let mut r = rng(seed);
        let s = random_subspace(&mut r, d, k.min(d));
        let x = random_vector(&mut r, d);
        let jx = resolvent(&ResolventOp::normal_cone(s.clone()), &x).unwrap();
        prop_assert!(s.distance(&jx).unwrap() <= 1e-10);
        prop_assert!(s.complement().distance(&(&x - &jx)).unwrap() <= 1e-10);
    }

    #[test]
    fn scaled_resolvent_of_normal_cone_ignores_scale(seed in any::<u64>(), gamma in 0.01f64..100.0) {
        let mut r = rng(seed);
        let s = random_subspace(&mut r, 5, 2);
        let x = random_vector(&mut r, 5);
        let op = ResolventOp::normal_cone(s);
        prop_assert!((op.scaled_resolvent(gamma, &x) - op.resolvent(&x)).norm() <= 1e-14);
    }
}

#[test]
fn point_resolvent_is_constant() {
    let b = Vector::from_row_slice(&[1.0, -2.0, 0.5]);
    let op = ResolventOp::normal_cone_point(b.clone()).unwrap();
    for x in [Vector::zeros(3), Vector::from_row_slice(&[9.0, 9.0, 9.0])] {
        assert_eq!(resolvent(&op, &x).unwrap(), b);
    }
}

#[test]
fn non_monotone_linear_map_is_rejected() {
    let b = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
    assert!(ResolventOp::linear_monotone(b).is_err());
}

#[test]
fn dimension_mismatch_is_an_error() {
    let op = ResolventOp::zero(3);
    assert!(resolvent(&op, &Vector::zeros(2)).is_err());
    assert!(inverse_resolvent(&op, 0.0, &Vector::zeros(3)).is_err());
}
