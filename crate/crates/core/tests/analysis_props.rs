use std::f64::consts::PI;

use ppp_core::analysis::{
    cp_preconditioner, factorize, sqrt_m_polar, sqrt_m_sym, trig_form_check, two_lines_bounds, two_lines_report,
    FactorRoute,
};
use ppp_core::linalg::{map_symmetric, operator_norm, principal_sqrt, pseudo_inverse, symmetric_eigenvalues, Matrix};
use ppp_core::sampling::{random_matrix_with_norm, rng};
use proptest::prelude::*;

fn assert_symmetric_psd(r: &Matrix) -> Result<(), TestCaseError> {
    prop_assert!((r - r.transpose()).amax() <= 1e-12 * r.amax().max(1.0));
    let min = symmetric_eigenvalues(r).unwrap().first().copied().unwrap_or(0.0);
    prop_assert!(min >= -1e-10);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn two_lines_closed_forms(theta in 0.0f64..PI, tau in 0.1f64..10.0) {
        let r = two_lines_report(theta, tau).unwrap();
        prop_assert!((r.rho_numeric - theta.cos().abs()).abs() <= 1e-9);
        prop_assert!((r.norm_numeric - r.norm_closed).abs() <= 1e-9);
    }

    #[test]
    fn two_lines_bound_chain(theta in 0.0f64..PI, tau in 0.1f64..10.0) {
        let r = two_lines_report(theta, tau).unwrap();
        let (lower, upper) = two_lines_bounds(tau);
        prop_assert!(2f64.sqrt() <= lower + 1e-12);
        prop_assert!(lower <= r.norm_numeric + 1e-9);
        prop_assert!(r.norm_numeric <= upper + 1e-9);
        let top = two_lines_report(PI / 2.0, tau).unwrap();
        prop_assert!((top.norm_numeric - upper).abs() <= 1e-9);
    }

    #[test]
    fn factorizations_reconstruct(seed in any::<u64>(), m in 1usize..7, n in 1usize..7, norm in 0.1f64..1.0, sigma in 0.25f64..4.0) {
        let l = random_matrix_with_norm(&mut rng(seed), m, n, norm);
        let tau = 1.0 / (sigma * norm * norm);
        let f = factorize(&l, sigma, tau, FactorRoute::Cholesky).unwrap();
        prop_assert!(f.reconstruction_error <= 1e-9 * (sigma + tau).max(1.0));

        let polar = factorize(&l, 1.0, 1.0, FactorRoute::SqrtPolar).unwrap();
        prop_assert!(polar.reconstruction_error <= 1e-9);
        let root = sqrt_m_polar(&l, 1.0).unwrap();
        prop_assert!((&root * &root - cp_preconditioner(&l, 1.0, 1.0)).norm() <= 1e-8);
        assert_symmetric_psd(&root)?;
        prop_assert!(trig_form_check(&l, 1e-9).is_ok());
    }

    #[test]
    fn symmetric_root_is_principal(seed in any::<u64>(), n in 1usize..7, norm in 0.0f64..1.0) {
        let g = random_matrix_with_norm(&mut rng(seed), n, n, 1.0);
        let h = (&g + g.transpose()) * 0.5;
        let l = &h * (norm / operator_norm(&h).max(1e-300));
        let root = sqrt_m_sym(&l).unwrap();
        let m = cp_preconditioner(&l, 1.0, 1.0);
        prop_assert!((&root * &root - &m).norm() <= 1e-8);
        assert_symmetric_psd(&root)?;
        prop_assert!((root - principal_sqrt(&m).unwrap()).norm() <= 1e-8);
    }

    #[test]
    fn polar_factor_intertwines(seed in any::<u64>(), m in 1usize..7, n in 1usize..7, norm in 0.05f64..1.0) {
        let l = random_matrix_with_norm(&mut rng(seed), m, n, norm);
        let ltl = l.transpose() * &l;
        let llt = &l * l.transpose();
        let s = principal_sqrt(&ltl).unwrap();
        let u = &l * pseudo_inverse(&s, 1e-10).unwrap();
        for sign in [1.0, -1.0] {
            let f = |t: f64| (1.0 + sign * t.max(0.0).sqrt()).max(0.0).sqrt();
            let lhs = &u * map_symmetric(&ltl, f).unwrap();
            let rhs = map_symmetric(&llt, f).unwrap() * &u;
            prop_assert!((lhs - rhs).norm() <= 1e-8);
        }
    }
}

#[test]
fn bound_chain_is_tight_at_the_anchors() {
    let r = two_lines_report(0.0, 1.0).unwrap();
    let (lower, _) = two_lines_bounds(1.0);
    assert!((r.norm_numeric - lower).abs() <= 1e-9);
    assert!((lower - 2f64.sqrt()).abs() <= 1e-15);
}

#[test]
fn routes_reject_unequal_steps() {
    let l = Matrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.2]);
    assert!(factorize(&l, 1.0, 2.0, FactorRoute::SqrtSym).is_err());
    assert!(factorize(&l, 1.0, 2.0, FactorRoute::SqrtPolar).is_err());
    assert!(factorize(&l, 2.0, 2.0, FactorRoute::Cholesky).is_ok());
    assert!(factorize(&l, 2.0, 2.0, FactorRoute::Scalar2x2).is_err());
}
