mod common;

use std::sync::atomic::Ordering;

use common::{cp_params, mixed_cases};
use ppp_core::linalg::{Matrix, Vector};
use ppp_core::methods::{build_cp, build_dr, build_mt, build_ryu};
use ppp_core::monotone::{Counted, ResolventOp};
use ppp_core::ppp::{run_ppp, run_rppp, LambdaSchedule, RunOptions};
use ppp_core::sampling::{random_psd, random_subspace, random_vector, rng};
use proptest::prelude::*;

/// `pattern ⊗ I_d`.
fn kron_identity(pattern: &[&[f64]], d: usize) -> Matrix {
    let (rows, cols) = (pattern.len(), pattern[0].len());
    Matrix::from_fn(rows * d, cols * d, |i, j| if i % d == j % d { pattern[i / d][j / d] } else { 0.0 })
}

fn gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|a| rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect()
}

/// Scalar rows of `C` for Malitsky–Tam: `(C^T u)_j = x_j − x_{j+1} + v_j`.
fn mt_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; n - 1]; 2 * n - 1];
    for j in 0..n - 1 {
        rows[j][j] += 1.0;
        rows[j + 1][j] -= 1.0;
        rows[n + j][j] = 1.0;
    }
    rows
}

fn as_slices(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reduced_operator_is_firmly_nonexpansive(seed in any::<u64>()) {
        let mut r = rng(seed);
        for case in mixed_cases(seed) {
            let dim = case.inst.dim_d();
            for _ in 0..200 {
                let (x, y) = (random_vector(&mut r, dim), random_vector(&mut r, dim) * 2.0);
                let (tx, ty) = (case.inst.apply_ttilde(&x).unwrap(), case.inst.apply_ttilde(&y).unwrap());
                let dt = &tx - &ty;
                prop_assert!(dt.norm_squared() <= (&x - &y).dot(&dt) + 1e-9);
            }
        }
    }

    #[test]
    fn fixed_point_sets_correspond(seed in any::<u64>()) {
        for case in mixed_cases(seed) {
            let basis = case.fix.fix_ttilde.basis();
            for b in basis.column_iter() {
                let b = b.into_owned();
                prop_assert!((case.inst.apply_ttilde(&b).unwrap() - &b).norm() <= 1e-9);
            }
            prop_assert!(case.fix.reduction_residual(&case.inst).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn displacement_never_increases(seed in any::<u64>(), lambda in 0.05f64..1.95) {
        let sched = LambdaSchedule::constant(lambda).unwrap();
        for case in mixed_cases(seed) {
            let w0 = case.inst.reduce(&case.random_start(&mut rng(seed))).unwrap();
            let trace = run_rppp(&case.inst, &w0, &sched, &RunOptions::new(300, 1e-14)).unwrap();
            for pair in trace.records.windows(2) {
                prop_assert!(pair[1].residual <= pair[0].residual + 1e-12);
            }
        }
    }

    #[test]
    fn seminorm_is_the_quadratic_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        for case in mixed_cases(seed) {
            let x = random_vector(&mut r, case.inst.dim_h());
            let q = x.dot(&(case.inst.m() * &x));
            prop_assert!((case.inst.seminorm_m(&x).unwrap().powi(2) - q).abs() <= 1e-9 * q.abs().max(1.0));
        }
    }

    #[test]
    fn traces_respect_their_budget(seed in any::<u64>(), max_iters in 0usize..60) {
        let sched = LambdaSchedule::default();
        for case in mixed_cases(seed) {
            let u0 = case.random_start(&mut rng(seed));
            let trace = run_ppp(&case.inst, &u0, &sched, &RunOptions::new(max_iters, 1e-30)).unwrap();
            prop_assert!(trace.records.len() <= max_iters + 1);
            prop_assert!(trace.records.iter().all(|rec| rec.residual >= 0.0));
        }
    }

    #[test]
    fn preconditioner_is_symmetric_psd(seed in any::<u64>()) {
        for case in mixed_cases(seed) {
            let m = case.inst.m();
            prop_assert!((&m - m.transpose()).amax() == 0.0);
            let min = m.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-10 * m.amax().max(1.0));
            prop_assert!(case.inst.preconditioner_defect() <= 1e-12);
            let lip = case.inst.lipschitz_estimate(&mut rng(seed), 20);
            prop_assert!(lip.is_finite());
        }
    }

    #[test]
    fn zeros_of_the_operator_are_fixed(seed in any::<u64>()) {
        let mut r = rng(seed);
        for case in mixed_cases(seed) {
            let basis = case.fix.fix_t.basis();
            for _ in 0..20 {
                let u = basis * random_vector(&mut r, basis.ncols());
                prop_assert!((case.inst.apply_t(&u).unwrap() - &u).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn linear_instances_iterate_their_matrix(seed in any::<u64>(), d in 1usize..4) {
        let mut r = rng(seed);
        let ops = || ResolventOp::linear_monotone(random_psd(&mut rng(seed), d)).unwrap();
        let p = cp_params(seed, d + 1, d + 2);
        let insts = [
            build_dr(ResolventOp::zero(d), ops()).unwrap(),
            build_cp(ResolventOp::zero(d + 1), ResolventOp::zero(d + 2), p.l, p.sigma, p.tau).unwrap(),
            build_ryu(ops(), ResolventOp::zero(d), ops()).unwrap(),
            build_mt(vec![ops(), ResolventOp::zero(d), ops(), ResolventOp::zero(d)]).unwrap(),
        ];
        for inst in &insts {
            let t = inst.t_matrix();
            let u = random_vector(&mut r, inst.dim_h());
            let twice = inst.apply_t(&inst.apply_t(&u).unwrap()).unwrap();
            prop_assert!((&t * &t * &u - twice).norm() <= 1e-12 * u.norm().max(1.0) * t.norm().max(1.0).powi(2));
        }
    }
}

#[test]
fn block_patterns_are_exact() {
    for d in 1..4 {
        let dr = build_dr(ResolventOp::zero(d), ResolventOp::zero(d)).unwrap();
        assert_eq!(dr.m(), kron_identity(&[&[1.0, -1.0], &[-1.0, 1.0]], d));

        let ryu_rows = vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, -1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let ryu = build_ryu(ResolventOp::zero(d), ResolventOp::zero(d), ResolventOp::zero(d)).unwrap();
        assert_eq!(ryu.m(), kron_identity(&as_slices(&gram(&ryu_rows)), d));

        for n in 3..6 {
            let mt = build_mt(vec![ResolventOp::zero(d); n]).unwrap();
            assert_eq!(mt.m(), kron_identity(&as_slices(&gram(&mt_rows(n))), d));
        }
    }
}

#[test]
fn resolvent_call_budget() {
    let d = 3;
    let s = random_subspace(&mut rng(1), d, 2);
    let cone = || Counted::new(ResolventOp::normal_cone(s.clone()));

    let ops = [cone(), cone()];
    let counters: Vec<_> = ops.iter().map(Counted::counter).collect();
    let [a, b] = ops;
    let dr = build_dr(a, b).unwrap();
    dr.apply_t(&Vector::zeros(2 * d)).unwrap();
    assert_eq!(counters.iter().map(|c| c.load(Ordering::Relaxed)).sum::<usize>(), 2);

    let p = cp_params(2, d, d);
    let ops = [cone(), cone()];
    let counters: Vec<_> = ops.iter().map(Counted::counter).collect();
    let [a, b] = ops;
    let cp = build_cp(a, b, p.l, p.sigma, p.tau).unwrap();
    cp.apply_t(&Vector::zeros(2 * d)).unwrap();
    assert_eq!(counters.iter().map(|c| c.load(Ordering::Relaxed)).sum::<usize>(), 2);

    let ops = [cone(), cone(), cone()];
    let counters: Vec<_> = ops.iter().map(Counted::counter).collect();
    let [a, b, c] = ops;
    let ryu = build_ryu(a, b, c).unwrap();
    ryu.apply_t(&Vector::zeros(5 * d)).unwrap();
    assert_eq!(counters.iter().map(|c| c.load(Ordering::Relaxed)).sum::<usize>(), 3);

    for n in 3..7 {
        let ops: Vec<_> = (0..n).map(|_| cone()).collect();
        let counters: Vec<_> = ops.iter().map(Counted::counter).collect();
        let mt = build_mt(ops).unwrap();
        mt.apply_t(&Vector::zeros((2 * n - 1) * d)).unwrap();
        assert_eq!(counters.iter().map(|c| c.load(Ordering::Relaxed)).sum::<usize>(), n);
    }
}
