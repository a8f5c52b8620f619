//! Douglas–Rachford, Chambolle–Pock, Ryu and Malitsky–Tam as PPP instances.
//!
//! Every builder supplies `(M + A)^{-1}` as an explicit forward recursion
//! through the operand resolvents; no block system is ever solved.

use std::sync::Arc;

use crate::analysis::factor_cholesky;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{concat, ensure_finite_matrix, operator_norm, split, Matrix, Vector};
use crate::monotone::{Resolvent, ResolventOp};
use crate::ppp::{PppInstance, VectorMap};

/// Slack allowed in `σ τ ‖L‖² ≤ 1`.
pub const CP_CONDITION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodFamily {
    DouglasRachford,
    ChambollePock,
    Ryu,
    MalitskyTam,
}

impl MethodFamily {
    pub fn name(self) -> &'static str {
        match self {
            MethodFamily::DouglasRachford => "dr",
            MethodFamily::ChambollePock => "cp",
            MethodFamily::Ryu => "ryu",
            MethodFamily::MalitskyTam => "mt",
        }
    }
}

/// A method together with its operands and parameters.
#[derive(Debug, Clone)]
pub struct MethodDescriptor {
    pub family: MethodFamily,
    pub operators: Vec<ResolventOp>,
    /// Chambolle–Pock step sizes and coupling matrix `L: X -> Y`.
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub coupling: Option<Matrix>,
}

impl MethodDescriptor {
    pub fn new(family: MethodFamily, operators: Vec<ResolventOp>) -> Self {
        MethodDescriptor {
            family,
            operators,
            sigma: None,
            tau: None,
            coupling: None,
        }
    }

    pub fn chambolle_pock(a1: ResolventOp, a2: ResolventOp, l: Matrix, sigma: f64, tau: f64) -> Self {
        MethodDescriptor {
            family: MethodFamily::ChambollePock,
            operators: vec![a1, a2],
            sigma: Some(sigma),
            tau: Some(tau),
            coupling: Some(l),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = self.operators.len();
        let ok = match self.family {
            MethodFamily::DouglasRachford | MethodFamily::ChambollePock => count == 2,
            MethodFamily::Ryu => count == 3,
            MethodFamily::MalitskyTam => count >= 3,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{} cannot take {count} operators",
                self.family.name()
            )));
        }
        if self.family == MethodFamily::ChambollePock {
            let (l, sigma, tau) = self.cp_parameters()?;
            check_cp_condition(l, sigma, tau)?;
            check_dim("chambolle-pock A1 vs columns of L", l.ncols(), self.operators[0].dim())?;
            check_dim("chambolle-pock A2 vs rows of L", l.nrows(), self.operators[1].dim())?;
        } else {
            let d = self.operators[0].dim();
            for op in &self.operators[1..] {
                check_dim("operator dimension", d, op.dim())?;
            }
        }
        Ok(())
    }

    fn cp_parameters(&self) -> Result<(&Matrix, f64, f64)> {
        match (&self.coupling, self.sigma, self.tau) {
            (Some(l), Some(s), Some(t)) => Ok((l, s, t)),
            _ => Err(Error::InvalidConfig("chambolle-pock needs sigma, tau and L".into())),
        }
    }

    pub fn build(&self) -> Result<PppInstance> {
        self.validate()?;
        let ops = self.operators.clone();
        match self.family {
            MethodFamily::DouglasRachford => build_dr(ops[0].clone(), ops[1].clone()),
            MethodFamily::ChambollePock => {
                let (l, sigma, tau) = self.cp_parameters()?;
                build_cp(ops[0].clone(), ops[1].clone(), l.clone(), sigma, tau)
            }
            MethodFamily::Ryu => build_ryu(ops[0].clone(), ops[1].clone(), ops[2].clone()),
            MethodFamily::MalitskyTam => build_mt(ops),
        }
    }
}

/// Validates `σ, τ > 0` and `σ τ ‖L‖² ≤ 1` (up to [`CP_CONDITION_SLACK`]).
pub fn check_cp_condition(l: &Matrix, sigma: f64, tau: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite() && tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step sizes must be positive, got sigma={sigma}, tau={tau}"
        )));
    }
    ensure_finite_matrix(l, "L")?;
    let product = sigma * tau * operator_norm(l).powi(2);
    if product > 1.0 + CP_CONDITION_SLACK {
        return Err(Error::InvalidConfig(format!(
            "sigma*tau*||L||^2 = {product} exceeds 1"
        )));
    }
    Ok(())
}

fn ensure_nonempty(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidInput("operators must act on a nonzero space".into()))
    } else {
        Ok(())
    }
}

fn place(m: &mut Matrix, block_row: usize, block_col: usize, d: usize, scale: f64) {
    for i in 0..d {
        m[(block_row * d + i, block_col * d + i)] = scale;
    }
}

/// `C = [Id; −Id]`.
pub fn dr_coupling(d: usize) -> Matrix {
    let mut c = Matrix::zeros(2 * d, d);
    place(&mut c, 0, 0, d, 1.0);
    place(&mut c, 1, 0, d, -1.0);
    c
}

/// The `5d x 2d` factor for Ryu's method.
pub fn ryu_coupling(d: usize) -> Matrix {
    let mut c = Matrix::zeros(5 * d, 2 * d);
    place(&mut c, 0, 0, d, 1.0);
    place(&mut c, 1, 1, d, 1.0);
    place(&mut c, 2, 0, d, -1.0);
    place(&mut c, 2, 1, d, -1.0);
    place(&mut c, 3, 0, d, 1.0);
    place(&mut c, 4, 1, d, 1.0);
    c
}

/// The `(2n−1)d x (n−1)d` factor for Malitsky–Tam: a bidiagonal difference
/// block on top of an identity block.
pub fn mt_coupling(n: usize, d: usize) -> Matrix {
    assert!(n >= 2, "Malitsky-Tam coupling needs n >= 2");
    let mut c = Matrix::zeros((2 * n - 1) * d, (n - 1) * d);
    for j in 0..n - 1 {
        place(&mut c, j, j, d, 1.0);
        place(&mut c, j + 1, j, d, -1.0);
        place(&mut c, n + j, j, d, 1.0);
    }
    c
}

pub fn build_dr<R1, R2>(a1: R1, a2: R2) -> Result<PppInstance>
where
    R1: Resolvent + 'static,
    R2: Resolvent + 'static,
{
    let d = a1.dim();
    ensure_nonempty(d)?;
    check_dim("build_dr", d, a2.dim())?;
    let resolvent: VectorMap = Arc::new(move |u: &Vector| {
        let (x, y) = (u.rows(0, d).into_owned(), u.rows(d, d).into_owned());
        let p = a1.resolvent(&x);
        let q = a2.inverse_resolvent(1.0, &(y + &p * 2.0));
        concat(&[&p, &q])
    });
    let fast_m: VectorMap = Arc::new(move |u: &Vector| {
        let diff = u.rows(0, d) - u.rows(d, d);
        concat(&[&diff, &(-&diff)])
    });
    Ok(PppInstance::new("douglas-rachford", dr_coupling(d), resolvent)?.with_preconditioner(fast_m))
}

/// Chambolle–Pock for `A1` on `X = R^n`, `A2` on `Y = R^m` and `L: X -> Y`.
///
/// `C` comes from the Cholesky-based factorization, so the reduced
/// coordinates (and hence rPPP traces) depend on that choice of factor; the
/// PPP sequence does not.
pub fn build_cp<R1, R2>(a1: R1, a2: R2, l: Matrix, sigma: f64, tau: f64) -> Result<PppInstance>
where
    R1: Resolvent + 'static,
    R2: Resolvent + 'static,
{
    check_cp_condition(&l, sigma, tau)?;
    let (n, m) = (a1.dim(), a2.dim());
    ensure_nonempty(n)?;
    ensure_nonempty(m)?;
    check_dim("build_cp: columns of L", n, l.ncols())?;
    check_dim("build_cp: rows of L", m, l.nrows())?;
    let c = factor_cholesky(&l, sigma, tau)?.c;
    let l = Arc::new(l);
    let l_r = Arc::clone(&l);
    let resolvent: VectorMap = Arc::new(move |u: &Vector| {
        let (x, y) = (u.rows(0, n).into_owned(), u.rows(n, m).into_owned());
        let p = a1.scaled_resolvent(sigma, &(x * sigma));
        let q = a2.inverse_resolvent(tau, &((&*l_r * &p) * (2.0 * tau) + y * tau));
        concat(&[&p, &q])
    });
    let fast_m: VectorMap = Arc::new(move |u: &Vector| {
        let (x, y) = (u.rows(0, n), u.rows(n, m));
        let top = x / sigma - l.tr_mul(&y);
        let bottom = y / tau - &*l * x;
        concat(&[&top, &bottom])
    });
    Ok(PppInstance::new("chambolle-pock", c, resolvent)?.with_preconditioner(fast_m))
}

pub fn build_ryu<R1, R2, R3>(a1: R1, a2: R2, a3: R3) -> Result<PppInstance>
where
    R1: Resolvent + 'static,
    R2: Resolvent + 'static,
    R3: Resolvent + 'static,
{
    let d = a1.dim();
    ensure_nonempty(d)?;
    check_dim("build_ryu", d, a2.dim())?;
    check_dim("build_ryu", d, a3.dim())?;
    let resolvent: VectorMap = Arc::new(move |u: &Vector| {
        let x = split(u, &[d; 5]);
        let y1 = a1.resolvent(&(&x[0] * 0.5));
        let y2 = a2.resolvent(&(&x[1] * 0.5 + &y1));
        let y3 = a3.resolvent(&(&x[2] * 0.5 + &y1 + &y2));
        let y4 = &x[3] - &y1 * 2.0 + &y3 * 2.0;
        let y5 = &x[4] - &y2 * 2.0 + &y3 * 2.0;
        concat(&[&y1, &y2, &y3, &y4, &y5])
    });
    PppInstance::new("ryu", ryu_coupling(d), resolvent)
}

pub fn build_mt<R>(ops: Vec<R>) -> Result<PppInstance>
where
    R: Resolvent + 'static,
{
    let n = ops.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "malitsky-tam needs at least 3 operators, got {n}"
        )));
    }
    let d = ops[0].dim();
    ensure_nonempty(d)?;
    for op in &ops[1..] {
        check_dim("build_mt", d, op.dim())?;
    }
    let resolvent: VectorMap = Arc::new(move |u: &Vector| {
        let x = u.rows(0, n * d);
        let block = |i: usize| x.rows(i * d, d).into_owned();
        let mut y: Vec<Vector> = Vec::with_capacity(n);
        y.push(ops[0].resolvent(&(block(0) * 0.5)));
        for i in 1..n - 1 {
            let arg = block(i) * 0.5 + &y[i - 1];
            y.push(ops[i].resolvent(&arg));
        }
        let arg = block(n - 1) * 0.5 + &y[0] + &y[n - 2];
        y.push(ops[n - 1].resolvent(&arg));
        let mut out = Vector::zeros(u.len());
        for (i, yi) in y.iter().enumerate() {
            out.rows_mut(i * d, d).copy_from(yi);
        }
        for i in 0..n - 1 {
            let v = u.rows((n + i) * d, d);
            let w = v - &y[i] * 2.0 + &y[i + 1] * 2.0;
            out.rows_mut((n + i) * d, d).copy_from(&w);
        }
        out
    });
    PppInstance::new("malitsky-tam", mt_coupling(n, d), resolvent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Subspace;
    use crate::monotone::Counted;
    use crate::sampling::{random_subspace, random_vector, rng};
    use std::sync::atomic::Ordering;

    fn v(data: &[f64]) -> Vector {
        Vector::from_row_slice(data)
    }

    fn line(angle: f64) -> ResolventOp {
        ResolventOp::normal_cone(Subspace::span(&Matrix::from_row_slice(2, 1, &[angle.cos(), angle.sin()])).unwrap())
    }

    /// Block matrix from a pattern of scalar multiples of `Id_d`.
    fn blocks(pattern: &[&[f64]], d: usize) -> Matrix {
        let (r, c) = (pattern.len(), pattern[0].len());
        let mut m = Matrix::zeros(r * d, c * d);
        for (i, row) in pattern.iter().enumerate() {
            for (j, &s) in row.iter().enumerate() {
                place(&mut m, i, j, d, s);
            }
        }
        m
    }

    #[test]
    fn dr_examples() {
        let zero = build_dr(ResolventOp::zero(3), ResolventOp::zero(3)).unwrap();
        assert!((zero.ttilde_matrix() - Matrix::identity(3, 3)).amax() < 1e-15);
        let same = build_dr(line(0.0), line(0.0)).unwrap();
        assert!((same.ttilde_matrix() - Matrix::identity(2, 2)).amax() < 1e-15);
        let tilted = build_dr(line(0.0), line(std::f64::consts::FRAC_PI_4)).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.5, -0.5, 0.5, 0.5]);
        assert!((tilted.ttilde_matrix() - expected).amax() < 1e-15);
        assert_eq!(zero.m(), blocks(&[&[1.0, -1.0], &[-1.0, 1.0]], 3));
        assert!(zero.preconditioner_defect() == 0.0);
        assert!(build_dr(ResolventOp::zero(2), ResolventOp::zero(3)).is_err());
    }

    #[test]
    fn cp_zero_operators() {
        let inst = build_cp(ResolventOp::zero(2), ResolventOp::zero(2), Matrix::identity(2, 2), 1.0, 1.0).unwrap();
        // T(x, y) = (x − y, 0)
        let t = inst.t_matrix();
        let expected = blocks(&[&[1.0, -1.0], &[0.0, 0.0]], 2);
        assert!((t - expected).amax() < 1e-15);
        // full subspaces behave exactly like zero operators
        let full = build_cp(
            ResolventOp::normal_cone(Subspace::full(2)),
            ResolventOp::normal_cone(Subspace::full(2)),
            Matrix::identity(2, 2),
            0.5,
            2.0,
        )
        .unwrap();
        let u = v(&[1.0, -2.0, 0.5, 3.0]);
        let tu = full.apply_t(&u).unwrap();
        assert!(tu.rows(2, 2).norm() < 1e-15);
        assert!((tu.rows(0, 2) - (u.rows(0, 2) - u.rows(2, 2) * 0.5)).norm() < 1e-15);
    }

    #[test]
    fn cp_preconditioner_matches_factor() {
        let mut r = rng(1);
        let l = crate::sampling::random_matrix_with_norm(&mut r, 3, 4, 1.0);
        for &(s, t) in &[(0.9, 0.9), (0.5, 2.0), (1.0, 1.0)] {
            let inst = build_cp(ResolventOp::zero(4), ResolventOp::zero(3), l.clone(), s, t).unwrap();
            assert!(inst.preconditioner_defect() < 1e-12);
        }
        assert!(matches!(
            build_cp(ResolventOp::zero(4), ResolventOp::zero(3), l.clone(), 1.1, 1.0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(build_cp(ResolventOp::zero(3), ResolventOp::zero(3), l, 0.5, 0.5).is_err());
    }

    #[test]
    fn ryu_zero_operators_by_hand() {
        let inst = build_ryu(ResolventOp::zero(1), ResolventOp::zero(1), ResolventOp::zero(1)).unwrap();
        let (w1, w2) = (0.8, -1.3);
        let y1 = w1 / 2.0;
        let y2 = w2 / 2.0 + y1;
        let y3 = (-w1 - w2) / 2.0 + y1 + y2;
        let expected = v(&[w1 + y3 - y1, w2 + y3 - y2]);
        assert!((inst.apply_ttilde(&v(&[w1, w2])).unwrap() - expected).norm() < 1e-15);
        let m = blocks(
            &[
                &[1.0, 0.0, -1.0, 1.0, 0.0],
                &[0.0, 1.0, -1.0, 0.0, 1.0],
                &[-1.0, -1.0, 2.0, -1.0, -1.0],
                &[1.0, 0.0, -1.0, 1.0, 0.0],
                &[0.0, 1.0, -1.0, 0.0, 1.0],
            ],
            2,
        );
        let inst2 = build_ryu(ResolventOp::zero(2), ResolventOp::zero(2), ResolventOp::zero(2)).unwrap();
        assert_eq!(inst2.m(), m);
    }

    #[test]
    fn ryu_full_space_fixes_first_coordinate() {
        let full = || ResolventOp::normal_cone(Subspace::full(2));
        let inst = build_ryu(full(), full(), full()).unwrap();
        let w = v(&[1.5, -0.5, 0.0, 0.0]);
        assert!((inst.apply_ttilde(&w).unwrap() - &w).norm() < 1e-15);
    }

    #[test]
    fn mt_zero_operators_by_hand() {
        let inst = build_mt(vec![ResolventOp::zero(1); 3]).unwrap();
        let (w1, w2) = (0.4, 1.1);
        let z1 = w1 / 2.0;
        let z2 = (-w1 + w2) / 2.0 + z1;
        let z3 = -w2 / 2.0 + z1 + z2;
        let expected = v(&[w1 + z2 - z1, w2 + z3 - z2]);
        assert!((inst.apply_ttilde(&v(&[w1, w2])).unwrap() - expected).norm() < 1e-15);
        let m = blocks(
            &[
                &[1.0, -1.0, 0.0, 1.0, 0.0],
                &[-1.0, 2.0, -1.0, -1.0, 1.0],
                &[0.0, -1.0, 1.0, 0.0, -1.0],
                &[1.0, -1.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, -1.0, 0.0, 1.0],
            ],
            1,
        );
        assert_eq!(inst.m(), m);
        assert!(matches!(build_mt(vec![ResolventOp::zero(1); 2]), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn mt_full_space_projects_onto_mean() {
        let inst = build_mt(vec![ResolventOp::normal_cone(Subspace::full(2)); 4]).unwrap();
        let w = v(&[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!((inst.apply_ttilde(&w).unwrap() - &w).norm() < 1e-14);
    }

    #[test]
    fn resolvent_call_budget() {
        let counted = |d| Counted::new(ResolventOp::zero(d));
        let check = |inst: &PppInstance, counters: &[Arc<std::sync::atomic::AtomicUsize>], expected: usize| {
            for c in counters {
                c.store(0, Ordering::Relaxed);
            }
            inst.apply_t(&Vector::from_element(inst.dim_h(), 0.3)).unwrap();
            let total: usize = counters.iter().map(|c| c.load(Ordering::Relaxed)).sum();
            assert_eq!(total, expected, "{}", inst.label());
        };
        let (a, b) = (counted(2), counted(2));
        let cs = [a.counter(), b.counter()];
        check(&build_dr(a, b).unwrap(), &cs, 2);
        let (a, b) = (counted(3), counted(2));
        let cs = [a.counter(), b.counter()];
        check(&build_cp(a, b, Matrix::zeros(2, 3), 1.0, 1.0).unwrap(), &cs, 2);
        let (a, b, c) = (counted(2), counted(2), counted(2));
        let cs = [a.counter(), b.counter(), c.counter()];
        check(&build_ryu(a, b, c).unwrap(), &cs, 3);
        for n in 3..=6 {
            let ops: Vec<_> = (0..n).map(|_| counted(2)).collect();
            let cs: Vec<_> = ops.iter().map(|o| o.counter()).collect();
            check(&build_mt(ops).unwrap(), &cs, n);
        }
    }

    #[test]
    fn linear_t_matches_iteration() {
        let mut r = rng(2);
        let d = 3;
        let sub = |r: &mut _| ResolventOp::normal_cone(random_subspace(r, d, 2));
        let instances = vec![
            build_dr(sub(&mut r), sub(&mut r)).unwrap(),
            build_ryu(sub(&mut r), sub(&mut r), sub(&mut r)).unwrap(),
            build_mt(vec![sub(&mut r), sub(&mut r), sub(&mut r), sub(&mut r)]).unwrap(),
            build_cp(sub(&mut r), sub(&mut r), crate::sampling::random_matrix_with_norm(&mut r, d, d, 0.8), 1.0, 1.2).unwrap(),
        ];
        for inst in instances {
            let t = inst.t_matrix();
            let u = random_vector(&mut r, inst.dim_h());
            let direct = inst.apply_t(&inst.apply_t(&u).unwrap()).unwrap();
            assert!((&t * (&t * &u) - direct).norm() < 1e-12, "{}", inst.label());
            let m = inst.m();
            assert!((&m - m.transpose()).amax() == 0.0);
            assert!(crate::linalg::symmetric_eigenvalues(&m).unwrap()[0] > -1e-12);
        }
    }

    #[test]
    fn descriptor_validation() {
        let d = MethodDescriptor::new(MethodFamily::Ryu, vec![ResolventOp::zero(2); 2]);
        assert!(d.validate().is_err());
        let d = MethodDescriptor::new(MethodFamily::MalitskyTam, vec![ResolventOp::zero(2); 5]);
        assert_eq!(d.build().unwrap().dim_h(), 18);
        let cp = MethodDescriptor::chambolle_pock(ResolventOp::zero(2), ResolventOp::zero(2), Matrix::identity(2, 2) * 2.0, 0.5, 0.5);
        assert!(cp.validate().is_ok());
        let cp = MethodDescriptor::chambolle_pock(ResolventOp::zero(2), ResolventOp::zero(2), Matrix::identity(2, 2) * 2.0, 0.5, 0.6);
        assert!(matches!(cp.validate(), Err(Error::InvalidConfig(_))));
    }
}
