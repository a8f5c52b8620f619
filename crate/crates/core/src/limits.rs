//! Fixed-point sets and limits of PPP/rPPP for subspace and affine
//! specializations, together with brute-force least-squares oracles.
//!
//! Throughout, `w* = P_{Fix T̃}(C^T u0)` is the rPPP limit and
//! `u* = (M+A)^{-1} C w*` is both the PPP limit and the `M`-projection of
//! `u0` onto `Fix T`.

use crate::error::{check_dim, Error, Result};
use crate::analysis::factor_cholesky;
use crate::linalg::{
    concat, ensure_finite_vector, kernel, preimage, pseudo_inverse, split, Matrix, Subspace, Vector,
    DEFAULT_RANK_TOL,
};
use crate::methods::check_cp_condition;
use crate::ppp::PppInstance;

/// Absolute least-squares residual (scaled by `max(1, ‖b‖)`) above which
/// `U ∩ L^{-1}(b)` is declared empty.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FixSets {
    /// `Fix T ⊂ R^{dim_H}`.
    pub fix_t: Subspace,
    /// `Fix T̃ ⊂ R^{dim_D}`.
    pub fix_ttilde: Subspace,
}

impl FixSets {
    /// How far `C^T(Fix T)` is from `Fix T̃`.
    pub fn reduction_residual(&self, inst: &PppInstance) -> Result<f64> {
        self.fix_t.image(inst.c_transpose())?.equality_residual(&self.fix_ttilde)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitPrediction {
    pub w_star: Vector,
    pub u_star: Vector,
}

impl LimitPrediction {
    /// Largest of the distances of `w*`, `u*` to their fixed-point sets.
    pub fn membership_residual(&self, fix: &FixSets) -> Result<f64> {
        Ok(fix.fix_ttilde.distance(&self.w_star)?.max(fix.fix_t.distance(&self.u_star)?))
    }
}

/// `anchor + direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSet {
    pub anchor: Vector,
    pub direction: Subspace,
}

impl AffineSet {
    pub fn is_singleton(&self) -> bool {
        self.direction.is_trivial()
    }

    pub fn project(&self, v: &Vector) -> Result<Vector> {
        Ok(&self.anchor + self.direction.project(&(v - &self.anchor))?)
    }

    pub fn distance(&self, v: &Vector) -> Result<f64> {
        Ok((v - self.project(v)?).norm())
    }

    /// Zero iff both describe the same affine set.
    pub fn equality_residual(&self, other: &AffineSet) -> Result<f64> {
        let dir = self.direction.equality_residual(&other.direction)?;
        Ok(dir.max(self.distance(&other.anchor)?).max(other.distance(&self.anchor)?))
    }
}

/// Minimizer of `‖C^T(u0 − u)‖` over `u ∈ fix_t`, via the minimum-norm
/// least-squares solution in basis coordinates.
pub fn m_projection_oracle(inst: &PppInstance, fix_t: &Subspace, u0: &Vector) -> Result<Vector> {
    check_dim("m_projection_oracle", inst.dim_h(), fix_t.ambient_dim())?;
    check_dim("m_projection_oracle", inst.dim_h(), u0.len())?;
    ensure_finite_vector(u0, "u0")?;
    if fix_t.is_trivial() {
        return Ok(Vector::zeros(inst.dim_h()));
    }
    let b = fix_t.basis();
    let a = inst.c_transpose() * b;
    let coords = pseudo_inverse(&a, DEFAULT_RANK_TOL)? * (inst.c_transpose() * u0);
    Ok(b * coords)
}

/// Same minimizer from the reduced normal equations
/// `B^T M B c = B^T M u0`; a second, independent oracle.
pub fn m_projection_normal_equations(inst: &PppInstance, fix_t: &Subspace, u0: &Vector) -> Result<Vector> {
    check_dim("m_projection_normal_equations", inst.dim_h(), fix_t.ambient_dim())?;
    check_dim("m_projection_normal_equations", inst.dim_h(), u0.len())?;
    if fix_t.is_trivial() {
        return Ok(Vector::zeros(inst.dim_h()));
    }
    let b = fix_t.basis();
    let m = inst.m();
    let gram = b.transpose() * &m * b;
    let rhs = b.transpose() * (&m * u0);
    Ok(b * (pseudo_inverse(&gram, DEFAULT_RANK_TOL)? * rhs))
}

/// `(s + ker C^T) ∩ S` has direction `S ∩ ker C^T`; its rank is zero exactly
/// when the `M`-projection onto `S` is at most singleton-valued.
pub fn m_projection_ambiguity(inst: &PppInstance, s: &Subspace) -> Result<usize> {
    check_dim("m_projection_ambiguity", inst.dim_h(), s.ambient_dim())?;
    let ker = kernel(inst.c_transpose(), DEFAULT_RANK_TOL, 0.0);
    Ok(s.intersect(&ker)?.rank())
}

/// `Π_S^M(h) = S ∩ (C^T)^{-1}(P_{C^T S}(C^T h))` for `S = S1 × S2`.
pub fn pi_s_m(inst: &PppInstance, s1: &Subspace, s2: &Subspace, h: &Vector) -> Result<AffineSet> {
    let s = s1.product(s2);
    check_dim("pi_s_m", inst.dim_h(), s.ambient_dim())?;
    check_dim("pi_s_m", inst.dim_h(), h.len())?;
    let target = s.image(inst.c_transpose())?.project(&(inst.c_transpose() * h))?;
    solve_in_subspace(inst, &s, &target)
}

/// `argmin_{s ∈ S1×S2} ‖s − h‖_M` as a set, straight from the normal
/// equations of the seminorm.
pub fn m_argmin_set(inst: &PppInstance, s1: &Subspace, s2: &Subspace, h: &Vector) -> Result<AffineSet> {
    let s = s1.product(s2);
    check_dim("m_argmin_set", inst.dim_h(), s.ambient_dim())?;
    check_dim("m_argmin_set", inst.dim_h(), h.len())?;
    if s.is_trivial() {
        return Ok(AffineSet { anchor: Vector::zeros(inst.dim_h()), direction: s });
    }
    let b = s.basis();
    let m = inst.m();
    let gram = b.transpose() * &m * b;
    let coords = pseudo_inverse(&gram, DEFAULT_RANK_TOL)? * (b.transpose() * (&m * h));
    let null = kernel(&gram, DEFAULT_RANK_TOL, 0.0);
    Ok(AffineSet {
        anchor: b * coords,
        direction: Subspace::span(&(b * null.basis()))?,
    })
}

/// `{u ∈ S : C^T u = target}`, assuming `target ∈ C^T(S)`.
fn solve_in_subspace(inst: &PppInstance, s: &Subspace, target: &Vector) -> Result<AffineSet> {
    let n = inst.dim_h();
    if s.is_trivial() {
        return Ok(AffineSet { anchor: Vector::zeros(n), direction: s.clone() });
    }
    let b = s.basis();
    let a = inst.c_transpose() * b;
    let anchor = b * (pseudo_inverse(&a, DEFAULT_RANK_TOL)? * target);
    let null = kernel(&a, DEFAULT_RANK_TOL, 0.0);
    Ok(AffineSet {
        anchor,
        direction: Subspace::span(&(b * null.basis()))?,
    })
}

/// Numerical fixed-point sets `ker(T − I)` and `ker(T̃ − I)`; only
/// meaningful when the resolvent is linear.
pub fn numeric_fix_sets(inst: &PppInstance) -> FixSets {
    let t = inst.t_matrix();
    let tt = inst.ttilde_matrix();
    let shift = |a: Matrix| {
        let n = a.nrows();
        a - Matrix::identity(n, n)
    };
    FixSets {
        fix_t: kernel(&shift(t), DEFAULT_RANK_TOL, 1.0),
        fix_ttilde: kernel(&shift(tt), DEFAULT_RANK_TOL, 1.0),
    }
}

/// Limits for an instance whose resolvent is affine (every stock operator
/// is): `Fix T̃ = {w : (I − T̃_0) w = T̃(0)}` with `T̃_0` the linear part, so
/// `w*` is the projection of `C^T u0` onto that affine set. Fails with
/// [`Error::Infeasible`] when the set is empty.
pub fn predict_affine_limits(inst: &PppInstance, u0: &Vector) -> Result<LimitPrediction> {
    check_dim("predict_affine_limits", inst.dim_h(), u0.len())?;
    ensure_finite_vector(u0, "u0")?;
    let d = inst.dim_d();
    let offset = inst.apply_ttilde(&Vector::zeros(d))?;
    let a = Matrix::identity(d, d) - inst.ttilde_matrix();
    let a_pinv = pseudo_inverse(&a, DEFAULT_RANK_TOL)?;
    let residual = (&a * (&a_pinv * &offset) - &offset).norm();
    let tolerance = FEASIBILITY_TOL * offset.norm().max(1.0);
    if residual > tolerance {
        return Err(Error::Infeasible { residual, tolerance });
    }
    let w0 = inst.reduce(u0)?;
    let w_star = &w0 - &a_pinv * (&a * &w0 - &offset);
    let u_star = inst.lift(&w_star)?;
    Ok(LimitPrediction { w_star, u_star })
}

/// `w* = P_{Fix T̃}(C^T u0)` and `u* = (M+A)^{-1} C w*`.
pub fn predict_limits(inst: &PppInstance, fix: &FixSets, u0: &Vector) -> Result<LimitPrediction> {
    check_dim("predict_limits", inst.dim_d(), fix.fix_ttilde.ambient_dim())?;
    let w0 = inst.reduce(u0)?;
    let w_star = fix.fix_ttilde.project(&w0)?;
    let u_star = inst.lift(&w_star)?;
    Ok(LimitPrediction { w_star, u_star })
}

fn halves(u0: &Vector, d: usize, context: &'static str) -> Result<(Vector, Vector)> {
    check_dim(context, 2 * d, u0.len())?;
    ensure_finite_vector(u0, "u0")?;
    Ok((u0.rows(0, d).into_owned(), u0.rows(d, d).into_owned()))
}

/// Douglas–Rachford with `A_i = N_{U_i}`.
pub fn dr_fix_and_limits(u1: &Subspace, u2: &Subspace, u0: &Vector) -> Result<(FixSets, LimitPrediction)> {
    let d = u1.ambient_dim();
    check_dim("dr_fix_and_limits", d, u2.ambient_dim())?;
    let (x0, y0) = halves(u0, d, "dr_fix_and_limits")?;
    let inner = u1.intersect(u2)?;
    let outer = u1.complement().intersect(&u2.complement())?;
    let fix = FixSets {
        fix_t: inner.product(&outer),
        fix_ttilde: inner.sum(&outer)?,
    };
    let w0 = &x0 - &y0;
    let p = inner.project(&w0)?;
    let q = outer.project(&w0)?;
    let w_star = &p + &q;
    let u_star = concat(&[&p, &(-q)]);
    Ok((fix, LimitPrediction { w_star, u_star }))
}

fn cp_dual_set(u: &Subspace, v: &Subspace, l: &Matrix) -> Result<Subspace> {
    v.complement().intersect(&preimage(&l.transpose(), &u.complement())?)
}

/// Chambolle–Pock with `A1 = N_U`, `A2 = N_V`. `w*` is expressed in the
/// coordinates of the Cholesky factor used by `build_cp`.
pub fn cp_fix_and_limits(
    u: &Subspace,
    v: &Subspace,
    l: &Matrix,
    sigma: f64,
    tau: f64,
    u0: &Vector,
) -> Result<(FixSets, LimitPrediction)> {
    check_cp_condition(l, sigma, tau)?;
    let (m, n) = l.shape();
    check_dim("cp_fix_and_limits: U", n, u.ambient_dim())?;
    check_dim("cp_fix_and_limits: V", m, v.ambient_dim())?;
    check_dim("cp_fix_and_limits: u0", n + m, u0.len())?;
    ensure_finite_vector(u0, "u0")?;
    let (x0, y0) = (u0.rows(0, n).into_owned(), u0.rows(n, m).into_owned());
    let primal = u.intersect(&preimage(l, v)?)?;
    let dual = cp_dual_set(u, v, l)?;
    let c = factor_cholesky(l, sigma, tau)?.c;
    let fix_t = primal.product(&dual);
    let fix_ttilde = fix_t.image(&c.transpose())?;
    let x_star = primal.project(&(&x0 - l.tr_mul(&y0) * sigma))?;
    let y_star = dual.project(&(&y0 - l * &x0 * tau))?;
    let u_star = concat(&[&x_star, &y_star]);
    let w_star = c.transpose() * &u_star;
    Ok((FixSets { fix_t, fix_ttilde }, LimitPrediction { w_star, u_star }))
}

/// `U ∩ L^{-1}(b)` as an affine set, or [`Error::Infeasible`].
pub fn affine_solution_set(u: &Subspace, l: &Matrix, b: &Vector) -> Result<AffineSet> {
    let (m, n) = l.shape();
    check_dim("affine_solution_set: U", n, u.ambient_dim())?;
    check_dim("affine_solution_set: b", m, b.len())?;
    ensure_finite_vector(b, "b")?;
    let tolerance = FEASIBILITY_TOL * b.norm().max(1.0);
    if u.is_trivial() {
        let residual = b.norm();
        if residual > tolerance {
            return Err(Error::Infeasible { residual, tolerance });
        }
        return Ok(AffineSet { anchor: Vector::zeros(n), direction: u.clone() });
    }
    let q = u.basis();
    let lq = l * q;
    let coords = pseudo_inverse(&lq, DEFAULT_RANK_TOL)? * b;
    let residual = (&lq * &coords - b).norm();
    if residual > tolerance {
        return Err(Error::Infeasible { residual, tolerance });
    }
    let null = kernel(&lq, DEFAULT_RANK_TOL, 0.0);
    Ok(AffineSet {
        anchor: q * coords,
        direction: Subspace::span(&(q * null.basis()))?,
    })
}

/// Chambolle–Pock with `A1 = N_U` and `A2 = N_{{b}}`:
/// `x* = P_{U ∩ L^{-1}(b)}(x0 − σ L^T y0)`, `y* = P_{L^{-T}(U^⊥)}(y0 − τ L x0)`.
pub fn cp_affine_limits(
    u: &Subspace,
    b: &Vector,
    l: &Matrix,
    sigma: f64,
    tau: f64,
    u0: &Vector,
) -> Result<LimitPrediction> {
    check_cp_condition(l, sigma, tau)?;
    let (m, n) = l.shape();
    check_dim("cp_affine_limits: u0", n + m, u0.len())?;
    ensure_finite_vector(u0, "u0")?;
    let (x0, y0) = (u0.rows(0, n).into_owned(), u0.rows(n, m).into_owned());
    let primal = affine_solution_set(u, l, b)?;
    let dual = preimage(&l.transpose(), &u.complement())?;
    let x_star = primal.project(&(&x0 - l.tr_mul(&y0) * sigma))?;
    let y_star = dual.project(&(&y0 - l * &x0 * tau))?;
    let u_star = concat(&[&x_star, &y_star]);
    let c = factor_cholesky(l, sigma, tau)?.c;
    let w_star = c.transpose() * &u_star;
    Ok(LimitPrediction { w_star, u_star })
}

/// `(U1^⊥ × U2^⊥) ∩ (Δ2^⊥ + ({0} × U3^⊥))`.
fn ryu_e(u1: &Subspace, u2: &Subspace, u3: &Subspace) -> Result<Subspace> {
    let d = u1.ambient_dim();
    let mut anti = Matrix::zeros(2 * d, d);
    for i in 0..d {
        anti[(i, i)] = 1.0;
        anti[(d + i, i)] = -1.0;
    }
    let anti = Subspace::span(&anti)?;
    let rhs = anti.sum(&Subspace::trivial(d).product(&u3.complement()))?;
    u1.complement().product(&u2.complement()).intersect(&rhs)
}

fn ensure_equal_dims(context: &'static str, ops: &[Subspace]) -> Result<usize> {
    let d = ops[0].ambient_dim();
    for s in &ops[1..] {
        check_dim(context, d, s.ambient_dim())?;
    }
    Ok(d)
}

fn intersect_all(ops: &[Subspace]) -> Result<Subspace> {
    ops[1..].iter().try_fold(ops[0].clone(), |acc, s| acc.intersect(s))
}

/// Ryu with `A_i = N_{U_i}`. Returns the fixed-point sets and the
/// `M`-projection of `u` onto `Fix T`.
pub fn ryu_fix_and_projection(
    u1: &Subspace,
    u2: &Subspace,
    u3: &Subspace,
    u: &Vector,
) -> Result<(FixSets, Vector)> {
    let ops = [u1.clone(), u2.clone(), u3.clone()];
    let d = ensure_equal_dims("ryu_fix_and_projection", &ops)?;
    check_dim("ryu_fix_and_projection", 5 * d, u.len())?;
    ensure_finite_vector(u, "u")?;
    let z = intersect_all(&ops)?;
    let e = ryu_e(u1, u2, u3)?;

    let zb = z.basis();
    let mut s_cols = Matrix::zeros(5 * d, z.rank());
    for (blk, scale) in [(0, 1.0), (1, 1.0), (2, 1.0), (3, 2.0)] {
        s_cols.view_mut((blk * d, 0), (d, z.rank())).copy_from(&(zb * scale));
    }
    let s = Subspace::span(&s_cols)?;
    let fix_t = s.sum(&Subspace::trivial(3 * d).product(&e))?;
    let fix_ttilde = z.product(&Subspace::trivial(d)).sum(&e)?;

    let parts = split(u, &[d; 5]);
    // C^T u = (u1 − u3 + u4, u2 − u3 + u5).
    let w1 = &parts[0] - &parts[2] + &parts[3];
    let w2 = &parts[1] - &parts[2] + &parts[4];
    let w = concat(&[&w1, &w2]);
    let pz = z.project(&w1)?;
    let w_star = concat(&[&pz, &Vector::zeros(d)]) + e.project(&w)?;
    let half = &pz * 0.5;
    let ws = split(&w_star, &[d, d]);
    let projection = concat(&[&half, &half, &half, &ws[0], &ws[1]]);
    Ok((FixSets { fix_t, fix_ttilde }, projection))
}

/// `ran Ψ ∩ (X^{n−2} × U_n^⊥)` with `Ψ` the prefix-sum map on
/// `U_1^⊥ × … × U_{n−1}^⊥`.
fn mt_e(ops: &[Subspace]) -> Result<Subspace> {
    let n = ops.len();
    let d = ops[0].ambient_dim();
    let k = n - 1;
    let mut prefix = Matrix::zeros(k * d, k * d);
    for i in 0..k {
        for j in 0..=i {
            for t in 0..d {
                prefix[(i * d + t, j * d + t)] = 1.0;
            }
        }
    }
    let domain = Subspace::product_all(&ops[..k].iter().map(Subspace::complement).collect::<Vec<_>>());
    let ran = domain.image(&prefix)?;
    let tail = Subspace::full((k - 1) * d).product(&ops[n - 1].complement());
    ran.intersect(&tail)
}

/// Malitsky–Tam with `A_i = N_{U_i}`, `n ≥ 3`. Returns the fixed-point sets
/// and the `M`-projection of `u` onto `Fix T`.
pub fn mt_fix_and_projection(ops: &[Subspace], u: &Vector) -> Result<(FixSets, Vector)> {
    let n = ops.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("malitsky-tam needs at least 3 subspaces, got {n}")));
    }
    let d = ensure_equal_dims("mt_fix_and_projection", ops)?;
    check_dim("mt_fix_and_projection", (2 * n - 1) * d, u.len())?;
    ensure_finite_vector(u, "u")?;
    let k = n - 1;
    let z = intersect_all(ops)?;
    let e = mt_e(ops)?;

    let zb = z.basis();
    let mut diag_t = Matrix::zeros((2 * n - 1) * d, z.rank());
    for blk in 0..2 * n - 1 {
        let scale = if blk < n { 1.0 } else { 2.0 };
        diag_t.view_mut((blk * d, 0), (d, z.rank())).copy_from(&(zb * scale));
    }
    let mut diag_tt = Matrix::zeros(k * d, z.rank());
    for blk in 0..k {
        diag_tt.view_mut((blk * d, 0), (d, z.rank())).copy_from(zb);
    }
    let fix_t = Subspace::span(&diag_t)?.sum(&Subspace::trivial(n * d).product(&e))?;
    let fix_ttilde = Subspace::span(&diag_tt)?.sum(&e)?;

    // C^T u: w_j = x_j − x_{j+1} + v_j.
    let parts = split(u, &vec![d; 2 * n - 1]);
    let w_blocks: Vec<Vector> = (0..k).map(|j| &parts[j] - &parts[j + 1] + &parts[n + j]).collect();
    let w = concat(&w_blocks.iter().collect::<Vec<_>>());
    let mean = w_blocks.iter().fold(Vector::zeros(d), |acc, b| acc + b) / k as f64;
    let pz = z.project(&mean)?;
    let w_star = concat(&vec![&pz; k]) + e.project(&w)?;
    let half = &pz * 0.5;
    let mut blocks: Vec<Vector> = vec![half; n];
    blocks.extend(split(&w_star, &vec![d; k]));
    Ok((FixSets { fix_t, fix_ttilde }, concat(&blocks.iter().collect::<Vec<_>>())))
}
