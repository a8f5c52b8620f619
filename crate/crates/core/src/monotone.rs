//! Maximally monotone operators, seen only through their resolvents.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, symmetric_eigenvalues, Matrix, Subspace, Vector, PSD_TOL};

/// An operator accessed through `J_{γA} = (Id + γA)^{-1}`.
///
/// Implementations panic on a dimension mismatch; the fallible free
/// functions in this module check first.
pub trait Resolvent: Send + Sync {
    fn dim(&self) -> usize;

    /// `J_{γA}(x)` for `γ > 0`.
    fn scaled_resolvent(&self, gamma: f64, x: &Vector) -> Vector;

    fn resolvent(&self, x: &Vector) -> Vector {
        self.scaled_resolvent(1.0, x)
    }

    fn reflected_resolvent(&self, x: &Vector) -> Vector {
        self.resolvent(x) * 2.0 - x
    }

    /// `J_{τA^{-1}}(x) = x − τ J_{A/τ}(x/τ)`.
    fn inverse_resolvent(&self, tau: f64, x: &Vector) -> Vector {
        x - self.scaled_resolvent(1.0 / tau, &(x / tau)) * tau
    }
}

/// Stock operators with closed-form resolvents.
#[derive(Debug, Clone)]
pub enum ResolventOp {
    /// `A = 0`, `J = Id`.
    Zero { dim: usize },
    /// `N_U`, `J = P_U` for every scaling.
    NormalConeSubspace(Subspace),
    /// Normal cone of the affine set `anchor + U`.
    NormalConeAffine { subspace: Subspace, anchor: Vector },
    /// Normal cone of `{b}`; its resolvent is constant.
    NormalConePoint(Vector),
    /// A linear map `B` with `B + B^T ⪰ 0`.
    LinearMonotone(Matrix),
    /// `γ A` for `γ > 0`.
    Scaled { gamma: f64, inner: Box<ResolventOp> },
}

impl ResolventOp {
    pub fn zero(dim: usize) -> Self {
        ResolventOp::Zero { dim }
    }

    pub fn normal_cone(subspace: Subspace) -> Self {
        ResolventOp::NormalConeSubspace(subspace)
    }

    pub fn normal_cone_affine(subspace: Subspace, anchor: Vector) -> Result<Self> {
        check_dim("ResolventOp::normal_cone_affine", subspace.ambient_dim(), anchor.len())?;
        ensure_finite_vector(&anchor, "anchor")?;
        Ok(ResolventOp::NormalConeAffine { subspace, anchor })
    }

    pub fn normal_cone_point(b: Vector) -> Result<Self> {
        ensure_finite_vector(&b, "point")?;
        Ok(ResolventOp::NormalConePoint(b))
    }

    /// Validates that `B + B^T` has no eigenvalue below `-1e-10`.
    pub fn linear_monotone(b: Matrix) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::InvalidInput(format!(
                "linear operator must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        ensure_finite_matrix(&b, "linear operator")?;
        let sym = &b + b.transpose();
        if let Some(&min) = symmetric_eigenvalues(&sym)?.first() {
            if min < -PSD_TOL {
                return Err(Error::InvalidInput(format!(
                    "linear operator is not monotone: B + B^T has eigenvalue {min:e}"
                )));
            }
        }
        Ok(ResolventOp::LinearMonotone(b))
    }

    pub fn scaled(gamma: f64, inner: ResolventOp) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("scaling must be positive, got {gamma}")));
        }
        Ok(ResolventOp::Scaled {
            gamma,
            inner: Box::new(inner),
        })
    }
}

impl Resolvent for ResolventOp {
    fn dim(&self) -> usize {
        match self {
            ResolventOp::Zero { dim } => *dim,
            ResolventOp::NormalConeSubspace(u) => u.ambient_dim(),
            ResolventOp::NormalConeAffine { subspace, .. } => subspace.ambient_dim(),
            ResolventOp::NormalConePoint(b) => b.len(),
            ResolventOp::LinearMonotone(b) => b.nrows(),
            ResolventOp::Scaled { inner, .. } => inner.dim(),
        }
    }

    fn scaled_resolvent(&self, gamma: f64, x: &Vector) -> Vector {
        assert_eq!(x.len(), self.dim(), "resolvent argument has wrong dimension");
        match self {
            ResolventOp::Zero { .. } => x.clone(),
            ResolventOp::NormalConeSubspace(u) => u.project_unchecked(x),
            ResolventOp::NormalConeAffine { subspace, anchor } => {
                anchor + subspace.project_unchecked(&(x - anchor))
            }
            ResolventOp::NormalConePoint(b) => b.clone(),
            ResolventOp::LinearMonotone(b) => {
                let n = b.nrows();
                let system = Matrix::identity(n, n) + b * gamma;
                // I + γB is invertible whenever B is monotone.
                system
                    .lu()
                    .solve(x)
                    .expect("I + γB is nonsingular for monotone B")
            }
            ResolventOp::Scaled { gamma: g, inner } => inner.scaled_resolvent(gamma * g, x),
        }
    }
}

fn check_arg(op: &impl Resolvent, x: &Vector) -> Result<()> {
    check_dim("resolvent", op.dim(), x.len())?;
    ensure_finite_vector(x, "resolvent argument")
}

pub fn resolvent(op: &impl Resolvent, x: &Vector) -> Result<Vector> {
    check_arg(op, x)?;
    Ok(op.resolvent(x))
}

pub fn reflected_resolvent(op: &impl Resolvent, x: &Vector) -> Result<Vector> {
    check_arg(op, x)?;
    Ok(op.reflected_resolvent(x))
}

pub fn inverse_resolvent(op: &impl Resolvent, tau: f64, x: &Vector) -> Result<Vector> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    check_arg(op, x)?;
    Ok(op.inverse_resolvent(tau, x))
}

/// Wraps an operator and counts resolvent evaluations.
#[derive(Debug, Clone)]
pub struct Counted<R> {
    inner: R,
    calls: Arc<AtomicUsize>,
}

impl<R: Resolvent> Counted<R> {
    pub fn new(inner: R) -> Self {
        Counted {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// Shared handle to the counter; survives the wrapper being moved into
    /// an instance.
    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }
}

impl<R: Resolvent> Resolvent for Counted<R> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn scaled_resolvent(&self, gamma: f64, x: &Vector) -> Vector {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.scaled_resolvent(gamma, x)
    }
}
