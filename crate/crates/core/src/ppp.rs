//! The PPP / rPPP iteration engine.
//!
//! An instance holds a factor `C` of the preconditioner `M = C C^T` and a
//! closed-form evaluation of `(M + A)^{-1}`. From these,
//!
//! ```text
//! T  = (M + A)^{-1} M           on H = R^{dim_h}
//! T~ = C^T (M + A)^{-1} C       on D = R^{dim_d}
//! ```
//!
//! and the two iterations are intertwined by `w_k = C^T u_k` and
//! `T u_k = (M + A)^{-1} C w_k`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{ensure_finite_matrix, ensure_finite_vector, numerical_rank, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::sampling::random_vector;

/// A total map `R^n -> R^n` shared between instances and threads.
pub type VectorMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Clone)]
pub struct PppInstance {
    label: String,
    c: Matrix,
    c_t: Matrix,
    resolvent_ma: VectorMap,
    preconditioner: Option<VectorMap>,
}

impl fmt::Debug for PppInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PppInstance")
            .field("label", &self.label)
            .field("dim_h", &self.dim_h())
            .field("dim_d", &self.dim_d())
            .finish_non_exhaustive()
    }
}

impl PppInstance {
    /// `c` must have full column rank, i.e. `C^T` must be surjective.
    pub fn new(label: impl Into<String>, c: Matrix, resolvent_ma: VectorMap) -> Result<Self> {
        ensure_finite_matrix(&c, "C")?;
        if c.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidInput("C must have at least one row and column".into()));
        }
        let rank = numerical_rank(&c, DEFAULT_RANK_TOL);
        if rank != c.ncols() {
            return Err(Error::InvalidInput(format!(
                "C^T is not surjective: C has rank {rank} but {} columns",
                c.ncols()
            )));
        }
        let c_t = c.transpose();
        Ok(PppInstance {
            label: label.into(),
            c,
            c_t,
            resolvent_ma,
            preconditioner: None,
        })
    }

    /// Supplies a cheaper evaluation of `u ↦ M u` than `C (C^T u)`. It must
    /// agree with `C C^T`; [`PppInstance::preconditioner_defect`] measures this.
    pub fn with_preconditioner(mut self, apply_m: VectorMap) -> Self {
        self.preconditioner = Some(apply_m);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim_h(&self) -> usize {
        self.c.nrows()
    }

    pub fn dim_d(&self) -> usize {
        self.c.ncols()
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn c_transpose(&self) -> &Matrix {
        &self.c_t
    }

    /// The assembled preconditioner `C C^T`.
    pub fn m(&self) -> Matrix {
        &self.c * &self.c_t
    }

    fn check_h(&self, context: &'static str, u: &Vector) -> Result<()> {
        check_dim(context, self.dim_h(), u.len())?;
        ensure_finite_vector(u, "argument")
    }

    fn check_d(&self, context: &'static str, w: &Vector) -> Result<()> {
        check_dim(context, self.dim_d(), w.len())?;
        ensure_finite_vector(w, "argument")
    }

    pub(crate) fn apply_m_unchecked(&self, u: &Vector) -> Vector {
        match &self.preconditioner {
            Some(m) => m(u),
            None => &self.c * (&self.c_t * u),
        }
    }

    pub fn apply_m(&self, u: &Vector) -> Result<Vector> {
        self.check_h("apply_m", u)?;
        Ok(self.apply_m_unchecked(u))
    }

    /// Largest `‖M u − C C^T u‖` over the standard basis; zero without a
    /// custom preconditioner.
    pub fn preconditioner_defect(&self) -> f64 {
        let n = self.dim_h();
        (0..n)
            .map(|i| {
                let e = Vector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
                (self.apply_m_unchecked(&e) - &self.c * (&self.c_t * &e)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn resolvent_ma_unchecked(&self, x: &Vector) -> Vector {
        (self.resolvent_ma)(x)
    }

    /// `(M + A)^{-1} x`.
    pub fn resolvent_ma(&self, x: &Vector) -> Result<Vector> {
        self.check_h("resolvent_ma", x)?;
        Ok(self.resolvent_ma_unchecked(x))
    }

    pub(crate) fn apply_t_unchecked(&self, u: &Vector) -> Vector {
        self.resolvent_ma_unchecked(&self.apply_m_unchecked(u))
    }

    pub fn apply_t(&self, u: &Vector) -> Result<Vector> {
        self.check_h("apply_t", u)?;
        Ok(self.apply_t_unchecked(u))
    }

    pub(crate) fn lift_unchecked(&self, w: &Vector) -> Vector {
        self.resolvent_ma_unchecked(&(&self.c * w))
    }

    /// `(M + A)^{-1} C w`, mapping `Fix T~` onto `Fix T`.
    pub fn lift(&self, w: &Vector) -> Result<Vector> {
        self.check_d("lift", w)?;
        Ok(self.lift_unchecked(w))
    }

    /// `C^T u`, mapping `Fix T` onto `Fix T~`.
    pub fn reduce(&self, u: &Vector) -> Result<Vector> {
        check_dim("reduce", self.dim_h(), u.len())?;
        Ok(&self.c_t * u)
    }

    pub(crate) fn apply_ttilde_unchecked(&self, w: &Vector) -> Vector {
        &self.c_t * self.lift_unchecked(w)
    }

    pub fn apply_ttilde(&self, w: &Vector) -> Result<Vector> {
        self.check_d("apply_ttilde", w)?;
        Ok(self.apply_ttilde_unchecked(w))
    }

    /// `‖u‖_M = ‖C^T u‖`.
    pub fn seminorm_m(&self, u: &Vector) -> Result<f64> {
        check_dim("seminorm_m", self.dim_h(), u.len())?;
        Ok((&self.c_t * u).norm())
    }

    /// Linear part of `T`, assembled column by column as `T e_i − T 0`.
    pub fn t_matrix(&self) -> Matrix {
        assemble(self.dim_h(), |u| self.apply_t_unchecked(u))
    }

    /// Linear part of `T~`.
    pub fn ttilde_matrix(&self) -> Matrix {
        assemble(self.dim_d(), |w| self.apply_ttilde_unchecked(w))
    }

    /// Largest observed ratio `‖F x − F y‖ / ‖x − y‖` of `F = (M+A)^{-1}`
    /// over random pairs.
    pub fn lipschitz_estimate<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let n = self.dim_h();
        (0..samples)
            .map(|_| {
                let x = random_vector(rng, n);
                let y = random_vector(rng, n);
                let num = (self.resolvent_ma_unchecked(&x) - self.resolvent_ma_unchecked(&y)).norm();
                num / (&x - &y).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn assemble(n: usize, f: impl Fn(&Vector) -> Vector) -> Matrix {
    let offset = f(&Vector::zeros(n));
    let cols: Vec<Vector> = (0..n)
        .map(|i| {
            let e = Vector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            f(&e) - &offset
        })
        .collect();
    Matrix::from_columns(&cols)
}

/// Relaxation parameters `λ_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSchedule {
    /// `λ_k ≡ λ` with `λ ∈ (0, 2)`.
    Constant(f64),
    /// `λ_0, λ_1, …` each in `[0, 2]`; the last entry repeats forever.
    Explicit(Vec<f64>),
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::Constant(1.0)
    }
}

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Result<Self> {
        let s = LambdaSchedule::Constant(lambda);
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let s = LambdaSchedule::Explicit(values);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaSchedule::Constant(l) => {
                if !(*l > 0.0 && *l < 2.0) {
                    return Err(Error::InvalidConfig(format!("constant lambda must lie in (0, 2), got {l}")));
                }
            }
            LambdaSchedule::Explicit(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidConfig("explicit lambda schedule is empty".into()));
                }
                if let Some(bad) = v.iter().find(|l| !(**l >= 0.0 && **l <= 2.0)) {
                    return Err(Error::InvalidConfig(format!("lambda {bad} outside [0, 2]")));
                }
            }
        }
        Ok(())
    }

    pub fn lambda(&self, k: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(l) => *l,
            LambdaSchedule::Explicit(v) => v[k.min(v.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Stop once the displacement `‖x_k − F x_k‖` is at most `eps`.
    pub eps: f64,
    /// Keep every iterate in the trace.
    pub store_points: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_iters: 100_000,
            eps: 1e-10,
            store_points: false,
        }
    }
}

impl RunOptions {
    pub fn new(max_iters: usize, eps: f64) -> Self {
        RunOptions {
            max_iters,
            eps,
            store_points: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `‖x_k − F x_k‖` for the map being iterated.
    pub residual: f64,
    pub point: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    /// The last iterate `x_K`.
    pub last: Vector,
    /// `F x_K`; for PPP this is the shadow `T u_K`.
    pub last_image: Vector,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }
}

/// Krasnosel'skiĭ–Mann loop shared by both drivers.
fn iterate(
    x0: &Vector,
    sched: &LambdaSchedule,
    opts: &RunOptions,
    f: impl Fn(&Vector) -> Vector,
) -> IterationTrace {
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut k = 0;
    loop {
        let fx = f(&x);
        let residual = (&x - &fx).norm();
        records.push(IterationRecord {
            k,
            residual,
            point: opts.store_points.then(|| x.clone()),
        });
        let status = if residual <= opts.eps {
            Some(Status::Converged)
        } else if k >= opts.max_iters {
            Some(Status::MaxIters)
        } else {
            None
        };
        if let Some(status) = status {
            return IterationTrace {
                records,
                status,
                last: x,
                last_image: fx,
            };
        }
        let lambda = sched.lambda(k);
        x = x * (1.0 - lambda) + fx * lambda;
        k += 1;
    }
}

/// `u_{k+1} = (1 − λ_k) u_k + λ_k T u_k`.
pub fn run_ppp(inst: &PppInstance, u0: &Vector, sched: &LambdaSchedule, opts: &RunOptions) -> Result<IterationTrace> {
    inst.check_h("run_ppp", u0)?;
    sched.validate()?;
    opts.validate()?;
    Ok(iterate(u0, sched, opts, |u| inst.apply_t_unchecked(u)))
}

/// `w_{k+1} = (1 − λ_k) w_k + λ_k T~ w_k`.
pub fn run_rppp(inst: &PppInstance, w0: &Vector, sched: &LambdaSchedule, opts: &RunOptions) -> Result<IterationTrace> {
    inst.check_d("run_rppp", w0)?;
    sched.validate()?;
    opts.validate()?;
    Ok(iterate(w0, sched, opts, |w| inst.apply_ttilde_unchecked(w)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockstepRecord {
    pub k: usize,
    /// `‖w_k − T~ w_k‖`.
    pub residual: f64,
    /// `‖u_k − T u_k‖`.
    pub u_residual: f64,
    /// `max(‖w_k − C^T u_k‖, ‖T u_k − (M+A)^{-1} C w_k‖)`.
    pub intertwine_violation: f64,
    pub w: Option<Vector>,
    /// The shadow `T u_k`.
    pub shadow: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockstepTrace {
    pub records: Vec<LockstepRecord>,
    pub status: Status,
    pub last_u: Vector,
    pub last_w: Vector,
    pub last_shadow: Vector,
}

impl LockstepTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn max_violation(&self) -> f64 {
        self.records.iter().map(|r| r.intertwine_violation).fold(0.0, f64::max)
    }
}

/// Runs PPP from `u0` and rPPP from `w0 = C^T u0` side by side, stopping on
/// the reduced residual.
pub fn run_lockstep(inst: &PppInstance, u0: &Vector, sched: &LambdaSchedule, opts: &RunOptions) -> Result<LockstepTrace> {
    inst.check_h("run_lockstep", u0)?;
    sched.validate()?;
    opts.validate()?;
    let mut u = u0.clone();
    let mut w = inst.c_transpose() * u0;
    let mut records = Vec::new();
    let mut k = 0;
    loop {
        let tu = inst.apply_t_unchecked(&u);
        let lifted = inst.lift_unchecked(&w);
        let tw = inst.c_transpose() * &lifted;
        let residual = (&w - &tw).norm();
        let violation = (&w - inst.c_transpose() * &u).norm().max((&tu - &lifted).norm());
        records.push(LockstepRecord {
            k,
            residual,
            u_residual: (&u - &tu).norm(),
            intertwine_violation: violation,
            w: opts.store_points.then(|| w.clone()),
            shadow: opts.store_points.then(|| tu.clone()),
        });
        let status = if residual <= opts.eps {
            Some(Status::Converged)
        } else if k >= opts.max_iters {
            Some(Status::MaxIters)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(LockstepTrace {
                records,
                status,
                last_u: u,
                last_w: w,
                last_shadow: tu,
            });
        }
        let lambda = sched.lambda(k);
        u = u * (1.0 - lambda) + tu * lambda;
        w = w * (1.0 - lambda) + tw * lambda;
        k += 1;
    }
}

/// Largest intertwining violation over exactly `n_iters` lockstep steps.
pub fn check_intertwining(inst: &PppInstance, u0: &Vector, sched: &LambdaSchedule, n_iters: usize) -> Result<f64> {
    let opts = RunOptions {
        max_iters: n_iters,
        eps: f64::MIN_POSITIVE,
        store_points: false,
    };
    // eps is tiny but a residual of exactly zero still stops early; that is
    // fine since both sequences are then stationary.
    Ok(run_lockstep(inst, u0, sched, &opts)?.max_violation())
}

pub fn seminorm_m(inst: &PppInstance, x: &Vector) -> Result<f64> {
    inst.seminorm_m(x)
}
