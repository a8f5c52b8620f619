//! A desk-scale tomography experiment and a generic convergence harness.
//!
//! The tomography problem is a consistent, underdetermined system `L x = b`
//! built by tracing parallel rays through a square pixel grid, with the
//! prior that the two leftmost and two rightmost pixel columns are black.

use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::limits::{affine_solution_set, cp_affine_limits, LimitPrediction};
use crate::linalg::{operator_norm, Matrix, Subspace, Vector};
use crate::methods::build_cp;
use crate::monotone::ResolventOp;
use crate::ppp::{LambdaSchedule, PppInstance, RunOptions};
use crate::sampling::rng;

/// Error level reported by [`ExperimentReport::first_below`].
pub const REPORT_THRESHOLD: f64 = 1e-6;

/// Ray segments shorter than this are dropped.
const MIN_SEGMENT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomProblem {
    pub grid_side: usize,
    pub angles: Vec<f64>,
    pub rays_per_angle: usize,
    /// One row per ray, one column per pixel (row-major image order).
    pub l: Matrix,
    pub b: Vector,
    pub x_true: Vector,
    /// Images vanishing on the two outer pixel columns on each side.
    pub u: Subspace,
}

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub k: usize,
    /// `‖w_k − T̃ w_k‖` when the reduced sequence is tracked, else
    /// `‖u_k − T u_k‖`.
    pub residual: f64,
    /// `‖w_k − w*‖`, which equals the `M`-seminorm distance `‖u_k − u*‖_M`
    /// and is therefore non-increasing.
    pub w_err: f64,
    /// Error of the shadow `T u_k` (its primal part for the phantom).
    pub u_err: f64,
    /// Intertwining defect, when a separate reduced sequence is run.
    pub intertwine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub iterations: usize,
    /// Shadow error for the phantom; `max(w_err, u_err)` for a study.
    pub final_error: f64,
    /// First recorded `k` whose error is at most [`REPORT_THRESHOLD`].
    pub first_below: Option<usize>,
    pub history: Vec<Sample>,
    pub wall_time: Duration,
    /// Final shadow: the reconstructed image for the phantom, `T u_K`
    /// otherwise.
    pub final_shadow: Vector,
    /// Last reduced iterate `w_K`, when one is tracked.
    pub final_reduced: Option<Vector>,
    /// Largest intertwining defect over every step, not only recorded ones.
    pub max_intertwine: Option<f64>,
}

impl ExperimentReport {
    fn from_history(
        history: Vec<Sample>,
        started: Instant,
        final_shadow: Vector,
        error: impl Fn(&Sample) -> f64,
    ) -> Self {
        let last = history.last().expect("at least one sample is recorded");
        ExperimentReport {
            iterations: last.k,
            final_error: error(last),
            first_below: history.iter().find(|s| error(s) <= REPORT_THRESHOLD).map(|s| s.k),
            history,
            wall_time: started.elapsed(),
            final_shadow,
            final_reduced: None,
            max_intertwine: None,
        }
    }
}

fn validate_phantom_args(grid_side: usize, angles: &[f64], rays_per_angle: usize) -> Result<()> {
    if grid_side < 8 {
        return Err(Error::InvalidConfig(format!("grid_side must be at least 8, got {grid_side}")));
    }
    if angles.is_empty() || rays_per_angle == 0 {
        return Err(Error::InvalidConfig("need at least one angle and one ray per angle".into()));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::InvalidConfig(format!("angle {a} is not finite")));
    }
    Ok(())
}

/// Intersection lengths of the line `{p + t·dir}` with the cells of the
/// `n x n` unit grid `[0, n]^2`, as `(pixel index, length)` pairs.
fn trace_ray(n: usize, p: [f64; 2], dir: [f64; 2]) -> Vec<(usize, f64)> {
    let size = n as f64;
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for axis in 0..2 {
        if dir[axis].abs() < 1e-14 {
            if p[axis] < 0.0 || p[axis] >= size {
                return Vec::new();
            }
        } else {
            let a = (0.0 - p[axis]) / dir[axis];
            let b = (size - p[axis]) / dir[axis];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if !(t1 - t0 > MIN_SEGMENT) {
        return Vec::new();
    }
    let mut ts = vec![t0, t1];
    for axis in 0..2 {
        if dir[axis].abs() < 1e-14 {
            continue;
        }
        for k in 1..n {
            let t = (k as f64 - p[axis]) / dir[axis];
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for pair in ts.windows(2) {
        let len = pair[1] - pair[0];
        if len <= MIN_SEGMENT {
            continue;
        }
        let mid = 0.5 * (pair[0] + pair[1]);
        let cell = |axis: usize| ((p[axis] + mid * dir[axis]).floor().max(0.0) as usize).min(n - 1);
        let (col, row) = (cell(0), cell(1));
        out.push((row * n + col, len));
    }
    out
}

/// Parallel-beam system matrix: for each angle, `rays_per_angle` equally
/// spaced parallel rays across a detector as wide as the grid, centred on
/// it. Pixels are unit squares.
///
/// A detector of width `√2·n` (covering the grid's circumcircle) puts the
/// rays about one pixel apart, which aliases badly: on a 16x16 grid with 24
/// rays the restricted system has condition number ~360 instead of ~19.
pub fn system_matrix(grid_side: usize, angles: &[f64], rays_per_angle: usize) -> Result<Matrix> {
    validate_phantom_args(grid_side, angles, rays_per_angle)?;
    let n = grid_side;
    let centre = n as f64 / 2.0;
    let spacing = n as f64 / rays_per_angle as f64;
    let mut l = Matrix::zeros(angles.len() * rays_per_angle, n * n);
    for (i, &theta) in angles.iter().enumerate() {
        let (s, c) = theta.sin_cos();
        let normal = [c, s];
        let dir = [-s, c];
        for j in 0..rays_per_angle {
            let offset = (j as f64 - (rays_per_angle as f64 - 1.0) / 2.0) * spacing;
            let p = [centre + offset * normal[0], centre + offset * normal[1]];
            for (pixel, len) in trace_ray(n, p, dir) {
                l[(i * rays_per_angle + j, pixel)] += len;
            }
        }
    }
    if l.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidConfig("no ray intersects the grid".into()));
    }
    Ok(l)
}

/// Pixel columns `2..=n−3` of an `n x n` row-major image.
pub fn zero_border_prior(grid_side: usize) -> Subspace {
    let n = grid_side;
    let free: Vec<usize> = (0..n * n).filter(|&i| (2..n.saturating_sub(2)).contains(&(i % n))).collect();
    let mut basis = Matrix::zeros(n * n, free.len());
    for (k, &i) in free.iter().enumerate() {
        basis[(i, k)] = 1.0;
    }
    Subspace::from_orthonormal(basis).expect("coordinate vectors are orthonormal")
}

/// Two nested ellipses: intensity 1 in the outer one and a seed-dependent
/// value in `[0.3, 0.6]` in the inner one, whose centre is also jittered by
/// the seed. Pixels outside the prior are forced to zero.
fn two_ellipse_image(n: usize, seed: u64) -> Vector {
    let mut r = rng(seed);
    let size = n as f64;
    let centre = size / 2.0;
    // Outer half-width keeps pixel centres of the two border columns outside.
    let (ax, ay) = (centre - 2.5, 0.4 * size);
    let jitter = 0.05 * size;
    let (cx, cy) = (
        centre + r.random_range(-jitter..=jitter),
        centre + r.random_range(-jitter..=jitter),
    );
    let inner_value = r.random_range(0.3..=0.6);
    let (bx, by) = (0.45 * ax, 0.45 * ay);
    let mut x = Vector::zeros(n * n);
    for row in 0..n {
        for col in 0..n {
            if !(2..n - 2).contains(&col) {
                continue;
            }
            let (px, py) = (col as f64 + 0.5, row as f64 + 0.5);
            let outer = ((px - centre) / ax).powi(2) + ((py - centre) / ay).powi(2) <= 1.0;
            let inner = ((px - cx) / bx).powi(2) + ((py - cy) / by).powi(2) <= 1.0;
            x[row * n + col] = match (outer, inner) {
                (_, true) => inner_value,
                (true, false) => 1.0,
                _ => 0.0,
            };
        }
    }
    x
}

pub fn make_phantom(grid_side: usize, angles: &[f64], rays_per_angle: usize, seed: u64) -> Result<PhantomProblem> {
    let l = system_matrix(grid_side, angles, rays_per_angle)?;
    let x_true = two_ellipse_image(grid_side, seed);
    let b = &l * &x_true;
    Ok(PhantomProblem {
        grid_side,
        angles: angles.to_vec(),
        rays_per_angle,
        l,
        b,
        x_true,
        u: zero_border_prior(grid_side),
    })
}

/// `count` angles equally spaced in `[0, π)`.
pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count).map(|i| std::f64::consts::PI * i as f64 / count as f64).collect()
}

/// `σ = τ = 0.99 / ‖L‖` with `‖L‖² = ‖L^T L‖`.
pub fn phantom_step(l: &Matrix) -> f64 {
    let norm = operator_norm(&l.tr_mul(l)).sqrt();
    0.99 / norm
}

/// The Chambolle–Pock instance with `A1 = N_U`, `A2 = N_{{b}}` and its step.
pub fn phantom_instance(p: &PhantomProblem) -> Result<(PppInstance, f64)> {
    let step = phantom_step(&p.l);
    let inst = build_cp(
        ResolventOp::normal_cone(p.u.clone()),
        ResolventOp::normal_cone_point(p.b.clone())?,
        p.l.clone(),
        step,
        step,
    )?;
    Ok((inst, step))
}

/// `P_{U ∩ L^{-1}(b)}(0)`, the limit of the primal shadow from `(0, 0)`.
pub fn phantom_target(p: &PhantomProblem) -> Result<Vector> {
    affine_solution_set(&p.u, &p.l, &p.b)?.project(&Vector::zeros(p.l.ncols()))
}

/// Runs Chambolle–Pock from `(0, 0)` for `iters` steps with constant `λ`,
/// recording the primal shadow error `‖P_U(x_k − σ L^T y_k) − x_pred‖`
/// every `stride` steps (and at the last one). The shadow error oscillates;
/// the `w_err` column is the monotone one.
pub fn run_phantom(p: &PhantomProblem, iters: usize, lambda: f64, stride: usize) -> Result<ExperimentReport> {
    LambdaSchedule::constant(lambda)?;
    let stride = stride.max(1);
    let started = Instant::now();
    let (inst, step) = phantom_instance(p)?;
    let n = p.l.ncols();
    let u0 = Vector::zeros(inst.dim_h());
    let pred = cp_affine_limits(&p.u, &p.b, &p.l, step, step, &u0)?;
    let x_pred = pred.u_star.rows(0, n).into_owned();
    let w_star = inst.reduce(&pred.u_star)?;
    let mut u = u0;
    let mut history = Vec::new();
    let mut shadow = Vector::zeros(n);
    for k in 0..=iters {
        let tu = inst.apply_t(&u)?;
        if k % stride == 0 || k == iters {
            shadow = tu.rows(0, n).into_owned();
            history.push(Sample {
                k,
                residual: (&u - &tu).norm(),
                w_err: (inst.reduce(&u)? - &w_star).norm(),
                u_err: (&shadow - &x_pred).norm(),
                intertwine: None,
            });
        }
        if k == iters {
            break;
        }
        u = u * (1.0 - lambda) + tu * lambda;
    }
    Ok(ExperimentReport::from_history(history, started, shadow, |s| s.u_err))
}

/// Runs PPP from `u0` and rPPP from `C^T u0` for `iters` steps, logging
/// `‖w_k − w*‖`, `‖T u_k − u*‖` and the intertwining defect every `stride`
/// steps (and at the last one).
pub fn convergence_study(
    inst: &PppInstance,
    u0: &Vector,
    sched: &LambdaSchedule,
    iters: usize,
    stride: usize,
    reference: &LimitPrediction,
) -> Result<ExperimentReport> {
    study(inst, u0, sched, iters, None, stride, reference)
}

/// Like [`convergence_study`], but stops as soon as `‖w_k − T̃ w_k‖ ≤ eps`.
pub fn convergence_study_until(
    inst: &PppInstance,
    u0: &Vector,
    sched: &LambdaSchedule,
    opts: &RunOptions,
    stride: usize,
    reference: &LimitPrediction,
) -> Result<ExperimentReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {}", opts.eps)));
    }
    study(inst, u0, sched, opts.max_iters, Some(opts.eps), stride, reference)
}

fn study(
    inst: &PppInstance,
    u0: &Vector,
    sched: &LambdaSchedule,
    iters: usize,
    eps: Option<f64>,
    stride: usize,
    reference: &LimitPrediction,
) -> Result<ExperimentReport> {
    check_dim("convergence_study: u0", inst.dim_h(), u0.len())?;
    check_dim("convergence_study: w*", inst.dim_d(), reference.w_star.len())?;
    check_dim("convergence_study: u*", inst.dim_h(), reference.u_star.len())?;
    sched.validate()?;
    let stride = stride.max(1);
    let started = Instant::now();
    let mut u = u0.clone();
    let mut w = inst.reduce(u0)?;
    let mut history = Vec::new();
    let mut max_intertwine = 0.0f64;
    let mut k = 0;
    let shadow = loop {
        let tu = inst.apply_t(&u)?;
        let lifted = inst.lift(&w)?;
        let tw = inst.c_transpose() * &lifted;
        let residual = (&w - &tw).norm();
        let intertwine = (&w - inst.c_transpose() * &u).norm().max((&tu - &lifted).norm());
        max_intertwine = max_intertwine.max(intertwine);
        let done = k == iters || eps.is_some_and(|e| residual <= e);
        if k % stride == 0 || done {
            history.push(Sample {
                k,
                residual,
                w_err: (&w - &reference.w_star).norm(),
                u_err: (&tu - &reference.u_star).norm(),
                intertwine: Some(intertwine),
            });
        }
        if done {
            break tu;
        }
        let lambda = sched.lambda(k);
        u = u * (1.0 - lambda) + tu * lambda;
        w = w * (1.0 - lambda) + tw * lambda;
        k += 1;
    };
    let mut report = ExperimentReport::from_history(history, started, shadow, |s| s.w_err.max(s.u_err));
    report.final_reduced = Some(w);
    report.max_intertwine = Some(max_intertwine);
    Ok(report)
}
