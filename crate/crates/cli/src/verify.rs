//! Named invariant suites runnable from the command line.

use std::f64::consts::PI;

use ppp_core::analysis::{factor_cholesky, sqrt_m_polar, trig_form_check, two_lines_report, cp_preconditioner};
use ppp_core::experiments::{make_phantom, run_phantom, uniform_angles};
use ppp_core::limits::{
    cp_fix_and_limits, dr_fix_and_limits, m_projection_ambiguity, m_projection_oracle, mt_fix_and_projection,
    predict_limits, ryu_fix_and_projection, FixSets,
};
use ppp_core::linalg::{operator_norm, principal_sqrt, spectral_radius, Matrix, Subspace, Vector};
use ppp_core::methods::{build_cp, build_dr, build_mt, build_ryu};
use ppp_core::monotone::{inverse_resolvent, resolvent, ResolventOp};
use ppp_core::ppp::{check_intertwining, run_rppp, LambdaSchedule, PppInstance, RunOptions};
use ppp_core::sampling::{
    random_matrix, random_matrix_with_norm, random_psd, random_subspace, random_vector, rng, uniform_int, SeededRng,
};

use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 7] = ["linalg", "monotone", "ppp", "methods", "limits", "analysis", "experiments"];

type Check = (&'static str, f64, fn(u64) -> CliResult<f64>);

fn checks(suite: &str) -> Option<Vec<Check>> {
    let list: Vec<Check> = match suite {
        "linalg" => vec![
            ("projection idempotence", 1e-12, projection_idempotence),
            ("complement identity", 1e-12, complement_identity),
            ("sum/intersection duality", 1e-10, duality),
            ("principal square root", 1e-9, sqrt_squares),
            ("norm dominates spectral radius", 1e-9, norm_vs_radius),
        ],
        "monotone" => vec![
            ("firm nonexpansiveness", 1e-9, firm_resolvents),
            ("inverse resolvent identity", 1e-9, inverse_identity),
            ("normal cone splitting", 1e-10, normal_cone_split),
        ],
        "ppp" => vec![
            ("reduced operator firmly nonexpansive", 1e-9, firm_reduced),
            ("fixed-point correspondence", 1e-9, fix_correspondence),
            ("monotone displacement", 1e-12, monotone_displacement),
            ("seminorm identity", 1e-9, seminorm_identity),
        ],
        "methods" => vec![
            ("preconditioner symmetric psd", 1e-10, preconditioner_psd),
            ("zeros are fixed points", 1e-9, zeros_fixed),
            ("intertwining", 1e-9, intertwining),
        ],
        "limits" => vec![
            ("lifted projection roundtrip", 1e-8, roundtrip),
            ("single-valued projection", 0.0, ambiguity),
        ],
        "analysis" => vec![
            ("two-lines spectral radius", 1e-9, two_lines_radius),
            ("two-lines operator norm", 1e-9, two_lines_norm),
            ("cholesky factor", 1e-9, cholesky_factor),
            ("polar square root", 1e-8, polar_root),
            ("trigonometric form", 1e-9, trig_form),
        ],
        "experiments" => vec![
            ("phantom consistency", 0.0, phantom_consistency),
            ("phantom reproducibility", 0.0, phantom_reproducible),
        ],
        _ => return None,
    };
    Some(list)
}

/// Runs `suite` (or every suite for `all`), printing one line per check.
pub fn verify(suite: &str, seed: u64) -> CliResult<()> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let mut failed = 0;
    for name in names {
        let list = checks(name).ok_or_else(|| {
            CliError::config(format!("suite: unknown {name:?} (expected all or one of {})", SUITES.join(", ")))
        })?;
        for (check, tol, f) in list {
            match f(seed) {
                Ok(worst) if worst <= tol => println!("PASS {name}: {check} ({worst:.3e} <= {tol:e})"),
                Ok(worst) => {
                    failed += 1;
                    println!("FAIL {name}: {check} ({worst:.3e} > {tol:e})");
                }
                Err(e) => {
                    failed += 1;
                    println!("FAIL {name}: {check} ({e})");
                }
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} checks failed")));
    }
    Ok(())
}

fn proper(r: &mut SeededRng, d: usize) -> Subspace {
    let k = uniform_int(r, 1, d - 1);
    random_subspace(r, d, k)
}

fn cone(s: &Subspace) -> ResolventOp {
    ResolventOp::normal_cone(s.clone())
}

/// One subspace instance per method, with closed-form fixed-point sets.
fn cases(seed: u64) -> CliResult<Vec<(PppInstance, FixSets)>> {
    let mut r = rng(seed);
    let d = 4;
    let (a, b) = (proper(&mut r, d), proper(&mut r, d));
    let dr = (build_dr(cone(&a), cone(&b))?, dr_fix_and_limits(&a, &b, &Vector::zeros(2 * d))?.0);

    let (n, m) = (4, 3);
    let (u, v) = (proper(&mut r, n), proper(&mut r, m));
    let l = random_matrix_with_norm(&mut r, m, n, 1.5);
    let (sigma, tau) = (0.5, 0.9 / (0.5 * 1.5 * 1.5));
    let cp = (
        build_cp(cone(&u), cone(&v), l.clone(), sigma, tau)?,
        cp_fix_and_limits(&u, &v, &l, sigma, tau, &Vector::zeros(n + m))?.0,
    );

    let s: Vec<Subspace> = (0..4).map(|_| proper(&mut r, d)).collect();
    let ryu = (
        build_ryu(cone(&s[0]), cone(&s[1]), cone(&s[2]))?,
        ryu_fix_and_projection(&s[0], &s[1], &s[2], &Vector::zeros(5 * d))?.0,
    );
    let mt = (build_mt(s.iter().map(cone).collect())?, mt_fix_and_projection(&s, &Vector::zeros(7 * d))?.0);
    Ok(vec![dr, cp, ryu, mt])
}

fn over_cases(seed: u64, f: impl Fn(&PppInstance, &FixSets, &mut SeededRng) -> CliResult<f64>) -> CliResult<f64> {
    let mut r = rng(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for (inst, fix) in cases(seed)? {
        worst = worst.max(f(&inst, &fix, &mut r)?);
    }
    Ok(worst)
}

fn projection_idempotence(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for d in 1..8 {
        for k in 0..=d {
            let s = random_subspace(&mut r, d, k);
            let p = s.project(&random_vector(&mut r, d))?;
            worst = worst.max((s.project(&p)? - p).norm());
        }
    }
    Ok(worst)
}

fn complement_identity(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for d in 1..8 {
        let k = uniform_int(&mut r, 0, d);
        let s = random_subspace(&mut r, d, k);
        let c = s.complement();
        for _ in 0..100 {
            let v = random_vector(&mut r, d);
            worst = worst.max((s.project(&v)? + c.project(&v)? - &v).norm() / v.norm().max(1.0));
        }
    }
    Ok(worst)
}

fn duality(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for d in 1..8 {
        let (k1, k2) = (uniform_int(&mut r, 0, d), uniform_int(&mut r, 0, d));
        let (a, b) = (random_subspace(&mut r, d, k1), random_subspace(&mut r, d, k2));
        let lhs = a.sum(&b)?.complement();
        let rhs = a.complement().intersect(&b.complement())?;
        worst = worst.max(lhs.equality_residual(&rhs)?);
    }
    Ok(worst)
}

fn sqrt_squares(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = uniform_int(&mut r, 1, 10);
        let a = random_psd(&mut r, n);
        let root = principal_sqrt(&a)?;
        worst = worst.max((&root * &root - &a).norm() / a.norm().max(1.0));
    }
    Ok(worst)
}

fn norm_vs_radius(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = uniform_int(&mut r, 1, 9);
        let a = random_matrix(&mut r, n, n);
        worst = worst.max(spectral_radius(&a)? - operator_norm(&a));
    }
    Ok(worst.max(0.0))
}

fn firm_resolvents(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let d = 4;
    let s = random_subspace(&mut r, d, 2);
    let g = random_matrix(&mut r, d, d);
    let ops = [
        ResolventOp::zero(d),
        ResolventOp::normal_cone(s.clone()),
        ResolventOp::normal_cone_affine(s, random_vector(&mut r, d))?,
        ResolventOp::normal_cone_point(random_vector(&mut r, d))?,
        ResolventOp::linear_monotone(random_psd(&mut r, d) + (&g - g.transpose()))?,
    ];
    let mut worst = 0.0f64;
    for op in &ops {
        for _ in 0..200 {
            let (x, y) = (random_vector(&mut r, d), random_vector(&mut r, d));
            let dj = resolvent(op, &x)? - resolvent(op, &y)?;
            worst = worst.max(dj.norm_squared() - (&x - &y).dot(&dj));
        }
    }
    Ok(worst.max(0.0))
}

fn inverse_identity(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = uniform_int(&mut r, 1, 6);
        let b = random_psd(&mut r, d) + Matrix::identity(d, d);
        let x = random_vector(&mut r, d);
        let tau = 0.7;
        let op = ResolventOp::linear_monotone(b.clone())?;
        let inv = b.try_inverse().ok_or_else(|| CliError::Numeric("singular test matrix".into()))?;
        let direct = (Matrix::identity(d, d) + inv * tau)
            .lu()
            .solve(&x)
            .ok_or_else(|| CliError::Numeric("singular system".into()))?;
        worst = worst.max((inverse_resolvent(&op, tau, &x)? - direct).norm());
    }
    Ok(worst)
}

fn normal_cone_split(seed: u64) -> CliResult<f64> {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for d in 1..8 {
        let k = uniform_int(&mut r, 0, d);
        let s = random_subspace(&mut r, d, k);
        let x = random_vector(&mut r, d);
        let jx = resolvent(&cone(&s), &x)?;
        worst = worst.max(s.distance(&jx)?).max(s.complement().distance(&(&x - &jx))?);
    }
    Ok(worst)
}

fn firm_reduced(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, _, r| {
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let (x, y) = (random_vector(r, inst.dim_d()), random_vector(r, inst.dim_d()));
            let dt = inst.apply_ttilde(&x)? - inst.apply_ttilde(&y)?;
            worst = worst.max(dt.norm_squared() - (&x - &y).dot(&dt));
        }
        Ok(worst.max(0.0))
    })
}

fn fix_correspondence(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, fix, _| {
        let mut worst = fix.reduction_residual(inst)?;
        for b in fix.fix_ttilde.basis().column_iter() {
            let b = b.into_owned();
            worst = worst.max((inst.apply_ttilde(&b)? - b).norm());
        }
        Ok(worst)
    })
}

fn monotone_displacement(seed: u64) -> CliResult<f64> {
    let sched = LambdaSchedule::constant(1.5)?;
    over_cases(seed, |inst, _, r| {
        let w0 = random_vector(r, inst.dim_d());
        let trace = run_rppp(inst, &w0, &sched, &RunOptions::new(200, 1e-14))?;
        Ok(trace.records.windows(2).map(|p| p[1].residual - p[0].residual).fold(0.0, f64::max))
    })
}

fn seminorm_identity(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, _, r| {
        let x = random_vector(r, inst.dim_h());
        let q = x.dot(&(inst.m() * &x));
        Ok((inst.seminorm_m(&x)?.powi(2) - q).abs() / q.abs().max(1.0))
    })
}

fn preconditioner_psd(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, _, _| {
        let m = inst.m();
        let asym = (&m - m.transpose()).amax();
        let min = m.symmetric_eigenvalues().min();
        Ok(asym.max(-min).max(0.0))
    })
}

fn zeros_fixed(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, fix, r| {
        let basis = fix.fix_t.basis();
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let u = basis * random_vector(r, basis.ncols());
            worst = worst.max((inst.apply_t(&u)? - u).norm());
        }
        Ok(worst)
    })
}

fn intertwining(seed: u64) -> CliResult<f64> {
    let sched = LambdaSchedule::default();
    over_cases(seed, |inst, _, r| {
        let u0 = random_vector(r, inst.dim_h());
        Ok(check_intertwining(inst, &u0, &sched, 200)?)
    })
}

fn roundtrip(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, fix, r| {
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let u0 = random_vector(r, inst.dim_h());
            let predicted = predict_limits(inst, fix, &u0)?;
            worst = worst.max((predicted.u_star - m_projection_oracle(inst, &fix.fix_t, &u0)?).norm());
        }
        Ok(worst)
    })
}

fn ambiguity(seed: u64) -> CliResult<f64> {
    over_cases(seed, |inst, fix, _| Ok(m_projection_ambiguity(inst, &fix.fix_t)? as f64))
}

fn two_lines_grid() -> impl Iterator<Item = (f64, f64)> {
    (0..12).flat_map(|k| [0.25, 0.5, 1.0, 2.0, 4.0].map(move |tau| (k as f64 * PI / 12.0, tau)))
}

fn two_lines_radius(_: u64) -> CliResult<f64> {
    two_lines_grid().try_fold(0.0f64, |acc, (theta, tau)| {
        let r = two_lines_report(theta, tau)?;
        Ok(acc.max((r.rho_numeric - theta.cos().abs()).abs()))
    })
}

fn two_lines_norm(_: u64) -> CliResult<f64> {
    two_lines_grid().try_fold(0.0f64, |acc, (theta, tau)| {
        let r = two_lines_report(theta, tau)?;
        Ok(acc.max((r.norm_numeric - r.norm_closed).abs()))
    })
}

fn random_couplings(seed: u64) -> Vec<Matrix> {
    let mut r = rng(seed);
    (0..30)
        .map(|i| {
            let (m, n) = (uniform_int(&mut r, 1, 8), uniform_int(&mut r, 1, 8));
            random_matrix_with_norm(&mut r, m, n, [0.5, 0.9, 1.0][i % 3])
        })
        .collect()
}

fn cholesky_factor(seed: u64) -> CliResult<f64> {
    random_couplings(seed)
        .iter()
        .try_fold(0.0f64, |acc, l| Ok(acc.max(factor_cholesky(l, 1.0, 1.0)?.reconstruction_error)))
}

fn polar_root(seed: u64) -> CliResult<f64> {
    random_couplings(seed).iter().try_fold(0.0f64, |acc, l| {
        let root = sqrt_m_polar(l, 1.0)?;
        let m = cp_preconditioner(l, 1.0, 1.0);
        let square = (&root * &root - &m).norm();
        Ok(acc.max(square).max((root - principal_sqrt(&m)?).norm()))
    })
}

fn trig_form(seed: u64) -> CliResult<f64> {
    random_couplings(seed)
        .iter()
        .try_fold(0.0f64, |acc, l| Ok(acc.max(trig_form_check(l, f64::INFINITY)?)))
}

fn phantom_consistency(seed: u64) -> CliResult<f64> {
    let p = make_phantom(12, &uniform_angles(6), 12, seed)?;
    Ok((&p.l * &p.x_true - &p.b).norm())
}

fn phantom_reproducible(seed: u64) -> CliResult<f64> {
    let p = make_phantom(8, &uniform_angles(4), 8, seed)?;
    let a = run_phantom(&p, 50, 1.0, 5)?;
    let b = run_phantom(&make_phantom(8, &uniform_angles(4), 8, seed)?, 50, 1.0, 5)?;
    Ok(if a.history == b.history && a.final_shadow == b.final_shadow { 0.0 } else { 1.0 })
}
