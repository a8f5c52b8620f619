use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde_json::json;

use ppp_core::analysis::{factorize, two_lines_report, FactorRoute};
use ppp_core::experiments::{convergence_study_until, make_phantom, phantom_target, run_phantom, uniform_angles};
use ppp_core::limits::predict_affine_limits;
use ppp_core::linalg::{spectral_radius, Matrix, Vector};
use ppp_core::ppp::{LambdaSchedule, RunOptions};
use ppp_core::sampling::{random_matrix_with_norm, rng};

use crate::config::{self, Overrides};
use crate::error::{CliError, CliResult};
use crate::output::{image_csv, num, resolve, trace_csv, write};

/// Largest `dim_H` for which the summary includes `ρ(T)`.
const SPECTRUM_DIM_LIMIT: usize = 400;

fn vec_json(v: &Vector) -> serde_json::Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

pub fn run(config_path: &Path, out_dir: &Path, overrides: &Overrides) -> CliResult<()> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", config_path.display())))?;
    let mut cfg = config::parse(&text)?;
    cfg.apply(overrides);
    let problem = cfg.build()?;
    let (inst, params) = (&problem.instance, problem.params);

    let predicted = predict_affine_limits(inst, &problem.u0)?;
    let sched = LambdaSchedule::constant(params.lambda)?;
    let opts = RunOptions::new(params.iters, params.eps);
    let report = convergence_study_until(inst, &problem.u0, &sched, &opts, params.stride, &predicted)?;
    let last = report.history.last().expect("at least one sample");
    let converged = last.residual <= params.eps;
    let final_w = report.final_reduced.clone().expect("studies track the reduced iterate");
    let rho = if inst.dim_h() <= SPECTRUM_DIM_LIMIT {
        Some(spectral_radius(&inst.t_matrix())?)
    } else {
        None
    };

    let summary = json!({
        "method": problem.method.family().name(),
        "dims": { "h": inst.dim_h(), "d": inst.dim_d() },
        "iterations": report.iterations,
        "converged": converged,
        "final_residual": last.residual,
        "predicted_limit": { "u": vec_json(&predicted.u_star), "w": vec_json(&predicted.w_star) },
        "achieved_limit": { "u": vec_json(&report.final_shadow), "w": vec_json(&final_w) },
        "limit_error": { "u": last.u_err, "w": last.w_err },
        "max_intertwine_violation": report.max_intertwine,
        "spectral_radius": rho,
        "seed": cfg.seed,
        "lambda": params.lambda,
        "eps": params.eps,
    });
    let trace_path = resolve(out_dir, &problem.output.trace);
    let summary_path = resolve(out_dir, &problem.output.summary);
    write(&trace_path, &trace_csv(&report.history))?;
    let body = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Numeric(e.to_string()))?;
    write(&summary_path, &(body + "\n"))?;
    println!(
        "{}: {} after {} iterations, residual {}, limit error {}",
        problem.method.family().name(),
        if converged { "converged" } else { "not converged" },
        report.iterations,
        num(last.residual),
        num(last.w_err.max(last.u_err)),
    );
    Ok(())
}

/// Parses `1.2`, `pi`, `pi/3`, `2pi/3` or `2*pi/3`.
pub fn parse_angle(s: &str) -> CliResult<f64> {
    let bad = || CliError::config(format!("theta: cannot parse {s:?}"));
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let head = t[..pos].trim_end_matches('*');
    let coef = if head.is_empty() { 1.0 } else if head == "-" { -1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
    let tail = &t[pos + 2..];
    let den = match tail.strip_prefix('/') {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None if tail.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / den)
}

pub const SPECTRUM_HEADER: &str = "theta,tau,rho_closed,rho_numeric,norm_closed,norm_numeric,lower_bound,upper_bound";

pub fn spectrum(thetas: &[String], taus: &[f64], out_dir: Option<&Path>) -> CliResult<()> {
    let mut table = String::from(SPECTRUM_HEADER);
    table.push('\n');
    for theta in thetas {
        let theta = parse_angle(theta)?;
        for &tau in taus {
            let r = two_lines_report(theta, tau)?;
            let row = [r.theta, r.tau, r.rho_closed, r.rho_numeric, r.norm_closed, r.norm_numeric, r.lower_bound, r.upper_bound];
            table.push_str(&row.map(num).join(","));
            table.push('\n');
        }
    }
    print!("{table}");
    if let Some(dir) = out_dir {
        write(&dir.join("spectrum.csv"), &table)?;
    }
    Ok(())
}

/// Matrix given as `a,b;c,d` (rows separated by `;`).
pub fn parse_matrix(s: &str) -> CliResult<Matrix> {
    let rows = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::config(format!("matrix: cannot parse {x:?}"))))
                .collect::<CliResult<Vec<f64>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    config::matrix_from_rows("matrix", &rows)
}

pub struct FactorArgs<'a> {
    pub matrix: Option<&'a str>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub norm: f64,
    pub sigma: f64,
    pub tau: f64,
    pub route: &'a str,
    pub seed: u64,
}

pub fn factor(args: &FactorArgs, out_dir: Option<&Path>) -> CliResult<()> {
    let route = FactorRoute::parse(args.route).ok_or_else(|| {
        CliError::config(format!(
            "route: unknown {:?} (expected cholesky, sqrt_sym, sqrt_polar or scalar_2x2)",
            args.route
        ))
    })?;
    let l = match (args.matrix, args.rows, args.cols) {
        (Some(m), None, None) => parse_matrix(m)?,
        (None, Some(r), Some(c)) if r > 0 && c > 0 => random_matrix_with_norm(&mut rng(args.seed), r, c, args.norm),
        _ => return Err(CliError::config("give either --matrix or positive --rows and --cols")),
    };
    let f = factorize(&l, args.sigma, args.tau, route)?;
    println!("route {}", route.name());
    println!("L {}x{}", l.nrows(), l.ncols());
    println!("C {}x{}", f.c.nrows(), f.c.ncols());
    println!("reconstruction_error {}", num(f.reconstruction_error));
    if let Some(dir) = out_dir {
        let rows: Vec<String> = f.c.row_iter().map(|r| r.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")).collect();
        write(&dir.join("factor.csv"), &(rows.join("\n") + "\n"))?;
    }
    Ok(())
}

pub struct PhantomArgs {
    pub grid: usize,
    pub angles: usize,
    pub rays: usize,
    pub iters: usize,
    pub lambda: f64,
    pub stride: usize,
    pub seed: u64,
}

pub fn phantom(args: &PhantomArgs, out_dir: &Path) -> CliResult<()> {
    if !(args.lambda > 0.0 && args.lambda < 2.0) {
        return Err(CliError::config(format!("lambda: must lie in (0, 2), got {}", args.lambda)));
    }
    let p = make_phantom(args.grid, &uniform_angles(args.angles), args.rays, args.seed)?;
    let report = run_phantom(&p, args.iters, args.lambda, args.stride)?;
    let target = phantom_target(&p)?;
    write(&out_dir.join("phantom_history.csv"), &trace_csv(&report.history))?;
    write(&out_dir.join("phantom_image.csv"), &image_csv(&report.final_shadow, p.grid_side))?;
    write(&out_dir.join("phantom_target.csv"), &image_csv(&target, p.grid_side))?;
    write(&out_dir.join("phantom_truth.csv"), &image_csv(&p.x_true, p.grid_side))?;
    println!(
        "phantom {}x{}, {} angles x {} rays: error {} after {} iterations ({:.2} s)",
        p.grid_side,
        p.grid_side,
        args.angles,
        args.rays,
        num(report.final_error),
        report.iterations,
        report.wall_time.as_secs_f64()
    );
    Ok(())
}
