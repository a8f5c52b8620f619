//! Two-lines spectral formulas and factorizations `M = C C^T` of the
//! Chambolle–Pock preconditioner
//!
//! ```text
//! M = [ I/σ   −L^T ]
//!     [ −L    I/τ  ]
//! ```

use crate::error::{Error, Result};
use crate::linalg::{
    asymmetry, cholesky, ensure_finite_matrix, map_symmetric, operator_norm, principal_sqrt, pseudo_inverse,
    spectral_radius, symmetric_eigenvalues, Matrix, DEFAULT_RANK_TOL, SYMMETRY_TOL,
};
use crate::methods::check_cp_condition;

/// Spectral values of `S = √(L^T L)` within this distance of 1 are taken to
/// be exactly 1; `√(1 − s)` would otherwise turn roundoff into `√ε` errors.
pub const UNIT_SNAP: f64 = 1e-13;
/// Slack on `‖L‖ ≤ 1` style preconditions.
pub const NORM_SLACK: f64 = 1e-12;

/// The Chambolle–Pock operator `T` for the lines `U = R(1,0)` and
/// `V = R(cos θ, sin θ)` with `L = Id` and `σ = 1/τ`.
pub fn two_lines_t(theta: f64, tau: f64) -> Result<Matrix> {
    check_two_lines(theta, tau)?;
    let (s, c) = theta.sin_cos();
    #[rustfmt::skip]
    let t = Matrix::from_row_slice(4, 4, &[
        1.0,            0.0,           -1.0 / tau, 0.0,
        0.0,            0.0,            0.0,       0.0,
        tau * s * s,    tau * c * s,   -s * s,    -c * s,
        -tau * c * s,  -tau * c * c,    c * s,     c * c,
    ]);
    Ok(t)
}

fn check_two_lines(theta: f64, tau: f64) -> Result<()> {
    if !(0.0..std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta must lie in [0, pi), got {theta}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// `ρ(T) = |cos θ|`.
pub fn two_lines_rho(theta: f64) -> f64 {
    theta.cos().abs()
}

/// Closed-form `‖T‖`.
pub fn two_lines_norm(theta: f64, tau: f64) -> f64 {
    let t2 = tau * tau;
    let t4 = t2 * t2;
    let inner = (1.0 + t4 - 2.0 * t2 * (2.0 * theta).cos()).max(0.0).sqrt();
    (1.0 + (1.0 + t4 + (1.0 + t2) * inner) / (2.0 * t2)).sqrt()
}

/// `(√(1 + max(τ², 1/τ²)), τ + 1/τ)`.
pub fn two_lines_bounds(tau: f64) -> (f64, f64) {
    let t2 = tau * tau;
    ((1.0 + t2.max(1.0 / t2)).sqrt(), tau + 1.0 / tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinesReport {
    pub theta: f64,
    pub tau: f64,
    pub t_matrix: Matrix,
    pub rho_closed: f64,
    pub rho_numeric: f64,
    pub norm_closed: f64,
    pub norm_numeric: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

pub fn two_lines_report(theta: f64, tau: f64) -> Result<TwoLinesReport> {
    let t = two_lines_t(theta, tau)?;
    let rho_numeric = spectral_radius(&t)?;
    let norm_numeric = operator_norm(&t);
    let (lower_bound, upper_bound) = two_lines_bounds(tau);
    Ok(TwoLinesReport {
        theta,
        tau,
        t_matrix: t,
        rho_closed: two_lines_rho(theta),
        rho_numeric,
        norm_closed: two_lines_norm(theta, tau),
        norm_numeric,
        lower_bound,
        upper_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRoute {
    /// `C = [[I/√σ, 0], [−√σ L, Z/√τ]]` with `Z Z^T = I − στ L L^T`.
    Cholesky,
    /// Principal square root for symmetric `L` (needs `σ = τ`).
    SqrtSym,
    /// Principal square root via polar decomposition (needs `σ = τ`).
    SqrtPolar,
    /// The explicit factors for `L = [λ]`, `σ = τ = 1`.
    Scalar2x2,
}

impl FactorRoute {
    pub fn name(self) -> &'static str {
        match self {
            FactorRoute::Cholesky => "cholesky",
            FactorRoute::SqrtSym => "sqrt_sym",
            FactorRoute::SqrtPolar => "sqrt_polar",
            FactorRoute::Scalar2x2 => "scalar_2x2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [FactorRoute::Cholesky, FactorRoute::SqrtSym, FactorRoute::SqrtPolar, FactorRoute::Scalar2x2]
            .into_iter()
            .find(|r| r.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationResult {
    pub c: Matrix,
    /// Frobenius norm of `C C^T − M`.
    pub reconstruction_error: f64,
    pub route: FactorRoute,
}

/// The preconditioner for coupling `L: R^n -> R^m` and step sizes `σ, τ`.
pub fn cp_preconditioner(l: &Matrix, sigma: f64, tau: f64) -> Matrix {
    let (m, n) = l.shape();
    let mut out = Matrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&(Matrix::identity(n, n) / sigma));
    out.view_mut((n, n), (m, m)).copy_from(&(Matrix::identity(m, m) / tau));
    out.view_mut((n, 0), (m, n)).copy_from(&(-l));
    out.view_mut((0, n), (n, m)).copy_from(&(-l.transpose()));
    out
}

fn result(c: Matrix, m: &Matrix, route: FactorRoute) -> FactorizationResult {
    let reconstruction_error = (&c * c.transpose() - m).norm();
    FactorizationResult {
        c,
        reconstruction_error,
        route,
    }
}

/// Cholesky route. When `σ τ L L^T = I` the `Z` block has no columns.
pub fn factor_cholesky(l: &Matrix, sigma: f64, tau: f64) -> Result<FactorizationResult> {
    check_cp_condition(l, sigma, tau)?;
    let (m, n) = l.shape();
    let k = Matrix::identity(m, m) - (l * l.transpose()) * (sigma * tau);
    let z = cholesky(&((&k + k.transpose()) * 0.5))?.factor();
    let r = z.ncols();
    let mut c = Matrix::zeros(n + m, n + r);
    c.view_mut((0, 0), (n, n)).copy_from(&(Matrix::identity(n, n) / sigma.sqrt()));
    c.view_mut((n, 0), (m, n)).copy_from(&(l * -sigma.sqrt()));
    c.view_mut((n, n), (m, r)).copy_from(&(z / tau.sqrt()));
    Ok(result(c, &cp_preconditioner(l, sigma, tau), FactorRoute::Cholesky))
}

/// Snaps values within [`UNIT_SNAP`] of 1 onto 1 and clips to `[0, 1]`.
fn unit_interval(t: f64) -> f64 {
    if t >= 1.0 - UNIT_SNAP {
        1.0
    } else {
        t.max(0.0)
    }
}

fn sqrt_one_minus(t: f64) -> f64 {
    (1.0 - t).max(0.0).sqrt()
}

/// Principal square root of `[[I, −L], [−L, I]]` for symmetric `L` with
/// `‖L‖ ≤ 1`.
pub fn sqrt_m_sym(l: &Matrix) -> Result<Matrix> {
    if !l.is_square() {
        return Err(Error::InvalidInput("L must be square".into()));
    }
    ensure_finite_matrix(l, "L")?;
    let skew = asymmetry(l);
    if skew > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("L is not symmetric (asymmetry {skew:e})")));
    }
    let norm = operator_norm(l);
    if norm > 1.0 + NORM_SLACK {
        return Err(Error::InvalidInput(format!("||L|| = {norm} exceeds 1")));
    }
    let snap = |t: f64| t.clamp(-1.0, 1.0).signum() * unit_interval(t.abs());
    let minus = map_symmetric(l, |t| sqrt_one_minus(snap(t)))?;
    let plus = map_symmetric(l, |t| (1.0 + snap(t)).sqrt())?;
    let n = l.nrows();
    let diag = (&minus + &plus) * 0.5;
    let off = (&minus - &plus) * 0.5;
    let mut out = Matrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&diag);
    out.view_mut((n, n), (n, n)).copy_from(&diag);
    out.view_mut((0, n), (n, n)).copy_from(&off);
    out.view_mut((n, 0), (n, n)).copy_from(&off);
    Ok(out)
}

/// Pieces of the polar decomposition `L = U S`, `L^T = U^T T`.
struct Polar {
    s: Matrix,
    t: Matrix,
    u: Matrix,
}

fn polar(l: &Matrix) -> Result<Polar> {
    ensure_finite_matrix(l, "L")?;
    let s = principal_sqrt(&(l.transpose() * l))?;
    let t = principal_sqrt(&(l * l.transpose()))?;
    let u = l * pseudo_inverse(&s, DEFAULT_RANK_TOL)?;
    Ok(Polar { s, t, u })
}

/// Principal square root of the preconditioner with `σ = τ`, via the polar
/// decomposition of `L`. Requires `σ ‖L‖ ≤ 1`.
pub fn sqrt_m_polar(l: &Matrix, sigma: f64) -> Result<Matrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    ensure_finite_matrix(l, "L")?;
    let scaled = sigma * operator_norm(l);
    if scaled > 1.0 + NORM_SLACK {
        return Err(Error::InvalidConfig(format!("sigma*||L|| = {scaled} exceeds 1")));
    }
    let Polar { s, t, u } = polar(l)?;
    let minus_s = map_symmetric(&s, |x| sqrt_one_minus(unit_interval(sigma * x)))?;
    let plus_s = map_symmetric(&s, |x| (1.0 + unit_interval(sigma * x)).sqrt())?;
    let minus_t = map_symmetric(&t, |x| sqrt_one_minus(unit_interval(sigma * x)))?;
    let plus_t = map_symmetric(&t, |x| (1.0 + unit_interval(sigma * x)).sqrt())?;
    let (m, n) = l.shape();
    let scale = 0.5 / sigma.sqrt();
    let mut out = Matrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(&((&minus_s + &plus_s) * scale));
    out.view_mut((n, n), (m, m)).copy_from(&((&minus_t + &plus_t) * scale));
    out.view_mut((0, n), (n, m)).copy_from(&(u.transpose() * (&minus_t - &plus_t) * scale));
    out.view_mut((n, 0), (m, n)).copy_from(&(&u * (&minus_s - &plus_s) * scale));
    Ok(out)
}

fn check_unit_spectrum(a: &Matrix, what: &str) -> Result<()> {
    for lam in symmetric_eigenvalues(a)? {
        if !(-1e-12..=1.0 + 1e-12).contains(&lam) {
            return Err(Error::InvalidInput(format!(
                "{what} has eigenvalue {lam} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Builds the trigonometric form `[[cos(A/2), −U^T sin(B/2)], [−U sin(A/2),
/// cos(B/2)]]` with `A = arcsin S`, `B = arcsin T`, and returns its Frobenius
/// distance to [`sqrt_m_polar`]`(L, 1)`. Fails if that distance exceeds `tol`.
pub fn trig_form_check(l: &Matrix, tol: f64) -> Result<f64> {
    let Polar { s, t, u } = polar(l)?;
    check_unit_spectrum(&s, "sqrt(L^T L)")?;
    check_unit_spectrum(&t, "sqrt(L L^T)")?;
    let half_cos = |x: f64| (0.5 * unit_interval(x).asin()).cos();
    let half_sin = |x: f64| (0.5 * unit_interval(x).asin()).sin();
    let (m, n) = l.shape();
    let mut w = Matrix::zeros(n + m, n + m);
    w.view_mut((0, 0), (n, n)).copy_from(&map_symmetric(&s, half_cos)?);
    w.view_mut((n, n), (m, m)).copy_from(&map_symmetric(&t, half_cos)?);
    w.view_mut((0, n), (n, m)).copy_from(&(-u.transpose() * map_symmetric(&t, half_sin)?));
    w.view_mut((n, 0), (m, n)).copy_from(&(-&u * map_symmetric(&s, half_sin)?));
    let diff = (w - sqrt_m_polar(l, 1.0)?).norm();
    if diff > tol {
        return Err(Error::NumericalFailure(format!(
            "trigonometric and radical forms differ by {diff:e} (> {tol:e})"
        )));
    }
    Ok(diff)
}

/// The explicit factors of `M_λ = [[1, −λ], [−λ, 1]]`: the principal root
/// `S_λ` when `|λ| < 1`, and the column `[1, ∓1]` when `λ = ±1`.
pub fn scalar_factor(lambda: f64) -> Result<Matrix> {
    if !(lambda.abs() <= 1.0 + NORM_SLACK) {
        return Err(Error::InvalidConfig(format!("|lambda| = {} exceeds 1", lambda.abs())));
    }
    if (lambda.abs() - 1.0).abs() <= NORM_SLACK {
        return Ok(Matrix::from_row_slice(2, 1, &[1.0, -lambda.signum()]));
    }
    let (a, b) = ((1.0 - lambda).sqrt(), (1.0 + lambda).sqrt());
    Ok(Matrix::from_row_slice(2, 2, &[a + b, a - b, a - b, a + b]) * 0.5)
}

/// Factors the preconditioner along the requested route.
pub fn factorize(l: &Matrix, sigma: f64, tau: f64, route: FactorRoute) -> Result<FactorizationResult> {
    check_cp_condition(l, sigma, tau)?;
    let m = cp_preconditioner(l, sigma, tau);
    let need_equal_steps = || {
        if (sigma - tau).abs() > 1e-15 * sigma.max(tau) {
            Err(Error::InvalidConfig(format!(
                "route {} needs sigma == tau, got {sigma} and {tau}",
                route.name()
            )))
        } else {
            Ok(())
        }
    };
    let c = match route {
        FactorRoute::Cholesky => return factor_cholesky(l, sigma, tau),
        FactorRoute::SqrtSym => {
            need_equal_steps()?;
            sqrt_m_sym(&(l * sigma))? / sigma.sqrt()
        }
        FactorRoute::SqrtPolar => {
            need_equal_steps()?;
            sqrt_m_polar(l, sigma)?
        }
        FactorRoute::Scalar2x2 => {
            if l.shape() != (1, 1) || sigma != 1.0 || tau != 1.0 {
                return Err(Error::InvalidConfig(
                    "scalar_2x2 needs a 1x1 L and sigma = tau = 1".into(),
                ));
            }
            scalar_factor(l[(0, 0)])?
        }
    };
    Ok(result(c, &m, route))
}
