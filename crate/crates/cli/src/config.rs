//! TOML experiment configuration.
//!
//! ```toml
//! method = "cp"            # dr | cp | ryu | mt
//! seed = 7
//! iters = 5000
//! eps = 1e-10
//! lambda = 1.0
//! stride = 10
//! sigma = 0.5
//! tau = 0.5
//! u0 = [1.0, 0.0, 0.0, 0.0]  # optional; random from the seed otherwise
//!
//! [coupling]               # cp only: `matrix` rows, or `rows`/`cols`/`norm`
//! matrix = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [[operator]]
//! kind = "subspace"        # zero | subspace | affine | point | linear
//! span = [[1.0, 0.0]]      # spanning vectors; or `dim` + `rank` for a random one
//!
//! [output]
//! trace = "trace.csv"
//! summary = "summary.json"
//! ```

use serde::Deserialize;

use ppp_core::linalg::{Matrix, Subspace, Vector};
use ppp_core::methods::{MethodDescriptor, MethodFamily};
use ppp_core::monotone::ResolventOp;
use ppp_core::ppp::PppInstance;
use ppp_core::sampling::{random_matrix_with_norm, random_subspace, random_vector, rng, SeededRng};

use crate::error::{CliError, CliResult};

pub const DEFAULT_ITERS: usize = 100_000;
pub const DEFAULT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dr,
    Cp,
    Ryu,
    Mt,
}

impl Method {
    pub fn family(self) -> MethodFamily {
        match self {
            Method::Dr => MethodFamily::DouglasRachford,
            Method::Cp => MethodFamily::ChambollePock,
            Method::Ryu => MethodFamily::Ryu,
            Method::Mt => MethodFamily::MalitskyTam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Zero,
    Subspace,
    Affine,
    Point,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub dim: Option<usize>,
    pub span: Option<Vec<Vec<f64>>>,
    pub rank: Option<usize>,
    pub anchor: Option<Vec<f64>>,
    pub point: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub matrix: Option<Vec<Vec<f64>>>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub norm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub trace: String,
    pub summary: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trace: "trace.csv".into(),
            summary: "summary.json".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    pub iters: Option<usize>,
    pub eps: Option<f64>,
    pub lambda: Option<f64>,
    pub stride: Option<usize>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub u0: Option<Vec<f64>>,
    pub coupling: Option<CouplingSpec>,
    #[serde(default, rename = "operator")]
    pub operators: Vec<OperatorSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams {
    pub iters: usize,
    pub eps: f64,
    pub lambda: f64,
    pub stride: usize,
}

/// A validated, built experiment.
pub struct Problem {
    pub method: Method,
    pub instance: PppInstance,
    pub u0: Vector,
    pub params: RunParams,
    pub output: OutputSpec,
}

pub fn parse(text: &str) -> CliResult<ExperimentConfig> {
    toml::from_str(text).map_err(|e| CliError::config(e.to_string().trim_end().to_string()))
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        self.iters = o.iters.or(self.iters);
        self.lambda = o.lambda.or(self.lambda);
        self.eps = o.eps.or(self.eps);
        self.stride = o.stride.or(self.stride);
    }

    pub fn params(&self) -> CliResult<RunParams> {
        let eps = self.eps.unwrap_or(DEFAULT_EPS);
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CliError::config(format!("eps: must be positive, got {eps}")));
        }
        let lambda = self.lambda.unwrap_or(1.0);
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(CliError::config(format!("lambda: must lie in (0, 2), got {lambda}")));
        }
        let stride = self.stride.unwrap_or(1);
        if stride == 0 {
            return Err(CliError::config("stride: must be at least 1"));
        }
        Ok(RunParams {
            iters: self.iters.unwrap_or(DEFAULT_ITERS),
            eps,
            lambda,
            stride,
        })
    }

    pub fn build(&self) -> CliResult<Problem> {
        let params = self.params()?;
        let mut r = rng(self.seed);
        let expected = match self.method {
            Method::Dr | Method::Cp => Some(2),
            Method::Ryu => Some(3),
            Method::Mt => None,
        };
        let count = self.operators.len();
        match expected {
            Some(n) if count != n => {
                return Err(CliError::config(format!(
                    "operator: method {} needs {n} operators, got {count}",
                    self.method.family().name()
                )))
            }
            None if count < 3 => {
                return Err(CliError::config(format!("operator: method mt needs at least 3 operators, got {count}")))
            }
            _ => {}
        }
        let ops = self
            .operators
            .iter()
            .enumerate()
            .map(|(i, spec)| spec.build(i, &mut r))
            .collect::<CliResult<Vec<_>>>()?;
        let descriptor = if self.method == Method::Cp {
            let sigma = self.sigma.ok_or_else(|| CliError::config("sigma: required for method cp"))?;
            let tau = self.tau.ok_or_else(|| CliError::config("tau: required for method cp"))?;
            let coupling = self.coupling.as_ref().ok_or_else(|| CliError::config("coupling: required for method cp"))?;
            let l = coupling.build(&mut r)?;
            let mut ops = ops.into_iter();
            let (a1, a2) = (ops.next().expect("two operators"), ops.next().expect("two operators"));
            MethodDescriptor::chambolle_pock(a1, a2, l, sigma, tau)
        } else {
            for (field, present) in [("sigma", self.sigma.is_some()), ("tau", self.tau.is_some()), ("coupling", self.coupling.is_some())] {
                if present {
                    return Err(CliError::config(format!("{field}: only used by method cp")));
                }
            }
            MethodDescriptor::new(self.method.family(), ops)
        };
        descriptor.validate()?;
        let instance = descriptor.build()?;
        let u0 = match &self.u0 {
            Some(v) => {
                if v.len() != instance.dim_h() {
                    return Err(CliError::config(format!(
                        "u0: expected {} entries, got {}",
                        instance.dim_h(),
                        v.len()
                    )));
                }
                finite_vector("u0", v)?
            }
            None => random_vector(&mut r, instance.dim_h()),
        };
        Ok(Problem {
            method: self.method,
            instance,
            u0,
            params,
            output: self.output.clone(),
        })
    }
}

fn finite_vector(field: &str, v: &[f64]) -> CliResult<Vector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::config(format!("{field}: entries must be finite")));
    }
    Ok(Vector::from_column_slice(v))
}

/// Parses nested rows into a matrix.
pub fn matrix_from_rows(field: &str, rows: &[Vec<f64>]) -> CliResult<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(CliError::config(format!("{field}: must be a non-empty array of rows")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(CliError::config(format!("{field}: row {i} has {} entries, expected {cols}", rows[i].len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::config(format!("{field}: entries must be finite")));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

impl CouplingSpec {
    fn build(&self, r: &mut SeededRng) -> CliResult<Matrix> {
        match (&self.matrix, self.rows, self.cols) {
            (Some(m), None, None) if self.norm.is_none() => matrix_from_rows("coupling.matrix", m),
            (None, Some(rows), Some(cols)) if rows > 0 && cols > 0 => {
                let norm = self.norm.unwrap_or(1.0);
                if !(norm >= 0.0 && norm.is_finite()) {
                    return Err(CliError::config(format!("coupling.norm: must be non-negative, got {norm}")));
                }
                Ok(random_matrix_with_norm(r, rows, cols, norm))
            }
            _ => Err(CliError::config(
                "coupling: give either `matrix` or positive `rows` and `cols` (with optional `norm`)",
            )),
        }
    }
}

impl OperatorSpec {
    fn field(&self, index: usize, name: &str) -> String {
        format!("operator[{index}].{name}")
    }

    fn reject_extra(&self, index: usize, allowed: &[&str]) -> CliResult<()> {
        let present = [
            ("dim", self.dim.is_some()),
            ("span", self.span.is_some()),
            ("rank", self.rank.is_some()),
            ("anchor", self.anchor.is_some()),
            ("point", self.point.is_some()),
            ("matrix", self.matrix.is_some()),
        ];
        match present.iter().find(|(name, on)| *on && !allowed.contains(name)) {
            Some((name, _)) => Err(CliError::config(format!(
                "{}: not used by kind {:?}",
                self.field(index, name),
                self.kind
            ))),
            None => Ok(()),
        }
    }

    fn subspace(&self, index: usize, r: &mut SeededRng) -> CliResult<Subspace> {
        match (&self.span, self.dim, self.rank) {
            (Some(span), dim, None) => {
                let field = self.field(index, "span");
                if span.is_empty() {
                    let d = dim.filter(|&d| d > 0).ok_or_else(|| {
                        CliError::config(format!("{field}: an empty span needs a positive `dim`"))
                    })?;
                    return Ok(Subspace::trivial(d));
                }
                let vectors = matrix_from_rows(&field, span)?;
                if dim.is_some_and(|d| d != vectors.ncols()) {
                    return Err(CliError::config(format!("{field}: vectors do not have length `dim`")));
                }
                Ok(Subspace::span(&vectors.transpose())?)
            }
            (None, Some(d), Some(k)) if d > 0 => {
                if k > d {
                    return Err(CliError::config(format!("{}: exceeds dim {d}", self.field(index, "rank"))));
                }
                Ok(random_subspace(r, d, k))
            }
            _ => Err(CliError::config(format!(
                "operator[{index}]: a subspace needs `span` or positive `dim` with `rank`"
            ))),
        }
    }

    pub fn build(&self, index: usize, r: &mut SeededRng) -> CliResult<ResolventOp> {
        match self.kind {
            OperatorKind::Zero => {
                self.reject_extra(index, &["dim"])?;
                let d = self.dim.filter(|&d| d > 0).ok_or_else(|| {
                    CliError::config(format!("{}: required and positive", self.field(index, "dim")))
                })?;
                Ok(ResolventOp::zero(d))
            }
            OperatorKind::Subspace => {
                self.reject_extra(index, &["dim", "span", "rank"])?;
                Ok(ResolventOp::normal_cone(self.subspace(index, r)?))
            }
            OperatorKind::Affine => {
                self.reject_extra(index, &["dim", "span", "rank", "anchor"])?;
                let field = self.field(index, "anchor");
                let anchor = self.anchor.as_deref().ok_or_else(|| CliError::config(format!("{field}: required")))?;
                let s = self.subspace(index, r)?;
                if anchor.len() != s.ambient_dim() {
                    return Err(CliError::config(format!("{field}: expected {} entries", s.ambient_dim())));
                }
                Ok(ResolventOp::normal_cone_affine(s, finite_vector(&field, anchor)?)?)
            }
            OperatorKind::Point => {
                self.reject_extra(index, &["point"])?;
                let field = self.field(index, "point");
                match self.point.as_deref() {
                    Some(p) if !p.is_empty() => Ok(ResolventOp::normal_cone_point(finite_vector(&field, p)?)?),
                    _ => Err(CliError::config(format!("{field}: required and non-empty"))),
                }
            }
            OperatorKind::Linear => {
                self.reject_extra(index, &["matrix"])?;
                let field = self.field(index, "matrix");
                let rows = self.matrix.as_deref().ok_or_else(|| CliError::config(format!("{field}: required")))?;
                ResolventOp::linear_monotone(matrix_from_rows(&field, rows)?)
                    .map_err(|e| CliError::config(format!("{field}: {e}")))
            }
        }
    }
}
