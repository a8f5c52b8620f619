//! Dense small-matrix numerics and subspace algebra.
//!
//! Subspaces are always carried as orthonormal bases. Projectors, complements,
//! sums and intersections are formed on demand from those bases, so every
//! subspace operation funnels through a single rank-revealing orthonormalization.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use twofloat::TwoFloat;

use crate::error::{check_dim, Error, Result};
pub use crate::decomp::{numerical_rank, svd, Svd};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `DEFAULT_RANK_TOL * sigma_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOL, 0]` are clamped to zero by the PSD routines.
pub const PSD_TOL: f64 = 1e-10;
/// Largest entrywise asymmetry accepted where a symmetric matrix is required.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Pivoted Cholesky stops once the remaining diagonal falls below this
/// fraction of the largest initial diagonal entry.
pub const CHOLESKY_RANK_TOL: f64 = 1e-12;

const ORTHONORMAL_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite_matrix(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

/// Largest entrywise deviation from symmetry.
pub fn asymmetry(a: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

fn ensure_square(a: &Matrix, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

fn symmetrized(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Roundoff level of an eigenvalue computed from an `n x n` symmetric matrix
/// whose spectrum has magnitude `scale`.
fn eigen_noise_floor(n: usize, scale: f64) -> f64 {
    32.0 * n.max(1) as f64 * f64::EPSILON * scale
}

/// Linear subspace of `R^d` held as a matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// The subspace `{0}` of `R^d`.
    pub fn trivial(ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    /// All of `R^d`.
    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Wraps a basis that is already orthonormal (checked to 1e-12).
    pub fn from_orthonormal(basis: Matrix) -> Result<Self> {
        ensure_finite_matrix(&basis, "subspace basis")?;
        if basis.ncols() > basis.nrows() {
            return Err(Error::InvalidInput(format!(
                "{} basis vectors in R^{}",
                basis.ncols(),
                basis.nrows()
            )));
        }
        let gram = basis.transpose() * &basis;
        let defect = (gram - Matrix::identity(basis.ncols(), basis.ncols())).amax();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "basis is not orthonormal (Gram defect {defect:e})"
            )));
        }
        Ok(Subspace { basis })
    }

    /// Span of the given columns, using the default rank tolerance.
    pub fn span(columns: &Matrix) -> Result<Self> {
        orthonormal_basis(columns, DEFAULT_RANK_TOL)
    }

    /// Span of a list of vectors of common length `ambient_dim`.
    pub fn span_of(ambient_dim: usize, vectors: &[Vector]) -> Result<Self> {
        for v in vectors {
            check_dim("Subspace::span_of", ambient_dim, v.len())?;
        }
        if vectors.is_empty() {
            return Ok(Subspace::trivial(ambient_dim));
        }
        Subspace::span(&Matrix::from_columns(vectors))
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn is_trivial(&self) -> bool {
        self.rank() == 0
    }

    /// The orthogonal projector `Q Q^T`.
    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, v: &Vector) -> Result<Vector> {
        check_dim("Subspace::project", self.ambient_dim(), v.len())?;
        Ok(self.project_unchecked(v))
    }

    pub(crate) fn project_unchecked(&self, v: &Vector) -> Vector {
        if self.rank() == 0 {
            return Vector::zeros(v.len());
        }
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn distance(&self, v: &Vector) -> Result<f64> {
        Ok((v - self.project(v)?).norm())
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Subspace {
        let d = self.ambient_dim();
        match self.rank() {
            0 => return Subspace::full(d),
            r if r == d => return Subspace::trivial(d),
            _ => {}
        }
        // I - QQ^T has eigenvalues 1 (multiplicity d - r) and 0; the split at
        // 1/2 is immune to roundoff.
        let residual = Matrix::identity(d, d) - self.projector();
        let eig = SymmetricEigen::new(symmetrized(&residual));
        let mut picked: Vec<(f64, Vector)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &lam)| lam > 0.5)
            .map(|(i, &lam)| (lam, eig.eigenvectors.column(i).into_owned()))
            .collect();
        picked.sort_by(|a, b| b.0.total_cmp(&a.0));
        let columns: Vec<Vector> = picked.into_iter().map(|(_, v)| v).collect();
        if columns.is_empty() {
            Subspace::trivial(d)
        } else {
            Subspace {
                basis: Matrix::from_columns(&columns),
            }
        }
    }

    /// `self + other`.
    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        check_dim("Subspace::sum", self.ambient_dim(), other.ambient_dim())?;
        let d = self.ambient_dim();
        let mut cat = Matrix::zeros(d, self.rank() + other.rank());
        cat.columns_mut(0, self.rank()).copy_from(&self.basis);
        cat.columns_mut(self.rank(), other.rank())
            .copy_from(&other.basis);
        Ok(basis_with_threshold(&cat, DEFAULT_RANK_TOL, 1.0))
    }

    /// `self ∩ other`, computed as the complement of the sum of complements.
    pub fn intersect(&self, other: &Subspace) -> Result<Subspace> {
        check_dim("Subspace::intersect", self.ambient_dim(), other.ambient_dim())?;
        Ok(self.complement().sum(&other.complement())?.complement())
    }

    /// Cartesian product `self × other ⊂ R^{d1 + d2}`.
    pub fn product(&self, other: &Subspace) -> Subspace {
        let (d1, d2) = (self.ambient_dim(), other.ambient_dim());
        let (r1, r2) = (self.rank(), other.rank());
        let mut basis = Matrix::zeros(d1 + d2, r1 + r2);
        basis.view_mut((0, 0), (d1, r1)).copy_from(&self.basis);
        basis.view_mut((d1, r1), (d2, r2)).copy_from(&other.basis);
        Subspace { basis }
    }

    /// Cartesian product of a list of subspaces, in order.
    pub fn product_all(parts: &[Subspace]) -> Subspace {
        parts
            .iter()
            .skip(1)
            .fold(parts.first().cloned().unwrap_or_else(|| Subspace::trivial(0)), |acc, s| {
                acc.product(s)
            })
    }

    /// Image `map(self)` of the subspace under a linear map.
    pub fn image(&self, map: &Matrix) -> Result<Subspace> {
        check_dim("Subspace::image", self.ambient_dim(), map.ncols())?;
        let cols = map * &self.basis;
        Ok(basis_with_threshold(&cols, DEFAULT_RANK_TOL, operator_norm(map)))
    }

    /// Largest distance from a basis vector of `self` to `other`; zero iff
    /// `self ⊆ other` (up to roundoff).
    pub fn containment_residual(&self, other: &Subspace) -> Result<f64> {
        check_dim("Subspace::containment_residual", other.ambient_dim(), self.ambient_dim())?;
        let mut worst = 0.0f64;
        for col in self.basis.column_iter() {
            let v = col.into_owned();
            worst = worst.max((&v - other.project_unchecked(&v)).norm());
        }
        Ok(worst)
    }

    /// Mutual containment residual; zero iff both describe the same subspace.
    pub fn equality_residual(&self, other: &Subspace) -> Result<f64> {
        Ok(self
            .containment_residual(other)?
            .max(other.containment_residual(self)?))
    }
}

/// Orthonormal basis of the column span; singular values below
/// `tol * sigma_max` are treated as zero.
pub fn orthonormal_basis(columns: &Matrix, tol: f64) -> Result<Subspace> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("rank tolerance must be positive, got {tol}")));
    }
    ensure_finite_matrix(columns, "columns")?;
    Ok(basis_with_threshold(columns, tol, 0.0))
}

/// Rank decisions use `tol * max(sigma_max, reference_scale)`, so that a
/// matrix that is pure roundoff relative to its origin comes out rank zero.
fn basis_with_threshold(columns: &Matrix, tol: f64, reference_scale: f64) -> Subspace {
    let d = columns.nrows();
    if d == 0 || columns.ncols() == 0 {
        return Subspace::trivial(d);
    }
    let svd = svd(columns);
    let u = svd.u;
    let sigma_max = svd.singular_values[0];
    if sigma_max == 0.0 {
        return Subspace::trivial(d);
    }
    let cutoff = tol * sigma_max.max(reference_scale);
    let mut picked: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cutoff)
        .map(|(i, &s)| (s, i))
        .collect();
    picked.sort_by(|a, b| b.0.total_cmp(&a.0));
    if picked.is_empty() {
        return Subspace::trivial(d);
    }
    let cols: Vec<Vector> = picked.iter().map(|&(_, i)| u.column(i).into_owned()).collect();
    Subspace {
        basis: Matrix::from_columns(&cols),
    }
}

/// Free-function form of [`Subspace::project`].
pub fn project(s: &Subspace, v: &Vector) -> Result<Vector> {
    s.project(v)
}

/// Null space `{x : A x = 0}`. Rank is judged relative to
/// `max(sigma_max(A), reference_scale)`.
pub fn kernel(a: &Matrix, tol: f64, reference_scale: f64) -> Subspace {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Subspace::full(n);
    }
    basis_with_threshold(&a.transpose(), tol, reference_scale).complement()
}

/// `{x : L x ∈ V}`, the kernel of `P_{V^⊥} L`.
pub fn preimage(l: &Matrix, v: &Subspace) -> Result<Subspace> {
    check_dim("preimage", v.ambient_dim(), l.nrows())?;
    ensure_finite_matrix(l, "L")?;
    let vperp = v.complement();
    if vperp.is_trivial() {
        return Ok(Subspace::full(l.ncols()));
    }
    // Coordinates of P_{V^⊥} L in the basis of V^⊥ have the same kernel.
    let reduced = vperp.basis().transpose() * l;
    Ok(kernel(&reduced, DEFAULT_RANK_TOL, operator_norm(l)))
}

/// Applies `f` to the eigenvalues of a symmetric matrix.
pub fn map_symmetric(a: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    let skew = asymmetry(a);
    if skew > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (asymmetry {skew:e})")));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrized(a));
    let mapped = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    Ok(symmetrized(&(v * Matrix::from_diagonal(&mapped) * v.transpose())))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(symmetrized(a)).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Principal (symmetric PSD) square root.
///
/// Eigenvalues in `[-PSD_TOL, 0]` and positive eigenvalues at the roundoff
/// level of the spectrum are set to zero before taking roots.
pub fn principal_sqrt(a: &Matrix) -> Result<Matrix> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    let skew = asymmetry(a);
    if skew > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (asymmetry {skew:e})")));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(symmetrized(a));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }
    let scale = eig.eigenvalues.amax();
    let floor = eigen_noise_floor(n, scale);
    let roots = eig
        .eigenvalues
        .map(|lam| if lam <= floor { 0.0 } else { lam.sqrt() });
    let v = &eig.eigenvectors;
    Ok(symmetrized(&(v * Matrix::from_diagonal(&roots) * v.transpose())))
}

/// Spectral radius, computed by Francis QR in double-double arithmetic.
///
/// Defective eigenvalues are the reason: in f64 a nilpotent Jordan block of
/// size two is only resolved to about 1.5e-8, in double-double to ~1e-16.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    let n = a.nrows();
    let entries: Vec<TwoFloat> = (0..n * n).map(|k| TwoFloat::from(a[(k / n, k % n)])).collect();
    let ev = crate::eigen::eigenvalues(n, &entries).ok_or_else(|| {
        Error::NumericalFailure(format!("QR iteration did not converge for {n}x{n} matrix"))
    })?;
    Ok(ev
        .iter()
        .map(|&(re, im)| {
            let m = (re * re + im * im).sqrt();
            m.hi() + m.lo()
        })
        .fold(0.0, f64::max))
}

/// Spectral radius from nalgebra's f64 real Schur form. Cheaper than
/// [`spectral_radius`] but limited to ~sqrt(eps) near defective eigenvalues.
pub fn spectral_radius_f64(a: &Matrix) -> Result<f64> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n).ok_or_else(|| {
        Error::NumericalFailure(format!("Schur iteration did not converge for {n}x{n} matrix"))
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Spectral norm (largest singular value).
pub fn operator_norm(a: &Matrix) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    svd(a).singular_values[0]
}

/// Moore-Penrose pseudo-inverse; singular values below `tol * sigma_max`
/// are treated as zero.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Result<Matrix> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("pseudo-inverse tolerance must be positive, got {tol}")));
    }
    ensure_finite_matrix(a, "matrix")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Matrix::zeros(n, m));
    }
    let svd = svd(a);
    let cutoff = tol * svd.singular_values[0];
    let mut out = Matrix::zeros(n, m);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (svd.v.column(i) * svd.u.column(i).transpose()) / s;
        }
    }
    Ok(out)
}

/// Rank-revealing Cholesky factorization with diagonal pivoting.
///
/// `lower` is `n x rank` and lower trapezoidal in pivot order: with
/// `P` the pivot permutation, `P A P^T = lower * lower^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
    perm: Vec<usize>,
}

impl Cholesky {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// `perm[i]` is the original index of pivoted row `i`.
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn rank(&self) -> usize {
        self.lower.ncols()
    }

    /// `G` with `G G^T = A` in the original ordering.
    pub fn factor(&self) -> Matrix {
        let mut g = Matrix::zeros(self.lower.nrows(), self.lower.ncols());
        for (i, &p) in self.perm.iter().enumerate() {
            g.row_mut(p).copy_from(&self.lower.row(i));
        }
        g
    }
}

/// Pivoted Cholesky of a symmetric PSD matrix. Semidefinite input yields a
/// factor with as many columns as the numerical rank.
pub fn cholesky(a: &Matrix) -> Result<Cholesky> {
    ensure_square(a, "matrix")?;
    ensure_finite_matrix(a, "matrix")?;
    let skew = asymmetry(a);
    if skew > SYMMETRY_TOL {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (asymmetry {skew:e})")));
    }
    let n = a.nrows();
    let mut work = symmetrized(a);
    let mut low = Matrix::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    let max_diag = (0..n).map(|i| work[(i, i)]).fold(0.0, f64::max);
    let threshold = CHOLESKY_RANK_TOL * max_diag;
    let negative_limit = -PSD_TOL * max_diag.max(1.0);
    let mut rank = 0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, work[(i, i)]))
            .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= threshold {
            let min_diag = (k..n).map(|i| work[(i, i)]).fold(f64::INFINITY, f64::min);
            if min_diag < negative_limit {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min_diag });
            }
            break;
        }
        if p != k {
            work.swap_rows(k, p);
            work.swap_columns(k, p);
            low.swap_rows(k, p);
            perm.swap(k, p);
        }
        let lkk = pivot.sqrt();
        low[(k, k)] = lkk;
        for i in (k + 1)..n {
            low[(i, k)] = work[(i, k)] / lkk;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..=i {
                let upd = work[(i, j)] - low[(i, k)] * low[(j, k)];
                work[(i, j)] = upd;
                work[(j, i)] = upd;
            }
        }
        rank = k + 1;
    }
    if rank == n || rank == 0 {
        let diag_min = (rank..n).map(|i| work[(i, i)]).fold(f64::INFINITY, f64::min);
        if rank == 0 && n > 0 && diag_min < negative_limit {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: diag_min });
        }
    }
    Ok(Cholesky {
        lower: low.columns(0, rank).into_owned(),
        perm,
    })
}

/// Concatenates vectors end to end.
pub fn concat(parts: &[&Vector]) -> Vector {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(len);
    let mut offset = 0;
    for p in parts {
        out.rows_mut(offset, p.len()).copy_from(p);
        offset += p.len();
    }
    out
}

/// Splits `v` into consecutive blocks of the given sizes.
pub fn split(v: &Vector, sizes: &[usize]) -> Vec<Vector> {
    let mut offset = 0;
    sizes
        .iter()
        .map(|&s| {
            let block = v.rows(offset, s).into_owned();
            offset += s;
            block
        })
        .collect()
}
