//! Dense decompositions written out locally: a one-sided (Hestenes) Jacobi
//! SVD and a Householder QR with column pivoting for rank checks.
//!
//! Jacobi is slower than bidiagonalization but simple and robust: singular
//! values come out to high relative precision and nothing special happens
//! for repeated or zero singular values.

use nalgebra::DMatrix;

type Matrix = DMatrix<f64>;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) V^T` with `s` sorted in decreasing order.
///
/// `U` is `m x k` and `V` is `n x k` with `k = min(m, n)`. Columns of `U`
/// belonging to zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut b = a.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (b[(i, p)], b[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (b.column(j).norm(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (k, &(s, j)) in order.iter().enumerate() {
        if s > 0.0 {
            u.set_column(k, &(b.column(j) / s));
        }
        vs.set_column(k, &v.column(j));
        singular_values.push(s);
    }
    Svd {
        u,
        singular_values,
        v: vs,
    }
}

/// Numerical rank from Householder QR with column pivoting: the number of
/// `|R_kk|` above `tol * |R_11|`. Far cheaper than an SVD for big matrices.
pub fn numerical_rank(a: &Matrix, tol: f64) -> usize {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut norms: Vec<f64> = (0..n).map(|j| r.column(j).norm_squared()).collect();
    let mut first = None;
    for k in 0..m.min(n) {
        // Pivot on the largest remaining column, recomputed exactly to avoid
        // the drift of downdated norms.
        for (j, norm) in norms.iter_mut().enumerate().skip(k) {
            *norm = r.view((k, j), (m - k, 1)).norm_squared();
        }
        let (p, &best) = norms[k..]
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, v)| (i + k, v))
            .expect("non-empty range");
        r.swap_columns(k, p);
        norms.swap(k, p);
        let alpha = best.sqrt();
        let top = *first.get_or_insert(alpha);
        if alpha <= tol * top || alpha == 0.0 {
            return k;
        }
        let mut v = r.view((k, k), (m - k, 1)).into_owned();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vv = v.norm_squared();
        for j in k..n {
            let mut col = r.view_mut((k, j), (m - k, 1));
            let f = 2.0 * v.dot(&col) / vv;
            col -= &v * f;
        }
    }
    m.min(n)
}

fn rotate(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}
