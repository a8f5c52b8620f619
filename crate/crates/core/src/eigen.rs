//! Eigenvalues of a general real matrix in any `Float` type.
//!
//! Householder reduction to upper Hessenberg form followed by the Francis
//! implicit double-shift QR iteration. Used with a double-double scalar when
//! f64 accuracy is not enough: a defective eigenvalue of multiplicity `m`
//! is only resolved to about `eps^(1/m)`, so a nilpotent 2x2 Jordan block
//! costs half the digits of the working precision.

use num_traits::Float;

const MAX_ITERS_PER_EIGENVALUE: usize = 60;

/// Dense square matrix stored with 1-based indexing (row/column 0 unused),
/// which keeps the QR sweep close to its textbook form.
struct Work<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Float> Work<F> {
    fn at(&self, i: usize, j: usize) -> F {
        self.data[i * (self.n + 1) + j]
    }

    fn set(&mut self, i: usize, j: usize, v: F) {
        let n = self.n;
        self.data[i * (n + 1) + j] = v;
    }
}

fn sign<F: Float>(a: F, b: F) -> F {
    if b >= F::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hessenberg<F: Float>(a: &mut Work<F>) {
    let n = a.n;
    let two = F::one() + F::one();
    for k in 1..n.saturating_sub(1) {
        // Annihilate a[k+2.., k] with a reflector acting on rows/cols k+1..=n.
        let mut norm2 = F::zero();
        for i in k + 1..=n {
            norm2 = norm2 + a.at(i, k) * a.at(i, k);
        }
        if norm2 == F::zero() {
            continue;
        }
        let x0 = a.at(k + 1, k);
        let alpha = -sign(norm2.sqrt(), x0);
        let mut v: Vec<F> = (k + 1..=n).map(|i| a.at(i, k)).collect();
        v[0] = v[0] - alpha;
        let vv = v.iter().fold(F::zero(), |s, &x| s + x * x);
        if vv == F::zero() {
            continue;
        }
        for j in 1..=n {
            let mut s = F::zero();
            for (t, &vt) in v.iter().enumerate() {
                s = s + vt * a.at(k + 1 + t, j);
            }
            let f = two * s / vv;
            for (t, &vt) in v.iter().enumerate() {
                let cur = a.at(k + 1 + t, j);
                a.set(k + 1 + t, j, cur - f * vt);
            }
        }
        for i in 1..=n {
            let mut s = F::zero();
            for (t, &vt) in v.iter().enumerate() {
                s = s + a.at(i, k + 1 + t) * vt;
            }
            let f = two * s / vv;
            for (t, &vt) in v.iter().enumerate() {
                let cur = a.at(i, k + 1 + t);
                a.set(i, k + 1 + t, cur - f * vt);
            }
        }
        a.set(k + 1, k, alpha);
        for i in k + 2..=n {
            a.set(i, k, F::zero());
        }
    }
}

/// Eigenvalues `(re, im)` of the row-major `n x n` matrix `entries`, or
/// `None` if the QR iteration stalls.
pub(crate) fn eigenvalues<F: Float>(n: usize, entries: &[F]) -> Option<Vec<(F, F)>> {
    assert_eq!(entries.len(), n * n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut a = Work { n, data: vec![F::zero(); (n + 1) * (n + 1)] };
    for i in 0..n {
        for j in 0..n {
            a.set(i + 1, j + 1, entries[i * n + j]);
        }
    }
    hessenberg(&mut a);
    hqr(&mut a)
}

#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr<F: Float>(a: &mut Work<F>) -> Option<Vec<(F, F)>> {
    let n = a.n;
    let zero = F::zero();
    let half = F::from(0.5).unwrap();
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];

    let mut anorm = zero;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm = anorm + a.at(i, j).abs();
        }
    }

    let mut nn = n;
    let mut t = zero;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z) =
        (zero, zero, zero, zero, zero, zero, zero, zero);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                s = a.at(l - 1, l - 1).abs() + a.at(l, l).abs();
                if s == zero {
                    s = anorm;
                }
                if a.at(l, l - 1).abs() + s == s {
                    a.set(l, l - 1, zero);
                    break;
                }
                l -= 1;
            }
            x = a.at(nn, nn);
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
                break;
            }
            y = a.at(nn - 1, nn - 1);
            w = a.at(nn, nn - 1) * a.at(nn - 1, nn);
            if l == nn - 1 {
                p = half * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x = x + t;
                if q >= zero {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != zero {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = zero;
                    wi[nn] = zero;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn = nn.saturating_sub(2);
                break;
            }

            if its == MAX_ITERS_PER_EIGENVALUE {
                return None;
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t = t + x;
                for i in 1..=nn {
                    let d = a.at(i, i);
                    a.set(i, i, d - x);
                }
                s = a.at(nn, nn - 1).abs() + a.at(nn - 1, nn - 2).abs();
                x = F::from(0.75).unwrap() * s;
                y = x;
                w = F::from(-0.4375).unwrap() * s * s;
            }
            its += 1;

            // Look for two consecutive small subdiagonal elements.
            let mut m = nn - 2;
            loop {
                z = a.at(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / a.at(m + 1, m) + a.at(m, m + 1);
                q = a.at(m + 1, m + 1) - z - r - s;
                r = a.at(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p = p / s;
                q = q / s;
                r = r / s;
                if m == l {
                    break;
                }
                let u = a.at(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a.at(m - 1, m - 1).abs() + z.abs() + a.at(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a.set(i, i - 2, zero);
                if i != m + 2 {
                    a.set(i, i - 3, zero);
                }
            }

            // Double-shift QR sweep on rows/columns l..=nn.
            for k in m..nn {
                if k != m {
                    p = a.at(k, k - 1);
                    q = a.at(k + 1, k - 1);
                    r = zero;
                    if k != nn - 1 {
                        r = a.at(k + 2, k - 1);
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != zero {
                        p = p / x;
                        q = q / x;
                        r = r / x;
                    }
                }
                s = sign((p * p + q * q + r * r).sqrt(), p);
                if s == zero {
                    continue;
                }
                if k == m {
                    if l != m {
                        let v = a.at(k, k - 1);
                        a.set(k, k - 1, -v);
                    }
                } else {
                    a.set(k, k - 1, -s * x);
                }
                p = p + s;
                x = p / s;
                y = q / s;
                z = r / s;
                q = q / p;
                r = r / p;
                for j in k..=nn {
                    p = a.at(k, j) + q * a.at(k + 1, j);
                    if k != nn - 1 {
                        p = p + r * a.at(k + 2, j);
                        let v = a.at(k + 2, j);
                        a.set(k + 2, j, v - p * z);
                    }
                    let v = a.at(k + 1, j);
                    a.set(k + 1, j, v - p * y);
                    let v = a.at(k, j);
                    a.set(k, j, v - p * x);
                }
                let mmin = nn.min(k + 3);
                for i in l..=mmin {
                    p = x * a.at(i, k) + y * a.at(i, k + 1);
                    if k != nn - 1 {
                        p = p + z * a.at(i, k + 2);
                        let v = a.at(i, k + 2);
                        a.set(i, k + 2, v - p * r);
                    }
                    let v = a.at(i, k + 1);
                    a.set(i, k + 1, v - p * q);
                    let v = a.at(i, k);
                    a.set(i, k, v - p);
                }
            }
        }
    }
    Some((1..=n).map(|i| (wr[i], wi[i])).collect())
}
