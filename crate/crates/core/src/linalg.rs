//! Small dense linear algebra: least squares, singular values and the
//! symmetric tridiagonal eigenproblem.

use crate::real::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.at(i, j) * x[j]).sum()).collect()
    }
}

/// Minimises `‖A x − b‖₂` by Householder QR (`rows ≥ cols`); `None` when
/// `A` is numerically rank deficient.
pub(crate) fn least_squares<T: Real>(a: &Dense<T>, b: &[T]) -> Option<Vec<T>> {
    let (m, n) = (a.rows, a.cols);
    if m < n || b.len() != m {
        return None;
    }
    let mut r = a.clone();
    let mut y = b.to_vec();
    let mut diag = vec![T::zero(); n];
    for k in 0..n {
        let norm = (k..m).map(|i| r.at(i, k) * r.at(i, k)).sum::<T>().sqrt();
        if norm == T::zero() {
            return None;
        }
        let alpha = if r.at(k, k) > T::zero() { -norm } else { norm };
        // v = x − alpha e_k, stored in place below the diagonal
        r.set(k, k, r.at(k, k) - alpha);
        let vnorm_sq: T = (k..m).map(|i| r.at(i, k) * r.at(i, k)).sum();
        if vnorm_sq > T::zero() {
            for j in k + 1..n {
                let dot: T = (k..m).map(|i| r.at(i, k) * r.at(i, j)).sum();
                let f = T::lit(2.0) * dot / vnorm_sq;
                for i in k..m {
                    let v = r.at(i, j) - f * r.at(i, k);
                    r.set(i, j, v);
                }
            }
            let dot: T = (k..m).map(|i| r.at(i, k) * y[i]).sum();
            let f = T::lit(2.0) * dot / vnorm_sq;
            for (i, yi) in y.iter_mut().enumerate().take(m).skip(k) {
                *yi -= f * r.at(i, k);
            }
        }
        diag[k] = alpha;
    }
    let largest = diag.iter().fold(T::zero(), |acc, d| acc.max(d.abs()));
    if diag.iter().any(|d| d.abs() <= largest * T::epsilon() * T::from_usize_lossy(m)) {
        return None;
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut acc = y[k];
        for j in k + 1..n {
            acc -= r.at(k, j) * x[j];
        }
        x[k] = acc / diag[k];
    }
    Some(x)
}

/// Singular values by one-sided Jacobi rotations, descending.
pub(crate) fn singular_values<T: Real>(a: &Dense<T>) -> Vec<T> {
    let (m, n) = (a.rows, a.cols);
    // columns as contiguous vectors
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| (0..m).map(|i| a.at(i, j)).collect()).collect();
    let tol = T::epsilon() * T::from_usize_lossy(m);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: T = cols[p].iter().map(|v| *v * *v).sum();
                let beta: T = cols[q].iter().map(|v| *v * *v).sum();
                let gamma: T = cols[p].iter().zip(&cols[q]).map(|(x, y)| *x * *y).sum();
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = c * u - s * v;
                    *y = s * u + c * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = cols.iter().map(|c| c.iter().map(|v| *v * *v).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sv
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal
/// `diag` and off-diagonal `off` (`off[i]` couples `i` and `i + 1`), by QL
/// iteration with implicit shifts. Returns the eigenvalues and, as rows, the
/// orthonormal eigenvectors; `None` if an eigenvalue fails to converge.
pub(crate) fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Option<(Vec<T>, Vec<Vec<T>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![T::zero(); n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|k| if i == k { T::one() } else { T::zero() }).collect())
        .collect();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (lo, hi) = z.split_at_mut(i + 1);
                let (zi, zj) = (&mut lo[i], &mut hi[0]);
                for k in 0..n {
                    let f = zj[k];
                    zj[k] = s * zi[k] + c * f;
                    zi[k] = c * zi[k] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Some((d, z))
}
