//! Small dense linear algebra helpers: LU with partial pivoting and
//! Cholesky. Matrices are flat row-major `n x n`.

/// LU factorization with partial pivoting, in place.
/// Returns the pivot permutation and the sign of the permutation, or
/// `None` if the matrix is numerically singular.
pub fn lu_factor(a: &mut [f64], n: usize) -> Option<(Vec<usize>, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best < f64::MIN_POSITIVE.sqrt() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            perm.swap(pivot, col);
            sign = -sign;
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            a[r * n + col] = f;
            for k in (col + 1)..n {
                a[r * n + k] -= f * a[col * n + k];
            }
        }
    }
    Some((perm, sign))
}

pub fn lu_det(lu: &[f64], n: usize, sign: f64) -> f64 {
    let mut det = sign;
    for i in 0..n {
        det *= lu[i * n + i];
    }
    det
}

/// Solve `A x = b` given the in-place factorization from [`lu_factor`].
pub fn lu_solve(lu: &[f64], n: usize, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for r in 1..n {
        for c in 0..r {
            x[r] -= lu[r * n + c] * x[c];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            x[r] -= lu[r * n + c] * x[c];
        }
        x[r] /= lu[r * n + r];
    }
    x
}

/// Determinant of a small dense matrix (destroys nothing; copies).
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut work = a.to_vec();
    match lu_factor(&mut work, n) {
        Some((_, sign)) => lu_det(&work, n, sign),
        None => 0.0,
    }
}

/// In-place lower Cholesky factor of a symmetric positive-definite matrix.
/// Returns false if a non-positive pivot is met.
pub fn cholesky_factor(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    true
}

/// Solve `L L^T x = b` given the factor from [`cholesky_factor`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for r in 0..n {
        for c in 0..r {
            let v = l[r * n + c] * x[c];
            x[r] -= v;
        }
        x[r] /= l[r * n + r];
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            let v = l[c * n + r] * x[c];
            x[r] -= v;
        }
        x[r] /= l[r * n + r];
    }
    x
}
