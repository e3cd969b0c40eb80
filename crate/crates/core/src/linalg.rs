//! Small dense kernels used by the synthesis and sampling code.
//!
//! All routines target the tiny matrices that appear in this crate (n <= 10,
//! n^2 <= 100 for the vectorized Lyapunov system), so they favour exactness
//! and determinism over asymptotic speed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Solves `a * x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || rhs.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut m = a.clone();
    let mut b = rhs.clone();
    let scale = m.amax().max(f64::MIN_POSITIVE);

    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[(r, col)]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("non-empty pivot range");
        if pivot.abs() <= scale * 1e-14 {
            return Err(Error::Singular { column: col, pivot });
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            b.swap_rows(pivot_row, col);
        }
        for r in (col + 1)..n {
            let factor = m[(r, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            b[r] -= factor * b[col];
        }
    }

    let mut x = DVector::zeros(n);
    for r in (0..n).rev() {
        let tail: f64 = ((r + 1)..n).map(|c| m[(r, c)] * x[c]).sum();
        x[r] = (b[r] - tail) / m[(r, r)];
    }
    Ok(x)
}

/// Largest absolute difference between `m` and its transpose.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn ensure_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * (1.0 + m.amax()) {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Root-free symmetric factorization `m = L D L^T`; returns the pivots of `D`.
///
/// All pivots positive is equivalent to positive definiteness.
pub fn ldlt_pivots(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0; n];
    for j in 0..n {
        let mut dj = m[(j, j)];
        for k in 0..j {
            dj -= l[(j, k)] * l[(j, k)] * d[k];
        }
        d[j] = dj;
        if dj == 0.0 {
            // Remaining entries are meaningless; the caller only checks signs.
            for rest in d.iter_mut().skip(j + 1) {
                *rest = 0.0;
            }
            break;
        }
        for i in (j + 1)..n {
            let mut lij = m[(i, j)];
            for k in 0..j {
                lij -= l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = lij / dj;
        }
    }
    d
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    ldlt_pivots(m).iter().all(|&p| p > 0.0)
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi rotations until the largest off-diagonal entry is below 1e-12
/// (relative to the matrix scale).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    ensure_symmetric(m)?;
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.amax().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_max(&a);
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_max(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(a[(i, j)].abs());
            }
        }
    }
    worst
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Smallest eigenvalue of a symmetric matrix (closed form for 2x2).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    ensure_symmetric(m)?;
    if m.nrows() == 2 {
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        return Ok(mean - radius);
    }
    Ok(symmetric_eigen(m)?.values[0])
}

/// `m^power` for a symmetric positive definite matrix via its eigenbasis.
pub fn spd_power(m: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(m)?;
    if eig.values.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let n = m.nrows();
    let scaled = DMatrix::from_fn(n, n, |r, c| eig.vectors[(r, c)] * eig.values[c].powf(power));
    Ok(&scaled * eig.vectors.transpose())
}

/// Quadratic form `v^T m v`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}
