//! Gain design and quadratic-Lyapunov robustness analysis.
//!
//! The model loop gain `k*` comes from pole placement on the integrator chain,
//! the process loop gain is its high-gain scaling `k~^T = k*^T D^-1 / eps` with
//! `D = diag(eps^(n-1), ..., eps, 1)`. Both loops share the Lyapunov matrix `P`
//! solving `(A + b k*^T)^T P + P (A + b k*^T) = -I`, from which the robustness
//! bounds of the MFC, single-loop and single-loop high-gain designs follow.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::BrunovskyDims;

const CONJUGATE_TOL: f64 = 1e-9;

/// Gains of both loops for a given time-scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub k_star: Vec<f64>,
    pub k_tilde: Vec<f64>,
    pub epsilon: f64,
    /// Diagonal of the scaling matrix `D`.
    pub d: Vec<f64>,
}

impl GainSet {
    pub fn new(k_star: Vec<f64>, epsilon: f64) -> Result<Self> {
        let (k_tilde, d) = high_gain(&k_star, epsilon)?;
        Ok(Self {
            k_star,
            k_tilde,
            epsilon,
            d,
        })
    }

    /// Places every model-loop pole and scales the process loop by `epsilon`.
    pub fn from_poles(roots: &[Complex64], epsilon: f64) -> Result<Self> {
        let k_star = place_poles(roots.len(), roots)?;
        Self::new(k_star, epsilon)
    }

    pub fn n(&self) -> usize {
        self.k_star.len()
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.d.clone()))
    }

    /// Closed model-loop matrix `A + b k*^T`.
    pub fn model_closed_loop(&self) -> DMatrix<f64> {
        closed_loop_matrix(&self.k_star)
    }
}

/// Companion matrix `A + b k^T` for the integrator chain.
pub fn closed_loop_matrix(k: &[f64]) -> DMatrix<f64> {
    let n = k.len();
    let mut m = BrunovskyDims::new(n.max(1)).expect("n >= 1").a();
    for (j, kj) in k.iter().enumerate() {
        m[(n - 1, j)] += kj;
    }
    m
}

/// State feedback for the integrator chain placing the closed-loop roots.
///
/// For `prod(s - r_i) = s^n + a_{n-1} s^{n-1} + ... + a_0` the gain is
/// `k_i = -a_{i-1}`.
pub fn place_poles(n: usize, roots: &[Complex64]) -> Result<Vec<f64>> {
    if n == 0 || roots.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: roots.len(),
        });
    }
    if let Some(bad) = roots.iter().find(|r| !(r.re < 0.0)) {
        return Err(Error::UnstableRoot(format!("{bad}")));
    }
    check_conjugate_closed(roots)?;

    // coeffs[j] multiplies s^j; start from the constant polynomial 1.
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (j, c) in coeffs.iter().enumerate() {
            next[j + 1] += c;
            next[j] -= c * r;
        }
        coeffs = next;
    }
    Ok(coeffs[..n].iter().map(|c| -c.re).collect())
}

fn check_conjugate_closed(roots: &[Complex64]) -> Result<()> {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let r = roots[i];
        let scale = 1.0 + r.norm();
        if r.im.abs() <= CONJUGATE_TOL * scale {
            used[i] = true;
            continue;
        }
        let partner = (0..roots.len()).find(|&j| {
            j != i && !used[j] && (roots[j] - r.conj()).norm() <= CONJUGATE_TOL * scale
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return Err(Error::NotConjugateClosed),
        }
    }
    Ok(())
}

/// High-gain scaling: `k~_i = k*_i * eps^-(n-i+1)` (1-based) and `D = diag(eps^(n-1), ..., 1)`.
pub fn high_gain(k_star: &[f64], epsilon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let n = k_star.len();
    let d: Vec<f64> = (0..n).map(|i| epsilon.powi((n - 1 - i) as i32)).collect();
    let k_tilde = k_star
        .iter()
        .enumerate()
        .map(|(i, &k)| (0..n - i).fold(k, |acc, _| acc / epsilon))
        .collect();
    Ok((k_tilde, d))
}

/// Solves `M^T P + P M = -I` for `M = A + b k*^T`.
///
/// The equation is vectorized into `(I (x) M^T + M^T (x) I) vec(P) = -vec(I)`
/// and solved by dense elimination; the result is symmetrized and checked
/// for positive definiteness.
pub fn solve_lyapunov(k_star: &[f64]) -> Result<DMatrix<f64>> {
    if k_star.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let m = closed_loop_matrix(k_star);
    solve_lyapunov_matrix(&m)
}

/// [`solve_lyapunov`] for an arbitrary square matrix.
pub fn solve_lyapunov_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mt = m.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(&mt) + mt.kronecker(&eye);
    // Column-major vec(-I).
    let rhs = DVector::from_fn(n * n, |idx, _| if idx % n == idx / n { -1.0 } else { 0.0 });
    let sol = linalg::solve_dense(&system, &rhs)?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if !linalg::is_positive_definite(&p) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(p)
}

/// Max-abs residual of the Lyapunov equation for gain `k_star`.
pub fn lyapunov_residual(k_star: &[f64], p: &DMatrix<f64>) -> f64 {
    let m = closed_loop_matrix(k_star);
    let n = m.nrows();
    (m.transpose() * p + p * &m + DMatrix::<f64>::identity(n, n)).amax()
}

pub fn lambda_min(p: &DMatrix<f64>) -> Result<f64> {
    linalg::min_eigenvalue(p)
}

/// `||b^T P||_2`, the norm of the last row of `P`.
pub fn bp_norm(p: &DMatrix<f64>) -> Result<f64> {
    linalg::ensure_symmetric(p)?;
    Ok(p.row(p.nrows() - 1).norm())
}

fn check_vartheta(vartheta: f64) -> Result<()> {
    if !(vartheta > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "vartheta",
            reason: format!("weight must be positive, got {vartheta}"),
        });
    }
    Ok(())
}

pub fn gamma_mfc(epsilon: f64, vartheta: f64, p: &DMatrix<f64>) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_vartheta(vartheta)?;
    Ok(gamma_mfc_raw(epsilon, vartheta, bp_norm(p)?))
}

pub(crate) fn gamma_mfc_raw(epsilon: f64, vartheta: f64, bp: f64) -> f64 {
    1.0 / (epsilon * (1.0 + (1.0 + 1.0 / (vartheta * epsilon)).sqrt()) * bp)
}

pub fn gamma_sl(p: &DMatrix<f64>) -> Result<f64> {
    Ok(1.0 / (2.0 * bp_norm(p)?))
}

pub fn gamma_slhg(epsilon: f64, p: &DMatrix<f64>) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(1.0 / (2.0 * epsilon * bp_norm(p)?))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(())
}

/// Positivity test of the 2x2 matrix bounding `-dV/dt` for the MFC loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MMatrixCheck {
    pub positive: bool,
    pub m: [[f64; 2]; 2],
}

pub fn m_matrix_positive(
    vartheta: f64,
    epsilon: f64,
    gamma: f64,
    p: &DMatrix<f64>,
) -> Result<MMatrixCheck> {
    let bp = bp_norm(p)?;
    let off = -gamma * bp;
    let m = [[vartheta, off], [off, 1.0 / epsilon - 2.0 * gamma * bp]];
    let minor1 = m[0][0];
    let minor2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    Ok(MMatrixCheck {
        positive: minor1 > 0.0 && minor2 > 0.0,
        m,
    })
}

/// Default Lyapunov weight of the model-loop part, `100 / eps`.
pub fn default_vartheta(epsilon: f64) -> f64 {
    100.0 / epsilon
}

/// `P` together with every derived robustness quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub p: DMatrix<f64>,
    pub lambda_min: f64,
    pub bp_norm: f64,
    pub vartheta: f64,
    pub epsilon: f64,
    pub gamma_mfc: f64,
    pub gamma_sl: f64,
    pub gamma_slhg: f64,
    pub residual: f64,
}

impl LyapunovCertificate {
    pub fn new(gains: &GainSet, vartheta: f64) -> Result<Self> {
        check_vartheta(vartheta)?;
        let p = solve_lyapunov(&gains.k_star)?;
        let lambda_min = lambda_min(&p)?;
        let bp = bp_norm(&p)?;
        Ok(Self {
            residual: lyapunov_residual(&gains.k_star, &p),
            gamma_mfc: gamma_mfc(gains.epsilon, vartheta, &p)?,
            gamma_sl: gamma_sl(&p)?,
            gamma_slhg: gamma_slhg(gains.epsilon, &p)?,
            p,
            lambda_min,
            bp_norm: bp,
            vartheta,
            epsilon: gains.epsilon,
        })
    }

    pub fn m_matrix(&self, gamma: f64) -> MMatrixCheck {
        m_matrix_positive(self.vartheta, self.epsilon, gamma, &self.p)
            .expect("certificate P is symmetric")
    }
}
