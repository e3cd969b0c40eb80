//! Lyapunov solutions checked against the integral `P = int_0^inf e^{M^T t} e^{M t} dt`.

use mfc::synthesis::{closed_loop_matrix, place_poles, solve_lyapunov};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// `e^{M h}` by a truncated Taylor series; `h` is small enough here that 25 terms are exact to roundoff.
fn expm_small(m: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..25 {
        term = &term * m * (h / k as f64);
        sum += &term;
    }
    sum
}

/// Composite Simpson quadrature of `e^{M^T t} e^{M t}` on `[0, horizon]`.
fn gramian(m: &DMatrix<f64>, horizon: f64, intervals: usize) -> DMatrix<f64> {
    assert!(intervals.is_multiple_of(2));
    let h = horizon / intervals as f64;
    let step = expm_small(m, h);
    let n = m.nrows();
    let mut e = DMatrix::<f64>::identity(n, n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += e.transpose() * &e * w;
        e = &e * &step;
    }
    acc * (h / 3.0)
}

fn check(roots: &[Complex64]) {
    let k = place_poles(roots.len(), roots).unwrap();
    let p = solve_lyapunov(&k).unwrap();
    let oracle = gramian(&closed_loop_matrix(&k), 40.0, 8000);
    let err = (&p - &oracle).amax() / oracle.amax();
    assert!(err < 1e-8, "relative gap {err:e} for roots {roots:?}");
}

#[test]
fn third_order_real_poles() {
    check(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0), Complex64::new(-3.0, 0.0)]);
}

#[test]
fn third_order_complex_pair() {
    check(&[Complex64::new(-1.5, 0.0), Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0)]);
}

#[test]
fn second_order_benchmark() {
    check(&[Complex64::new(-2.0, 0.0), Complex64::new(-2.0, 0.0)]);
}
