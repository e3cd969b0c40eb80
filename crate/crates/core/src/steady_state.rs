//! Steady states of the closed loops on the mass-spring-damper plant.
//!
//! With a set-point reference the equilibria of every loop solve a cubic in a
//! single scalar: the model-error coordinate `x~1 = x1 - y_d` for MFC and
//! the position `x1` for the single-loop designs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::MsdParams;
use crate::synthesis::{closed_loop_matrix, GainSet};

const NEWTON_ITERS: usize = 5;
const COLLAPSE_TOL: f64 = 1e-9;
const MARGINAL_TOL: f64 = 1e-9;

/// Cubic `a3 x^3 + a2 x^2 + a1 x + a0`, stored highest degree first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    pub fn eval(&self, x: f64) -> f64 {
        let [a3, a2, a1, a0] = self.0;
        ((a3 * x + a2) * x + a1) * x + a0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let [a3, a2, a1, _] = self.0;
        (3.0 * a3 * x + 2.0 * a2) * x + a1
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Classical cubic discriminant; positive iff three distinct real roots.
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, d] = self.0;
        18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
            - 4.0 * a * c.powi(3)
            - 27.0 * a * a * d * d
    }

    pub fn roots(&self) -> Result<Vec<f64>> {
        solve_cubic(self.0)
    }
}

/// All real roots of a cubic, ascending, with repeated roots collapsed.
///
/// Closed form (trigonometric for three real roots, Cardano otherwise) followed
/// by Newton polishing. Leading coefficients that vanish fall back to the
/// quadratic or linear formula.
pub fn solve_cubic(coefficients: [f64; 4]) -> Result<Vec<f64>> {
    let cubic = Cubic(coefficients);
    let scale = cubic.max_abs_coefficient();
    if scale == 0.0 || !scale.is_finite() {
        return if scale == 0.0 {
            Err(Error::ZeroPolynomial)
        } else {
            Err(Error::InvalidArgument {
                arg: "coefficients",
                reason: "non-finite coefficient".into(),
            })
        };
    }
    let [a3, a2, a1, a0] = coefficients;
    let mut roots = if a3.abs() <= 1e-14 * scale {
        solve_quadratic(a2, a1, a0, scale)
    } else {
        cubic_closed_form(a2 / a3, a1 / a3, a0 / a3)
    };
    for r in roots.iter_mut() {
        *r = polish(&cubic, *r);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= COLLAPSE_TOL * (1.0 + a.abs()));
    Ok(roots)
}

fn solve_quadratic(a: f64, b: f64, c: f64, scale: f64) -> Vec<f64> {
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Roots of the monic cubic `x^3 + b x^2 + c x + d`.
fn cubic_closed_form(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    // Depressed form t^3 + p t + q with x = t - b/3.
    let p = c - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    if p < 0.0 && disc <= 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    } else {
        let sq = disc.max(0.0).sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v - shift]
    }
}

fn polish(cubic: &Cubic, mut x: f64) -> f64 {
    let mut best = cubic.eval(x).abs();
    for _ in 0..NEWTON_ITERS {
        let d = cubic.derivative(x);
        if d == 0.0 || best == 0.0 {
            break;
        }
        let next = x - cubic.eval(x) / d;
        let val = cubic.eval(next).abs();
        if !(val < best) {
            break;
        }
        x = next;
        best = val;
    }
    x
}

/// `p_MFC(x~1) = k1* eps^-2 x~1 + phi(y_d + x~1)` expanded in `x~1`.
pub fn mfc_steady_polynomial(p: &MsdParams, k1_star: f64, epsilon: f64, y_d: f64) -> Result<Cubic> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    check_gain(k1_star)?;
    let s = p.sigma1() / p.m;
    let l = p.delta_k / p.m;
    // phi(y + x) on the x2 = 0 axis is -s (y + x)^3 - l (y + x).
    Ok(Cubic([
        -s,
        -3.0 * s * y_d,
        k1_star / (epsilon * epsilon) - 3.0 * s * y_d * y_d - l,
        -s * y_d.powi(3) - l * y_d,
    ]))
}

/// `p_SL(x1) = k1 (x1 - y_d) + phi(x1)`; with `k1 = k~1` this is the high-gain loop.
pub fn sl_steady_polynomial(p: &MsdParams, k1: f64, y_d: f64) -> Result<Cubic> {
    check_gain(k1)?;
    Ok(Cubic([
        -p.sigma1() / p.m,
        0.0,
        k1 - p.delta_k / p.m,
        -k1 * y_d,
    ]))
}

fn check_gain(k1: f64) -> Result<()> {
    if !(k1 < 0.0) {
        return Err(Error::InvalidArgument {
            arg: "k1",
            reason: format!("first gain must be negative, got {k1}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LoopKind {
    Mfc,
    Sl,
    Slhg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

/// Variable a steady-state polynomial is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// `x~1 = x1 - y_d`, model-error coordinate of MFC.
    ModelError,
    /// Physical position `x1`.
    Position,
}

/// Jacobian of the error dynamics at the physical equilibrium `(x_s1, 0)`.
///
/// The loop gain is `k*` for SL and `k~` for SLHG and MFC. For MFC the model
/// state sits at `x_d`, so the process error obeys the same dynamics as the
/// high-gain loop; the scaled `z~` Jacobian is similar to this matrix.
pub fn error_jacobian(x_s1: f64, kind: LoopKind, p: &MsdParams, gains: &GainSet) -> DMatrix<f64> {
    let k = match kind {
        LoopKind::Sl => &gains.k_star,
        LoopKind::Slhg | LoopKind::Mfc => &gains.k_tilde,
    };
    let mut j = closed_loop_matrix(k);
    let grad = p.phi_gradient(x_s1);
    j[(1, 0)] += grad[0];
    j[(1, 1)] += grad[1];
    j
}

/// First-order stability of an equilibrium.
///
/// `root` is in the frame of the loop's polynomial, so `y_d` is needed to
/// recover the physical position for MFC.
pub fn classify_stability(
    root: f64,
    kind: LoopKind,
    p: &MsdParams,
    gains: &GainSet,
    y_d: f64,
) -> Stability {
    let x_s1 = match kind {
        LoopKind::Mfc => y_d + root,
        LoopKind::Sl | LoopKind::Slhg => root,
    };
    let j = error_jacobian(x_s1, kind, p, gains);
    let tr = j[(0, 0)] + j[(1, 1)];
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let disc = tr * tr - 4.0 * det;
    let max_re = if disc >= 0.0 {
        0.5 * (tr + disc.sqrt())
    } else {
        0.5 * tr
    };
    if max_re.abs() <= MARGINAL_TOL {
        Stability::Marginal
    } else if max_re < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

/// Equilibria of one loop for a set-point `y_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub kind: LoopKind,
    pub frame: Frame,
    pub y_d: f64,
    pub coefficients: Cubic,
    pub roots: Vec<f64>,
    pub stability: Vec<Stability>,
    /// Root picked by the selection rule, in `frame` coordinates.
    pub selected: f64,
    /// Two roots were equally close; the smaller was taken.
    pub tie: bool,
}

impl EquilibriumSet {
    pub fn compute(kind: LoopKind, p: &MsdParams, gains: &GainSet, y_d: f64) -> Result<Self> {
        let (frame, coefficients, target) = match kind {
            LoopKind::Mfc => (
                Frame::ModelError,
                mfc_steady_polynomial(p, gains.k_star[0], gains.epsilon, y_d)?,
                0.0,
            ),
            LoopKind::Sl => (Frame::Position, sl_steady_polynomial(p, gains.k_star[0], y_d)?, y_d),
            LoopKind::Slhg => (Frame::Position, sl_steady_polynomial(p, gains.k_tilde[0], y_d)?, y_d),
        };
        let roots = coefficients.roots()?;
        let (selected, tie) = select_closest(&roots, target).ok_or_else(|| Error::InvalidArgument {
            arg: "y_d",
            reason: "steady-state polynomial has no real root".into(),
        })?;
        let stability = roots
            .iter()
            .map(|&r| classify_stability(r, kind, p, gains, y_d))
            .collect();
        Ok(Self {
            kind,
            frame,
            y_d,
            coefficients,
            roots,
            stability,
            selected,
            tie,
        })
    }

    /// Physical position of the selected equilibrium.
    pub fn position(&self) -> f64 {
        match self.frame {
            Frame::ModelError => self.y_d + self.selected,
            Frame::Position => self.selected,
        }
    }

    /// Physical equilibrium state `(x_s1, 0)`.
    pub fn state(&self) -> [f64; 2] {
        [self.position(), 0.0]
    }

    /// Offset from the set-point in percent of `|y_d|`.
    pub fn error_pct(&self) -> f64 {
        100.0 * (self.position() - self.y_d).abs() / self.y_d.abs()
    }

    pub fn selected_stability(&self) -> Stability {
        let idx = self
            .roots
            .iter()
            .position(|&r| r == self.selected)
            .expect("selected root is one of the roots");
        self.stability[idx]
    }

    pub fn max_residual(&self) -> f64 {
        self.roots
            .iter()
            .map(|&r| self.coefficients.eval(r).abs())
            .fold(0.0, f64::max)
    }
}

/// Root closest to `target`; on a tie the smaller root wins and the flag is set.
pub fn select_closest(roots: &[f64], target: f64) -> Option<(f64, bool)> {
    let mut best: Option<(f64, f64)> = None;
    let mut tie = false;
    for &r in roots {
        let d = (r - target).abs();
        match best {
            None => best = Some((r, d)),
            Some((_, bd)) if d < bd - 1e-12 * (1.0 + bd) => {
                best = Some((r, d));
                tie = false;
            }
            Some((_, bd)) if (d - bd).abs() <= 1e-12 * (1.0 + bd) => tie = true,
            _ => {}
        }
    }
    best.map(|(r, _)| (r, tie))
}

/// One row of a set-point sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub y_d: f64,
    pub roots: Vec<f64>,
}

/// Real single-loop equilibria for each set-point in `y_ds`.
pub fn sl_sweep(p: &MsdParams, k1: f64, y_ds: &[f64]) -> Result<Vec<SweepRow>> {
    y_ds.iter()
        .map(|&y_d| {
            Ok(SweepRow {
                y_d,
                roots: sl_steady_polynomial(p, k1, y_d)?.roots()?,
            })
        })
        .collect()
}

/// Set-point at which the single-loop equilibria drop from three to one.
///
/// Bisects the sign change of the cubic discriminant on `[lo, hi]`; returns
/// `None` when the discriminant does not change sign there.
pub fn multiplicity_loss(p: &MsdParams, k1: f64, lo: f64, hi: f64) -> Result<Option<f64>> {
    let disc = |y: f64| sl_steady_polynomial(p, k1, y).map(|c| c.discriminant());
    let (mut a, mut b) = (lo, hi);
    let (da, db) = (disc(a)?, disc(b)?);
    if !(da > 0.0 && db < 0.0) {
        return Ok(None);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if disc(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn gains() -> GainSet {
        GainSet::from_poles(&[Complex64::new(-2.0, 0.0); 2], 0.1).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn cubic_examples() {
        assert!(close(&solve_cubic([1.0, 0.0, -1.0, 0.0]).unwrap(), &[-1.0, 0.0, 1.0], 1e-14));
        assert!(close(&solve_cubic([1.0, -6.0, 11.0, -6.0]).unwrap(), &[1.0, 2.0, 3.0], 1e-12));
        let r = solve_cubic([0.147, 0.0, -3.925, 8.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0], -5.99, epsilon = 0.02);
    }

    #[test]
    fn cubic_degenerate_cases() {
        assert!(matches!(solve_cubic([0.0; 4]), Err(Error::ZeroPolynomial)));
        assert!(close(&solve_cubic([0.0, 1.0, -3.0, 2.0]).unwrap(), &[1.0, 2.0], 1e-14));
        assert!(close(&solve_cubic([0.0, 0.0, 2.0, -1.0]).unwrap(), &[0.5], 0.0));
        assert!(solve_cubic([0.0, 0.0, 0.0, 3.0]).unwrap().is_empty());
        assert!(solve_cubic([0.0, 1.0, 0.0, 1.0]).unwrap().is_empty());
        // (x - 1)^2 (x + 2): the double root collapses.
        assert!(close(&solve_cubic([1.0, 0.0, -3.0, 2.0]).unwrap(), &[-2.0, 1.0], 1e-7));
        assert!(close(&solve_cubic([1.0, -3.0, 3.0, -1.0]).unwrap(), &[1.0], 1e-5));
    }

    #[test]
    fn sl_scenario_one() {
        let p = MsdParams::table();
        let set = EquilibriumSet::compute(LoopKind::Sl, &p, &gains(), 0.75).unwrap();
        assert_eq!(set.roots.len(), 3);
        assert_abs_diff_eq!(set.selected, 0.78226, epsilon = 1e-4);
        assert_abs_diff_eq!(set.error_pct(), 4.3, epsilon = 0.05);
        assert_eq!(set.selected_stability(), Stability::Stable);
        assert!(!set.tie);
        // The outer roots are saddles bounding the basin of the middle one.
        assert_eq!(set.stability, vec![Stability::Unstable, Stability::Stable, Stability::Unstable]);
    }

    #[test]
    fn sl_scenario_two_single_unstable_root() {
        let p = MsdParams::table();
        let set = EquilibriumSet::compute(LoopKind::Sl, &p, &gains(), 2.0).unwrap();
        assert_eq!(set.roots.len(), 1);
        assert_abs_diff_eq!(set.roots[0], -5.98303, epsilon = 1e-4);
        assert_eq!(set.stability[0], Stability::Unstable);
    }

    #[test]
    fn high_gain_and_mfc_scenario_one() {
        let p = MsdParams::table();
        let g = gains();
        let hg = EquilibriumSet::compute(LoopKind::Slhg, &p, &g, 0.75).unwrap();
        assert_abs_diff_eq!(hg.selected, 0.7502959, epsilon = 1e-6);
        let mfc = EquilibriumSet::compute(LoopKind::Mfc, &p, &g, 0.75).unwrap();
        assert_abs_diff_eq!(mfc.selected, 2.96e-4, epsilon = 0.05 * 2.96e-4);
        assert_eq!(mfc.frame, Frame::ModelError);
        assert_abs_diff_eq!(mfc.position(), hg.position(), epsilon = 1e-12);
        assert_eq!(mfc.selected_stability(), Stability::Stable);
        let mfc2 = EquilibriumSet::compute(LoopKind::Mfc, &p, &g, 2.0).unwrap();
        assert!(mfc2.selected.abs() < 1e-2);
        assert_abs_diff_eq!(mfc2.position(), 2.0033303, epsilon = 1e-6);
    }

    #[test]
    fn nominal_plant_has_no_offset() {
        let p = MsdParams::table().nominal();
        for y_d in [-1.0, 0.3, 2.0] {
            let mfc = EquilibriumSet::compute(LoopKind::Mfc, &p, &gains(), y_d).unwrap();
            assert_eq!(mfc.roots, vec![0.0]);
            assert_eq!(mfc.selected_stability(), Stability::Stable);
        }
    }

    #[test]
    fn multiplicity_threshold() {
        let p = MsdParams::table();
        let y = multiplicity_loss(&p, -4.0, 0.0, 2.5).unwrap().unwrap();
        assert!((1.95..1.96).contains(&y), "{y}");
        let rows = sl_sweep(&p, -4.0, &[0.0, 1.0, 1.95, 1.96, 2.5]).unwrap();
        let counts: Vec<usize> = rows.iter().map(|r| r.roots.len()).collect();
        assert_eq!(counts, vec![3, 3, 3, 1, 1]);
    }

    #[test]
    fn tie_picks_smaller_root() {
        assert_eq!(select_closest(&[-1.0, 1.0], 0.0), Some((-1.0, true)));
        assert_eq!(select_closest(&[-1.0, 0.5, 1.0], 0.0), Some((0.5, false)));
        assert_eq!(select_closest(&[], 0.0), None);
    }

    proptest! {
        #[test]
        fn residuals_are_small(a3 in -5.0f64..5.0, a2 in -5.0f64..5.0, a1 in -5.0f64..5.0, a0 in -5.0f64..5.0) {
            prop_assume!(a3.abs() > 1e-3);
            let c = Cubic([a3, a2, a1, a0]);
            let roots = c.roots().unwrap();
            prop_assert!(!roots.is_empty());
            for r in roots {
                prop_assert!(c.eval(r).abs() <= 1e-9 * (1.0 + c.max_abs_coefficient()));
            }
        }

        #[test]
        fn mfc_matches_high_gain(
            dk in -0.3f64..0.3,
            dc in -0.1f64..0.1,
            da in -0.2f64..0.2,
            y_d in -2.5f64..2.5,
            eps in 0.05f64..0.5,
        ) {
            let p = MsdParams { delta_k: dk, delta_c_d: dc, delta_alpha: da, ..MsdParams::table() };
            let g = GainSet::new(vec![-4.0, -4.0], eps).unwrap();
            let mfc = EquilibriumSet::compute(LoopKind::Mfc, &p, &g, y_d).unwrap();
            let hg = EquilibriumSet::compute(LoopKind::Slhg, &p, &g, y_d).unwrap();
            prop_assert!((mfc.position() - hg.position()).abs() <= 1e-9 * (1.0 + y_d.abs()));
        }
    }
}
