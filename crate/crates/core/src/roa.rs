//! Region-of-attraction estimates for the mass-spring-damper loops.
//!
//! Each estimate is a sublevel set of a quadratic Lyapunov function whose
//! level is the largest one on which the polynomial Lipschitz bound of the
//! uncertainty stays below the loop's robustness bound.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::MsdParams;
use crate::steady_state::{EquilibriumSet, LoopKind};
use crate::synthesis::{GainSet, LyapunovCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RoaKind {
    Mfc1,
    Mfc2,
    Sl,
    Slhg,
}

impl RoaKind {
    pub const ALL: [RoaKind; 4] = [RoaKind::Mfc1, RoaKind::Mfc2, RoaKind::Sl, RoaKind::Slhg];

    pub fn label(self) -> &'static str {
        match self {
            RoaKind::Mfc1 => "MFC1",
            RoaKind::Mfc2 => "MFC2",
            RoaKind::Sl => "SL",
            RoaKind::Slhg => "SLHG",
        }
    }
}

impl fmt::Display for RoaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Why a closed-form estimate does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    /// `(m Gamma)^2 <= dc_d^2`: the damping uncertainty alone exceeds the bound.
    DampingExceedsBound,
    /// `sqrt((m Gamma)^2 - dc_d^2) - |dk|` is negative.
    StiffnessExceedsBound,
    /// The radicand containing the reference norm is negative.
    NegativeRadicand,
    /// The radius itself came out negative.
    NegativeRadius,
    /// `c*` lies above the largest admissible model-loop level.
    ModelLevelTooLarge,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            InvalidReason::DampingExceedsBound => "(m*Gamma)^2 - dc_d^2 is not positive",
            InvalidReason::StiffnessExceedsBound => "sqrt((m*Gamma)^2 - dc_d^2) - |dk| is negative",
            InvalidReason::NegativeRadicand => "radicand containing the reference norm is negative",
            InvalidReason::NegativeRadius => "radius is negative",
            InvalidReason::ModelLevelTooLarge => "model-loop level c* exceeds its upper bound",
        };
        f.write_str(msg)
    }
}

fn invalid(reason: InvalidReason) -> Error {
    Error::InvalidEstimate(reason)
}

/// `sqrt((sqrt((m G)^2 - dc^2) - |dk|) / (s sigma_bar) - 3/(4 s) |x|^2) - 3/(2 sqrt s) |x|`.
///
/// `scale = 2` gives the combined-state radius, `scale = 1` every other one.
fn radius_core(p: &MsdParams, gamma: f64, ref_norm: f64, scale: f64) -> Result<f64> {
    let sigma_bar = p.sigma1_bar();
    if sigma_bar == 0.0 {
        return Err(Error::DivisionByZero("sigma1_bar (cubic uncertainty vanishes)"));
    }
    let outer = (p.m * gamma).powi(2) - p.delta_c_d.powi(2);
    if !(outer > 0.0) {
        return Err(invalid(InvalidReason::DampingExceedsBound));
    }
    let head = outer.sqrt() - p.delta_k.abs();
    if head < 0.0 {
        return Err(invalid(InvalidReason::StiffnessExceedsBound));
    }
    let radicand = head / (scale * sigma_bar) - 0.75 / scale * ref_norm * ref_norm;
    if radicand < 0.0 {
        return Err(invalid(InvalidReason::NegativeRadicand));
    }
    let r = radicand.sqrt() - 1.5 / scale.sqrt() * ref_norm;
    if r < 0.0 {
        return Err(invalid(InvalidReason::NegativeRadius));
    }
    Ok(r)
}

/// Shared auxiliary radius of both MFC approaches.
pub fn r_a(p: &MsdParams, gamma: f64, ref_norm: f64) -> Result<f64> {
    radius_core(p, gamma, ref_norm, 1.0)
}

/// Radius of the combined-state estimate; the level is `lambda_min r^2`.
pub fn r_mfc1(p: &MsdParams, gamma: f64, ref_norm: f64) -> Result<f64> {
    radius_core(p, gamma, ref_norm, 2.0)
}

/// Radius of the process-error set for a given model-loop level `c*`.
pub fn r_mfc2(
    p: &MsdParams,
    gamma: f64,
    ref_norm: f64,
    c_star: f64,
    vartheta: f64,
    lambda_min: f64,
) -> Result<f64> {
    let r = r_a(p, gamma, ref_norm)? - (c_star / (vartheta * lambda_min)).sqrt();
    if r < 0.0 {
        return Err(invalid(InvalidReason::ModelLevelTooLarge));
    }
    Ok(r)
}

pub fn r_sl(p: &MsdParams, gamma_sl: f64, x_s_norm: f64) -> Result<f64> {
    radius_core(p, gamma_sl, x_s_norm, 1.0)
}

pub fn r_slhg(p: &MsdParams, gamma_slhg: f64, x_s_norm: f64) -> Result<f64> {
    radius_core(p, gamma_slhg, x_s_norm, 1.0)
}

/// Model-loop level `vartheta x~0*^T P x~0*` covering the initial model state.
pub fn c_star(vartheta: f64, p: &DMatrix<f64>, x_tilde_star0: &[f64]) -> f64 {
    vartheta * linalg::quad_form(p, &DVector::from_column_slice(x_tilde_star0))
}

/// Largest `c*` for which the second approach still has a non-negative radius.
pub fn c_star_max(r_a: f64, vartheta: f64, lambda_min: f64) -> f64 {
    vartheta * lambda_min * r_a * r_a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    /// Process-error level left over by the combined-state approach.
    pub c_tilde_1: f64,
    /// Process-error level of the separated approach.
    pub c_tilde_2: f64,
    pub difference: f64,
}

/// Compares the process-error levels of both MFC approaches for the same `r_a`.
pub fn compare_levels(c_star: f64, r_a: f64, vartheta: f64, lambda_min: f64) -> Result<LevelComparison> {
    if !(vartheta > 1.0) {
        return Err(Error::InvalidArgument {
            arg: "vartheta",
            reason: format!("comparison needs vartheta > 1, got {vartheta}"),
        });
    }
    let c_tilde_1 = lambda_min * (r_a / std::f64::consts::SQRT_2).powi(2) - c_star;
    let c_tilde_2 = lambda_min * (r_a - (c_star / (vartheta * lambda_min)).sqrt()).powi(2);
    Ok(LevelComparison {
        c_tilde_1,
        c_tilde_2,
        difference: c_tilde_2 - c_tilde_1,
    })
}

/// Coordinates a Lyapunov function is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoaFrame {
    /// `(x~*, z~)` with `x~* = x* - x_d` and `z~ = D^-1((x - x_s) - (x* - x_d))`.
    Combined,
    /// `x_e = x - x_s`.
    SingleLoopError,
    /// `z_SL = D^-1 (x - x_s)`.
    ScaledError,
}

/// Affine map `x = center + D z` between a scaled error frame and physical states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMap {
    pub center: Vec<f64>,
    pub d: Vec<f64>,
}

impl FrameMap {
    pub fn identity_scale(center: Vec<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            d: vec![1.0; n],
        }
    }

    pub fn to_physical(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.d)
            .zip(&self.center)
            .map(|((zi, di), ci)| ci + di * zi)
            .collect()
    }

    pub fn from_physical(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.d)
            .zip(&self.center)
            .map(|((xi, di), ci)| (xi - ci) / di)
            .collect()
    }

    /// Shape matrix of `{z : z^T P z <= c}` in physical coordinates, `D^-1 P D^-1`.
    pub fn physical_shape(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)] / (self.d[i] * self.d[j]))
    }
}

/// Quadratic Lyapunov function of one closed loop in its error frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFunction {
    pub frame: RoaFrame,
    pub p: DMatrix<f64>,
    /// Weight of the model-loop part (combined frame only).
    pub vartheta: f64,
    pub d: Vec<f64>,
    pub x_d: Vec<f64>,
    pub x_s: Vec<f64>,
}

impl LyapunovFunction {
    /// `V(x*, x)`; `x_star` is only read in the combined frame and defaults to `x_d`.
    pub fn eval(&self, x_star: Option<&[f64]>, x: &[f64]) -> f64 {
        let n = x.len();
        let quad = |f: &dyn Fn(usize) -> f64| {
            let mut acc = 0.0;
            for i in 0..n {
                let vi = f(i);
                for j in 0..n {
                    acc += vi * self.p[(i, j)] * f(j);
                }
            }
            acc
        };
        match self.frame {
            RoaFrame::SingleLoopError => quad(&|i| x[i] - self.x_s[i]),
            RoaFrame::ScaledError => quad(&|i| (x[i] - self.x_s[i]) / self.d[i]),
            RoaFrame::Combined => {
                let xs = x_star.unwrap_or(&self.x_d);
                let model = quad(&|i| xs[i] - self.x_d[i]);
                let process = quad(&|i| ((x[i] - self.x_s[i]) - (xs[i] - self.x_d[i])) / self.d[i]);
                self.vartheta * model + process
            }
        }
    }
}

/// One certified sublevel set, with everything needed to evaluate membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaEstimate {
    pub kind: RoaKind,
    pub valid: bool,
    pub invalid_reason: Option<InvalidReason>,
    /// Total level `c` of the Lyapunov function; absent when invalid.
    pub level: Option<f64>,
    /// Model-loop part of the level (MFC2).
    pub c_star: Option<f64>,
    /// Process-error part of the level (MFC2).
    pub c_tilde: Option<f64>,
    pub radius_aux: Option<f64>,
    /// Physical center of the process-state ellipse at `t = 0`.
    pub center: Vec<f64>,
    pub frame: RoaFrame,
    pub p: DMatrix<f64>,
    pub vartheta: f64,
    pub epsilon: f64,
    pub d: Vec<f64>,
    pub x_d: Vec<f64>,
    /// Equilibrium of the loop this estimate certifies.
    pub x_s: Vec<f64>,
    /// Fixed initial model state (MFC2).
    pub x0_star: Option<Vec<f64>>,
}

impl RoaEstimate {
    /// Level of the two-dimensional process-state ellipse plotted for this set.
    ///
    /// For the combined-state set this is the slice `x0* = x_d`.
    pub fn process_level(&self) -> Option<f64> {
        match self.kind {
            RoaKind::Mfc2 => self.c_tilde,
            _ => self.level,
        }
    }

    /// Physical-frame map of the process-state ellipse.
    pub fn process_frame(&self) -> FrameMap {
        match self.frame {
            RoaFrame::SingleLoopError => FrameMap::identity_scale(self.center.clone()),
            _ => FrameMap {
                center: self.center.clone(),
                d: self.d.clone(),
            },
        }
    }

    /// Physical-frame shape matrix of the process-state ellipse.
    pub fn process_shape(&self) -> DMatrix<f64> {
        self.process_frame().physical_shape(&self.p)
    }

    /// Offset `x~_s = x_s - x_d` of the process equilibrium from the set-point.
    pub fn steady_offset(&self) -> Vec<f64> {
        self.x_s.iter().zip(&self.x_d).map(|(s, d)| s - d).collect()
    }

    pub fn lyapunov_function(&self) -> LyapunovFunction {
        LyapunovFunction {
            frame: self.frame,
            p: self.p.clone(),
            vartheta: self.vartheta,
            d: self.d.clone(),
            x_d: self.x_d.clone(),
            x_s: self.x_s.clone(),
        }
    }

    /// Lyapunov value of a process state and, for MFC, a model state.
    pub fn lyapunov(&self, x_star: Option<&[f64]>, x: &[f64]) -> f64 {
        self.lyapunov_function().eval(x_star, x)
    }

    pub fn contains(&self, x_star: Option<&[f64]>, x: &[f64]) -> bool {
        self.level.is_some_and(|c| self.lyapunov(x_star, x) <= c)
    }

    fn invalid(kind: RoaKind, reason: InvalidReason, base: &EstimateBase) -> Self {
        Self {
            kind,
            valid: false,
            invalid_reason: Some(reason),
            level: None,
            c_star: None,
            c_tilde: None,
            radius_aux: None,
            center: base.center_for(kind),
            frame: frame_of(kind),
            p: base.p.clone(),
            vartheta: base.vartheta,
            epsilon: base.epsilon,
            d: base.d.clone(),
            x_d: base.x_d.clone(),
            x_s: base.x_s_for(kind),
            x0_star: (kind == RoaKind::Mfc2).then(|| base.x0_star.clone()),
        }
    }
}

fn frame_of(kind: RoaKind) -> RoaFrame {
    match kind {
        RoaKind::Mfc1 | RoaKind::Mfc2 => RoaFrame::Combined,
        RoaKind::Sl => RoaFrame::SingleLoopError,
        RoaKind::Slhg => RoaFrame::ScaledError,
    }
}

struct EstimateBase {
    p: DMatrix<f64>,
    vartheta: f64,
    epsilon: f64,
    d: Vec<f64>,
    x_d: Vec<f64>,
    x_s_mfc: Vec<f64>,
    x_s_sl: Vec<f64>,
    x_s_slhg: Vec<f64>,
    x0_star: Vec<f64>,
}

impl EstimateBase {
    fn x_s_for(&self, kind: RoaKind) -> Vec<f64> {
        match kind {
            RoaKind::Mfc1 | RoaKind::Mfc2 => self.x_s_mfc.clone(),
            RoaKind::Sl => self.x_s_sl.clone(),
            RoaKind::Slhg => self.x_s_slhg.clone(),
        }
    }

    fn center_for(&self, kind: RoaKind) -> Vec<f64> {
        match kind {
            // x0 = x0* + x~_s + D z~ with x0* = x_d on the plotted slice.
            RoaKind::Mfc1 => self.x_s_mfc.clone(),
            RoaKind::Mfc2 => self
                .x0_star
                .iter()
                .zip(self.x_s_mfc.iter().zip(&self.x_d))
                .map(|(x0, (s, d))| x0 + s - d)
                .collect(),
            RoaKind::Sl => self.x_s_sl.clone(),
            RoaKind::Slhg => self.x_s_slhg.clone(),
        }
    }
}

/// All four estimates for one set-point and initial model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaSet {
    pub estimates: Vec<RoaEstimate>,
    /// Auxiliary radius shared by both MFC approaches.
    pub r_a: Option<f64>,
    pub c_star_max: Option<f64>,
    pub comparison: Option<LevelComparison>,
    pub lambda_min: f64,
}

impl RoaSet {
    pub fn compute(
        params: &MsdParams,
        gains: &GainSet,
        cert: &LyapunovCertificate,
        y_d: f64,
        x0_star: &[f64],
    ) -> Result<Self> {
        if x0_star.len() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: x0_star.len(),
            });
        }
        let mfc = EquilibriumSet::compute(LoopKind::Mfc, params, gains, y_d)?;
        let sl = EquilibriumSet::compute(LoopKind::Sl, params, gains, y_d)?;
        let slhg = EquilibriumSet::compute(LoopKind::Slhg, params, gains, y_d)?;
        let x_d = vec![y_d, 0.0];
        let base = EstimateBase {
            p: cert.p.clone(),
            vartheta: cert.vartheta,
            epsilon: gains.epsilon,
            d: gains.d.clone(),
            x_d: x_d.clone(),
            x_s_mfc: mfc.state().to_vec(),
            x_s_sl: sl.state().to_vec(),
            x_s_slhg: slhg.state().to_vec(),
            x0_star: x0_star.to_vec(),
        };
        let lambda = cert.lambda_min;
        let ref_norm = mfc.position().abs();
        let x_tilde_star0: Vec<f64> = x0_star.iter().zip(&x_d).map(|(a, b)| a - b).collect();
        let cs = c_star(cert.vartheta, &cert.p, &x_tilde_star0);

        let simple = |kind: RoaKind, radius: Result<f64>| -> Result<RoaEstimate> {
            match radius {
                Ok(r) => Ok(RoaEstimate {
                    kind,
                    valid: true,
                    invalid_reason: None,
                    level: Some(lambda * r * r),
                    c_star: None,
                    c_tilde: None,
                    radius_aux: Some(r),
                    center: base.center_for(kind),
                    frame: frame_of(kind),
                    p: base.p.clone(),
                    vartheta: base.vartheta,
                    epsilon: base.epsilon,
                    d: base.d.clone(),
                    x_d: base.x_d.clone(),
                    x_s: base.x_s_for(kind),
                    x0_star: None,
                }),
                Err(Error::InvalidEstimate(reason)) => Ok(RoaEstimate::invalid(kind, reason, &base)),
                Err(e) => Err(e),
            }
        };

        let mfc1 = simple(RoaKind::Mfc1, r_mfc1(params, cert.gamma_mfc, ref_norm))?;
        let mfc2 = match r_mfc2(params, cert.gamma_mfc, ref_norm, cs, cert.vartheta, lambda) {
            Ok(r) => {
                let c_tilde = lambda * r * r;
                RoaEstimate {
                    kind: RoaKind::Mfc2,
                    valid: true,
                    invalid_reason: None,
                    level: Some(cs + c_tilde),
                    c_star: Some(cs),
                    c_tilde: Some(c_tilde),
                    radius_aux: Some(r),
                    center: base.center_for(RoaKind::Mfc2),
                    frame: RoaFrame::Combined,
                    p: base.p.clone(),
                    vartheta: base.vartheta,
                    epsilon: base.epsilon,
                    d: base.d.clone(),
                    x_d: base.x_d.clone(),
                    x_s: base.x_s_mfc.clone(),
                    x0_star: Some(x0_star.to_vec()),
                }
            }
            Err(Error::InvalidEstimate(reason)) => {
                let mut est = RoaEstimate::invalid(RoaKind::Mfc2, reason, &base);
                est.c_star = Some(cs);
                est
            }
            Err(e) => return Err(e),
        };
        let sl_est = simple(RoaKind::Sl, r_sl(params, cert.gamma_sl, sl.position().abs()))?;
        let slhg_est = simple(RoaKind::Slhg, r_slhg(params, cert.gamma_slhg, slhg.position().abs()))?;

        let ra = r_a(params, cert.gamma_mfc, ref_norm).ok();
        let comparison = match ra {
            Some(r) if cert.vartheta > 1.0 => Some(compare_levels(cs, r, cert.vartheta, lambda)?),
            _ => None,
        };
        Ok(Self {
            estimates: vec![mfc1, mfc2, sl_est, slhg_est],
            r_a: ra,
            c_star_max: ra.map(|r| c_star_max(r, cert.vartheta, lambda)),
            comparison,
            lambda_min: lambda,
        })
    }

    pub fn get(&self, kind: RoaKind) -> &RoaEstimate {
        self.estimates
            .iter()
            .find(|e| e.kind == kind)
            .expect("every kind is computed")
    }
}

/// Points on `{x : (x - center)^T P (x - center) = level}` at angles `2 pi k / N`.
pub fn ellipse_boundary(
    p_effective: &DMatrix<f64>,
    level: f64,
    center: &[f64],
    points: usize,
) -> Result<Vec<[f64; 2]>> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "level",
            reason: format!("must be positive, got {level}"),
        });
    }
    if p_effective.nrows() != 2 || center.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: p_effective.nrows(),
        });
    }
    let root = linalg::spd_power(p_effective, -0.5)? * level.sqrt();
    Ok((0..points)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            let (s, c) = th.sin_cos();
            [
                center[0] + root[(0, 0)] * c + root[(0, 1)] * s,
                center[1] + root[(1, 0)] * c + root[(1, 1)] * s,
            ]
        })
        .collect())
}

/// Physical boundary of an estimate's process-state ellipse.
pub fn estimate_boundary(est: &RoaEstimate, points: usize) -> Result<Vec<[f64; 2]>> {
    let level = est
        .process_level()
        .ok_or(Error::InvalidEstimate(est.invalid_reason.unwrap_or(InvalidReason::NegativeRadius)))?;
    ellipse_boundary(&est.process_shape(), level, &est.center, points)
}

/// Polygon area by the shoelace formula.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Area of `{x : x^T Q x <= c}` in the plane.
pub fn ellipse_area(q: &DMatrix<f64>, level: f64) -> f64 {
    std::f64::consts::PI * level / q.determinant().sqrt()
}

/// A process-state ellipse `{x : (x - center)^T Q (x - center) <= level}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub level: f64,
}

/// Union of translated copies of one ellipse shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipseUnion {
    pub shape: DMatrix<f64>,
    pub members: Vec<Ellipse>,
}

impl EllipseUnion {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.members.iter().any(|e| {
            let d = DVector::from_vec(vec![x[0] - e.center[0], x[1] - e.center[1]]);
            linalg::quad_form(&self.shape, &d) <= e.level
        })
    }

    /// Largest `t` with `origin + t dir` on some member, if the ray meets any.
    fn ray_exit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let q = &self.shape;
        let qa = q[(0, 0)] * dir[0] * dir[0] + 2.0 * q[(0, 1)] * dir[0] * dir[1] + q[(1, 1)] * dir[1] * dir[1];
        self.members
            .iter()
            .filter_map(|e| {
                let w = [origin[0] - e.center[0], origin[1] - e.center[1]];
                let qb = 2.0 * (q[(0, 0)] * w[0] * dir[0] + q[(0, 1)] * (w[0] * dir[1] + w[1] * dir[0]) + q[(1, 1)] * w[1] * dir[1]);
                let qc = q[(0, 0)] * w[0] * w[0] + 2.0 * q[(0, 1)] * w[0] * w[1] + q[(1, 1)] * w[1] * w[1] - e.level;
                let disc = qb * qb - 4.0 * qa * qc;
                (disc >= 0.0).then(|| (-qb + disc.sqrt()) / (2.0 * qa))
            })
            .filter(|t| *t >= 0.0)
            .reduce(f64::max)
    }

    /// Outer boundary seen from `origin` along `rays` equally spaced directions.
    pub fn boundary(&self, origin: [f64; 2], rays: usize) -> Vec<[f64; 2]> {
        (0..rays)
            .into_par_iter()
            .filter_map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
                let dir = [th.cos(), th.sin()];
                self.ray_exit(origin, dir)
                    .map(|t| [origin[0] + t * dir[0], origin[1] + t * dir[1]])
            })
            .collect()
    }
}

/// Number of boundary directions used for union regions.
pub const SWEEP_RAYS: usize = 720;

/// Union regions of the separated MFC estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Mfc2Sweep {
    /// Union over initial model states on the ellipse `V* = c*`.
    pub green: EllipseUnion,
    /// Union over every admissible `c*` in `[0, c*_max]`.
    pub grey: EllipseUnion,
    pub green_boundary: Vec<[f64; 2]>,
    pub grey_boundary: Vec<[f64; 2]>,
    /// Fan origin, the process equilibrium `x_d + x~_s`.
    pub origin: [f64; 2],
}

/// Sweeps the initial model state over `V*(x0*) = c*` and composes the
/// physical process-state regions.
///
/// `samples` model states are placed on each model-loop ellipse; the grey
/// envelope repeats this for `samples / 4` levels between 0 and `c*_max`.
pub fn mfc2_region_sweep(
    params: &MsdParams,
    gains: &GainSet,
    cert: &LyapunovCertificate,
    y_d: f64,
    c_star_level: f64,
    samples: usize,
) -> Result<Mfc2Sweep> {
    if samples < 16 {
        return Err(Error::InvalidArgument {
            arg: "samples",
            reason: format!("need at least 16, got {samples}"),
        });
    }
    let mfc = EquilibriumSet::compute(LoopKind::Mfc, params, gains, y_d)?;
    let ref_norm = mfc.position().abs();
    let ra = r_a(params, cert.gamma_mfc, ref_norm)?;
    let lambda = cert.lambda_min;
    let cmax = c_star_max(ra, cert.vartheta, lambda);
    let frame = FrameMap {
        center: vec![0.0, 0.0],
        d: gains.d.clone(),
    };
    let shape = frame.physical_shape(&cert.p);
    let origin = [mfc.position(), 0.0];
    let model_shape = &cert.p * cert.vartheta;

    let ring = |c: f64, count: usize| -> Result<Vec<Ellipse>> {
        let r = r_mfc2(params, cert.gamma_mfc, ref_norm, c, cert.vartheta, lambda)?;
        let c_tilde = lambda * r * r;
        if c <= 0.0 {
            return Ok(vec![Ellipse { center: origin, level: c_tilde }]);
        }
        // Ellipse centers x0* + x~_s for x0* on the model-loop ellipse around x_d.
        Ok(ellipse_boundary(&model_shape, c, &[origin[0], origin[1]], count)?
            .into_iter()
            .map(|center| Ellipse { center, level: c_tilde })
            .collect())
    };

    let green = EllipseUnion {
        shape: shape.clone(),
        members: ring(c_star_level, samples)?,
    };
    let levels = (samples / 4).max(4);
    let mut grey_members = Vec::new();
    for i in 0..levels {
        // Stop just short of c*_max where the process set degenerates to a point.
        let c = cmax * i as f64 / levels as f64;
        grey_members.extend(ring(c, samples)?);
    }
    let grey = EllipseUnion {
        shape,
        members: grey_members,
    };
    Ok(Mfc2Sweep {
        green_boundary: green.boundary(origin, SWEEP_RAYS),
        grey_boundary: grey.boundary(origin, SWEEP_RAYS),
        green,
        grey,
        origin,
    })
}
