//! Monte-Carlo falsification of the certificates.
//!
//! Every sample uses its own ChaCha stream selected by the sample index, so
//! reports are identical for a given seed however the work is scheduled.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plant::{phi_lipschitz_sup, MsdParams, MsdPlant, StateBox};
use crate::roa::{InvalidReason, RoaEstimate, RoaKind};
use crate::simulate::{simulate_closed_loop, ControllerKind, ControllerSpec, Reference, Trajectory};
use crate::synthesis::GainSet;

/// Fraction of the level actually sampled; the certified sets are open.
pub const LEVEL_SHRINK: f64 = 0.999;

/// Initial process state and, for MFC, the initial model state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x0: Vec<f64>,
    pub x0_star: Option<Vec<f64>>,
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point in the unit ball of dimension `n`.
fn unit_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / n as f64);
            return g.into_iter().map(|v| v * radius / norm).collect();
        }
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Controller whose Lyapunov function an estimate certifies.
pub fn controller_for(kind: RoaKind) -> ControllerKind {
    match kind {
        RoaKind::Mfc1 | RoaKind::Mfc2 => ControllerKind::Mfc,
        RoaKind::Sl => ControllerKind::Sl,
        RoaKind::Slhg => ControllerKind::Slhg,
    }
}

/// Uniform samples of the estimate's sublevel set, in physical coordinates.
///
/// The combined-state set is sampled in all four dimensions, so each sample
/// carries its own initial model state; the separated set keeps the fixed
/// `x0*` of the estimate and samples the process-error ellipse only.
pub fn sample_in_set(est: &RoaEstimate, count: usize, seed: u64) -> Result<Vec<InitialCondition>> {
    let level = est
        .level
        .ok_or(Error::InvalidEstimate(est.invalid_reason.unwrap_or(InvalidReason::NegativeRadius)))?;
    let n = est.x_d.len();
    let inv_sqrt = linalg::spd_power(&est.p, -0.5)?;
    let offset = est.steady_offset();

    let sample = |i: usize| -> InitialCondition {
        let mut rng = stream(seed, i as u64);
        match est.kind {
            RoaKind::Sl | RoaKind::Slhg => {
                let u = unit_ball(&mut rng, n);
                let z = mat_vec(&inv_sqrt, &u);
                let scale = (LEVEL_SHRINK * level).sqrt();
                let x0 = est
                    .process_frame()
                    .to_physical(&z.iter().map(|v| v * scale).collect::<Vec<_>>());
                InitialCondition { x0, x0_star: None }
            }
            RoaKind::Mfc2 => {
                let c_tilde = est.c_tilde.unwrap_or(0.0);
                let u = unit_ball(&mut rng, n);
                let scale = (LEVEL_SHRINK * c_tilde).sqrt();
                let z: Vec<f64> = mat_vec(&inv_sqrt, &u).iter().map(|v| v * scale).collect();
                InitialCondition {
                    x0: est.process_frame().to_physical(&z),
                    x0_star: est.x0_star.clone(),
                }
            }
            RoaKind::Mfc1 => {
                // blockdiag(vartheta P, P)^(-1/2) applied to a 2n-ball sample.
                let u = unit_ball(&mut rng, 2 * n);
                let scale = (LEVEL_SHRINK * level).sqrt();
                let xt: Vec<f64> = mat_vec(&inv_sqrt, &u[..n])
                    .iter()
                    .map(|v| v * scale / est.vartheta.sqrt())
                    .collect();
                let z: Vec<f64> = mat_vec(&inv_sqrt, &u[n..]).iter().map(|v| v * scale).collect();
                let x0_star: Vec<f64> = (0..n).map(|i| est.x_d[i] + xt[i]).collect();
                let x0 = (0..n).map(|i| x0_star[i] + offset[i] + est.d[i] * z[i]).collect();
                InitialCondition {
                    x0,
                    x0_star: Some(x0_star),
                }
            }
        }
    };
    Ok((0..count).into_par_iter().map(sample).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    Diverged,
    WrongEquilibrium,
    VIncrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub sample: usize,
    pub initial: InitialCondition,
    pub mode: FailureMode,
    /// Failure time for divergence and Lyapunov increase.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub kind: RoaKind,
    pub controller: ControllerKind,
    pub level: Option<f64>,
    pub samples: usize,
    pub converged: usize,
    pub violations: Vec<Violation>,
    pub empirical_gamma: f64,
    pub analytic_gamma: f64,
}

impl FalsificationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, mode: FailureMode) -> usize {
        self.violations.iter().filter(|v| v.mode == mode).count()
    }
}

/// Run parameters shared by every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalsifySettings {
    pub samples: usize,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// Relative tolerance of the discrete Lyapunov decrease test.
    pub decrease_tolerance: f64,
    /// Pairs drawn for the empirical Lipschitz constant.
    pub lipschitz_pairs: usize,
}

impl Default for FalsifySettings {
    fn default() -> Self {
        Self {
            samples: 500,
            horizon: 10.0,
            step: 1e-3,
            seed: 0,
            decrease_tolerance: 1e-9,
            lipschitz_pairs: 100_000,
        }
    }
}

/// `||x_T - x_s|| <= max(0.01 ||x_0 - x_s||, 0.01)`.
pub fn reached_equilibrium(x0: &[f64], x_final: &[f64], x_s: &[f64]) -> bool {
    let dist = |a: &[f64]| a.iter().zip(x_s).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    dist(x_final) <= (0.01 * dist(x0)).max(0.01)
}

/// Simulates every sample of the estimate with the matching controller.
pub fn falsify_roa(
    est: &RoaEstimate,
    plant: &MsdPlant,
    gains: &GainSet,
    settings: &FalsifySettings,
) -> Result<FalsificationReport> {
    let initial = sample_in_set(est, settings.samples, settings.seed)?;
    let controller = controller_for(est.kind);
    let lyap = est.lyapunov_function();
    let level = est.level.expect("sampled estimates are valid");
    let reference = Reference::SetPoint { y_d: est.x_d[0] };

    let outcomes: Vec<Result<Option<Violation>>> = initial
        .par_iter()
        .enumerate()
        .map(|(i, ic)| {
            let mut spec = ControllerSpec::new(controller, gains.clone(), reference);
            if let Some(xs) = &ic.x0_star {
                spec = spec.with_model_initial(xs.clone());
            }
            let violation = |mode, time| {
                Some(Violation {
                    sample: i,
                    initial: ic.clone(),
                    mode,
                    time,
                })
            };
            match simulate_closed_loop(plant, &spec, &ic.x0, settings.horizon, settings.step, Some(&lyap)) {
                Err(Error::IntegrationFailure { time }) => Ok(violation(FailureMode::Diverged, Some(time))),
                Err(e) => Err(e),
                Ok(traj) => {
                    if !reached_equilibrium(&ic.x0, traj.final_state(), &est.x_s) {
                        return Ok(violation(FailureMode::WrongEquilibrium, None));
                    }
                    let check = lyapunov_decrease_check(&traj, level, settings.decrease_tolerance);
                    Ok(match check.first_violation {
                        Some(t) => violation(FailureMode::VIncrease, Some(t)),
                        None => None,
                    })
                }
            }
        })
        .collect();

    let mut violations = Vec::new();
    for o in outcomes {
        if let Some(v) = o? {
            violations.push(v);
        }
    }
    let region = &plant.domain;
    Ok(FalsificationReport {
        kind: est.kind,
        controller,
        level: est.level,
        samples: settings.samples,
        converged: settings.samples - violations.len(),
        violations,
        empirical_gamma: gamma_empirical(&plant.params, region, settings.lipschitz_pairs, settings.seed)?,
        analytic_gamma: phi_lipschitz_sup(&plant.params, region)?,
    })
}

/// Largest sampled difference quotient `|phi(a) - phi(b)| / ||a - b||` on a box.
///
/// Each pair is a uniform base point and a partner at a log-uniform distance
/// in a uniform direction, clipped to the box. Short pairs probe the local
/// gradient, which is where the supremum lives for a smooth `phi`.
pub fn gamma_empirical(p: &MsdParams, region: &StateBox, pairs: usize, seed: u64) -> Result<f64> {
    region.validate()?;
    if pairs == 0 {
        return Err(Error::InvalidArgument {
            arg: "pairs",
            reason: "need at least one pair".into(),
        });
    }
    if region.is_degenerate() {
        return Ok(0.0);
    }
    let n = region.dim();
    let diag = region
        .lower
        .iter()
        .zip(&region.upper)
        .map(|(l, u)| (u - l).powi(2))
        .sum::<f64>()
        .sqrt();
    let (log_lo, log_hi) = ((diag * 1e-7).ln(), diag.ln());
    const CHUNK: usize = 4096;
    let chunks = pairs.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed ^ 0x5eed_1195, c as u64);
            let mut best = 0.0_f64;
            for _ in 0..CHUNK.min(pairs - c * CHUNK) {
                let a: Vec<f64> = (0..n)
                    .map(|i| rng.random_range(region.lower[i]..=region.upper[i]))
                    .collect();
                let dir = unit_ball(&mut rng, n);
                let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                let len = rng.random_range(log_lo..log_hi).exp();
                let b: Vec<f64> = (0..n)
                    .map(|i| (a[i] + len * dir[i] / dn).clamp(region.lower[i], region.upper[i]))
                    .collect();
                let dist = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                if dist > 0.0 {
                    best = best.max((p.phi(&a) - p.phi(&b)).abs() / dist);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Outcome of the discrete Lyapunov decrease test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecreaseCheck {
    pub pass: bool,
    pub first_violation: Option<f64>,
    /// Time at which the state left the certified set, ending the check.
    pub exited_at: Option<f64>,
}

/// Checks `V(t_{k+1}) <= V(t_k) (1 + tol) + 1e-12 V(t_0)` while `V <= level`.
///
/// The absolute slack covers rounding in the quadratic form once `V` has
/// decayed to roundoff size.
pub fn lyapunov_decrease_check(traj: &Trajectory, level: f64, tolerance: f64) -> DecreaseCheck {
    let v = &traj.v;
    let slack = 1e-12 * v.first().copied().unwrap_or(0.0).abs();
    for k in 0..v.len().saturating_sub(1) {
        if !(v[k] <= level) {
            return DecreaseCheck {
                pass: true,
                first_violation: None,
                exited_at: Some(traj.t[k]),
            };
        }
        if v[k + 1] > v[k] * (1.0 + tolerance) + slack {
            return DecreaseCheck {
                pass: false,
                first_violation: Some(traj.t[k + 1]),
                exited_at: None,
            };
        }
    }
    DecreaseCheck {
        pass: true,
        first_violation: None,
        exited_at: None,
    }
}

/// The estimate with its level multiplied by `factor`, for probing beyond the certificate.
pub fn inflate(est: &RoaEstimate, factor: f64) -> RoaEstimate {
    let mut out = est.clone();
    out.level = est.level.map(|c| c * factor);
    out.c_tilde = est.c_tilde.map(|c| c * factor);
    if let (Some(cs), Some(ct)) = (out.c_star, out.c_tilde) {
        out.level = Some(cs + ct);
    }
    out
}
