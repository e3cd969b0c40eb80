//! Fixed-step closed-loop simulation of the MFC, single-loop and
//! feedforward-linearising controllers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Plant, State};
use crate::roa::LyapunovFunction;
use crate::synthesis::GainSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ControllerKind {
    /// Feedback linearisation with the model-loop gain `k*`.
    Sl,
    /// Feedback linearisation with the high gain `k~`.
    Slhg,
    /// Two-loop model-following control.
    Mfc,
    /// Exact feedforward linearisation along the reference.
    Fflin,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Sl,
        ControllerKind::Slhg,
        ControllerKind::Mfc,
        ControllerKind::Fflin,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::Sl => "SL",
            ControllerKind::Slhg => "SLHG",
            ControllerKind::Mfc => "MFC",
            ControllerKind::Fflin => "FFLIN",
        }
    }
}

/// Flat-output reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reference {
    SetPoint { y_d: f64 },
    /// `offset + amplitude sin(omega t)`.
    Sinusoid { offset: f64, amplitude: f64, omega: f64 },
}

impl Reference {
    /// `y_d^(k)(t)` for `k = 0..=order`.
    pub fn derivatives(&self, t: f64, order: usize) -> Vec<f64> {
        let mut d = vec![0.0; order + 1];
        let top = self.fill_state(t, &mut d[..order]);
        d[order] = top;
        d
    }

    /// Writes `x_d(t) = (y_d, .., y_d^(n-1))` into `x_d` and returns `y_d^(n)(t)`.
    pub fn fill_state(&self, t: f64, x_d: &mut [f64]) -> f64 {
        let n = x_d.len();
        match *self {
            Reference::SetPoint { y_d } => {
                x_d.fill(0.0);
                if n > 0 {
                    x_d[0] = y_d;
                }
                if n == 0 {
                    y_d
                } else {
                    0.0
                }
            }
            Reference::Sinusoid { offset, amplitude, omega } => {
                let deriv = |k: usize| {
                    let phase = omega * t + k as f64 * std::f64::consts::FRAC_PI_2;
                    let base = if k == 0 { offset } else { 0.0 };
                    base + amplitude * omega.powi(k as i32) * phase.sin()
                };
                for (k, v) in x_d.iter_mut().enumerate() {
                    *v = deriv(k);
                }
                deriv(n)
            }
        }
    }

    /// Reference state `x_d(t)` and the `n`-th derivative `y_d^(n)(t)`.
    pub fn state_and_top(&self, t: f64, n: usize) -> (State, f64) {
        let mut x_d = vec![0.0; n];
        let top = self.fill_state(t, &mut x_d);
        (State::from_vec(x_d), top)
    }

    pub fn set_point(&self) -> Option<f64> {
        match *self {
            Reference::SetPoint { y_d } => Some(y_d),
            Reference::Sinusoid { .. } => None,
        }
    }
}

/// Control law of the model loop inside MFC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelLaw {
    /// Feedback linearisation of the model with gain `k*`.
    #[default]
    Feedback,
    /// Exact feedforward along the reference, no model feedback.
    Feedforward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub gains: GainSet,
    pub reference: Reference,
    /// Initial model state `x0*`; defaults to `x_d(0)`.
    pub model_initial: Option<Vec<f64>>,
    pub model_law: ModelLaw,
    /// Adds `k~^T (x - x_d)` to the standalone feedforward law.
    pub fflin_feedback: bool,
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind, gains: GainSet, reference: Reference) -> Self {
        Self {
            kind,
            gains,
            reference,
            model_initial: None,
            model_law: ModelLaw::Feedback,
            fflin_feedback: true,
        }
    }

    pub fn with_model_initial(mut self, x0_star: Vec<f64>) -> Self {
        self.model_initial = Some(x0_star);
        self
    }

    pub fn with_model_law(mut self, law: ModelLaw) -> Self {
        self.model_law = law;
        self
    }
}

fn dot_diff(k: &[f64], a: &[f64], b: &[f64]) -> f64 {
    k.iter()
        .zip(a.iter().zip(b))
        .map(|(ki, (ai, bi))| ki * (ai - bi))
        .sum()
}

fn nonzero(g: f64, site: &'static str) -> Result<f64> {
    if g == 0.0 || !g.is_finite() {
        return Err(Error::DivisionByZero(site));
    }
    Ok(g)
}

/// The MFC input and its model- and process-loop parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfcControl {
    pub u: f64,
    pub u_star: f64,
    pub u_tilde: f64,
}

/// Two-loop law `u = u* + u~`.
///
/// `u*` linearises the model at `x*`; `u~` cancels the model mismatch
/// `f~ = f(x) - f(x*) + (g(x) - g(x*)) u*` and feeds back `x - x*` with `k~`.
pub fn control_mfc(
    x: &[f64],
    x_star: &[f64],
    x_d: &[f64],
    y_d_n: f64,
    k_star: &[f64],
    k_tilde: &[f64],
    plant: &dyn Plant,
) -> Result<MfcControl> {
    let g_star = nonzero(plant.g(x_star), "g(x*) in the model loop")?;
    let u_star = (-plant.f(x_star) + y_d_n + dot_diff(k_star, x_star, x_d)) / g_star;
    mfc_process_part(x, x_star, u_star, k_tilde, plant)
}

fn mfc_process_part(
    x: &[f64],
    x_star: &[f64],
    u_star: f64,
    k_tilde: &[f64],
    plant: &dyn Plant,
) -> Result<MfcControl> {
    let g = nonzero(plant.g(x), "g(x) in the process loop")?;
    let f_tilde = plant.f(x) - plant.f(x_star) + (g - plant.g(x_star)) * u_star;
    let u_tilde = (-f_tilde + dot_diff(k_tilde, x, x_star)) / g;
    Ok(MfcControl {
        u: u_star + u_tilde,
        u_star,
        u_tilde,
    })
}

/// Single-loop feedback linearisation `u = (-f(x) + y_d^(n) + k^T (x - x_d)) / g(x)`.
pub fn control_sl(x: &[f64], x_d: &[f64], y_d_n: f64, k: &[f64], plant: &dyn Plant) -> Result<f64> {
    let g = nonzero(plant.g(x), "g(x) in the single-loop law")?;
    Ok((-plant.f(x) + y_d_n + dot_diff(k, x, x_d)) / g)
}

/// Feedforward linearisation `u = (-f(x_d) + y_d^(n) + v_fb) / g(x_d)`.
pub fn control_fflin(x_d: &[f64], y_d_n: f64, v_fb: f64, plant: &dyn Plant) -> Result<f64> {
    let g = nonzero(plant.g(x_d), "g(x_d) in the feedforward law")?;
    Ok((-plant.f(x_d) + y_d_n + v_fb) / g)
}

/// One classical Runge-Kutta step of `dx/dt = f(t, x)`.
pub fn step_rk4_t<F>(mut f: F, t: f64, x: &State, h: f64) -> State
where
    F: FnMut(f64, &State) -> State,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// One classical Runge-Kutta step of the autonomous system `dx/dt = f(x)`.
pub fn step_rk4<F>(mut f: F, x: &State, h: f64) -> State
where
    F: FnMut(&State) -> State,
{
    step_rk4_t(|_, y| f(y), 0.0, x, h)
}

/// Scratch space for an allocation-free RK4 step.
struct Rk4Work {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    /// Same update as [`step_rk4_t`], in place on `x`.
    fn step<F>(&mut self, mut rhs: F, t: f64, x: &mut [f64], h: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        rhs(t, x, k1)?;
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, tmp, k2)?;
        for i in 0..x.len() {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, tmp, k3)?;
        for i in 0..x.len() {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs(t + h, tmp, k4)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        Ok(())
    }
}

/// Sampled closed-loop response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: ControllerKind,
    pub step: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// Model state for MFC, the reference state otherwise.
    pub x_star: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    /// Lyapunov value on the grid; NaN when no function was supplied.
    pub v: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.x.last().expect("non-empty trajectory")
    }

    /// CSV with header `t,x1,..,xn,xstar1,..,xstarn,u,V`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.x.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("xstar{i}")));
        header.push("u".into());
        header.push("V".into());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![self.t[k].to_string()];
            row.extend(self.x[k].iter().map(f64::to_string));
            row.extend(self.x_star[k].iter().map(f64::to_string));
            row.push(self.u[k].to_string());
            row.push(self.v[k].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Evaluates a controller on slices; `x_d` is scratch for the reference state.
struct Law<'a> {
    spec: &'a ControllerSpec,
    plant: &'a dyn Plant,
}

impl Law<'_> {
    /// Applied input and the model-loop input at `(t, x*, x)`.
    fn eval(&self, t: f64, x_star: &[f64], x: &[f64], x_d: &mut [f64]) -> Result<(f64, f64)> {
        let y_n = self.spec.reference.fill_state(t, x_d);
        let g = &self.spec.gains;
        let plant = self.plant;
        match self.spec.kind {
            ControllerKind::Sl => Ok((control_sl(x, x_d, y_n, &g.k_star, plant)?, 0.0)),
            ControllerKind::Slhg => Ok((control_sl(x, x_d, y_n, &g.k_tilde, plant)?, 0.0)),
            ControllerKind::Fflin => {
                let v_fb = if self.spec.fflin_feedback {
                    dot_diff(&g.k_tilde, x, x_d)
                } else {
                    0.0
                };
                Ok((control_fflin(x_d, y_n, v_fb, plant)?, 0.0))
            }
            ControllerKind::Mfc => {
                let c = match self.spec.model_law {
                    ModelLaw::Feedback => control_mfc(x, x_star, x_d, y_n, &g.k_star, &g.k_tilde, plant)?,
                    ModelLaw::Feedforward => {
                        let u_star = control_fflin(x_d, y_n, 0.0, plant)?;
                        mfc_process_part(x, x_star, u_star, &g.k_tilde, plant)?
                    }
                };
                Ok((c.u, c.u_star))
            }
        }
    }
}

/// Integrates the closed loop on the grid `t_k = k h`, `k = 0..=round(horizon / h)`.
///
/// MFC integrates the stacked state `(x*, x)`; the model is the nominal plant
/// and the process carries the uncertainty. The recorded input is evaluated
/// at the grid state before each step.
pub fn simulate_closed_loop(
    plant: &dyn Plant,
    spec: &ControllerSpec,
    x0: &[f64],
    horizon: f64,
    h: f64,
    lyapunov: Option<&LyapunovFunction>,
) -> Result<Trajectory> {
    let n = plant.dims().n();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "step",
            reason: format!("must be positive, got {h}"),
        });
    }
    if !(horizon >= h) {
        return Err(Error::InvalidArgument {
            arg: "horizon",
            reason: format!("must be at least one step, got {horizon}"),
        });
    }
    let steps = (horizon / h).round() as usize;
    let is_mfc = spec.kind == ControllerKind::Mfc;
    let law = Law { spec, plant };
    let mut x_d = vec![0.0; n];

    // Stacked (x*, x); the model half is unused by single-loop laws.
    let mut state = vec![0.0; 2 * n];
    match (&spec.model_initial, is_mfc) {
        (Some(m), true) => {
            if m.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: m.len(),
                });
            }
            state[..n].copy_from_slice(m);
        }
        _ => {
            spec.reference.fill_state(0.0, &mut state[..n]);
        }
    }
    state[n..].copy_from_slice(x0);

    let mut traj = Trajectory {
        kind: spec.kind,
        step: h,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        x_star: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
    };

    let dim = if is_mfc { 2 * n } else { n };
    let offset = 2 * n - dim;
    let mut work = Rk4Work::new(dim);
    let mut scratch = vec![0.0; n];
    for k in 0..=steps {
        let t = k as f64 * h;
        let (xs, x) = state.split_at(n);
        let (u, _) = law.eval(t, xs, x, &mut x_d)?;
        let model_state = if is_mfc { xs.to_vec() } else { x_d.clone() };
        traj.t.push(t);
        traj.v.push(lyapunov.map_or(f64::NAN, |l| l.eval(Some(&model_state), x)));
        traj.x.push(x.to_vec());
        traj.x_star.push(model_state);
        traj.u.push(u);
        if k == steps {
            break;
        }

        let rhs = |tt: f64, s: &[f64], ds: &mut [f64]| -> Result<()> {
            if is_mfc {
                let (xs, x) = s.split_at(n);
                let (u, u_star) = law.eval(tt, xs, x, &mut scratch)?;
                let (dxs, dx) = ds.split_at_mut(n);
                plant.model_rhs(xs, u_star, dxs);
                plant.process_rhs(x, u, dx);
            } else {
                let (u, _) = law.eval(tt, &[], s, &mut scratch)?;
                plant.process_rhs(s, u, ds);
            }
            Ok(())
        };
        work.step(rhs, t, &mut state[offset..], h)?;
        if state[offset..].iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { time: t + h });
        }
    }
    Ok(traj)
}

/// Summary numbers of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub u0: f64,
    pub peak_abs_u: f64,
    /// `|mean x1 over the final 10 % - y_d| / |y_d|` in percent.
    pub steady_state_error_pct: f64,
    /// First time after which `||x - x_s||` stays within the settling band.
    pub settle_time: Option<f64>,
}

pub fn metrics(traj: &Trajectory, x_s_expected: &[f64], y_d: f64) -> Result<Metrics> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "trajectory",
            reason: "empty".into(),
        });
    }
    let len = traj.len();
    let tail = (len / 10).max(1);
    let mean: f64 = traj.x[len - tail..].iter().map(|x| x[0]).sum::<f64>() / tail as f64;
    let dist = |x: &[f64]| -> f64 {
        x.iter()
            .zip(x_s_expected)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let d0 = dist(&traj.x[0]);
    let band = if d0 > 0.0 { 0.01 * d0 } else { 0.01 };
    Ok(Metrics {
        u0: traj.u[0],
        peak_abs_u: traj.u.iter().fold(0.0, |m, u| m.max(u.abs())),
        steady_state_error_pct: 100.0 * (mean - y_d).abs() / y_d.abs(),
        settle_time: settle_index(traj.x.iter().map(|x| dist(x) <= band)).map(|i| traj.t[i]),
    })
}

/// Index from which every flag is true, if the last one is.
fn settle_index(flags: impl DoubleEndedIterator<Item = bool> + ExactSizeIterator) -> Option<usize> {
    let len = flags.len();
    let outside_from_end = flags.rev().take_while(|&ok| ok).count();
    (outside_from_end > 0).then(|| len - outside_from_end)
}

/// First time after which the process stays within `tol` of the model state.
pub fn model_tracking_time(traj: &Trajectory, tol: f64) -> Option<f64> {
    let flags = traj.x.iter().zip(&traj.x_star).map(|(x, xs)| {
        x.iter()
            .zip(xs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            <= tol
    });
    settle_index(flags).map(|i| traj.t[i])
}
