//! Brunovsky-form plants with matched uncertainty.
//!
//! A plant is `x' = A x + b (f(x) + g(x) u + phi(x))` where `A` is the
//! integrator chain, `b = e_n`, and the output is `y = x_1`. `f` and `g` are
//! the known nominal model and `phi` the matched uncertainty. The model loop
//! of the MFC scheme only ever sees `f` and `g`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type State = DVector<f64>;

/// Dimension of an integrator chain in Brunovsky form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrunovskyDims {
    n: usize,
}

impl BrunovskyDims {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument {
                arg: "n",
                reason: "state dimension must be at least 1".into(),
            });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ones on the first superdiagonal.
    pub fn a(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| if c == r + 1 { 1.0 } else { 0.0 })
    }

    /// Input vector `e_n`.
    pub fn b(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.n);
        b[self.n - 1] = 1.0;
        b
    }

    /// Output vector `e_1`.
    pub fn c(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.n);
        c[0] = 1.0;
        c
    }

    /// `A x` without forming the matrix: shifts the chain up by one.
    pub fn shift(&self, x: &State) -> State {
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n - 1 {
            out[i] = x[i + 1];
        }
        out
    }
}

/// Evaluation interface for a plant in Brunovsky form.
///
/// States are plain slices of length `n` so the integrator can work on
/// reusable buffers.
pub trait Plant: Send + Sync {
    fn dims(&self) -> BrunovskyDims;
    /// Known drift nonlinearity.
    fn f(&self, x: &[f64]) -> f64;
    /// Known input gain; must not vanish on the operating domain.
    fn g(&self, x: &[f64]) -> f64;
    /// Matched uncertainty; zero for the nominal model.
    fn phi(&self, x: &[f64]) -> f64;

    /// Writes the right-hand side of the true (uncertain) plant into `dx`.
    fn process_rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        chain(x, dx);
        dx[x.len() - 1] = self.f(x) + self.g(x) * u + self.phi(x);
    }

    /// Writes the right-hand side of the nominal model into `dx`.
    fn model_rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        chain(x, dx);
        dx[x.len() - 1] = self.f(x) + self.g(x) * u;
    }
}

fn chain(x: &[f64], dx: &mut [f64]) {
    let n = x.len();
    dx[..n - 1].copy_from_slice(&x[1..]);
}

/// Physical and uncertainty parameters of the hardening mass-spring-damper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsdParams {
    /// Spring constant [N/m].
    pub k: f64,
    /// Damping [kg/s].
    pub c_d: f64,
    /// Hardening factor [1/m^2].
    pub alpha: f64,
    /// Mass [kg].
    pub m: f64,
    /// Gravity [m/s^2].
    pub g0: f64,
    pub delta_k: f64,
    pub delta_c_d: f64,
    pub delta_alpha: f64,
}

impl MsdParams {
    /// Values of the benchmark table.
    pub const fn table() -> Self {
        Self {
            k: 1.5,
            c_d: 0.3,
            alpha: 0.5,
            m: 1.0,
            g0: 9.81,
            delta_k: -0.075,
            delta_c_d: 0.06,
            delta_alpha: -0.1,
        }
    }

    /// Same nominal plant with every uncertainty set to zero.
    pub fn nominal(self) -> Self {
        Self {
            delta_k: 0.0,
            delta_c_d: 0.0,
            delta_alpha: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [("m", self.m), ("k", self.k), ("c_d", self.c_d), ("alpha", self.alpha)];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(
                    format!("plant.{name}"),
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        let rest = [
            ("g0", self.g0),
            ("delta_k", self.delta_k),
            ("delta_c_d", self.delta_c_d),
            ("delta_alpha", self.delta_alpha),
        ];
        for (name, value) in rest {
            if !value.is_finite() {
                return Err(Error::config(format!("plant.{name}"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Cubic coefficient of the uncertainty (times `m`).
    pub fn sigma1(&self) -> f64 {
        let a = self.alpha;
        let da = self.delta_alpha;
        self.delta_k * (a + da).powi(2) + self.k * da * (2.0 * a + da)
    }

    /// Sign-free upper bound on `|sigma1|`.
    pub fn sigma1_bar(&self) -> f64 {
        let a = self.alpha;
        let da = self.delta_alpha.abs();
        self.delta_k.abs() * (a + da).powi(2) + self.k * da * (2.0 * a + da)
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        -(self.k / self.m) * (1.0 + self.alpha * self.alpha * x1 * x1) * x1
            - (self.c_d / self.m) * x2
            - self.g0
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        let m = self.m;
        let a = self.alpha;
        let da = self.delta_alpha;
        -(self.delta_k / m) * (a + da).powi(2) * x1.powi(3)
            - (self.k / m) * da * (2.0 * a + da) * x1.powi(3)
            - (self.delta_k / m) * x1
            - (self.delta_c_d / m) * x2
    }

    /// Gradient of `phi`; depends on `x_1` only.
    pub fn phi_gradient(&self, x1: f64) -> [f64; 2] {
        [
            -(3.0 * self.sigma1() * x1 * x1 + self.delta_k) / self.m,
            -self.delta_c_d / self.m,
        ]
    }
}

/// Closed axis-aligned box in state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// Default Lipschitz domain of the benchmark: `x1 in [-5, 5]`, `x2 in [-10, 10]`.
    pub fn msd_default() -> Self {
        Self {
            lower: vec![-5.0, -10.0],
            upper: vec![5.0, 10.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(Error::Dimension {
                expected: self.lower.len(),
                got: self.upper.len(),
            });
        }
        if self.lower.is_empty() {
            return Err(Error::EmptyRegion(0));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::EmptyRegion(i));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(lo, hi)| lo == hi)
    }
}

/// Exact supremum of `||grad phi||_2` over `region`, hence a Lipschitz
/// constant of `phi` on the (convex) box.
pub fn phi_lipschitz_sup(p: &MsdParams, region: &StateBox) -> Result<f64> {
    region.validate()?;
    if region.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: region.dim(),
        });
    }
    let (lo, hi) = (region.lower[0], region.upper[0]);
    // |3 sigma1 s + dk| is affine in s = x1^2, so its maximum sits at an end of the s-range.
    let s_max = lo.abs().max(hi.abs()).powi(2);
    let s_min = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()).powi(2) };
    let sigma1 = p.sigma1();
    let slope = [s_min, s_max]
        .iter()
        .map(|s| (3.0 * sigma1 * s + p.delta_k).abs())
        .fold(0.0_f64, f64::max);
    Ok((slope * slope + p.delta_c_d * p.delta_c_d).sqrt() / p.m)
}

/// The mass-spring-damper benchmark as a [`Plant`].
#[derive(Debug, Clone, PartialEq)]
pub struct MsdPlant {
    pub params: MsdParams,
    /// Domain on which the Lipschitz condition is asserted.
    pub domain: StateBox,
}

impl MsdPlant {
    pub fn new(params: MsdParams) -> Self {
        Self {
            params,
            domain: StateBox::msd_default(),
        }
    }

    pub fn with_domain(params: MsdParams, domain: StateBox) -> Result<Self> {
        domain.validate()?;
        Ok(Self { params, domain })
    }

    pub fn lipschitz_on_domain(&self) -> Result<f64> {
        phi_lipschitz_sup(&self.params, &self.domain)
    }
}

impl Plant for MsdPlant {
    fn dims(&self) -> BrunovskyDims {
        BrunovskyDims { n: 2 }
    }

    fn f(&self, x: &[f64]) -> f64 {
        self.params.f(x)
    }

    fn g(&self, _x: &[f64]) -> f64 {
        1.0 / self.params.m
    }

    fn phi(&self, x: &[f64]) -> f64 {
        self.params.phi(x)
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A Brunovsky plant assembled from closures, for systems other than the benchmark.
#[derive(Clone)]
pub struct FnPlant {
    dims: BrunovskyDims,
    f: ScalarFn,
    g: ScalarFn,
    phi: ScalarFn,
}

impl FnPlant {
    pub fn new(
        n: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Ok(Self {
            dims: BrunovskyDims::new(n)?,
            f: Arc::new(f),
            g: Arc::new(g),
            phi: Arc::new(phi),
        })
    }
}

impl fmt::Debug for FnPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPlant").field("dims", &self.dims).finish_non_exhaustive()
    }
}

impl Plant for FnPlant {
    fn dims(&self) -> BrunovskyDims {
        self.dims
    }
    fn f(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn g(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }
    fn phi(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }
}
