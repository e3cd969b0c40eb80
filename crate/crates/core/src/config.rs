//! JSON scenario files and the two built-in benchmark presets.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::falsify::FalsifySettings;
use crate::plant::{MsdParams, MsdPlant, StateBox};
use crate::roa::RoaKind;
use crate::simulate::ControllerKind;
use crate::synthesis::{GainSet, LyapunovCertificate, default_vartheta};

/// Desired model-loop eigenvalue, written either as a number or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pole {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Pole {
    pub fn to_complex(self) -> Complex64 {
        match self {
            Pole::Real(re) => Complex64::new(re, 0.0),
            Pole::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalsifyConfig {
    pub samples: usize,
    pub seed: u64,
}

fn default_name() -> String {
    "custom".into()
}

fn all_roa_kinds() -> Vec<RoaKind> {
    RoaKind::ALL.to_vec()
}

/// Everything one run of the command-line tool needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub plant: MsdParams,
    /// Box on which the Lipschitz constant of the uncertainty is taken.
    #[serde(default = "StateBox::msd_default")]
    pub domain: StateBox,
    pub poles: Vec<Pole>,
    pub epsilon: f64,
    /// Weight of the model-loop Lyapunov term; `100 / epsilon` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<f64>,
    pub y_d: f64,
    pub x0: Vec<f64>,
    pub x0_star: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub controllers: Vec<ControllerKind>,
    #[serde(default = "all_roa_kinds")]
    pub roa_kinds: Vec<RoaKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub falsify: Option<FalsifyConfig>,
}

/// Built-in benchmark scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Set-point 0.75 from rest.
    Scenario1,
    /// Set-point 2 from rest.
    Scenario2,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Scenario1, Preset::Scenario2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Scenario1 => "scenario1",
            Preset::Scenario2 => "scenario2",
        }
    }

    pub fn y_d(self) -> f64 {
        match self {
            Preset::Scenario1 => 0.75,
            Preset::Scenario2 => 2.0,
        }
    }

    pub fn config(self) -> ScenarioConfig {
        ScenarioConfig {
            name: self.name().into(),
            plant: MsdParams::table(),
            domain: StateBox::msd_default(),
            poles: vec![Pole::Real(-2.0), Pole::Real(-2.0)],
            epsilon: 0.1,
            vartheta: Some(1000.0),
            y_d: self.y_d(),
            x0: vec![0.0, 0.0],
            x0_star: vec![0.0, 0.0],
            horizon: 10.0,
            step: 1e-3,
            controllers: ControllerKind::ALL.to_vec(),
            roa_kinds: RoaKind::ALL.to_vec(),
            falsify: Some(FalsifyConfig { samples: 500, seed: 0 }),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("preset", format!("unknown preset `{s}`, expected scenario1 or scenario2")))
    }
}

/// Gains and Lyapunov certificate derived from a validated configuration.
#[derive(Debug, Clone)]
pub struct Design {
    pub gains: GainSet,
    pub certificate: LyapunovCertificate,
}

fn check<T: fmt::Display + Copy>(path: &str, value: T, ok: impl Fn(T) -> bool, what: &str) -> Result<()> {
    if ok(value) {
        Ok(())
    } else {
        Err(Error::config(path, format!("{what}, got {value}")))
    }
}

fn check_state(path: &str, x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::config(path, format!("expected {n} entries, got {}", x.len())));
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::config(format!("{path}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_unique<T: Eq + std::hash::Hash + fmt::Debug>(path: &str, items: &[T]) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, item) in items.iter().enumerate() {
        if !seen.insert(item) {
            return Err(Error::config(format!("{path}[{i}]"), format!("duplicate entry {item:?}")));
        }
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses and validates; parse errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." || path == "?" { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta.unwrap_or_else(|| default_vartheta(self.epsilon))
    }

    /// Order of the benchmark plant.
    pub const N: usize = 2;

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.domain
            .validate()
            .map_err(|e| Error::config("domain", e.to_string()))?;
        if self.domain.dim() != Self::N {
            return Err(Error::config("domain", format!("expected a {}-dimensional box", Self::N)));
        }
        if self.poles.len() != Self::N {
            return Err(Error::config(
                "poles",
                format!("the benchmark plant needs {} poles, got {}", Self::N, self.poles.len()),
            ));
        }
        for (i, p) in self.poles.iter().enumerate() {
            let c = p.to_complex();
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::config(format!("poles[{i}]"), "must be finite"));
            }
            if c.re >= 0.0 {
                return Err(Error::config(format!("poles[{i}]"), format!("real part must be negative, got {}", c.re)));
            }
        }
        check("epsilon", self.epsilon, |e| e > 0.0 && e <= 1.0, "must lie in (0, 1]")?;
        if let Some(v) = self.vartheta {
            check("vartheta", v, |v| v > 0.0 && v.is_finite(), "must be positive and finite")?;
        }
        check("y_d", self.y_d, f64::is_finite, "must be finite")?;
        check_state("x0", &self.x0, Self::N)?;
        check_state("x0_star", &self.x0_star, Self::N)?;
        check("step", self.step, |h| h > 0.0 && h.is_finite(), "must be positive and finite")?;
        check("horizon", self.horizon, |t| t.is_finite() && t >= self.step, "must be finite and at least one step")?;
        if self.controllers.is_empty() {
            return Err(Error::config("controllers", "at least one controller is required"));
        }
        check_unique("controllers", &self.controllers)?;
        check_unique("roa_kinds", &self.roa_kinds)?;
        if let Some(f) = &self.falsify {
            check("falsify.samples", f.samples, |s| s > 0, "must be positive")?;
        }
        let roots: Vec<Complex64> = self.poles.iter().map(|p| p.to_complex()).collect();
        GainSet::from_poles(&roots, self.epsilon).map_err(|e| Error::config("poles", e.to_string()))?;
        Ok(())
    }

    pub fn design(&self) -> Result<Design> {
        let roots: Vec<Complex64> = self.poles.iter().map(|p| p.to_complex()).collect();
        let gains = GainSet::from_poles(&roots, self.epsilon)?;
        let certificate = LyapunovCertificate::new(&gains, self.vartheta())?;
        Ok(Design { gains, certificate })
    }

    pub fn plant(&self) -> Result<MsdPlant> {
        MsdPlant::with_domain(self.plant, self.domain.clone())
    }

    pub fn falsify_settings(&self) -> FalsifySettings {
        let f = self.falsify.unwrap_or(FalsifyConfig { samples: 500, seed: 0 });
        FalsifySettings {
            samples: f.samples,
            seed: f.seed,
            horizon: self.horizon,
            step: self.step,
            ..FalsifySettings::default()
        }
    }

    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if let Some(h) = o.step {
            self.step = h;
        }
        if let Some(t) = o.horizon {
            self.horizon = t;
        }
        if o.seed.is_some() || o.samples.is_some() {
            let mut f = self.falsify.unwrap_or(FalsifyConfig { samples: 500, seed: 0 });
            f.seed = o.seed.unwrap_or(f.seed);
            f.samples = o.samples.unwrap_or(f.samples);
            self.falsify = Some(f);
        }
        self.validate()?;
        Ok(self)
    }
}

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json_with(edit: impl FnOnce(&mut serde_json::Value)) -> String {
        let mut v = serde_json::to_value(Preset::Scenario1.config()).unwrap();
        edit(&mut v);
        v.to_string()
    }

    fn err_path(text: &str) -> String {
        match ScenarioConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn presets_round_trip() {
        for p in Preset::ALL {
            let cfg = p.config();
            let back = ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("scenario3".parse::<Preset>().is_err());
    }

    #[test]
    fn empty_controller_set_names_the_field() {
        assert_eq!(err_path(&json_with(|v| v["controllers"] = serde_json::json!([]))), "controllers");
    }

    #[test]
    fn diagnostics_carry_field_paths() {
        assert_eq!(err_path(&json_with(|v| v["plant"]["m"] = serde_json::json!(-1.0))), "plant.m");
        assert_eq!(err_path(&json_with(|v| v["plant"]["k"] = serde_json::json!("x"))), "plant.k");
        assert_eq!(err_path(&json_with(|v| v["epsilon"] = serde_json::json!(1.5))), "epsilon");
        assert_eq!(err_path(&json_with(|v| v["x0"] = serde_json::json!([0.0]))), "x0");
        assert_eq!(err_path(&json_with(|v| v["poles"][1] = serde_json::json!(0.5))), "poles[1]");
        assert_eq!(err_path(&json_with(|v| v["controllers"] = serde_json::json!(["MFC", "MFC"]))), "controllers[1]");
        assert_eq!(err_path(&json_with(|v| v["controllers"][0] = serde_json::json!("PID"))), "controllers[0]");
        assert_eq!(err_path(&json_with(|v| v["horizon"] = serde_json::json!(1e-4))), "horizon");
        assert_eq!(err_path(&json_with(|v| v["falsify"]["samples"] = serde_json::json!(0))), "falsify.samples");
        assert_eq!(err_path("{"), "<root>");
    }

    #[test]
    fn complex_poles_and_defaults() {
        let text = json_with(|v| {
            v["poles"] = serde_json::json!([{"re": -2.0, "im": 1.0}, {"re": -2.0, "im": -1.0}]);
            let o = v.as_object_mut().unwrap();
            o.remove("vartheta");
            o.remove("roa_kinds");
            o.remove("domain");
        });
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg.vartheta(), 1000.0);
        assert_eq!(cfg.roa_kinds, RoaKind::ALL.to_vec());
        let d = cfg.design().unwrap();
        // s^2 + 4 s + 5 in companion form.
        assert!((d.gains.k_star[0] + 5.0).abs() < 1e-12 && (d.gains.k_star[1] + 4.0).abs() < 1e-12);
        let unpaired = json_with(|v| v["poles"] = serde_json::json!([{"re": -2.0, "im": 1.0}, -3.0]));
        assert_eq!(err_path(&unpaired), "poles");
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let o = Overrides {
            seed: Some(7),
            samples: Some(20),
            step: Some(2e-3),
            horizon: None,
        };
        let cfg = Preset::Scenario2.config().with_overrides(&o).unwrap();
        let s = cfg.falsify_settings();
        assert_eq!((s.seed, s.samples, s.step), (7, 20, 2e-3));
        let bad = Overrides {
            step: Some(-1.0),
            ..Overrides::default()
        };
        assert!(Preset::Scenario1.config().with_overrides(&bad).is_err());
    }
}
