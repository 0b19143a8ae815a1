//! TOML run configurations.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::background::{background_state, BackgroundState, BoundaryPolicy, Sign};
use crate::dde::{Algo2Grid, Algorithm, DdeConfig, DelayMethod};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::heterogeneity::{build_example_heterogeneity, Heterogeneity};
use crate::history::FrontHistory;
use crate::model::ModelParams;
use crate::pde::{make_ic_relax_shift, tanh_front, PdeConfig, PdeState, DEFAULT_RELAX_SEQUENCE};
use crate::wave::{find_speed, singular_speed, ShootOptions};
use crate::wave::{build_concatenated_ic, RootIndex};

/// Model parameters and heterogeneities, taken from a named example and/or given explicitly.
/// Explicit values win over the example's.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub example: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub tauhat: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub f1: Option<Heterogeneity>,
    #[serde(default)]
    pub f2: Option<Heterogeneity>,
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<(ModelParams, Heterogeneity, Heterogeneity)> {
        let (mut p, mut f1, mut f2) = match &self.example {
            Some(id) => {
                let (f1, f2) = build_example_heterogeneity(id)?;
                (ModelParams::example(id)?, f1, f2)
            }
            None => {
                let (Some(alpha), Some(gamma)) = (self.alpha, self.gamma) else {
                    return Err(Error::Config("give `example` or both `alpha` and `gamma`".into()));
                };
                (ModelParams { alpha, gamma, tauhat: 1.0, epsilon: 0.0 }, Heterogeneity::Zero, Heterogeneity::Zero)
            }
        };
        if let Some(a) = self.alpha {
            p.alpha = a;
        }
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(t) = self.tauhat {
            p.tauhat = t;
        }
        if let Some(e) = self.epsilon {
            p.epsilon = e;
        }
        if let Some(f) = &self.f1 {
            f1 = f.clone();
        }
        if let Some(f) = &self.f2 {
            f2 = f.clone();
        }
        p.validate()?;
        Ok((p, f1, f2))
    }
}

/// Initial condition for a PDE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Leading-order tanh front with the steady V for it.
    Tanh { z0: f64 },
    /// Relax-and-shift pinned at `z0`.
    RelaxShift {
        z0: f64,
        #[serde(default)]
        sequence: Option<Vec<f64>>,
    },
    /// Concatenated travelling-wave half orbits at speed `c`, or at the shooting speed of `root`.
    Concatenated {
        z0: f64,
        #[serde(default)]
        c: Option<f64>,
        #[serde(default)]
        root: Option<RootIndex>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeRunConfig {
    pub model: ModelSpec,
    pub domain: (f64, f64),
    pub s_end: f64,
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub rtol: Option<f64>,
    #[serde(default)]
    pub atol: Option<f64>,
    #[serde(default)]
    pub record_dt: Option<f64>,
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
    #[serde(default)]
    pub policy: Option<BoundaryPolicy>,
    #[serde(default)]
    pub stop_outside: Option<(f64, f64)>,
    pub initial: InitialCondition,
}

impl PdeRunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pde_config(&self) -> Result<PdeConfig> {
        let (p, f1, f2) = self.model.resolve()?;
        let mut c = PdeConfig::new(p, f1, f2, self.domain, self.s_end);
        if let Some(dx) = self.dx {
            c.dx = dx;
        }
        if let Some(r) = self.rtol {
            c.rtol = r;
        }
        if let Some(a) = self.atol {
            c.atol = a;
        }
        if self.record_dt.is_some() {
            c.record_dt = self.record_dt;
        }
        c.snapshot_dt = self.snapshot_dt;
        if let Some(pol) = self.policy {
            c.policy = pol;
        }
        c.stop_outside = self.stop_outside;
        c.validate()?;
        Ok(c)
    }

    pub fn initial_state(&self, cfg: &PdeConfig) -> Result<PdeState> {
        initial_state(&self.initial, cfg)
    }
}

pub fn initial_state(ic: &InitialCondition, cfg: &PdeConfig) -> Result<PdeState> {
    match ic {
        InitialCondition::Tanh { z0 } => tanh_front(cfg, *z0, &cfg.background()?),
        InitialCondition::RelaxShift { z0, sequence } => {
            make_ic_relax_shift(cfg, *z0, sequence.as_deref().unwrap_or(&DEFAULT_RELAX_SEQUENCE))
        }
        InitialCondition::Concatenated { z0, c, root } => {
            let opts = ShootOptions::default();
            let c = match (c, root) {
                (Some(c), _) => *c,
                (None, Some(r)) => {
                    let (lo, hi) = find_speed(&cfg.params, *r, None, 1e-6, &opts)?;
                    0.5 * (lo + hi)
                }
                (None, None) => return Err(Error::Config("concatenated initial condition needs `c` or `root`".into())),
            };
            build_concatenated_ic(c, cfg, *z0, &opts)
        }
    }
}

/// Linear history `z(s) = z0 + slope (s - s0)` for `s <= s0`; the slope defaults to a
/// singular-limit speed root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub z0: f64,
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub root: Option<RootIndex>,
    #[serde(default)]
    pub s0: f64,
}

impl HistorySpec {
    pub fn build(&self, p: &ModelParams) -> Result<FrontHistory> {
        let slope = match (self.slope, self.root) {
            (Some(c), _) => c,
            (None, Some(r)) => singular_speed(&p.with_epsilon(0.0), r)?,
            (None, None) => 0.0,
        };
        Ok(FrontHistory::constant_speed(self.z0, slope, self.s0))
    }
}

fn default_bg_dx() -> f64 {
    0.01
}

/// Grid on which the background state is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundGrid {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_bg_dx")]
    pub dx: f64,
    #[serde(default)]
    pub policy: BoundaryPolicy,
}

impl BackgroundGrid {
    pub fn build(&self, f1: &Heterogeneity, f2: &Heterogeneity) -> Result<BackgroundState> {
        let g = UniformGrid::covering(self.x_min, self.x_max, self.dx)?;
        background_state(f1, f2, Sign::Minus, &g, self.policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdeRunConfig {
    pub model: ModelSpec,
    /// Steps per unit time; ignored when `h` is given.
    #[serde(default)]
    pub steps_per_unit: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    pub t_span: f64,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub a_max: Option<f64>,
    #[serde(default)]
    pub method: Option<DelayMethod>,
    #[serde(default)]
    pub algo: Option<Algorithm>,
    #[serde(default)]
    pub algo2_grid: Option<Algo2Grid>,
    #[serde(default)]
    pub stop_outside: Option<(f64, f64)>,
    pub background: BackgroundGrid,
    pub history: HistorySpec,
}

impl DdeRunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Delay-equation config, background state and initial history.
    pub fn build(&self) -> Result<(DdeConfig, BackgroundState, FrontHistory)> {
        let (p, f1, f2) = self.model.resolve()?;
        if !f1.is_zero() {
            return Err(Error::Config("the delay equation is implemented for f1 = 0 only".into()));
        }
        let h = match (self.h, self.steps_per_unit) {
            (Some(h), _) => h,
            (None, Some(n)) => 1.0 / n,
            (None, None) => return Err(Error::Config("give `h` or `steps_per_unit`".into())),
        };
        let p0 = p.with_epsilon(0.0);
        let mut c = DdeConfig::new(p0, f2.clone(), h);
        if let Some(m) = self.samples {
            c.samples = m;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(a) = self.a_max {
            c.a_max = a;
        }
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(a) = self.algo {
            c.algo = a;
        }
        c.algo2_grid = self.algo2_grid;
        c.stop_outside = self.stop_outside;
        c.validate()?;
        let bg = self.background.build(&f1, &f2)?;
        Ok((c, bg, self.history.build(&p0)?))
    }
}

/// Overlays the keys of a TOML document onto `base`, recursing into tables.
pub fn merge_toml<T: Serialize + DeserializeOwned>(base: &T, overrides: &str) -> Result<T> {
    let mut doc = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    let over: toml::Table = toml::from_str(overrides).map_err(|e| Error::Config(e.to_string()))?;
    merge_into(&mut doc, toml::Value::Table(over));
    doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn merge_into(dst: &mut toml::Value, src: toml::Value) {
    match (dst, src) {
        (toml::Value::Table(d), toml::Value::Table(s)) => {
            for (k, v) in s {
                match d.get_mut(&k) {
                    Some(slot) => merge_into(slot, v),
                    None => {
                        d.insert(k, v);
                    }
                }
            }
        }
        (d, s) => *d = s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pde_config_from_example() {
        let c = PdeRunConfig::from_toml(
            r#"
            domain = [-10.0, 10.0]
            s_end = 2.0
            [model]
            example = "ex1"
            epsilon = 0.1
            [initial]
            kind = "tanh"
            z0 = 0.5
            "#,
        )
        .unwrap();
        let p = c.pde_config().unwrap();
        assert_eq!(p.params.alpha, -2.0);
        assert_eq!(p.dx, 0.0125);
        assert!(matches!(c.initial, InitialCondition::Tanh { z0 } if z0 == 0.5));
    }

    #[test]
    fn explicit_parameters_and_heterogeneity() {
        let c = DdeRunConfig::from_toml(
            r#"
            steps_per_unit = 20
            t_span = 1.0
            samples = 1000
            [model]
            alpha = 0.5
            gamma = 0.2
            f2 = { kind = "constant", value = 0.0 }
            [background]
            x_min = -10.0
            x_max = 10.0
            [history]
            z0 = 0.0
            root = "p"
            "#,
        )
        .unwrap();
        let (cfg, _, hist) = c.build().unwrap();
        assert_eq!(cfg.h, 0.05);
        assert!((hist.last().slope - 0.83).abs() < 5e-3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PdeRunConfig::from_toml("domain = [0.0, 1.0]\ns_end = 1.0\nbogus = 1\n[model]\nexample = \"ex2\"\n[initial]\nkind = \"tanh\"\nz0 = 0.0").is_err());
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Inner {
        a: f64,
        b: Vec<f64>,
    }

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Outer {
        x: u64,
        inner: Inner,
    }

    #[test]
    fn merge_overrides_nested_keys_only() {
        let base = Outer { x: 1, inner: Inner { a: 0.5, b: vec![1.0] } };
        let m = merge_toml(&base, "[inner]\na = 2.0").unwrap();
        assert_eq!(m, Outer { x: 1, inner: Inner { a: 2.0, b: vec![1.0] } });
        assert!(merge_toml(&base, "x = \"no\"").is_err());
    }
}
