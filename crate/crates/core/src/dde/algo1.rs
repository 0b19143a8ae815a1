//! Explicit stepping of the delay equation with the delay functional evaluated directly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::functional::{
    delay_functional_mc, delay_functional_quadrature, ln_2cosh, mc_weight, mean_stderr, sample_block, DelayMethod,
};
use crate::background::BackgroundState;
use crate::constant_coeff::JUMP;
use crate::error::{Error, Result};
use crate::heterogeneity::Heterogeneity;
use crate::history::{FrontHistory, PathEval};
use crate::model::ModelParams;
use crate::numerics::roots::brent;
use crate::trajectory::Trajectory;

/// Grid for the co-simulated V field of the implicit algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Algo2Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    /// Warm-up duration for the default initial field, in units of tauhat.
    #[serde(default = "default_warmup")]
    pub warmup: f64,
}

fn default_warmup() -> f64 {
    20.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Algorithm {
    #[default]
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdeConfig {
    pub params: ModelParams,
    pub f2: Heterogeneity,
    /// Step length in s.
    pub h: f64,
    /// Monte Carlo samples per step.
    pub samples: usize,
    pub seed: u64,
    pub a_max: f64,
    pub method: DelayMethod,
    pub algo: Algorithm,
    pub algo2_grid: Option<Algo2Grid>,
    /// Quadrature truncation in units of tauhat.
    pub r_max_factor: f64,
    pub quad_tol: f64,
    /// Stop once the position leaves this interval.
    pub stop_outside: Option<(f64, f64)>,
}

impl DdeConfig {
    pub fn new(params: ModelParams, f2: Heterogeneity, h: f64) -> Self {
        Self {
            params,
            f2,
            h,
            samples: 100_000,
            seed: 0,
            a_max: 5.0,
            method: DelayMethod::Mc,
            algo: Algorithm::One,
            algo2_grid: None,
            r_max_factor: 40.0,
            quad_tol: 1e-10,
            stop_outside: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.f2.validate()?;
        if !(self.h > 0.0) {
            return Err(Error::Validation("step h must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::Validation("need at least one sample".into()));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::Validation("a_max must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub s: f64,
    /// `W` (Algorithm 1) or `V(z)` (Algorithm 2) at the committed slope.
    pub w: f64,
    pub stderr: f64,
    pub a_star: f64,
    pub iterations: usize,
}

/// Output of a DDE run; on failure the partial trajectory is kept.
#[derive(Debug, Clone)]
pub struct DdeRun {
    pub trajectory: Trajectory,
    pub history: FrontHistory,
    pub diagnostics: Vec<StepDiagnostics>,
    pub failure: Option<String>,
}

impl DdeRun {
    pub fn diagnostics_csv(&self) -> String {
        use crate::trajectory::fmt_g15;
        let mut out = String::from("s,W,stderr,a_star,iterations\n");
        for d in &self.diagnostics {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_g15(d.s),
                fmt_g15(d.w),
                fmt_g15(d.stderr),
                fmt_g15(d.a_star),
                d.iterations
            ));
        }
        out
    }
}

/// Residual of the discretised delay equation at `s` for extension parameter `a`.
pub fn dde_error(h: &FrontHistory, a: f64, s: f64, bg: &BackgroundState, cfg: &DdeConfig) -> Result<f64> {
    let b = h.last();
    if s < b.s {
        return Err(Error::ExtensionRange { s, s_last: b.s });
    }
    let path = h.extended(a);
    let t = cfg.params.tauhat;
    let w = match cfg.method {
        DelayMethod::Mc => {
            let stream = h.breakpoints().len() as u64;
            delay_functional_mc(&path, s, t, &cfg.f2, cfg.samples, cfg.seed, stream)?.value
        }
        DelayMethod::Quadrature => {
            delay_functional_quadrature(&path, s, t, &cfg.f2, cfg.r_max_factor * t, cfg.quad_tol)?.value
        }
    };
    let (z, slope) = path.eval(s)?;
    Ok(JUMP * slope - cfg.params.alpha * (t * w - bg.minus().q_at(z)) - cfg.params.gamma)
}

/// Monte Carlo samples of one step, split by whether they reach into the committed history.
struct StepKernel<'a> {
    zn: f64,
    slope_n: f64,
    h: f64,
    tauhat: f64,
    f2: &'a Heterogeneity,
    // samples reaching before s_N: weight = amp * exp(-lam d^2 + ln2cosh(kap d)), d = off + sigma h
    amp: Vec<f64>,
    off: Vec<f64>,
    lam: Vec<f64>,
    kap: Vec<f64>,
    zero_old: usize,
    fresh: Vec<(f64, f64)>,
    buf: Vec<f64>,
}

impl<'a> StepKernel<'a> {
    fn new(hist: &FrontHistory, cfg: &'a DdeConfig, stream: u64) -> Result<Self> {
        let t = cfg.params.tauhat;
        let last = hist.last();
        let s = last.s + cfg.h;
        let block = sample_block(cfg.seed, stream, cfg.samples, t);
        let mut k = StepKernel {
            zn: last.z,
            slope_n: last.slope,
            h: cfg.h,
            tauhat: t,
            f2: &cfg.f2,
            amp: Vec::new(),
            off: Vec::new(),
            lam: Vec::new(),
            kap: Vec::new(),
            zero_old: 0,
            fresh: Vec::new(),
            buf: Vec::with_capacity(cfg.samples),
        };
        for (x, r) in block {
            if r < cfg.h {
                k.fresh.push((x, r));
                continue;
            }
            let (zr, dz) = hist.eval(s - r)?;
            let g = dz * (1.0 + cfg.f2.eval(zr));
            let amp = if g == 0.0 || x == 0.0 { 0.0 } else { g * r / (t * x) * (-r / t).exp() };
            if amp == 0.0 {
                k.zero_old += 1;
            } else {
                k.amp.push(amp);
                k.off.push(last.z - zr);
                k.lam.push(t / (4.0 * r));
                k.kap.push(0.5 * t * x / r);
            }
        }
        Ok(k)
    }

    /// `(W, stderr, z(s))` for the extension with slope `slope_N + a`.
    fn eval(&mut self, a: f64) -> (f64, f64, f64) {
        let sigma = self.slope_n + a;
        let shift = sigma * self.h;
        self.buf.clear();
        for j in 0..self.amp.len() {
            let d = self.off[j] + shift;
            self.buf.push(self.amp[j] * (-self.lam[j] * d * d + ln_2cosh(self.kap[j] * d)).exp());
        }
        for &(x, r) in &self.fresh {
            let zr = self.zn + sigma * (self.h - r);
            self.buf.push(mc_weight(x, r, sigma, 1.0 + self.f2.eval(zr), sigma * r, self.tauhat));
        }
        let (w, se) = mean_stderr(&self.buf, self.zero_old);
        (w, se, self.zn + shift)
    }
}

/// Solves `e(a) = 0` by a secant guess, outward bracket search and Brent.
pub(crate) fn solve_extension(mut e: impl FnMut(f64) -> Result<f64>, a_max: f64) -> Result<(f64, usize)> {
    let mut evals = 1;
    let e0 = e(0.0)?;
    if e0 == 0.0 {
        return Ok((0.0, evals));
    }
    // e grows like sqrt(2)/3 * a
    let mut limit = a_max;
    let dir = -e0.signum();
    let mut prev = (0.0, e0);
    let mut step = (e0.abs() / JUMP).max(1e-8);
    for expansion in 0..2 {
        loop {
            let a = (prev.0 + dir * step).clamp(-limit, limit);
            let ea = e(a)?;
            evals += 1;
            if ea.signum() != e0.signum() || ea == 0.0 {
                let (root, it) = brent(
                    |x| {
                        evals += 1;
                        e(x)
                    },
                    prev.0,
                    a,
                    prev.1,
                    ea,
                    1e-12,
                    100,
                )?;
                return Ok((root, it + evals));
            }
            prev = (a, ea);
            if a.abs() >= limit {
                break;
            }
            step *= 2.0;
        }
        if expansion == 0 {
            limit *= 4.0;
        }
    }
    Err(Error::RootBracket(format!("no sign change of the step residual within |a| <= {limit}")))
}

/// Commits one step of length `cfg.h`.
pub fn dde_step_algo1(hist: &FrontHistory, cfg: &DdeConfig, bg: &BackgroundState) -> Result<(FrontHistory, StepDiagnostics)> {
    let p = cfg.params;
    let t = p.tauhat;
    let s = hist.last().s + cfg.h;
    let minus = bg.minus();
    let (a_star, iterations, w, stderr) = match cfg.method {
        DelayMethod::Mc => {
            let mut kernel = StepKernel::new(hist, cfg, hist.breakpoints().len() as u64)?;
            let slope_n = hist.last().slope;
            let (a, it) = solve_extension(
                |a| {
                    let (w, _, z) = kernel.eval(a);
                    Ok(JUMP * (slope_n + a) - p.alpha * (t * w - minus.q_at(z)) - p.gamma)
                },
                cfg.a_max,
            )?;
            let (w, se, _) = kernel.eval(a);
            (a, it, w, se)
        }
        DelayMethod::Quadrature => {
            let (a, it) = solve_extension(|a| dde_error(hist, a, s, bg, cfg), cfg.a_max)?;
            let w = delay_functional_quadrature(&hist.extended(a), s, t, &cfg.f2, cfg.r_max_factor * t, cfg.quad_tol)?;
            (a, it, w.value, 0.0)
        }
    };
    let mut next = hist.clone();
    next.push(s, hist.last().slope + a_star)?;
    Ok((next, StepDiagnostics { s, w, stderr, a_star, iterations }))
}

pub(crate) fn run_meta(cfg: &DdeConfig, solver: &str, traj: &mut Trajectory, started: Instant, failure: &Option<String>, steps: usize) {
    traj.meta.solver = solver.into();
    traj.meta.seed = (cfg.method == DelayMethod::Mc && cfg.algo == Algorithm::One).then_some(cfg.seed);
    traj.meta.settings = serde_json::to_value(cfg).unwrap_or_default();
    traj.meta.wall_time_s = started.elapsed().as_secs_f64();
    traj.meta.stats = serde_json::json!({
        "steps": steps,
        "failure": failure,
        "formally_derived": cfg.params.alpha > 0.0,
    });
}

/// Iterates [`dde_step_algo1`] for `ceil(T / h)` steps.
pub fn dde_run_algo1(h0: &FrontHistory, t_span: f64, cfg: &DdeConfig, bg: &BackgroundState) -> Result<DdeRun> {
    cfg.validate()?;
    let started = Instant::now();
    let n = (t_span / cfg.h - 1e-9).ceil().max(0.0) as usize;
    let mut hist = h0.clone();
    let mut traj = Trajectory::new("dde-algo1");
    let b = hist.last();
    traj.push(b.s, b.z, b.slope)?;
    let mut diags = Vec::with_capacity(n);
    let mut failure = None;
    for _ in 0..n {
        match dde_step_algo1(&hist, cfg, bg) {
            Ok((next, d)) => {
                hist = next;
                let b = hist.last();
                traj.push(b.s, b.z, b.slope)?;
                diags.push(d);
                if let Some((lo, hi)) = cfg.stop_outside {
                    if b.z < lo || b.z > hi {
                        break;
                    }
                }
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    run_meta(cfg, "dde-algo1", &mut traj, started, &failure, diags.len());
    Ok(DdeRun { trajectory: traj, history: hist, diagnostics: diags, failure })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{background_state, BoundaryPolicy, Sign};
    use crate::constant_coeff::speed_roots;
    use crate::grid::UniformGrid;
    use crate::heterogeneity::build_example_heterogeneity;

    fn flat_bg() -> BackgroundState {
        let g = UniformGrid::covering(-20.0, 20.0, 0.05).unwrap();
        background_state(&Heterogeneity::Zero, &Heterogeneity::Zero, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap()
    }

    #[test]
    fn kernel_matches_generic_estimator() {
        let (_, f2) = build_example_heterogeneity("ex0").unwrap();
        let p = ModelParams::example("ex0").unwrap();
        let mut cfg = DdeConfig::new(p, f2.clone(), 0.05);
        cfg.samples = 20_000;
        cfg.seed = 3;
        let mut h = FrontHistory::constant_speed(2.0, 0.8, 0.0);
        h.push(0.05, 0.7).unwrap();
        let stream = h.breakpoints().len() as u64;
        let mut k = StepKernel::new(&h, &cfg, stream).unwrap();
        for a in [-0.3, 0.0, 0.4] {
            let (w, se, _) = k.eval(a);
            let direct = delay_functional_mc(&h.extended(a), 0.1, 1.0, &f2, cfg.samples, cfg.seed, stream).unwrap();
            assert!((w - direct.value).abs() < 1e-12 * (1.0 + w.abs()));
            assert!((se - direct.stderr).abs() < 1e-12);
        }
    }

    #[test]
    fn error_vanishes_at_constant_speed_fixed_point() {
        let p = ModelParams::example("ex0").unwrap();
        let c = speed_roots(&p).unwrap().roots[0];
        let mut cfg = DdeConfig::new(p, Heterogeneity::Zero, 1.0 / 30.0);
        cfg.method = DelayMethod::Quadrature;
        let h = FrontHistory::constant_speed(0.0, c, 0.0);
        let e = dde_error(&h, 0.0, cfg.h, &flat_bg(), &cfg).unwrap();
        assert!(e.abs() < 1e-6, "e = {e}");
    }

    #[test]
    fn error_vanishes_at_stationary_front() {
        let (f1, f2) = build_example_heterogeneity("ex1").unwrap();
        let g = UniformGrid::covering(-10.0, 10.0, 0.01).unwrap();
        let bg = background_state(&f1, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let p = ModelParams::example("ex1").unwrap();
        let sl = crate::background::riccati_slopes(&f1, &g).unwrap();
        let x0 = crate::background::stationary_front_positions(&p, &bg, &sl).unwrap().positions[1].x0;
        let mut cfg = DdeConfig::new(p, f2, 0.05);
        cfg.samples = 1000;
        let h = FrontHistory::constant_speed(x0, 0.0, 0.0);
        let e = dde_error(&h, 0.0, 0.05, &bg, &cfg).unwrap();
        assert!(e.abs() < 1e-8);
    }

    #[test]
    fn error_increases_with_a() {
        let p = ModelParams::example("ex0").unwrap();
        let (_, f2) = build_example_heterogeneity("ex0").unwrap();
        let mut cfg = DdeConfig::new(p, f2, 1.0 / 30.0);
        cfg.samples = 5000;
        let h = FrontHistory::constant_speed(4.0, 0.8, 0.0);
        let g = UniformGrid::covering(-20.0, 30.0, 0.02).unwrap();
        let bg = background_state(&Heterogeneity::Zero, &cfg.f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..21 {
            let a = -1.0 + 0.1 * k as f64;
            let e = dde_error(&h, a, cfg.h, &bg, &cfg).unwrap();
            if k > 0 {
                assert!((e - prev) / 0.1 >= JUMP - 0.1, "slope at a={a}");
            }
            prev = e;
        }
    }

    #[test]
    fn constant_speed_is_preserved() {
        let p = ModelParams::example("ex0").unwrap();
        let c = speed_roots(&p).unwrap().roots[0];
        let mut cfg = DdeConfig::new(p, Heterogeneity::Zero, 0.1);
        cfg.samples = 20_000;
        let run = dde_run_algo1(&FrontHistory::constant_speed(0.0, c, 0.0), 3.0, &cfg, &flat_bg()).unwrap();
        assert!(run.failure.is_none());
        for d in &run.diagnostics {
            assert!(d.stderr > 0.0);
        }
        let worst = run.trajectory.samples.iter().fold(0.0f64, |m, p| m.max((p.dz_ds - c).abs()));
        assert!(worst < 0.1, "max slope deviation {worst}");
    }

    #[test]
    fn quadrature_stepper_preserves_speed_tightly() {
        let p = ModelParams::example("ex0").unwrap();
        let c = speed_roots(&p).unwrap().roots[0];
        let mut cfg = DdeConfig::new(p, Heterogeneity::Zero, 0.1);
        cfg.method = DelayMethod::Quadrature;
        let run = dde_run_algo1(&FrontHistory::constant_speed(0.0, c, 0.0), 1.0, &cfg, &flat_bg()).unwrap();
        for s in &run.trajectory.samples {
            assert!((s.dz_ds - c).abs() < 1e-5);
        }
    }

    #[test]
    fn stationary_seed_stays_put() {
        let (f1, f2) = build_example_heterogeneity("ex1").unwrap();
        let g = UniformGrid::covering(-10.0, 10.0, 0.01).unwrap();
        let bg = background_state(&f1, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let p = ModelParams::example("ex1").unwrap();
        let sl = crate::background::riccati_slopes(&f1, &g).unwrap();
        let x0 = crate::background::stationary_front_positions(&p, &bg, &sl).unwrap().positions[1].x0;
        let mut cfg = DdeConfig::new(p, f2, 0.1);
        cfg.samples = 2000;
        let run = dde_run_algo1(&FrontHistory::constant_speed(x0, 0.0, 0.0), 2.0, &cfg, &bg).unwrap();
        for s in &run.trajectory.samples {
            assert!((s.z - x0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let p = ModelParams::example("ex0").unwrap();
        let (_, f2) = build_example_heterogeneity("ex0").unwrap();
        let g = UniformGrid::covering(-20.0, 30.0, 0.02).unwrap();
        let bg = background_state(&Heterogeneity::Zero, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let mut cfg = DdeConfig::new(p, f2, 0.1);
        cfg.samples = 3000;
        cfg.seed = 17;
        let h0 = FrontHistory::constant_speed(2.5, 0.83, 0.0);
        let a = dde_run_algo1(&h0, 1.0, &cfg, &bg).unwrap().trajectory.to_csv_string();
        let b = dde_run_algo1(&h0, 1.0, &cfg, &bg).unwrap().trajectory.to_csv_string();
        assert_eq!(a, b);
        cfg.seed = 18;
        let c = dde_run_algo1(&h0, 1.0, &cfg, &bg).unwrap().trajectory.to_csv_string();
        assert_ne!(a, c);
    }
}
