//! Runs the worked examples end to end and compares trajectories.
//!
//! Each example writes its trajectories (`s,z,dz_ds`), velocity-position curves
//! (`z,dz_ds`), metadata and a `report.json` into its own directory. Pass flags are
//! computed from the metric map and the thresholds only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::background::{background_state, riccati_slopes, stationary_front_positions, BoundaryPolicy, Sign, Stability};
use crate::background::BackgroundState;
use crate::config::merge_toml;
use crate::dde::{dde_run_algo1, dde_run_algo2, Algo2Grid, Algorithm, DdeConfig, DdeRun};
use crate::error::{Error, Result};
use crate::grid::{GridProfile, UniformGrid};
use crate::heterogeneity::{build_example_heterogeneity, Heterogeneity};
use crate::history::FrontHistory;
use crate::model::ModelParams;
use crate::pde::{make_ic_relax_shift, run_pde, shift_state, tanh_front, PdeConfig, PdeRun, PdeState, DEFAULT_RELAX_SEQUENCE};
use crate::trajectory::{fmt_g15, Sample, Trajectory};
use crate::wave::{build_concatenated_ic, find_speed, singular_speed, RootIndex, ShootOptions};

pub const EXAMPLE_IDS: [&str; 5] = ["fig1", "ex0", "ex1", "ex2", "ex3"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Sup position distance between the delay equation and the PDE at the largest epsilon.
    pub position_sup: f64,
    /// Sup position distance between the two delay-equation algorithms.
    pub algo_sup: f64,
    /// Allowed backwards motion before a run stops counting as monotone.
    pub monotone_tol: f64,
    /// Speed tolerance for the direction-reversal runs.
    pub speed_tol: f64,
    pub trap_bound: f64,
    pub reversal_position: f64,
    pub reversal_tol: f64,
    pub min_reversals: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            position_sup: 0.3,
            algo_sup: 0.05,
            monotone_tol: 0.0,
            speed_tol: 0.02,
            trap_bound: 11.0,
            reversal_position: 10.0,
            reversal_tol: 0.5,
            min_reversals: 2,
        }
    }
}

/// Everything needed to rerun an example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSettings {
    pub id: String,
    pub eps: Vec<f64>,
    pub seed: u64,
    /// Monte Carlo samples per delay-equation step.
    pub samples: usize,
    pub steps_per_unit: f64,
    pub s_horizon: f64,
    /// Initial positions; Example 1 uses the first between the stationary fronts and
    /// the rest to their left.
    pub starts: Vec<f64>,
    pub pde_domain: (f64, f64),
    pub pde_record_dt: f64,
    pub pde_policy: BoundaryPolicy,
    /// Background grid of the delay equation.
    pub dde_domain: (f64, f64),
    pub dde_dx: f64,
    /// Run the implicit algorithm alongside Algorithm 1.
    pub algo2: bool,
    pub algo2_dx: f64,
    /// Time-alignment anchor `(z, s)`.
    pub anchor: (f64, f64),
    /// Position range over which trajectories are compared.
    pub window: (f64, f64),
    /// Offset from the middle speed for the reversal runs.
    pub speed_offset: f64,
    /// Seeds tried for the two delay-equation outcomes of Example 2.
    pub max_seeds: u64,
    /// Spacing of the uniform z-grid of velocity-position curves.
    pub vz_dz: f64,
    pub snapshot_dt: Option<f64>,
    pub thresholds: Thresholds,
}

impl ExampleSettings {
    pub fn defaults(id: &str) -> Result<Self> {
        let base = Self {
            id: id.into(),
            eps: vec![0.1],
            seed: 0,
            samples: 100_000,
            steps_per_unit: 30.0,
            s_horizon: 30.0,
            starts: vec![0.0],
            pde_domain: (-20.0, 20.0),
            pde_record_dt: 0.02,
            pde_policy: BoundaryPolicy::Strict,
            dde_domain: (-40.0, 40.0),
            dde_dx: 0.01,
            algo2: false,
            algo2_dx: 0.01,
            anchor: (0.5, 0.0),
            window: (-2.0, 12.0),
            speed_offset: 1e-3,
            max_seeds: 8,
            vz_dz: 0.05,
            snapshot_dt: None,
            thresholds: Thresholds::default(),
        };
        Ok(match id {
            "fig1" => Self {
                eps: vec![0.15],
                s_horizon: 40.0,
                starts: vec![30.0],
                pde_domain: (0.0, 300.0),
                pde_policy: BoundaryPolicy::Frozen,
                snapshot_dt: Some(0.5),
                ..base
            },
            "ex0" => Self {
                eps: vec![0.1, 0.05],
                s_horizon: 30.0,
                starts: vec![-2.5],
                pde_domain: (-12.0, 22.0),
                algo2: true,
                ..base
            },
            "ex1" => Self {
                eps: vec![0.1, 0.05],
                s_horizon: 15.0,
                starts: vec![0.45, 0.3],
                pde_domain: (-15.0, 15.0),
                window: (0.45, 0.85),
                ..base
            },
            "ex2" => Self {
                samples: 150_000,
                steps_per_unit: 100.0,
                s_horizon: 10.0,
                pde_domain: (-40.0, 40.0),
                dde_domain: (-60.0, 60.0),
                ..base
            },
            "ex3" => Self {
                samples: 150_000,
                steps_per_unit: 40.0,
                s_horizon: 80.0,
                pde_domain: (-20.0, 20.0),
                dde_domain: (-30.0, 30.0),
                dde_dx: 0.005,
                algo2: true,
                algo2_dx: 0.005,
                ..base
            },
            other => return Err(Error::UnknownExample(other.into())),
        })
    }

    /// Defaults overlaid with a TOML document.
    pub fn with_overrides(id: &str, toml_text: &str) -> Result<Self> {
        let s: Self = merge_toml(&Self::defaults(id)?, toml_text)?;
        if s.id != id {
            return Err(Error::Config(format!("settings are for `{}`, not `{id}`", s.id)));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub csv: PathBuf,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub settings: ExampleSettings,
    pub runs: Vec<RunRecord>,
    pub metrics: BTreeMap<String, f64>,
    pub pass_flags: BTreeMap<String, bool>,
    /// Errors that cut the example short.
    pub errors: Vec<String>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.errors.is_empty() && self.pass_flags.values().all(|&b| b)
    }

    pub fn run(&self, label: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// Shifts `traj` in time so that it first crosses `z = anchor.0` at `s = anchor.1`.
pub fn time_align(traj: &Trajectory, anchor: (f64, f64)) -> Result<Trajectory> {
    let t = traj
        .crossing_time(anchor.0)
        .ok_or_else(|| Error::Validation(format!("trajectory never reaches z = {}", anchor.0)))?;
    let shift = anchor.1 - t;
    let mut out = traj.clone();
    for p in &mut out.samples {
        p.s += shift;
    }
    Ok(out)
}

/// Times of the first crossings of both ends of `range`, in increasing order.
pub fn traversal_window(traj: &Trajectory, range: (f64, f64)) -> Option<(f64, f64)> {
    let a = traj.crossing_time(range.0)?;
    let b = traj.crossing_time(range.1)?;
    Some((a.min(b), a.max(b)))
}

/// Sup and L2 distances between two trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub window: (f64, f64),
    pub position_sup: f64,
    pub position_l2: f64,
    pub velocity_sup: f64,
    pub velocity_l2: f64,
    /// Velocity as a function of position, over the common monotone range.
    pub velocity_vs_position_sup: Option<f64>,
    pub velocity_vs_position_l2: Option<f64>,
}

/// Distances over the common time window (intersected with `s_window`), with both
/// trajectories interpolated linearly.
pub fn compare_trajectories(a: &Trajectory, b: &Trajectory, s_window: Option<(f64, f64)>) -> Result<Comparison> {
    let range = |t: &Trajectory| -> Result<(f64, f64)> {
        match (t.samples.first(), t.samples.last()) {
            (Some(f), Some(l)) => Ok((f.s, l.s)),
            _ => Err(Error::Validation("empty trajectory".into())),
        }
    };
    let (a0, a1) = range(a)?;
    let (b0, b1) = range(b)?;
    let (mut lo, mut hi) = (a0.max(b0), a1.min(b1));
    if let Some((w0, w1)) = s_window {
        lo = lo.max(w0);
        hi = hi.min(w1);
    }
    if !(hi > lo) {
        return Err(Error::Validation(format!("no overlap in s: [{lo}, {hi}]")));
    }
    let col = |t: &Trajectory, f: fn(&Sample) -> f64| -> (Vec<f64>, Vec<f64>) {
        (t.samples.iter().map(|p| p.s).collect(), t.samples.iter().map(f).collect())
    };
    let (sa, za) = col(a, |p| p.z);
    let (sb, zb) = col(b, |p| p.z);
    let (_, va) = col(a, |p| p.dz_ds);
    let (_, vb) = col(b, |p| p.dz_ds);
    let (position_sup, position_l2) = piecewise_linear_distance((&sa, &za), (&sb, &zb), lo, hi);
    let (velocity_sup, velocity_l2) = piecewise_linear_distance((&sa, &va), (&sb, &vb), lo, hi);
    let vp = match (monotone_curve(a, lo, hi), monotone_curve(b, lo, hi)) {
        (Some(ca), Some(cb)) => {
            let zl = ca.0[0].max(cb.0[0]);
            let zh = ca.0[ca.0.len() - 1].min(cb.0[cb.0.len() - 1]);
            (zh > zl).then(|| piecewise_linear_distance((&ca.0, &ca.1), (&cb.0, &cb.1), zl, zh))
        }
        _ => None,
    };
    Ok(Comparison {
        window: (lo, hi),
        position_sup,
        position_l2,
        velocity_sup,
        velocity_l2,
        velocity_vs_position_sup: vp.map(|d| d.0),
        velocity_vs_position_l2: vp.map(|d| d.1),
    })
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return ys[0];
    }
    if k == xs.len() {
        return ys[xs.len() - 1];
    }
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

/// Exact sup and L2 norms of the difference of two piecewise-linear functions on `[lo, hi]`.
fn piecewise_linear_distance(a: (&[f64], &[f64]), b: (&[f64], &[f64]), lo: f64, hi: f64) -> (f64, f64) {
    let mut knots: Vec<f64> = a.0.iter().chain(b.0.iter()).copied().filter(|&x| x > lo && x < hi).collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let d: Vec<f64> = knots.iter().map(|&x| interp(a.0, a.1, x) - interp(b.0, b.1, x)).collect();
    let sup = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sq: f64 = knots
        .windows(2)
        .zip(d.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] * y[0] + y[0] * y[1] + y[1] * y[1]) / 3.0)
        .sum();
    (sup, sq.sqrt())
}

/// `(z, dz_ds)` along the longest initial stretch of `[lo, hi]` on which `z` moves
/// strictly one way, sorted by `z`.
fn monotone_curve(t: &Trajectory, lo: f64, hi: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let pts: Vec<Sample> = t.samples.iter().copied().filter(|p| p.s >= lo && p.s <= hi).collect();
    if pts.len() < 2 {
        return None;
    }
    let dir = (pts[1].z - pts[0].z).signum();
    if dir == 0.0 {
        return None;
    }
    let mut zs = vec![pts[0].z];
    let mut vs = vec![pts[0].dz_ds];
    for w in pts.windows(2) {
        if (w[1].z - w[0].z) * dir <= 0.0 {
            break;
        }
        zs.push(w[1].z);
        vs.push(w[1].dz_ds);
    }
    if dir < 0.0 {
        zs.reverse();
        vs.reverse();
    }
    (zs.len() >= 2).then_some((zs, vs))
}

/// Velocity against position on a uniform z-grid over the initial monotone stretch.
pub fn velocity_vs_position(t: &Trajectory, dz: f64) -> Option<Vec<(f64, f64)>> {
    let (s0, s1) = (t.samples.first()?.s, t.samples.last()?.s);
    let (zs, vs) = monotone_curve(t, s0, s1)?;
    let (z0, z1) = (zs[0], zs[zs.len() - 1]);
    let n = ((z1 - z0) / dz).floor() as usize;
    Some((0..=n).map(|i| z0 + i as f64 * dz).map(|z| (z, interp(&zs, &vs, z))).collect())
}

pub fn write_velocity_position_csv(path: &Path, pts: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("z,dz_ds\n");
    for (z, v) in pts {
        s.push_str(&format!("{},{}\n", fmt_g15(*z), fmt_g15(*v)));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Samples at which the velocity changes sign (zero velocities are skipped).
pub fn velocity_reversals(t: &Trajectory) -> Vec<Sample> {
    let mut out = Vec::new();
    let mut prev: Option<f64> = None;
    for p in &t.samples {
        if p.dz_ds == 0.0 {
            continue;
        }
        if let Some(q) = prev {
            if q.signum() != p.dz_ds.signum() {
                out.push(*p);
            }
        }
        prev = Some(p.dz_ds);
    }
    out
}

/// Mean velocity over `[s0, s1]` as displacement over time, clipped to the sampled range.
pub fn mean_velocity(t: &Trajectory, s0: f64, s1: f64) -> Option<f64> {
    let (a, b) = (t.samples.first()?.s, t.samples.last()?.s);
    let (s0, s1) = (s0.max(a), s1.min(b));
    if !(s1 > s0) {
        return None;
    }
    Some((t.at(s1)?.0 - t.at(s0)?.0) / (s1 - s0))
}

/// Largest drop of `z` below its running maximum.
pub fn max_backtrack(t: &Trajectory) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for p in &t.samples {
        best = best.max(p.z);
        worst = worst.max(best - p.z);
    }
    worst
}

fn eps_label(e: f64) -> String {
    format!("pde_eps_{e}")
}

fn metric(m: &BTreeMap<String, f64>, key: &str) -> Option<f64> {
    m.get(key).copied().filter(|v| v.is_finite())
}

/// Pass flags of an example as a function of its metrics.
pub fn evaluate_flags(s: &ExampleSettings, m: &BTreeMap<String, f64>) -> BTreeMap<String, bool> {
    let th = &s.thresholds;
    let mut f = BTreeMap::new();
    let le = |k: &str, t: f64| metric(m, k).map(|v| v <= t).unwrap_or(false);
    match s.id.as_str() {
        "ex0" => {
            if let Some(e) = s.eps.first() {
                f.insert(format!("{}_position_sup", eps_label(*e)), le(&format!("{}.position_sup", eps_label(*e)), th.position_sup));
            }
            if s.eps.len() >= 2 {
                let mut eps = s.eps.clone();
                eps.sort_by(|a, b| b.total_cmp(a));
                let sups: Vec<Option<f64>> = eps.iter().map(|e| metric(m, &format!("{}.position_sup", eps_label(*e)))).collect();
                let ok = sups.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a));
                f.insert("convergence_trend".into(), ok);
            }
            if s.algo2 {
                f.insert("algo2_agrees".into(), le("dde_algo2.position_sup", th.algo_sup));
            }
        }
        "ex1" => {
            let stable = metric(m, "stable_position");
            let mut labels = vec!["dde_algo1".to_string()];
            labels.extend(s.eps.iter().map(|e| eps_label(*e)));
            for l in &labels {
                for (k, _) in s.starts.iter().enumerate() {
                    let key = |q: &str| metric(m, &format!("{l}.start{k}.{q}"));
                    let (Some(z0), Some(z1)) = (key("z_start"), key("z_end")) else {
                        f.insert(format!("{l}_start{k}"), false);
                        continue;
                    };
                    if k == 0 {
                        let ok = stable.is_some_and(|st| (z1 - st).abs() < (z0 - st).abs())
                            && z1 > z0
                            && key("backtrack").is_some_and(|b| b <= th.monotone_tol);
                        f.insert(format!("{l}_start{k}_toward_stable"), ok);
                    } else {
                        f.insert(format!("{l}_start{k}_travels_left"), z1 < z0);
                    }
                }
            }
        }
        "ex2" => {
            for e in &s.eps {
                let l = eps_label(*e);
                let c0 = metric(m, &format!("{l}.c0"));
                for (side, target) in [("plus", "cp"), ("minus", "cm")] {
                    let key = |q: &str| metric(m, &format!("{l}.{side}.{q}"));
                    let ct = metric(m, &format!("{l}.{target}"));
                    let ok = matches!((c0, ct, key("v_initial"), key("v_final")),
                        (Some(c0), Some(ct), Some(vi), Some(vf)) if (vi - c0).abs() <= th.speed_tol && (vf - ct).abs() <= th.speed_tol);
                    f.insert(format!("{l}_{side}_to_{target}"), ok);
                }
            }
            let n = |k: &str| metric(m, k).unwrap_or(0.0);
            f.insert("dde_both_outcomes".into(), n("dde_outcomes_cp") >= 1.0 && n("dde_outcomes_cm") >= 1.0);
        }
        "ex3" => {
            let mut labels = vec!["dde_algo1".to_string()];
            labels.extend(s.eps.iter().map(|e| eps_label(*e)));
            for l in &labels {
                let key = |q: &str| metric(m, &format!("{l}.{q}"));
                let trapped = matches!((key("z_min"), key("z_max")), (Some(a), Some(b)) if a > -th.trap_bound && b < th.trap_bound);
                f.insert(format!("{l}_trapped"), trapped);
                f.insert(format!("{l}_reversals"), key("reversals").is_some_and(|n| n >= th.min_reversals as f64));
                f.insert(format!("{l}_reversal_positions"), key("reversal_deviation").is_some_and(|d| d <= th.reversal_tol));
            }
        }
        _ => {}
    }
    f.insert("runs_completed".into(), metric(m, "failed_runs") == Some(0.0));
    f
}

struct Ctx<'a> {
    s: &'a ExampleSettings,
    dir: PathBuf,
    report: ExperimentReport,
}

impl Ctx<'_> {
    fn record(&mut self, label: &str, traj: &Trajectory, failure: Option<String>) -> Result<()> {
        let csv = self.dir.join(format!("{label}.csv"));
        traj.save(&csv)?;
        if let Some(pts) = velocity_vs_position(traj, self.s.vz_dz) {
            write_velocity_position_csv(&self.dir.join(format!("{label}_vz.csv")), &pts)?;
        }
        self.report.runs.push(RunRecord { label: label.into(), csv, failure });
        Ok(())
    }

    fn put(&mut self, key: impl Into<String>, v: f64) {
        self.report.metrics.insert(key.into(), v);
    }

    fn put_comparison(&mut self, label: &str, c: &Comparison) {
        self.put(format!("{label}.position_sup"), c.position_sup);
        self.put(format!("{label}.position_l2"), c.position_l2);
        self.put(format!("{label}.velocity_sup"), c.velocity_sup);
        self.put(format!("{label}.velocity_l2"), c.velocity_l2);
        if let (Some(a), Some(b)) = (c.velocity_vs_position_sup, c.velocity_vs_position_l2) {
            self.put(format!("{label}.vz_sup"), a);
            self.put(format!("{label}.vz_l2"), b);
        }
    }
}

/// Runs jobs on scoped threads, at most as many at once as there are cores.
fn run_parallel<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    let width = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
    let mut out = Vec::with_capacity(jobs.len());
    let mut jobs = jobs.into_iter().peekable();
    while jobs.peek().is_some() {
        let batch: Vec<_> = jobs.by_ref().take(width).collect();
        let res: Vec<T> = std::thread::scope(|sc| {
            let hs: Vec<_> = batch.into_iter().map(|j| sc.spawn(j)).collect();
            hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        out.extend(res);
    }
    out
}

fn dde_background(s: &ExampleSettings, f2: &Heterogeneity) -> Result<BackgroundState> {
    let g = UniformGrid::covering(s.dde_domain.0, s.dde_domain.1, s.dde_dx)?;
    background_state(&Heterogeneity::Zero, f2, Sign::Minus, &g, BoundaryPolicy::Strict)
}

fn dde_config(s: &ExampleSettings, p: &ModelParams, f2: &Heterogeneity) -> DdeConfig {
    let mut c = DdeConfig::new(p.with_epsilon(0.0), f2.clone(), 1.0 / s.steps_per_unit);
    c.samples = s.samples;
    c.seed = s.seed;
    c
}

fn algo2_config(s: &ExampleSettings, c: &DdeConfig) -> DdeConfig {
    let mut c2 = c.clone();
    c2.algo = Algorithm::Two;
    c2.algo2_grid = Some(Algo2Grid { x_min: s.dde_domain.0, x_max: s.dde_domain.1, dx: s.algo2_dx, warmup: 20.0 });
    c2
}

fn pde_config(s: &ExampleSettings, p: &ModelParams, f1: &Heterogeneity, f2: &Heterogeneity, eps: f64) -> PdeConfig {
    let mut c = PdeConfig::new(p.with_epsilon(eps), f1.clone(), f2.clone(), s.pde_domain, s.s_horizon);
    c.record_dt = Some(s.pde_record_dt);
    c.policy = s.pde_policy;
    c.snapshot_dt = s.snapshot_dt;
    let margin = 2.0 + 40.0 * eps;
    c.stop_outside = Some((s.pde_domain.0 + margin, s.pde_domain.1 - margin));
    c
}

/// A front that has travelled under constant coefficients, placed at `z0` in the
/// heterogeneous problem. The slow field picks up the background correction of the
/// heterogeneity on the side the front has not reached.
fn pre_travelled_ic(cfg: &PdeConfig, z0: f64, lead: f64) -> Result<PdeState> {
    let mut hom = cfg.clone();
    hom.f1 = Heterogeneity::Zero;
    hom.f2 = Heterogeneity::Zero;
    hom.record_dt = None;
    hom.snapshot_dt = None;
    let c = singular_speed(&hom.params.with_epsilon(0.0), RootIndex::P)?;
    if c == 0.0 {
        return Err(Error::Validation("a stationary front cannot be pre-travelled".into()));
    }
    let start = z0 - lead * c.signum();
    hom.s0 = 0.0;
    hom.s_end = 4.0 * lead / c.abs();
    hom.stop_outside = Some(if c > 0.0 { (f64::NEG_INFINITY, z0) } else { (z0, f64::INFINITY) });
    let bg_hom = hom.background()?;
    let ic = tanh_front(&hom, start, &bg_hom)?;
    let run = run_pde(&hom, &ic)?;
    if let Some(f) = run.failure {
        return Err(Error::Solver(format!("pre-travel run failed: {f}")));
    }
    let z = run.final_state.front()?;
    let st = shift_state(&run.final_state, z - z0, &bg_hom);
    let bg = cfg.background()?;
    let g = st.v.grid();
    let v: Vec<f64> = (0..g.n)
        .map(|i| {
            let x = g.x(i);
            st.v.values[i] - st.u.values[i] * (bg.v_at(x) - bg_hom.v_at(x))
        })
        .collect();
    Ok(PdeState { u: st.u, v: GridProfile { x_min: g.x_min, dx: g.dx, values: v }, s: cfg.s0 })
}

/// Runs one example and writes its files under `out_dir/<id>/`.
pub fn run_example(s: &ExampleSettings, out_dir: &Path) -> Result<ExperimentReport> {
    let dir = out_dir.join(&s.id);
    std::fs::create_dir_all(&dir)?;
    let report = ExperimentReport {
        id: s.id.clone(),
        settings: s.clone(),
        runs: Vec::new(),
        metrics: BTreeMap::new(),
        pass_flags: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut ctx = Ctx { s, dir, report };
    let res = match s.id.as_str() {
        "fig1" => run_fig1(&mut ctx),
        "ex0" => run_ex0(&mut ctx),
        "ex1" => run_ex1(&mut ctx),
        "ex2" => run_ex2(&mut ctx),
        "ex3" => run_ex3(&mut ctx),
        other => return Err(Error::UnknownExample(other.into())),
    };
    if let Err(e) = res {
        ctx.report.errors.push(e.to_string());
    }
    let failed = ctx.report.runs.iter().filter(|r| r.failure.is_some()).count();
    ctx.put("failed_runs", failed as f64 + ctx.report.errors.len() as f64);
    ctx.report.pass_flags = evaluate_flags(s, &ctx.report.metrics);
    ctx.report.save(&ctx.dir)?;
    Ok(ctx.report)
}

fn example_model(id: &str) -> Result<(ModelParams, Heterogeneity, Heterogeneity)> {
    let (f1, f2) = build_example_heterogeneity(id)?;
    Ok((ModelParams::example(id)?, f1, f2))
}

fn run_fig1(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.s;
    let (p, f1, f2) = example_model("fig1")?;
    let z0 = s.starts.first().copied().unwrap_or(30.0);
    for &e in &s.eps {
        let cfg = pde_config(s, &p, &f1, &f2, e);
        let ic = tanh_front(&cfg, z0, &cfg.background()?)?;
        let run = run_pde(&cfg, &ic)?;
        let l = eps_label(e);
        ctx.record(&l, &run.trajectory, run.failure.clone())?;
        write_density_csv(&ctx.dir.join(format!("{l}_density.csv")), &run, 0.25)?;
    }
    Ok(())
}

/// Long-format `s,x,V` rows from the snapshots, thinned to about `dx` in x.
fn write_density_csv(path: &Path, run: &PdeRun, dx: f64) -> Result<()> {
    let mut out = String::from("s,x,V\n");
    for snap in &run.snapshots {
        let g = snap.v.grid();
        let stride = ((dx / g.dx).round() as usize).max(1);
        for i in (0..g.n).step_by(stride) {
            out.push_str(&format!("{},{},{}\n", fmt_g15(snap.s), fmt_g15(g.x(i)), fmt_g15(snap.v.values[i])));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn run_ex0(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.s;
    let (p, f1, f2) = example_model("ex0")?;
    let z0 = s.starts.first().copied().unwrap_or(-2.5);
    let bg = dde_background(s, &f2)?;
    let mut cfg = dde_config(s, &p, &f2);
    cfg.stop_outside = Some((s.dde_domain.0 + 5.0, s.window.1 + 1.0));
    let tail = singular_speed(&p, RootIndex::P)?;
    let hist = FrontHistory::constant_speed(z0, tail, 0.0);

    let mut jobs: Vec<Box<dyn FnOnce() -> Result<(String, Trajectory, Option<String>)> + Send + '_>> = Vec::new();
    {
        let (cfg, bg, hist) = (cfg.clone(), &bg, hist.clone());
        jobs.push(Box::new(move || {
            let r = dde_run_algo1(&hist, s.s_horizon, &cfg, bg)?;
            Ok(("dde_algo1".into(), r.trajectory, r.failure))
        }));
    }
    if s.algo2 {
        let (cfg2, bg, hist) = (algo2_config(s, &cfg), &bg, hist.clone());
        jobs.push(Box::new(move || {
            let (r, _) = dde_run_algo2(&hist, None, s.s_horizon, &cfg2, bg)?;
            Ok(("dde_algo2".into(), r.trajectory, r.failure))
        }));
    }
    for &e in &s.eps {
        let pc = pde_config(s, &p, &f1, &f2, e);
        let mut pc = pc;
        pc.stop_outside = Some((s.pde_domain.0 + 2.0, s.window.1 + 1.0));
        jobs.push(Box::new(move || {
            let ic = pre_travelled_ic(&pc, z0, 4.0)?;
            let r = run_pde(&pc, &ic)?;
            Ok((eps_label(e), r.trajectory, r.failure))
        }));
    }
    let mut runs = BTreeMap::new();
    for r in run_parallel(jobs) {
        let (l, t, f) = r?;
        ctx.record(&l, &t, f)?;
        runs.insert(l, t);
    }
    let reference = time_align(&runs["dde_algo1"], s.anchor)?;
    let win = traversal_window(&reference, s.window)
        .ok_or_else(|| Error::Validation("the delay-equation run does not traverse the comparison window".into()))?;
    ctx.put("window_s0", win.0);
    ctx.put("window_s1", win.1);
    for (l, t) in &runs {
        if l == "dde_algo1" {
            continue;
        }
        let c = time_align(t, s.anchor).and_then(|a| compare_trajectories(&reference, &a, Some(win)));
        match c {
            Ok(c) => ctx.put_comparison(l, &c),
            Err(e) => ctx.report.errors.push(format!("{l}: {e}")),
        }
    }
    Ok(())
}

fn run_ex1(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.s;
    let (p, f1, f2) = example_model("ex1")?;
    let bg = dde_background(s, &f2)?;
    let slopes = riccati_slopes(&f1, &bg.grid())?;
    let sf = stationary_front_positions(&p, &bg, &slopes)?;
    for f in &sf.positions {
        match f.classification {
            Stability::Stable => ctx.put("stable_position", f.x0),
            Stability::Unstable => ctx.put("unstable_position", f.x0),
            Stability::Unclassified => {}
        }
    }
    let cfg = dde_config(s, &p, &f2);
    let mut jobs: Vec<Box<dyn FnOnce() -> Result<(String, Trajectory, Option<String>)> + Send + '_>> = Vec::new();
    for (k, &z0) in s.starts.iter().enumerate() {
        let (mut cfg, bg) = (cfg.clone(), &bg);
        cfg.stop_outside = Some((s.pde_domain.0 + 3.0, s.pde_domain.1 - 3.0));
        jobs.push(Box::new(move || {
            let r = dde_run_algo1(&FrontHistory::constant_speed(z0, 0.0, 0.0), s.s_horizon, &cfg, bg)?;
            Ok((format!("dde_algo1.start{k}"), r.trajectory, r.failure))
        }));
        for &e in &s.eps {
            let pc = pde_config(s, &p, &f1, &f2, e);
            jobs.push(Box::new(move || {
                let ic = make_ic_relax_shift(&pc, z0, &DEFAULT_RELAX_SEQUENCE)?;
                let r = run_pde(&pc, &ic)?;
                Ok((format!("{}.start{k}", eps_label(e)), r.trajectory, r.failure))
            }));
        }
    }
    let mut runs = BTreeMap::new();
    for r in run_parallel(jobs) {
        let (l, t, f) = r?;
        if let (Some(a), Some(b)) = (t.samples.first(), t.samples.last()) {
            ctx.put(format!("{l}.z_start"), a.z);
            ctx.put(format!("{l}.z_end"), b.z);
            ctx.put(format!("{l}.backtrack"), max_backtrack(&t));
        }
        ctx.record(&l.replace('.', "_"), &t, f)?;
        runs.insert(l, t);
    }
    if let Some(reference) = runs.get("dde_algo1.start0") {
        let reference = time_align(reference, s.anchor)?;
        for &e in &s.eps {
            let l = format!("{}.start0", eps_label(e));
            if let Some(t) = runs.get(&l) {
                match time_align(t, s.anchor).and_then(|a| compare_trajectories(&reference, &a, None)) {
                    Ok(c) => ctx.put_comparison(&l, &c),
                    Err(err) => ctx.report.errors.push(format!("{l}: {err}")),
                }
            }
        }
    }
    Ok(())
}

fn nearest_root(v: f64, roots: (f64, f64, f64)) -> &'static str {
    let d = [(roots.0, "cm"), (roots.1, "c0"), (roots.2, "cp")];
    d.iter().min_by(|a, b| (a.0 - v).abs().total_cmp(&(b.0 - v).abs())).map(|x| x.1).unwrap_or("c0")
}

fn run_ex2(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.s;
    let (p, f1, f2) = example_model("ex2")?;
    let roots = (
        singular_speed(&p, RootIndex::M)?,
        singular_speed(&p, RootIndex::Zero)?,
        singular_speed(&p, RootIndex::P)?,
    );
    ctx.put("cm_singular", roots.0);
    ctx.put("c0_singular", roots.1);
    ctx.put("cp_singular", roots.2);
    let z0 = s.starts.first().copied().unwrap_or(0.0);
    let opts = ShootOptions::default();
    for &e in &s.eps {
        let pe = p.with_epsilon(e);
        let l = eps_label(e);
        let mid = |r| find_speed(&pe, r, None, 1e-6, &opts).map(|(a, b)| 0.5 * (a + b));
        let (cm, c0, cp) = (mid(RootIndex::M)?, mid(RootIndex::Zero)?, mid(RootIndex::P)?);
        ctx.put(format!("{l}.cm"), cm);
        ctx.put(format!("{l}.c0"), c0);
        ctx.put(format!("{l}.cp"), cp);
        let mut cfg = pde_config(s, &p, &f1, &f2, e);
        cfg.s_end = s.s_horizon.max(12.0);
        let mut jobs: Vec<Box<dyn FnOnce() -> Result<(&'static str, PdeRun)> + Send + '_>> = Vec::new();
        for (side, sign) in [("plus", 1.0), ("minus", -1.0)] {
            let cfg = cfg.clone();
            jobs.push(Box::new(move || {
                let ic = build_concatenated_ic(c0 + sign * s.speed_offset, &cfg, z0, &opts)?;
                Ok((side, run_pde(&cfg, &ic)?))
            }));
        }
        for r in run_parallel(jobs) {
            let (side, run) = r?;
            let t = &run.trajectory;
            let end = t.last().map(|q| q.s).unwrap_or(0.0);
            if let Some(v) = mean_velocity(t, 0.1, 0.5) {
                ctx.put(format!("{l}.{side}.v_initial"), v);
            }
            if let Some(v) = mean_velocity(t, end - 1.0, end) {
                ctx.put(format!("{l}.{side}.v_final"), v);
            }
            ctx.record(&format!("{l}_{side}"), t, run.failure.clone())?;
        }
    }
    let bg = dde_background(s, &f2)?;
    let hist = FrontHistory::constant_speed(z0, roots.1, 0.0);
    let (mut n_p, mut n_m) = (0u32, 0u32);
    for seed in s.seed..s.seed + s.max_seeds {
        let mut cfg = dde_config(s, &p, &f2);
        cfg.seed = seed;
        cfg.stop_outside = Some((s.dde_domain.0 + 5.0, s.dde_domain.1 - 5.0));
        let run = dde_run_algo1(&hist, s.s_horizon, &cfg, &bg)?;
        let t = &run.trajectory;
        let end = t.last().map(|q| q.s).unwrap_or(0.0);
        let v = mean_velocity(t, end - 1.0, end).unwrap_or(f64::NAN);
        ctx.put(format!("dde_seed_{seed}.v_final"), v);
        match nearest_root(v, roots) {
            "cp" => n_p += 1,
            "cm" => n_m += 1,
            _ => {}
        }
        ctx.record(&format!("dde_seed_{seed}"), t, run.failure.clone())?;
        if n_p > 0 && n_m > 0 {
            break;
        }
    }
    ctx.put("dde_outcomes_cp", n_p as f64);
    ctx.put("dde_outcomes_cm", n_m as f64);
    Ok(())
}

fn trap_metrics(ctx: &mut Ctx, l: &str, t: &Trajectory) {
    let zs = t.z();
    let th = &ctx.s.thresholds;
    let revs = velocity_reversals(t);
    let dev = revs.iter().map(|r| (r.z.abs() - th.reversal_position).abs()).fold(0.0f64, f64::max);
    ctx.put(format!("{l}.z_min"), zs.iter().copied().fold(f64::INFINITY, f64::min));
    ctx.put(format!("{l}.z_max"), zs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    ctx.put(format!("{l}.reversals"), revs.len() as f64);
    ctx.put(format!("{l}.reversal_deviation"), if revs.is_empty() { f64::NAN } else { dev });
}

fn run_ex3(ctx: &mut Ctx) -> Result<()> {
    let s = ctx.s;
    let (p, f1, f2) = example_model("ex3")?;
    let z0 = s.starts.first().copied().unwrap_or(0.0);
    let bg = dde_background(s, &f2)?;
    let cfg = dde_config(s, &p, &f2);
    let hist = FrontHistory::constant_speed(z0, singular_speed(&p, RootIndex::M)?, 0.0);
    let opts = ShootOptions::default();
    let mut jobs: Vec<Box<dyn FnOnce() -> Result<(String, Trajectory, Option<String>)> + Send + '_>> = Vec::new();
    {
        let (cfg, bg, hist) = (cfg.clone(), &bg, hist.clone());
        jobs.push(Box::new(move || {
            let r: DdeRun = dde_run_algo1(&hist, s.s_horizon, &cfg, bg)?;
            Ok(("dde_algo1".into(), r.trajectory, r.failure))
        }));
    }
    if s.algo2 {
        let (cfg2, bg, hist) = (algo2_config(s, &cfg), &bg, hist.clone());
        jobs.push(Box::new(move || {
            let (r, _) = dde_run_algo2(&hist, None, s.s_horizon, &cfg2, bg)?;
            Ok(("dde_algo2".into(), r.trajectory, r.failure))
        }));
    }
    for &e in &s.eps {
        let pc = pde_config(s, &p, &f1, &f2, e);
        jobs.push(Box::new(move || {
            let (lo, hi) = find_speed(&pc.params, RootIndex::M, None, 1e-6, &opts)?;
            let ic = build_concatenated_ic(0.5 * (lo + hi), &pc, z0, &opts)?;
            let r = run_pde(&pc, &ic)?;
            Ok((eps_label(e), r.trajectory, r.failure))
        }));
    }
    for r in run_parallel(jobs) {
        let (l, t, f) = r?;
        trap_metrics(ctx, &l, &t);
        ctx.record(&l, &t, f)?;
    }
    Ok(())
}
