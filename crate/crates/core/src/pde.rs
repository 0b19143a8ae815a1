//! Method-of-lines simulation of the full system in the fast-reaction scaling,
//! front tracking, initial-condition generation and stationary-front bracketing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::background::{background_state, BackgroundState, BoundaryPolicy, Sign};
use crate::error::{Error, Result};
use crate::grid::{cubic_interp, GridProfile, UniformGrid};
use crate::heterogeneity::Heterogeneity;
use crate::model::ModelParams;
use crate::numerics::linalg::{solve_tridiagonal, BandMatrix};
use crate::trajectory::Trajectory;

/// Default relaxation sequence for [`make_ic_relax_shift`].
pub const DEFAULT_RELAX_SEQUENCE: [f64; 7] = [1.0, 1.0, 1.0, 0.5, 0.5, 0.3, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub params: ModelParams,
    pub f1: Heterogeneity,
    pub f2: Heterogeneity,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub s0: f64,
    pub s_end: f64,
    pub rtol: f64,
    pub atol: f64,
    #[serde(default)]
    pub policy: BoundaryPolicy,
    /// Record the front only at multiples of this spacing (every accepted step if absent).
    #[serde(default)]
    pub record_dt: Option<f64>,
    #[serde(default)]
    pub snapshot_dt: Option<f64>,
    /// Stop once the front leaves this interval.
    #[serde(default)]
    pub stop_outside: Option<(f64, f64)>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_window")]
    pub velocity_window: usize,
}

fn default_max_steps() -> usize {
    2_000_000
}

fn default_window() -> usize {
    5
}

impl PdeConfig {
    /// Grid with `dx = eps / 8` and default tolerances.
    pub fn new(params: ModelParams, f1: Heterogeneity, f2: Heterogeneity, domain: (f64, f64), s_end: f64) -> Self {
        Self {
            params,
            f1,
            f2,
            x_min: domain.0,
            x_max: domain.1,
            dx: params.epsilon / 8.0,
            s0: 0.0,
            s_end,
            rtol: 1e-4,
            atol: 1e-6,
            policy: BoundaryPolicy::Strict,
            record_dt: Some(0.02),
            snapshot_dt: None,
            stop_outside: None,
            max_steps: default_max_steps(),
            velocity_window: default_window(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.f1.validate()?;
        self.f2.validate()?;
        let eps = self.params.epsilon;
        if !(eps > 0.0) {
            return Err(Error::Validation("the PDE needs epsilon > 0".into()));
        }
        if !(self.dx > 0.0) || self.dx > eps / 8.0 * (1.0 + 1e-9) {
            return Err(Error::Validation(format!("dx = {} must be in (0, eps/8 = {}]", self.dx, eps / 8.0)));
        }
        if !(self.x_max - self.x_min > 20.0 * eps) {
            return Err(Error::Validation("domain too small for the interface".into()));
        }
        if !(self.s_end >= self.s0) {
            return Err(Error::Validation("s_end before s0".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        for dt in [self.record_dt, self.snapshot_dt].into_iter().flatten() {
            if !(dt > 0.0) {
                return Err(Error::Validation("record and snapshot spacings must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::covering(self.x_min, self.x_max, self.dx)
    }

    /// Minus background state on a grid covering the domain.
    pub fn background(&self) -> Result<BackgroundState> {
        let g = UniformGrid::covering(self.x_min, self.x_max, self.dx.max(0.01))?;
        background_state(&self.f1, &self.f2, Sign::Minus, &g, self.policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeState {
    pub u: GridProfile,
    pub v: GridProfile,
    pub s: f64,
}

impl PdeState {
    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.v.len() || self.u.x_min != self.v.x_min || self.u.dx != self.v.dx {
            return Err(Error::Validation("U and V must share the grid".into()));
        }
        if self.u.values.iter().chain(&self.v.values).any(|x| !x.is_finite()) {
            return Err(Error::Validation("state has non-finite values".into()));
        }
        Ok(())
    }

    pub fn front(&self) -> Result<f64> {
        extract_front_position(&self.u)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Output of [`run_pde`]; on failure the partial trajectory and last good state are kept.
#[derive(Debug, Clone)]
pub struct PdeRun {
    pub trajectory: Trajectory,
    pub final_state: PdeState,
    pub snapshots: Vec<PdeState>,
    pub failure: Option<String>,
    pub stats: SolverStats,
}

/// Zero crossing of `U` by linear interpolation; requires exactly one sign change, from minus to plus.
pub fn extract_front_position(u: &GridProfile) -> Result<f64> {
    let mut found = None;
    let mut changes = 0;
    for i in 0..u.len().saturating_sub(1) {
        let (a, b) = (u.values[i], u.values[i + 1]);
        if (a < 0.0) != (b < 0.0) {
            changes += 1;
            if a < 0.0 && b >= 0.0 {
                found = Some(u.x(i) + u.dx * a / (a - b));
            }
        }
    }
    match (changes, found) {
        (1, Some(z)) => Ok(z),
        (0, _) => Err(Error::NoFront("U has no zero crossing".into())),
        _ => Err(Error::NoFront(format!("U has {changes} sign changes"))),
    }
}

/// Three-point finite-difference velocity followed by a centred moving average of odd `window`.
pub fn estimate_velocity(traj: &Trajectory, window: usize) -> Trajectory {
    let n = traj.len();
    let mut out = traj.clone();
    if n < 2 {
        return out;
    }
    let s = traj.s();
    let z = traj.z();
    let raw: Vec<f64> = if n == 2 {
        vec![(z[1] - z[0]) / (s[1] - s[0]); 2]
    } else {
        (0..n)
            .map(|i| {
                let j = i.clamp(1, n - 2);
                let (s0, s1, s2) = (s[j - 1], s[j], s[j + 1]);
                let (z0, z1, z2) = (z[j - 1], z[j], z[j + 1]);
                let x = s[i];
                // derivative of the quadratic through the three points
                z0 * (2.0 * x - s1 - s2) / ((s0 - s1) * (s0 - s2))
                    + z1 * (2.0 * x - s0 - s2) / ((s1 - s0) * (s1 - s2))
                    + z2 * (2.0 * x - s0 - s1) / ((s2 - s0) * (s2 - s1))
            })
            .collect()
    };
    let half = window.max(1) / 2;
    for i in 0..n {
        let k = half.min(i).min(n - 1 - i);
        let sum: f64 = raw[i - k..=i + k].iter().sum();
        out.samples[i].dz_ds = sum / (2 * k + 1) as f64;
    }
    out
}

/// Interleaved semi-discretisation `y = (U_0, V_0, U_1, V_1, ...)` with pinned end nodes.
struct Discretisation {
    n: usize,
    dx: f64,
    eps: f64,
    alpha: f64,
    gamma: f64,
    tauhat: f64,
    one_f1: Vec<f64>,
    one_f2: Vec<f64>,
}

impl Discretisation {
    fn new(cfg: &PdeConfig, grid: &UniformGrid) -> Self {
        let p = cfg.params;
        Self {
            n: grid.n,
            dx: grid.dx,
            eps: p.epsilon,
            alpha: p.alpha,
            gamma: p.gamma,
            tauhat: p.tauhat,
            one_f1: grid.xs().iter().map(|&x| 1.0 + cfg.f1.eval(x)).collect(),
            one_f2: grid.xs().iter().map(|&x| 1.0 + cfg.f2.eval(x)).collect(),
        }
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.dx * self.dx);
        let e2 = 1.0 / (self.eps * self.eps);
        out[0] = 0.0;
        out[1] = 0.0;
        out[2 * self.n - 2] = 0.0;
        out[2 * self.n - 1] = 0.0;
        for i in 1..self.n - 1 {
            let (u, v) = (y[2 * i], y[2 * i + 1]);
            let uxx = (y[2 * i - 2] - 2.0 * u + y[2 * i + 2]) * inv;
            let vxx = (y[2 * i - 1] - 2.0 * v + y[2 * i + 3]) * inv;
            out[2 * i] = uxx + (u - u * u * u - self.eps * (self.alpha * v + self.gamma)) * e2;
            out[2 * i + 1] = (vxx - self.one_f1[i] * v + self.one_f2[i] * u) / self.tauhat;
        }
    }

    /// Fills `w = I - c J`.
    fn iteration_matrix(&self, y: &[f64], c: f64, w: &mut BandMatrix) {
        w.clear();
        let inv = 1.0 / (self.dx * self.dx);
        let e2 = 1.0 / (self.eps * self.eps);
        for k in [0, 1, 2 * self.n - 2, 2 * self.n - 1] {
            w.set(k, k, 1.0);
        }
        let t = 1.0 / self.tauhat;
        for i in 1..self.n - 1 {
            let (ru, rv) = (2 * i, 2 * i + 1);
            let u = y[ru];
            w.set(ru, ru, 1.0 - c * (-2.0 * inv + (1.0 - 3.0 * u * u) * e2));
            w.set(ru, ru - 2, -c * inv);
            w.set(ru, ru + 2, -c * inv);
            w.set(ru, rv, c * self.alpha / self.eps);
            w.set(rv, rv, 1.0 - c * t * (-2.0 * inv - self.one_f1[i]));
            w.set(rv, rv - 2, -c * t * inv);
            w.set(rv, rv + 2, -c * t * inv);
            w.set(rv, ru, -c * t * self.one_f2[i]);
        }
    }
}

fn interleave(st: &PdeState) -> Vec<f64> {
    st.u.values.iter().zip(&st.v.values).flat_map(|(&u, &v)| [u, v]).collect()
}

fn split(y: &[f64], grid: &UniformGrid, s: f64) -> PdeState {
    let u = y.iter().step_by(2).copied().collect();
    let v = y.iter().skip(1).step_by(2).copied().collect();
    PdeState {
        u: GridProfile { x_min: grid.x_min, dx: grid.dx, values: u },
        v: GridProfile { x_min: grid.x_min, dx: grid.dx, values: v },
        s,
    }
}

/// Integrates from `ic` to `cfg.s_end` with a linearly implicit second-order Rosenbrock method
/// (L-stable, embedded third-order error estimate) on the banded Jacobian.
pub fn run_pde(cfg: &PdeConfig, ic: &PdeState) -> Result<PdeRun> {
    cfg.validate()?;
    ic.validate()?;
    let started = Instant::now();
    let grid = cfg.grid()?;
    if ic.u.len() != grid.n || (ic.u.x_min - grid.x_min).abs() > 1e-12 || (ic.u.dx - grid.dx).abs() > 1e-12 {
        return Err(Error::Validation("initial state is not on the configured grid".into()));
    }
    let disc = Discretisation::new(cfg, &grid);
    let eps = cfg.params.epsilon;
    let dim = 2 * grid.n;
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;

    let mut y = interleave(ic);
    let mut s = ic.s;
    let mut traj = Trajectory::new("pde-rosenbrock23");
    let mut snapshots = Vec::new();
    let mut stats = SolverStats { min_step: f64::INFINITY, ..Default::default() };
    let mut failure = None;

    let z0 = extract_front_position(&ic.u)?;
    traj.push(s, z0, 0.0)?;
    if cfg.snapshot_dt.is_some() {
        snapshots.push(ic.clone());
    }
    let mut next_record = cfg.record_dt.map(|dt| s + dt);
    let mut next_snap = cfg.snapshot_dt.map(|dt| s + dt);

    let mut w = BandMatrix::zeros(dim, 2, 2);
    let (mut f0, mut f1, mut f2) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let (mut k1, mut k2, mut k3) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut ytmp = vec![0.0; dim];
    let mut h = 0.05 * eps * eps;
    let h_max = cfg.record_dt.unwrap_or(0.1).min(0.1);
    let mut steps = 0usize;
    let mut have_f0 = false;

    while s < cfg.s_end - 1e-12 * (1.0 + cfg.s_end.abs()) {
        if steps >= cfg.max_steps {
            failure = Some(Error::Solver(format!("step limit {} reached at s = {s}", cfg.max_steps)).to_string());
            break;
        }
        steps += 1;
        let mut target = cfg.s_end;
        for t in [next_record, next_snap].into_iter().flatten() {
            target = target.min(t);
        }
        let mut h_try = h.min(h_max);
        let hits = s + h_try >= target - 1e-12;
        if hits {
            h_try = target - s;
        }
        if !have_f0 {
            disc.rhs(&y, &mut f0);
            have_f0 = true;
        }
        disc.iteration_matrix(&y, h_try * d, &mut w);
        if let Err(e) = w.factor() {
            failure = Some(e.to_string());
            break;
        }
        k1.copy_from_slice(&f0);
        w.solve(&mut k1);
        for i in 0..dim {
            ytmp[i] = y[i] + 0.5 * h_try * k1[i];
        }
        disc.rhs(&ytmp, &mut f1);
        for i in 0..dim {
            k2[i] = f1[i] - k1[i];
        }
        w.solve(&mut k2);
        for i in 0..dim {
            k2[i] += k1[i];
            ytmp[i] = y[i] + h_try * k2[i];
        }
        disc.rhs(&ytmp, &mut f2);
        for i in 0..dim {
            k3[i] = f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]);
        }
        w.solve(&mut k3);
        let mut err = 0.0f64;
        for i in 0..dim {
            let e = h_try / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(ytmp[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() {
            err = 1e10;
        }
        let factor = (0.8 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 5.0);
        if err > 1.0 {
            stats.rejected += 1;
            h = h_try * factor.min(0.5);
            if h < 1e-14 * (1.0 + s.abs()) {
                failure = Some(Error::Solver(format!("step size underflow at s = {s}")).to_string());
                break;
            }
            continue;
        }
        stats.accepted += 1;
        stats.min_step = stats.min_step.min(h_try);
        stats.max_step = stats.max_step.max(h_try);
        std::mem::swap(&mut y, &mut ytmp);
        std::mem::swap(&mut f0, &mut f2);
        s = if hits { target } else { s + h_try };
        // keep the controller's step unless a record time clipped it
        h = if hits { h.max(h_try * factor) } else { h_try * factor };

        let u_now = GridProfile { x_min: grid.x_min, dx: grid.dx, values: y.iter().step_by(2).copied().collect() };
        let z = match extract_front_position(&u_now) {
            Ok(z) => z,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let record_now = match (cfg.record_dt, next_record) {
            (None, _) => true,
            (Some(dt), Some(nr)) if s >= nr - 1e-12 => {
                next_record = Some(nr + dt);
                true
            }
            _ => s >= cfg.s_end - 1e-12 * (1.0 + cfg.s_end.abs()),
        };
        if record_now && traj.last().is_none_or(|l| s > l.s) {
            traj.push(s, z, 0.0)?;
        }
        if let (Some(dt), Some(ns)) = (cfg.snapshot_dt, next_snap) {
            if s >= ns - 1e-12 {
                snapshots.push(split(&y, &grid, s));
                next_snap = Some(ns + dt);
            }
        }
        if z - grid.x_min < 5.0 * eps || grid.x_max() - z < 5.0 * eps {
            if traj.last().is_none_or(|l| s > l.s) {
                traj.push(s, z, 0.0)?;
            }
            failure = Some(Error::DomainExhausted { s, z }.to_string());
            break;
        }
        if let Some((lo, hi)) = cfg.stop_outside {
            if z < lo || z > hi {
                if traj.last().is_none_or(|l| s > l.s) {
                    traj.push(s, z, 0.0)?;
                }
                break;
            }
        }
    }
    let final_state = split(&y, &grid, s);
    let mut trajectory = estimate_velocity(&traj, cfg.velocity_window);
    trajectory.meta.solver = "pde-rosenbrock23".into();
    trajectory.meta.settings = serde_json::to_value(cfg).unwrap_or_default();
    trajectory.meta.wall_time_s = started.elapsed().as_secs_f64();
    trajectory.meta.stats = serde_json::json!({
        "accepted": stats.accepted,
        "rejected": stats.rejected,
        "min_step": stats.min_step,
        "max_step": stats.max_step,
        "failure": failure,
    });
    Ok(PdeRun { trajectory, final_state, snapshots, failure, stats })
}

/// Steady `V` for a given `U` on the PDE grid with background Dirichlet values.
fn steady_v(cfg: &PdeConfig, grid: &UniformGrid, u: &[f64], bg: &BackgroundState) -> Result<Vec<f64>> {
    let n = grid.n;
    let inv = 1.0 / (grid.dx * grid.dx);
    let left = bg.v_at(grid.x_min);
    let right = -bg.v_at(grid.x_max());
    let m = n - 2;
    let mut diag = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 1..n - 1 {
        let x = grid.x(i);
        diag.push(2.0 * inv + 1.0 + cfg.f1.eval(x));
        rhs.push((1.0 + cfg.f2.eval(x)) * u[i]);
    }
    rhs[0] += left * inv;
    rhs[m - 1] += right * inv;
    let off = vec![-inv; m];
    solve_tridiagonal(&off, &diag, &off, &mut rhs)?;
    let mut v = Vec::with_capacity(n);
    v.push(left);
    v.extend(rhs);
    v.push(right);
    Ok(v)
}

/// Leading-order front `U = tanh((x - z0) / (sqrt(2) eps))` with the matching steady `V`.
pub fn tanh_front(cfg: &PdeConfig, z0: f64, bg: &BackgroundState) -> Result<PdeState> {
    let grid = cfg.grid()?;
    let w = std::f64::consts::SQRT_2 * cfg.params.epsilon;
    let mut u: Vec<f64> = grid.xs().iter().map(|&x| ((x - z0) / w).tanh()).collect();
    u[0] = -1.0;
    u[grid.n - 1] = 1.0;
    let v = steady_v(cfg, &grid, &u, bg)?;
    Ok(PdeState {
        u: GridProfile { x_min: grid.x_min, dx: grid.dx, values: u },
        v: GridProfile { x_min: grid.x_min, dx: grid.dx, values: v },
        s: cfg.s0,
    })
}

/// Translates a state by `shift` in x, filling uncovered nodes with background values.
pub fn shift_state(st: &PdeState, shift: f64, bg: &BackgroundState) -> PdeState {
    let grid = st.u.grid();
    let n = grid.n;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (lo, hi) = (grid.x_min, grid.x_max());
    for i in 0..n {
        let x = grid.x(i);
        let src = x + shift;
        if src < lo {
            u[i] = -1.0;
            v[i] = bg.v_at(x);
        } else if src > hi {
            u[i] = 1.0;
            v[i] = -bg.v_at(x);
        } else {
            u[i] = cubic_interp(&st.u, src);
            v[i] = cubic_interp(&st.v, src);
        }
    }
    u[0] = st.u.values[0];
    v[0] = st.v.values[0];
    u[n - 1] = st.u.values[n - 1];
    v[n - 1] = st.v.values[n - 1];
    PdeState {
        u: GridProfile { x_min: grid.x_min, dx: grid.dx, values: u },
        v: GridProfile { x_min: grid.x_min, dx: grid.dx, values: v },
        s: st.s,
    }
}

/// Relaxes a leading-order front while pinning its position: simulate for each `T_i`,
/// then shift back so the front sits at `target`.
pub fn make_ic_relax_shift(cfg: &PdeConfig, target: f64, t_seq: &[f64]) -> Result<PdeState> {
    if t_seq.is_empty() {
        return Err(Error::Validation("relaxation sequence must be nonempty".into()));
    }
    let bg = cfg.background()?;
    let mut st = tanh_front(cfg, target, &bg)?;
    let mut sub = cfg.clone();
    sub.record_dt = None;
    sub.snapshot_dt = None;
    sub.stop_outside = None;
    for &t in t_seq {
        sub.s0 = st.s;
        sub.s_end = st.s + t;
        let run = run_pde(&sub, &st)?;
        if let Some(f) = run.failure {
            return Err(Error::Solver(format!("relaxation run failed: {f}")));
        }
        let z = run.final_state.front()?;
        st = shift_state(&run.final_state, z - target, &bg);
    }
    st.s = cfg.s0;
    Ok(st)
}

/// Direction of travel of a front started at `z0` after `run_time`: `+1`, `-1` or `0`.
pub fn travel_direction(cfg: &PdeConfig, z0: f64, run_time: f64) -> Result<i8> {
    let ic = make_ic_relax_shift(cfg, z0, &DEFAULT_RELAX_SEQUENCE)?;
    let mut c = cfg.clone();
    c.s_end = c.s0 + run_time;
    c.record_dt = None;
    let run = run_pde(&c, &ic)?;
    if let Some(f) = &run.failure {
        if !f.contains("domain exhausted") {
            return Err(Error::Solver(f.clone()));
        }
    }
    let start = ic.front()?;
    let end = run.trajectory.last().map(|p| p.z).unwrap_or(start);
    let d = end - start;
    Ok(if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    })
}

/// Bisection on the initial position until the bracket is at most `width` wide.
pub fn bracket_stationary_front(cfg: &PdeConfig, interval: (f64, f64), run_time: f64, width: f64) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = interval;
    if !(hi > lo) || !(width > 0.0) {
        return Err(Error::Validation("need lo < hi and width > 0".into()));
    }
    let d_lo = travel_direction(cfg, lo, run_time)?;
    let d_hi = travel_direction(cfg, hi, run_time)?;
    if d_lo == d_hi || d_lo == 0 || d_hi == 0 {
        return Err(Error::RootBracket(format!(
            "fronts started at {lo} and {hi} do not travel in opposite directions"
        )));
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let d = travel_direction(cfg, mid, run_time)?;
        log::debug!("bisection probe {mid}: direction {d}");
        if d == 0 {
            return Ok((mid, mid));
        }
        if d == d_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}
