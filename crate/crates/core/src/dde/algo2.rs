//! Co-simulation of the slow field with the front position (implicit form of the delay equation).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::algo1::{run_meta, solve_extension, Algo2Grid, DdeConfig, DdeRun, StepDiagnostics};
use crate::background::BackgroundState;
use crate::constant_coeff::JUMP;
use crate::error::{Error, Result};
use crate::grid::{GridProfile, UniformGrid};
use crate::history::{FrontHistory, PathEval};
use crate::numerics::linalg::solve_tridiagonal;
use crate::trajectory::Trajectory;

/// Slow field `V` on a uniform grid at time `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VField {
    pub v: GridProfile,
    pub s: f64,
}

const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

/// Method-of-lines solver for `tauhat V_s = V_xx - V + (1 + f2) sign(x - z(s))`
/// with Dirichlet values taken from the background states.
pub struct SlowFieldSolver {
    grid: UniformGrid,
    tauhat: f64,
    weight: Vec<f64>,
    left: f64,
    right: f64,
}

impl SlowFieldSolver {
    pub fn new(grid: UniformGrid, cfg: &DdeConfig, bg: &BackgroundState) -> Result<Self> {
        if grid.n < 5 {
            return Err(Error::Validation("slow-field grid needs at least 5 nodes".into()));
        }
        let minus = bg.minus();
        Ok(Self {
            grid,
            tauhat: cfg.params.tauhat,
            weight: grid.xs().iter().map(|&x| 1.0 + cfg.f2.eval(x)).collect(),
            left: minus.v_at(grid.x_min),
            right: -minus.v_at(grid.x_max()),
        })
    }

    pub fn from_config(cfg: &DdeConfig, bg: &BackgroundState) -> Result<Self> {
        let g = cfg
            .algo2_grid
            .ok_or_else(|| Error::Validation("the implicit algorithm needs algo2_grid".into()))?;
        Self::new(UniformGrid::covering(g.x_min, g.x_max, g.dx)?, cfg, bg)
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    /// Forcing at interior node `i` with the straddling cell weighted by its sub-cell fraction.
    fn forcing(&self, z: f64, out: &mut [f64]) {
        let dx = self.grid.dx;
        for (k, o) in out.iter_mut().enumerate() {
            let i = k + 1;
            let sgn = (2.0 * (self.grid.x(i) - z) / dx).clamp(-1.0, 1.0);
            *o = self.weight[i] * sgn;
        }
        let inv = 1.0 / (dx * dx);
        out[0] += self.left * inv;
        let last = out.len() - 1;
        out[last] += self.right * inv;
    }

    fn apply_laplacian(&self, v: &[f64], out: &mut [f64]) {
        let inv = 1.0 / (self.grid.dx * self.grid.dx);
        let m = v.len();
        for k in 0..m {
            let l = if k == 0 { 0.0 } else { v[k - 1] };
            let r = if k + 1 == m { 0.0 } else { v[k + 1] };
            out[k] = (l - 2.0 * v[k] + r) * inv - v[k];
        }
    }

    /// Solves `(I - c A) x = rhs` with `A` the interior operator.
    fn solve_shifted(&self, c: f64, rhs: &mut [f64]) -> Result<()> {
        let inv = 1.0 / (self.grid.dx * self.grid.dx);
        let m = rhs.len();
        let off = vec![-c * inv; m];
        let diag = vec![1.0 + c * (2.0 * inv + 1.0); m];
        solve_tridiagonal(&off, &diag, &off, rhs)
    }

    fn wrap(&self, interior: &[f64]) -> GridProfile {
        let mut v = Vec::with_capacity(interior.len() + 2);
        v.push(self.left);
        v.extend_from_slice(interior);
        v.push(self.right);
        GridProfile { x_min: self.grid.x_min, dx: self.grid.dx, values: v }
    }

    /// Steady field for a front frozen at `z`.
    pub fn steady(&self, z: f64) -> Result<GridProfile> {
        let mut rhs = vec![0.0; self.grid.n - 2];
        self.forcing(z, &mut rhs);
        // -A V = F
        let inv = 1.0 / (self.grid.dx * self.grid.dx);
        let m = rhs.len();
        let off = vec![-inv; m];
        let diag = vec![2.0 * inv + 1.0; m];
        solve_tridiagonal(&off, &diag, &off, &mut rhs)?;
        Ok(self.wrap(&rhs))
    }

    /// TR-BDF2 integration over `[s0, s1]` in `m` equal substeps along the front path `z`.
    pub fn advance(&self, v: &GridProfile, s0: f64, s1: f64, m: usize, z: impl Fn(f64) -> f64) -> Result<GridProfile> {
        if v.len() != self.grid.n || (v.x_min - self.grid.x_min).abs() > 1e-12 {
            return Err(Error::Validation("field does not live on the solver grid".into()));
        }
        let g = TRBDF2_GAMMA;
        let w = (1.0 - g) / (2.0 - g);
        let k = (s1 - s0) / m as f64;
        let ni = self.grid.n - 2;
        let mut u: Vec<f64> = v.values[1..self.grid.n - 1].to_vec();
        let (mut f0, mut fg, mut f1, mut au) = (vec![0.0; ni], vec![0.0; ni], vec![0.0; ni], vec![0.0; ni]);
        self.forcing(z(s0), &mut f0);
        for j in 0..m {
            let s = s0 + j as f64 * k;
            let c1 = g * k / (2.0 * self.tauhat);
            self.forcing(z(s + g * k), &mut fg);
            self.forcing(z(s + k), &mut f1);
            self.apply_laplacian(&u, &mut au);
            let mut star: Vec<f64> = (0..ni).map(|i| u[i] + c1 * (au[i] + f0[i] + fg[i])).collect();
            self.solve_shifted(c1, &mut star)?;
            let c2 = w * k / self.tauhat;
            let a = 1.0 / (g * (2.0 - g));
            let b = (1.0 - g) * (1.0 - g) / (g * (2.0 - g));
            let mut next: Vec<f64> = (0..ni).map(|i| a * star[i] - b * u[i] + c2 * f1[i]).collect();
            self.solve_shifted(c2, &mut next)?;
            u = next;
            std::mem::swap(&mut f0, &mut f1);
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver("slow-field integration produced non-finite values".into()));
        }
        Ok(self.wrap(&u))
    }

    fn substeps(&self, speed: f64, h: f64) -> usize {
        (((speed.abs() + 0.5) * h / self.grid.dx).ceil() as usize).max(2)
    }
}

/// Default initial field: steady profile for the front frozen at an earlier history position,
/// then integrated along the history up to its last breakpoint.
pub fn initial_vfield(h0: &FrontHistory, solver: &SlowFieldSolver, warmup: f64, step: f64) -> Result<VField> {
    let g = solver.grid();
    let t = solver.tauhat;
    let s_end = h0.last().s;
    let margin = 4.0 * g.dx;
    let inside = |s: f64| -> Result<bool> {
        let (z, _) = h0.eval(s)?;
        Ok(z > g.x_min + margin && z < g.x_max() - margin)
    };
    // shorten the warm-up if the path leaves the grid
    let mut tw = warmup * t;
    while tw > step && !inside(s_end - tw)? {
        tw *= 0.5;
    }
    let s_start = s_end - tw;
    let mut v = solver.steady(h0.eval(s_start)?.0)?;
    let n = (tw / step).ceil().max(1.0) as usize;
    let k = tw / n as f64;
    for i in 0..n {
        let a = s_start + i as f64 * k;
        let b = if i + 1 == n { s_end } else { a + k };
        let m = solver.substeps(h0.max_abs_slope(), k);
        v = solver.advance(&v, a, b, m, |s| h0.eval(s.min(s_end)).map(|p| p.0).unwrap_or(f64::NAN))?;
    }
    Ok(VField { v, s: s_end })
}

/// Runs the implicit algorithm; a missing `v0` is replaced by [`initial_vfield`].
pub fn dde_run_algo2(
    h0: &FrontHistory,
    v0: Option<VField>,
    t_span: f64,
    cfg: &DdeConfig,
    bg: &BackgroundState,
) -> Result<(DdeRun, VField)> {
    cfg.validate()?;
    let started = Instant::now();
    let solver = SlowFieldSolver::from_config(cfg, bg)?;
    let warmup = cfg.algo2_grid.map(|g: Algo2Grid| g.warmup).unwrap_or(20.0);
    let mut field = match v0 {
        Some(f) => f,
        None => initial_vfield(h0, &solver, warmup, cfg.h)?,
    };
    if (field.s - h0.last().s).abs() > 1e-9 * (1.0 + field.s.abs()) {
        return Err(Error::Validation("initial field time differs from the history end".into()));
    }
    let p = cfg.params;
    let n = (t_span / cfg.h - 1e-9).ceil().max(0.0) as usize;
    let mut hist = h0.clone();
    let mut traj = Trajectory::new("dde-algo2");
    let b = hist.last();
    traj.push(b.s, b.z, b.slope)?;
    let mut diags = Vec::with_capacity(n);
    let mut failure = None;
    for _ in 0..n {
        let last = hist.last();
        let s1 = last.s + cfg.h;
        let m = solver.substeps(last.slope, cfg.h);
        let eval = |a: f64| -> Result<(GridProfile, f64)> {
            let sigma = last.slope + a;
            let v = solver.advance(&field.v, last.s, s1, m, |s| last.z + sigma * (s - last.s))?;
            let z1 = last.z + sigma * cfg.h;
            let vz = v.interp(z1);
            Ok((v, JUMP * sigma - p.alpha * vz - p.gamma))
        };
        let solved = solve_extension(|a| eval(a).map(|r| r.1), cfg.a_max).and_then(|(a, it)| {
            let (v, _) = eval(a)?;
            Ok((a, it, v))
        });
        match solved {
            Ok((a, iterations, v)) => {
                let z1 = last.z + (last.slope + a) * cfg.h;
                hist.push(s1, last.slope + a)?;
                diags.push(StepDiagnostics { s: s1, w: v.interp(z1), stderr: 0.0, a_star: a, iterations });
                field = VField { v, s: s1 };
                let b = hist.last();
                traj.push(b.s, b.z, b.slope)?;
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
    run_meta(cfg, "dde-algo2", &mut traj, started, &failure, diags.len());
    Ok((DdeRun { trajectory: traj, history: hist, diagnostics: diags, failure }, field))
}
