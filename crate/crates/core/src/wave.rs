//! Travelling waves of the constant-coefficient model in the co-moving fast frame:
//! shooting for the wave speed at `eps > 0` and concatenated initial conditions.

use serde::{Deserialize, Serialize};

use crate::constant_coeff::speed_roots;
use crate::error::{Error, Result};
use crate::grid::GridProfile;
use crate::model::ModelParams;
use crate::numerics::ode::{integrate, locate_event, Control, RkOptions};
use crate::pde::{PdeConfig, PdeState};

/// Point `(u, p, v, q)` of the co-moving system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub u: f64,
    pub p: f64,
    pub v: f64,
    pub q: f64,
}

impl WaveState {
    pub fn to_array(self) -> [f64; 4] {
        [self.u, self.p, self.v, self.q]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { u: a[0], p: a[1], v: a[2], q: a[3] }
    }
}

/// Vector field in `xi = (x - c s) / eps`.
pub fn comoving_rhs(w: &WaveState, c: f64, p: &ModelParams) -> WaveState {
    let e = p.epsilon;
    WaveState {
        u: w.p,
        p: -w.u + w.u.powi(3) + e * (p.alpha * w.v + p.gamma) - e * c * w.p,
        v: e * w.q,
        q: e * (w.v - w.u - p.tauhat * c * w.q),
    }
}

/// Which side of the front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }
}

/// `u` on the slow manifold over `v`, to second order in `eps`.
pub fn slow_manifold(branch: Branch, v: f64, p: &ModelParams) -> f64 {
    let w = p.epsilon * (p.alpha * v + p.gamma);
    branch.sign() * (1.0 - 0.375 * w * w) - 0.5 * w
}

/// Equilibrium `(u*, 0, u*, 0)` with `u* - u*^3 = eps (alpha u* + gamma)` near `+-1`.
pub fn fixed_point(branch: Branch, p: &ModelParams) -> Result<WaveState> {
    let e = p.epsilon;
    let mut u = branch.sign();
    for _ in 0..50 {
        let g = u - u.powi(3) - e * (p.alpha * u + p.gamma);
        let dg = 1.0 - 3.0 * u * u - e * p.alpha;
        let du = g / dg;
        u -= du;
        if du.abs() < 1e-15 {
            return Ok(WaveState { u, p: 0.0, v: u, q: 0.0 });
        }
    }
    Err(Error::Solver("fixed point iteration did not converge".into()))
}

/// Root of `u - u^3 = eps (alpha v + gamma)` on the given branch with `du/dv` and `d2u/dv2`.
fn critical_root(branch: Branch, v: f64, p: &ModelParams) -> (f64, f64, f64) {
    let e = p.epsilon;
    let rhs = e * (p.alpha * v + p.gamma);
    let mut u = slow_manifold(branch, v, p);
    for _ in 0..30 {
        let du = (u - u.powi(3) - rhs) / (1.0 - 3.0 * u * u);
        u -= du;
        if du.abs() < 1e-16 {
            break;
        }
    }
    let d = 1.0 - 3.0 * u * u;
    let u1 = e * p.alpha / d;
    let u2 = 6.0 * u * u1 * u1 / d;
    (u, u1, u2)
}

/// Point `(u, p)` of the slow manifold over `(v, q)` at speed `c`: the algebraic root plus
/// the leading correction from the drift of `p` along the slow flow.
pub fn slow_graph(branch: Branch, v: f64, q: f64, c: f64, p: &ModelParams) -> (f64, f64) {
    let e = p.epsilon;
    let (h, h1, h2) = critical_root(branch, v, p);
    let pp = e * h1 * q;
    let dp = e * e * (h2 * q * q + h1 * (v - h - p.tauhat * c * q));
    let u = h + (dp + e * c * pp) / (3.0 * h * h - 1.0);
    (u, pp)
}

fn slow_rhs(branch: Branch, y: &[f64; 2], c: f64, p: &ModelParams) -> [f64; 2] {
    let (u, _) = slow_graph(branch, y[0], y[1], c, p);
    [y[1], y[0] - u - p.tauhat * c * y[1]]
}

/// Options for the shooting computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    pub rtol: f64,
    /// Offset from the fixed point along the slow eigenvector.
    pub slow_offset: f64,
    /// Offset from the slow manifold along the fast eigenvector.
    pub fast_offset: f64,
    pub newton_tol: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, slow_offset: 1e-8, fast_offset: 1e-4, newton_tol: 1e-11 }
    }
}

/// Sampled half orbit in slow coordinates `x = eps xi`, ordered by increasing `x`,
/// with the section `u = 0` at `x = 0`.
#[derive(Debug, Clone, Default)]
pub struct HalfOrbit {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Result of matching the two half orbits in `(v, q)` at the section.
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub c: f64,
    /// `p` of the orbit from the minus side minus `p` of the orbit from the plus side.
    pub mismatch: f64,
    pub left: WaveState,
    pub right: WaveState,
    pub base: (f64, f64),
}

fn in_box(y: &[f64; 4]) -> bool {
    y[0].abs() <= 1.5 && y[1].abs() <= 1.5 && y[2].abs() <= 3.0 && y[3].abs() <= 3.0
}

struct Shooter<'a> {
    c: f64,
    p: &'a ModelParams,
    opts: ShootOptions,
}

impl Shooter<'_> {
    /// Equilibrium `v` of the slow flow and the eigenvalue of its unstable (minus) or stable (plus) direction.
    fn slow_eigen(&self, branch: Branch) -> Result<(f64, f64)> {
        let v = fixed_point(branch, self.p)?.v;
        let h = 1e-6;
        let f0 = slow_rhs(branch, &[v, 0.0], self.c, self.p);
        let fv = slow_rhs(branch, &[v + h, 0.0], self.c, self.p);
        let fq = slow_rhs(branch, &[v, h], self.c, self.p);
        let a = (fv[1] - f0[1]) / h;
        let b = (fq[1] - f0[1]) / h;
        let disc = (b * b + 4.0 * a).sqrt();
        let mu = match branch {
            Branch::Minus => 0.5 * (b + disc),
            Branch::Plus => 0.5 * (b - disc),
        };
        Ok((v, mu))
    }

    /// Slow orbit from the fixed point (unstable for minus, stable for plus) up to `v = target`.
    fn slow_orbit(&self, branch: Branch, target: f64, samples: Option<&mut Vec<(f64, f64, f64)>>) -> Result<[f64; 2]> {
        let (v0, mu) = self.slow_eigen(branch)?;
        let p = *self.p;
        let c = self.c;
        let d = self.opts.slow_offset * (target - v0).signum();
        let y0 = [v0 + d, mu * d];
        if (target - v0).abs() <= self.opts.slow_offset {
            return Ok([target, mu * (target - v0)]);
        }
        let mut f = move |_x: f64, y: &[f64; 2]| slow_rhs(branch, y, c, &p);
        let dir = match branch {
            Branch::Minus => 1.0,
            Branch::Plus => -1.0,
        };
        let opts = RkOptions { rtol: self.opts.rtol, atol: 1e-13, h0: 1e-3, h_max: 0.25, max_steps: 200_000 };
        let mut hit = None;
        let mut rec = samples;
        if let Some(r) = rec.as_deref_mut() {
            r.push((0.0, y0[0], y0[1]));
        }
        let mut f2 = f;
        integrate(&mut f, 0.0, y0, dir * 200.0, &opts, &mut |t0, ya, t1, yb| {
            if (yb[0] - target) * (ya[0] - target) <= 0.0 {
                hit = Some(locate_event(&mut f2, t0, ya, t1, |y| y[0] - target));
                return Control::Stop;
            }
            if let Some(r) = rec.as_deref_mut() {
                r.push((t1, yb[0], yb[1]));
            }
            if yb[0].abs() > 3.0 || yb[1].abs() > 3.0 {
                return Control::Stop;
            }
            Control::Continue
        })?;
        let (t, y) = hit.ok_or_else(|| Error::OrbitEscape(format!("slow orbit never reaches v = {target}")))?;
        if let Some(r) = rec {
            r.push((t, y[0], y[1]));
        }
        Ok(y)
    }

    fn fast_eigen(&self, u: f64, branch: Branch) -> f64 {
        let ec = self.p.epsilon * self.c;
        let disc = (ec * ec + 4.0 * (3.0 * u * u - 1.0)).sqrt();
        match branch {
            Branch::Minus => 0.5 * (-ec + disc),
            Branch::Plus => 0.5 * (-ec - disc),
        }
    }

    /// Fast orbit from the slow manifold point over base `v` to the section `u = 0`.
    fn to_section(&self, branch: Branch, base_v: f64, samples: Option<&mut Vec<(f64, [f64; 4])>>) -> Result<[f64; 4]> {
        let [v, q] = self.slow_orbit(branch, base_v, None)?;
        let (u, pp) = slow_graph(branch, v, q, self.c, self.p);
        let lam = self.fast_eigen(u, branch);
        let eta = -branch.sign() * self.opts.fast_offset;
        let y0 = [u + eta, pp + eta * lam, v, q];
        let p = *self.p;
        let c = self.c;
        let f = move |_t: f64, y: &[f64; 4]| comoving_rhs(&WaveState::from_array(*y), c, &p).to_array();
        let mut fi = f;
        let mut fe = f;
        let dir = match branch {
            Branch::Minus => 1.0,
            Branch::Plus => -1.0,
        };
        let opts = RkOptions { rtol: self.opts.rtol, atol: 1e-13, h0: 1e-3, h_max: 0.5, max_steps: 500_000 };
        let mut hit = None;
        let mut escaped = false;
        let mut rec = samples;
        if let Some(r) = rec.as_deref_mut() {
            r.push((0.0, y0));
        }
        integrate(&mut fi, 0.0, y0, dir * 1e4, &opts, &mut |t0, ya, t1, yb| {
            if ya[0] * yb[0] <= 0.0 {
                hit = Some(locate_event(&mut fe, t0, ya, t1, |y| y[0]));
                return Control::Stop;
            }
            if !in_box(yb) {
                escaped = true;
                return Control::Stop;
            }
            if let Some(r) = rec.as_deref_mut() {
                r.push((t1, *yb));
            }
            Control::Continue
        })?;
        if escaped {
            return Err(Error::OrbitEscape(format!("orbit left the trapping box at c = {}", self.c)));
        }
        let (t, y) = hit.ok_or_else(|| Error::OrbitEscape(format!("orbit never reached u = 0 at c = {}", self.c)))?;
        if let Some(r) = rec {
            r.push((t, y));
        }
        Ok(y)
    }

    fn gap(&self, vf: f64, vb: f64) -> Result<([f64; 2], [f64; 4], [f64; 4])> {
        let a = self.to_section(Branch::Minus, vf, None)?;
        let b = self.to_section(Branch::Plus, vb, None)?;
        Ok(([a[2] - b[2], a[3] - b[3]], a, b))
    }

    /// Initial guess: crossing of the two slow lines through the fixed points.
    fn guess(&self) -> Result<(f64, f64)> {
        let (vm, mum) = self.slow_eigen(Branch::Minus)?;
        let (vp, mup) = self.slow_eigen(Branch::Plus)?;
        let v = (mum * vm - mup * vp) / (mum - mup);
        Ok((v, v))
    }

    fn solve(&self) -> Result<ShootResult> {
        let (gf, gb) = self.guess()?;
        let vm = fixed_point(Branch::Minus, self.p)?.v;
        let vp = fixed_point(Branch::Plus, self.p)?.v;
        // for fast waves the slow drift during the jump is large; pull the bases toward the equilibria until both orbits reach the section
        let mut start = None;
        for k in 0..10 {
            let th = 1.0 - 0.1 * k as f64;
            let (vf, vb) = (vm + th * (gf - vm), vp + th * (gb - vp));
            if let Ok(r) = self.gap(vf, vb) {
                start = Some((vf, vb, r));
                break;
            }
        }
        let Some((mut vf, mut vb, (mut g, mut a, mut b))) = start else {
            return Err(Error::OrbitEscape(format!("no starting point reaches the section at c = {}", self.c)));
        };
        let h = 1e-7;
        for _ in 0..60 {
            if g[0].abs().max(g[1].abs()) < self.opts.newton_tol {
                return Ok(ShootResult {
                    c: self.c,
                    mismatch: a[1] - b[1],
                    left: WaveState::from_array(a),
                    right: WaveState::from_array(b),
                    base: (vf, vb),
                });
            }
            let (gf, _, _) = self.gap(vf + h, vb)?;
            let (gb, _, _) = self.gap(vf, vb + h)?;
            let j = [[(gf[0] - g[0]) / h, (gb[0] - g[0]) / h], [(gf[1] - g[1]) / h, (gb[1] - g[1]) / h]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-14 {
                return Err(Error::Solver("singular matching Jacobian".into()));
            }
            let dvf = (g[0] * j[1][1] - g[1] * j[0][1]) / det;
            let dvb = (j[0][0] * g[1] - j[1][0] * g[0]) / det;
            // damped step with backtracking: off the connection the fast orbit may fail to cross u = 0
            let norm = |g: &[f64; 2]| g[0].abs().max(g[1].abs());
            let mut scale = (0.1 / dvf.abs().max(dvb.abs())).min(1.0);
            let mut accepted = false;
            for _ in 0..30 {
                if let Ok((gn, an, bn)) = self.gap(vf - scale * dvf, vb - scale * dvb) {
                    if norm(&gn) < norm(&g) {
                        vf -= scale * dvf;
                        vb -= scale * dvb;
                        (g, a, b) = (gn, an, bn);
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Err(Error::Solver(format!("matching at the section did not converge for c = {}", self.c)))
    }
}

/// Matches the orbit leaving the minus state with the orbit entering the plus state in `(v, q)`
/// at `u = 0`, and returns the remaining gap in `p`.
pub fn shoot(c: f64, p: &ModelParams, opts: &ShootOptions) -> Result<ShootResult> {
    if !(p.epsilon > 0.0) {
        return Err(Error::Validation("shooting needs epsilon > 0".into()));
    }
    Shooter { c, p, opts: *opts }.solve()
}

pub fn shoot_mismatch(c: f64, p: &ModelParams, opts: &ShootOptions) -> Result<f64> {
    shoot(c, p, opts).map(|r| r.mismatch)
}

/// Which root of the singular-limit speed equation to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootIndex {
    M,
    #[serde(rename = "0")]
    Zero,
    P,
}

impl std::str::FromStr for RootIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(RootIndex::M),
            "0" => Ok(RootIndex::Zero),
            "p" => Ok(RootIndex::P),
            other => Err(Error::Validation(format!("root index must be m, 0 or p, got {other}"))),
        }
    }
}

/// Singular-limit speed for the requested root (a single root counts as all three).
pub fn singular_speed(p: &ModelParams, root: RootIndex) -> Result<f64> {
    let r = speed_roots(p)?;
    match (r.triple(), root) {
        (Some((m, _, _)), RootIndex::M) => Ok(m),
        (Some((_, z, _)), RootIndex::Zero) => Ok(z),
        (Some((_, _, pp)), RootIndex::P) => Ok(pp),
        (None, _) if r.roots.len() == 1 => Ok(r.roots[0]),
        _ => Err(Error::Validation("speed roots are degenerate here".into())),
    }
}

/// Bisection on `c` until the bracket is at most `width` wide. Without a bracket,
/// searches outward from the singular-limit root.
pub fn find_speed(p: &ModelParams, root: RootIndex, bracket: Option<(f64, f64)>, width: f64, opts: &ShootOptions) -> Result<(f64, f64)> {
    let m = |c: f64| shoot_mismatch(c, p, opts);
    let (mut lo, mut hi, mut mlo) = match bracket {
        Some((a, b)) => {
            let (ma, mb) = (m(a)?, m(b)?);
            if ma.signum() == mb.signum() {
                return Err(Error::RootBracket(format!("mismatch has the same sign at {a} and {b}")));
            }
            (a, b, ma)
        }
        None => {
            let c0 = singular_speed(p, root)?;
            let step = 0.01 * (1.0 + 0.05 * c0.abs());
            // walk outward on both sides, remembering the last successful evaluation on each
            let mut last: [Option<(f64, f64)>; 2] = [None, None];
            if let Ok(m0) = m(c0) {
                last = [Some((c0, m0)), Some((c0, m0))];
            }
            let mut found = None;
            'search: for k in 1..=60 {
                for (side, sgn) in [(0usize, -1.0), (1usize, 1.0)] {
                    let c = c0 + sgn * step * k as f64;
                    let Ok(mc) = m(c) else { continue };
                    if let Some((cp, mp)) = last[side] {
                        if mp.signum() != mc.signum() {
                            found = Some(if c < cp { (c, cp, mc) } else { (cp, c, mp) });
                            break 'search;
                        }
                    }
                    last[side] = Some((c, mc));
                }
            }
            found.ok_or_else(|| Error::RootBracket(format!("no sign change of the mismatch near {c0}")))?
        }
    };
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let mm = m(mid)?;
        if mm == 0.0 {
            return Ok((mid, mid));
        }
        if mm.signum() == mlo.signum() {
            lo = mid;
            mlo = mm;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Both half orbits at speed `c`, matched in `(v, q)`.
pub fn half_orbits(c: f64, p: &ModelParams, opts: &ShootOptions) -> Result<(HalfOrbit, HalfOrbit, ShootResult)> {
    let sh = Shooter { c, p, opts: *opts };
    let res = sh.solve()?;
    let e = p.epsilon;
    let mut out = Vec::new();
    for (branch, base) in [(Branch::Minus, res.base.0), (Branch::Plus, res.base.1)] {
        let mut slow = Vec::new();
        sh.slow_orbit(branch, base, Some(&mut slow))?;
        let mut fast = Vec::new();
        sh.to_section(branch, base, Some(&mut fast))?;
        let (xi_sec, _) = *fast.last().expect("section sample");
        let x_base = -e * xi_sec;
        let (x_end, _, _) = *slow.last().expect("slow sample");
        let mut pts: Vec<(f64, f64, f64)> = slow
            .iter()
            .map(|&(x, v, q)| (x - x_end + x_base, slow_graph(branch, v, q, c, p).0, v))
            .collect();
        pts.pop();
        pts.extend(fast.iter().map(|&(xi, y)| (e * (xi - xi_sec), y[0], y[2])));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14);
        out.push(HalfOrbit {
            x: pts.iter().map(|t| t.0).collect(),
            u: pts.iter().map(|t| t.1).collect(),
            v: pts.iter().map(|t| t.2).collect(),
        });
    }
    let right = out.pop().expect("two halves");
    let left = out.pop().expect("two halves");
    Ok((left, right, res))
}

fn lerp_table(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&t| t <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// Initial state built from the two half orbits at speed `c`, joined at `u = 0` placed at `z0`,
/// with fixed-point values in the far field and background values at the end nodes.
pub fn build_concatenated_ic(c: f64, cfg: &PdeConfig, z0: f64, opts: &ShootOptions) -> Result<PdeState> {
    let p = cfg.params;
    let (left, right, _) = half_orbits(c, &p, opts)?;
    let fm = fixed_point(Branch::Minus, &p)?;
    let fp = fixed_point(Branch::Plus, &p)?;
    let grid = cfg.grid()?;
    let bg = cfg.background()?;
    let mut u = Vec::with_capacity(grid.n);
    let mut v = Vec::with_capacity(grid.n);
    for i in 0..grid.n {
        let x = grid.x(i) - z0;
        let (uu, vv) = if x <= 0.0 {
            if x < left.x[0] {
                (fm.u, fm.v)
            } else {
                (lerp_table(&left.x, &left.u, x), lerp_table(&left.x, &left.v, x))
            }
        } else if x > *right.x.last().expect("nonempty") {
            (fp.u, fp.v)
        } else {
            (lerp_table(&right.x, &right.u, x), lerp_table(&right.x, &right.v, x))
        };
        u.push(uu);
        v.push(vv);
    }
    u[0] = -1.0;
    u[grid.n - 1] = 1.0;
    v[0] = bg.v_at(grid.x_min);
    v[grid.n - 1] = -bg.v_at(grid.x_max());
    Ok(PdeState {
        u: GridProfile { x_min: grid.x_min, dx: grid.dx, values: u },
        v: GridProfile { x_min: grid.x_min, dx: grid.dx, values: v },
        s: cfg.s0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_vanishes_at_fixed_points() {
        let p = ModelParams::new(2.5, 0.2, 1.0, 0.1).unwrap();
        for b in [Branch::Minus, Branch::Plus] {
            let w = fixed_point(b, &p).unwrap();
            let r = comoving_rhs(&w, 0.7, &p);
            assert!(r.u.abs() + r.p.abs() + r.v.abs() + r.q.abs() < 1e-14);
        }
    }

    #[test]
    fn tanh_solves_fast_system_at_zero_eps() {
        let p = ModelParams::new(2.5, 0.2, 1.0, 0.0).unwrap();
        for k in -20..=20 {
            let xi = 0.3 * k as f64;
            let u = (xi / std::f64::consts::SQRT_2).tanh();
            let pp = (1.0 - u * u) / std::f64::consts::SQRT_2;
            // derivative of p along the orbit
            let dp = -u * (1.0 - u * u);
            let r = comoving_rhs(&WaveState { u, p: pp, v: 0.3, q: 0.1 }, 0.4, &p);
            assert!((r.u - pp).abs() < 1e-15);
            assert!((r.p - dp).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_symmetry() {
        let p = ModelParams::new(2.5, 0.0, 1.0, 0.1).unwrap();
        let w = WaveState { u: 0.3, p: -0.2, v: 0.7, q: 0.4 };
        let a = comoving_rhs(&w, 0.0, &p);
        let b = comoving_rhs(&WaveState { u: -0.3, p: 0.2, v: -0.7, q: -0.4 }, 0.0, &p);
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x + y).abs() < 1e-15);
        }
    }

    #[test]
    fn slow_manifold_is_second_order() {
        let p = ModelParams::new(2.5, 0.2, 1.0, 0.05).unwrap();
        for b in [Branch::Minus, Branch::Plus] {
            for v in [-0.5, 0.0, 0.8] {
                let u = slow_manifold(b, v, &p);
                let res = u - u.powi(3) - p.epsilon * (p.alpha * v + p.gamma);
                assert!(res.abs() < 20.0 * p.epsilon.powi(3), "{res}");
            }
        }
    }

    #[test]
    fn symmetric_mismatch_vanishes() {
        let p = ModelParams::new(2.5, 0.0, 1.0, 0.1).unwrap();
        let r = shoot(0.0, &p, &ShootOptions::default()).unwrap();
        assert!(r.mismatch.abs() < 1e-8, "{}", r.mismatch);
        assert!((r.left.v).abs() < 1e-6);
    }

    #[test]
    fn middle_speed_converges_to_singular_root() {
        let o = ShootOptions::default();
        let c0 = singular_speed(&ModelParams::new(2.5, 0.2, 1.0, 0.0).unwrap(), RootIndex::Zero).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let p = ModelParams::new(2.5, 0.2, 1.0, eps).unwrap();
            let (lo, hi) = find_speed(&p, RootIndex::Zero, None, 1e-4, &o).unwrap();
            assert!(shoot_mismatch(lo, &p, &o).unwrap().signum() != shoot_mismatch(hi, &p, &o).unwrap().signum());
            let d = (0.5 * (lo + hi) - c0).abs();
            assert!(d < prev);
            // first-order convergence in eps
            assert!(d < 0.7 * eps, "eps {eps}: {d}");
            prev = d;
        }
    }

    #[test]
    fn gamma_zero_speed_is_zero() {
        let p = ModelParams::new(2.5, 0.0, 1.0, 0.05).unwrap();
        let (lo, hi) = find_speed(&p, RootIndex::Zero, Some((-0.05, 0.04)), 1e-4, &ShootOptions::default()).unwrap();
        assert!(lo <= 1e-9 && hi >= -1e-9, "({lo}, {hi})");
    }

    #[test]
    fn outer_speeds_exist_at_eps_point_one() {
        let p = ModelParams::new(2.5, 0.2, 1.0, 0.1).unwrap();
        let o = ShootOptions::default();
        let (lo, hi) = find_speed(&p, RootIndex::P, None, 1e-3, &o).unwrap();
        assert!(lo > 4.7 && hi < 5.1, "({lo}, {hi})");
        let (lo, hi) = find_speed(&p, RootIndex::M, None, 1e-3, &o).unwrap();
        assert!(lo > -4.1 && hi < -3.6, "({lo}, {hi})");
    }

    #[test]
    fn concatenated_ic_has_one_front() {
        let p = ModelParams::new(2.5, 0.0, 1.0, 0.1).unwrap();
        let cfg = PdeConfig::new(p, crate::Heterogeneity::Zero, crate::Heterogeneity::Zero, (-10.0, 10.0), 1.0);
        let st = build_concatenated_ic(0.0, &cfg, 0.5, &ShootOptions::default()).unwrap();
        assert!((st.front().unwrap() - 0.5).abs() < 1e-3);
        // symmetric stationary profile
        let g = st.u.grid();
        let i = g.n / 2;
        let a = st.u.interp(0.5 + 0.3);
        let b = st.u.interp(0.5 - 0.3);
        assert!((a + b).abs() < 1e-3, "{a} {b} {i}");
    }
}
