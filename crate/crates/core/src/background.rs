//! Heterogeneous background states, the exponential-kernel solution operator,
//! Riccati slopes and leading-order stationary fronts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{hermite, GridProfile, UniformGrid};
use crate::heterogeneity::Heterogeneity;
use crate::model::ModelParams;
use crate::numerics::linalg::solve_tridiagonal;
use crate::numerics::quad::simpson2;
use crate::numerics::roots::bisect;

/// Width of the numerically integrated strip beyond the grid when no support is known.
const TAIL_WINDOW: f64 = 40.0;
const TAIL_TOL: f64 = 1e-10;
const CELL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A source term for [`green_apply`].
pub struct Source<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    /// Limits at -inf and +inf.
    pub asymptotes: Option<(f64, f64)>,
    /// Interval outside which `f` equals its limits exactly.
    pub support: Option<(f64, f64)>,
}

impl<'a> Source<'a> {
    pub fn function(f: &'a dyn Fn(f64) -> f64) -> Self {
        Self { f, asymptotes: None, support: None }
    }
}

/// `G(phi)` and its derivative on a grid.
#[derive(Debug, Clone)]
pub struct GreenResult {
    pub g: GridProfile,
    pub dg: GridProfile,
}

/// `G(phi)(x) = int 1/2 exp(-|x - xi|) phi(xi) dxi`, the bounded solution of `G'' - G = -phi`.
pub fn green_apply(src: &Source, grid: &UniformGrid) -> Result<GreenResult> {
    let n = grid.n;
    let dx = grid.dx;
    let decay = (-dx).exp();
    let phi = src.f;
    // cell integrals of the left and right kernels
    let mut il = vec![0.0; n.saturating_sub(1)];
    let mut ir = vec![0.0; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (grid.x(i), grid.x(i + 1));
        let scale = 1.0 + phi(a).abs().max(phi(b).abs());
        let r = simpson2(
            &mut |xi: f64| {
                let p = 0.5 * phi(xi);
                [p * (-(b - xi)).exp(), p * (-(xi - a)).exp()]
            },
            a,
            b,
            CELL_TOL * scale,
        );
        il[i] = r[0];
        ir[i] = r[1];
    }
    let left = tail(src, grid.x(0), -1.0)?;
    let right = tail(src, grid.x_max(), 1.0)?;
    let mut l = vec![0.0; n];
    let mut r = vec![0.0; n];
    l[0] = left;
    for i in 0..n - 1 {
        l[i + 1] = decay * l[i] + il[i];
    }
    r[n - 1] = right;
    for i in (0..n - 1).rev() {
        r[i] = decay * r[i + 1] + ir[i];
    }
    let g = (0..n).map(|i| l[i] + r[i]).collect();
    let dg = (0..n).map(|i| r[i] - l[i]).collect();
    Ok(GreenResult { g: GridProfile::new(grid.x_min, dx, g)?, dg: GridProfile::new(grid.x_min, dx, dg)? })
}

/// `int 1/2 exp(-|x0 - xi|) phi(xi)` over the half line beyond `x0` in direction `dir`.
fn tail(src: &Source, x0: f64, dir: f64) -> Result<f64> {
    let phi = src.f;
    let limit = src.asymptotes.map(|(l, r)| if dir < 0.0 { l } else { r });
    // distance over which phi may still vary
    let width = match (limit, src.support) {
        (Some(_), Some((a, b))) => {
            let edge = if dir < 0.0 { a } else { b };
            ((edge - x0) * dir).max(0.0)
        }
        _ => TAIL_WINDOW,
    };
    let mut acc = 0.0;
    if width > 0.0 {
        let pieces = (width / 0.25).ceil() as usize;
        let h = width / pieces as f64;
        for k in 0..pieces {
            let (d0, d1) = (k as f64 * h, (k + 1) as f64 * h);
            let r = simpson2(
                &mut |d: f64| {
                    let w = 0.5 * (-d).exp() * phi(x0 + dir * d);
                    [w, 0.0]
                },
                d0,
                d1,
                CELL_TOL,
            );
            acc += r[0];
        }
    }
    let far = 0.5 * (-width).exp();
    match limit {
        Some(c) => Ok(acc + c * far),
        None => {
            let bound = phi(x0 + dir * width).abs().max(phi(x0 + dir * 0.5 * width).abs()) * far;
            if bound > TAIL_TOL {
                return Err(Error::Truncation { estimate: bound, tol: TAIL_TOL });
            }
            Ok(acc)
        }
    }
}

/// How the truncated problem treats heterogeneities at the grid ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Heterogeneities must be exactly constant beyond both grid ends.
    #[default]
    Strict,
    /// Use the values at the grid ends as if they continued unchanged.
    Frozen,
}

/// `v_b` with `q_b = v_b'` and `q_b'` on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundState {
    pub sign: Sign,
    pub v: GridProfile,
    pub q: GridProfile,
    pub dq: GridProfile,
}

impl BackgroundState {
    pub fn v_at(&self, x: f64) -> f64 {
        hermite(&self.v, &self.q, x)
    }

    pub fn q_at(&self, x: f64) -> f64 {
        hermite(&self.q, &self.dq, x)
    }

    pub fn grid(&self) -> UniformGrid {
        self.v.grid()
    }

    /// The opposite-sign state (the problem is linear in the sign).
    pub fn negated(&self) -> Self {
        let neg = |p: &GridProfile| GridProfile { x_min: p.x_min, dx: p.dx, values: p.values.iter().map(|v| -v).collect() };
        Self {
            sign: match self.sign {
                Sign::Plus => Sign::Minus,
                Sign::Minus => Sign::Plus,
            },
            v: neg(&self.v),
            q: neg(&self.q),
            dq: neg(&self.dq),
        }
    }

    /// The minus state, negating if needed.
    pub fn minus(&self) -> Self {
        match self.sign {
            Sign::Minus => self.clone(),
            Sign::Plus => self.negated(),
        }
    }
}

fn boundary_values(f: &Heterogeneity, grid: &UniformGrid, policy: BoundaryPolicy, name: &str) -> Result<(f64, f64)> {
    match policy {
        BoundaryPolicy::Frozen => Ok((f.eval(grid.x_min), f.eval(grid.x_max()))),
        BoundaryPolicy::Strict => {
            let (Some((l, r)), Some((a, b))) = (f.asymptotes(), f.support()) else {
                return Err(Error::Validation(format!("{name} is not asymptotically constant")));
            };
            if f.is_zero() || (a >= grid.x_min && b <= grid.x_max()) || a == b {
                Ok((l, r))
            } else {
                Err(Error::Validation(format!(
                    "{name} varies beyond the grid [{}, {}] (support [{a}, {b}])",
                    grid.x_min,
                    grid.x_max()
                )))
            }
        }
    }
}

/// Bounded stationary state `v'' - (1 + f1) v = -sign (1 + f2)`.
pub fn background_state(
    f1: &Heterogeneity,
    f2: &Heterogeneity,
    sign: Sign,
    grid: &UniformGrid,
    policy: BoundaryPolicy,
) -> Result<BackgroundState> {
    f1.validate()?;
    f2.validate()?;
    f2.positivity_ok(grid.x_min, grid.x_max());
    let s = sign.value();
    let dx = grid.dx;
    if f1.is_zero() {
        let phi = |x: f64| 1.0 + f2.eval(x);
        let src = Source {
            f: &phi,
            asymptotes: f2.asymptotes().map(|(l, r)| (1.0 + l, 1.0 + r)),
            support: f2.support(),
        };
        let gr = green_apply(&src, grid)?;
        let v: Vec<f64> = gr.g.values.iter().map(|g| s * g).collect();
        let q: Vec<f64> = gr.dg.values.iter().map(|g| s * g).collect();
        let dq: Vec<f64> = (0..grid.n).map(|i| v[i] - s * phi(grid.x(i))).collect();
        return Ok(BackgroundState {
            sign,
            v: GridProfile::new(grid.x_min, dx, v)?,
            q: GridProfile::new(grid.x_min, dx, q)?,
            dq: GridProfile::new(grid.x_min, dx, dq)?,
        });
    }
    if policy == BoundaryPolicy::Strict {
        boundary_values(f2, grid, policy, "f2")?;
    }
    let (g_l, g_r) = boundary_values(f1, grid, policy, "f1").map(|(l, r)| (1.0 + l, 1.0 + r))?;
    let (p_l, p_r) = (1.0 + f2.eval(grid.x_min), 1.0 + f2.eval(grid.x_max()));
    let slopes = riccati_slopes(f1, grid)?;
    let n = grid.n;
    let g: Vec<f64> = (0..n).map(|i| 1.0 + f1.eval(grid.x(i))).collect();
    let phi: Vec<f64> = (0..n).map(|i| 1.0 + f2.eval(grid.x(i))).collect();
    let (vbar_l, vbar_r) = (s * p_l / g_l, s * p_r / g_r);
    let (au, as_) = (slopes.a_u.values[0], slopes.a_s.values[n - 1]);
    let h2 = dx * dx;
    let mut lower = vec![1.0 / h2; n];
    let mut upper = vec![1.0 / h2; n];
    let mut diag: Vec<f64> = g.iter().map(|gi| -2.0 / h2 - gi).collect();
    let mut rhs: Vec<f64> = phi.iter().map(|p| -s * p).collect();
    // Robin rows through a ghost node: v' = a_u (v - vbar) at the left, a_s at the right
    upper[0] = 2.0 / h2;
    diag[0] -= 2.0 * au / dx;
    rhs[0] -= 2.0 * au * vbar_l / dx;
    lower[n - 1] = 2.0 / h2;
    diag[n - 1] += 2.0 * as_ / dx;
    rhs[n - 1] += 2.0 * as_ * vbar_r / dx;
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
    let v = rhs;
    let mut q = vec![0.0; n];
    q[0] = au * (v[0] - vbar_l);
    q[n - 1] = as_ * (v[n - 1] - vbar_r);
    for i in 1..n - 1 {
        q[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    let dq = (0..n).map(|i| g[i] * v[i] - s * phi[i]).collect();
    Ok(BackgroundState {
        sign,
        v: GridProfile::new(grid.x_min, dx, v)?,
        q: GridProfile::new(grid.x_min, dx, q)?,
        dq: GridProfile::new(grid.x_min, dx, dq)?,
    })
}

/// Residual of the background equation, scaled like a second derivative.
///
/// For `f1 = 0` this uses the exact three-point identity
/// `v(x+d) + v(x-d) - 2 cosh(d) v(x) = int_{-d}^{d} sinh(d-|t|) (v'' - v)(x+t) dt`,
/// so no finite-difference truncation error enters. Otherwise it is the residual of the
/// discrete system.
pub fn background_residual(bg: &BackgroundState, f1: &Heterogeneity, f2: &Heterogeneity) -> f64 {
    let s = bg.sign.value();
    let v = &bg.v.values;
    let d = bg.v.dx;
    let n = v.len();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let x = bg.v.x(i);
        let r = if f1.is_zero() {
            let ker = simpson2(
                &mut |t: f64| {
                    let w = (d - t.abs()).sinh();
                    [w * (1.0 + f2.eval(x + t)), 0.0]
                },
                -d,
                0.0,
                1e-18,
            )[0] + simpson2(
                &mut |t: f64| {
                    let w = (d - t.abs()).sinh();
                    [w * (1.0 + f2.eval(x + t)), 0.0]
                },
                0.0,
                d,
                1e-18,
            )[0];
            (v[i + 1] + v[i - 1] - 2.0 * d.cosh() * v[i] + s * ker) / (d * d)
        } else {
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (d * d) - (1.0 + f1.eval(x)) * v[i] + s * (1.0 + f2.eval(x))
        };
        worst = worst.max(r.abs());
    }
    worst
}

/// Bounded solutions `a_u > 0 > a_s` of `a' = 1 + f1 - a^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiSlopes {
    pub a_u: GridProfile,
    pub a_s: GridProfile,
    da_u: GridProfile,
    da_s: GridProfile,
}

impl RiccatiSlopes {
    pub fn at(&self, x: f64) -> (f64, f64) {
        (hermite(&self.a_u, &self.da_u, x), hermite(&self.a_s, &self.da_s, x))
    }

    /// Constant slopes `(sqrt(1 + k), -sqrt(1 + k))`.
    pub fn constant(grid: &UniformGrid, k: f64) -> Self {
        let r = (1.0 + k).sqrt();
        Self { a_u: grid.sample(|_| r), a_s: grid.sample(|_| -r), da_u: grid.sample(|_| 0.0), da_s: grid.sample(|_| 0.0) }
    }
}

/// Forward integration for `a_u`, backward for `a_s` (each is attracting in its direction).
pub fn riccati_slopes(f1: &Heterogeneity, grid: &UniformGrid) -> Result<RiccatiSlopes> {
    if f1.is_zero() {
        return Ok(RiccatiSlopes::constant(grid, 0.0));
    }
    if let Heterogeneity::Constant { value } = f1 {
        if 1.0 + value <= 0.0 {
            return Err(Error::Validation("1 + f1 must be positive".into()));
        }
        return Ok(RiccatiSlopes::constant(grid, *value));
    }
    let rhs = |x: f64, a: f64| 1.0 + f1.eval(x) - a * a;
    let n = grid.n;
    let sub = 8;
    let step = |x: f64, a: f64, h: f64| {
        let k1 = rhs(x, a);
        let k2 = rhs(x + 0.5 * h, a + 0.5 * h * k1);
        let k3 = rhs(x + 0.5 * h, a + 0.5 * h * k2);
        let k4 = rhs(x + h, a + h * k3);
        a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let start_l = 1.0 + f1.eval(grid.x_min);
    let start_r = 1.0 + f1.eval(grid.x_max());
    if start_l <= 0.0 || start_r <= 0.0 {
        return Err(Error::Validation("1 + f1 must be positive at the grid ends".into()));
    }
    let mut au = vec![0.0; n];
    au[0] = start_l.sqrt();
    for i in 0..n - 1 {
        let mut a = au[i];
        let h = grid.dx / sub as f64;
        for k in 0..sub {
            a = step(grid.x(i) + k as f64 * h, a, h);
        }
        if !(a > 0.0) {
            return Err(Error::RiccatiBlowup(grid.x(i + 1)));
        }
        au[i + 1] = a;
    }
    let mut as_ = vec![0.0; n];
    as_[n - 1] = -start_r.sqrt();
    for i in (1..n).rev() {
        let mut a = as_[i];
        let h = -grid.dx / sub as f64;
        for k in 0..sub {
            a = step(grid.x(i) + k as f64 * h, a, h);
        }
        if !(a < 0.0) {
            return Err(Error::RiccatiBlowup(grid.x(i - 1)));
        }
        as_[i - 1] = a;
    }
    let da = |a: &Vec<f64>| GridProfile { x_min: grid.x_min, dx: grid.dx, values: (0..n).map(|i| rhs(grid.x(i), a[i])).collect() };
    Ok(RiccatiSlopes {
        da_u: da(&au),
        da_s: da(&as_),
        a_u: GridProfile::new(grid.x_min, grid.dx, au)?,
        a_s: GridProfile::new(grid.x_min, grid.dx, as_)?,
    })
}

/// Leading-order value of `v` at a stationary front located at `x0`.
pub fn v_sf(x0: f64, bg: &BackgroundState, slopes: &RiccatiSlopes) -> Result<f64> {
    let m = bg.minus();
    let (au, as_) = slopes.at(x0);
    let den = as_ - au;
    if den == 0.0 {
        return Err(Error::Validation("a_s = a_u".into()));
    }
    Ok((2.0 * m.q_at(x0) - m.v_at(x0) * (as_ + au)) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryFront {
    pub x0: f64,
    pub classification: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryFrontSet {
    pub positions: Vec<StationaryFront>,
    pub degenerate: bool,
}

/// Roots of `alpha v_SF(x) + gamma = 0` (for `f1 = 0`: `q_b^-(x) = gamma / alpha`).
pub fn stationary_front_positions(p: &ModelParams, bg: &BackgroundState, slopes: &RiccatiSlopes) -> Result<StationaryFrontSet> {
    if p.alpha == 0.0 {
        return Err(Error::Validation("alpha must be nonzero".into()));
    }
    let m = bg.minus();
    let grid = m.grid();
    let cond = |x: f64| -> f64 {
        let (au, as_) = slopes.at(x);
        let vsf = (2.0 * m.q_at(x) - m.v_at(x) * (as_ + au)) / (as_ - au);
        p.alpha * vsf + p.gamma
    };
    let vals: Vec<f64> = (0..grid.n).map(|i| cond(grid.x(i))).collect();
    let scale = p.alpha.abs().max(p.gamma.abs()).max(1.0);
    if vals.iter().all(|v| v.abs() <= 1e-12 * scale) {
        return Ok(StationaryFrontSet { positions: Vec::new(), degenerate: true });
    }
    let mut roots = Vec::new();
    for i in 0..grid.n - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        if a == 0.0 {
            roots.push(grid.x(i));
        } else if a * b < 0.0 {
            roots.push(bisect(cond, grid.x(i), grid.x(i + 1), 1e-10)?);
        }
    }
    if vals[grid.n - 1] == 0.0 {
        roots.push(grid.x_max());
    }
    let positions = roots
        .into_iter()
        .map(|x0| {
            let classification = if p.alpha < 0.0 {
                // derivative of -v_SF, which is q_b^- when f1 = 0
                let d = 1e-4;
                let slope = -(cond(x0 + d) - cond(x0 - d)) / (2.0 * d * p.alpha);
                if slope > 0.0 {
                    Stability::Unstable
                } else {
                    Stability::Stable
                }
            } else {
                Stability::Unclassified
            };
            StationaryFront { x0, classification }
        })
        .collect();
    Ok(StationaryFrontSet { positions, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heterogeneity::{build_example_heterogeneity, GaussianTerm};

    fn grid(a: f64, b: f64, dx: f64) -> UniformGrid {
        UniformGrid::covering(a, b, dx).unwrap()
    }

    #[test]
    fn green_of_constant_is_constant() {
        let one = |_x: f64| 1.0;
        let src = Source { f: &one, asymptotes: Some((1.0, 1.0)), support: Some((0.0, 0.0)) };
        let r = green_apply(&src, &grid(-5.0, 5.0, 0.05)).unwrap();
        assert!(r.g.values.iter().all(|g| (g - 1.0).abs() < 1e-12));
        assert!(r.dg.values.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn green_of_two_sided_exponential() {
        let f = |x: f64| (-x.abs()).exp();
        let src = Source { f: &f, asymptotes: Some((0.0, 0.0)), support: None };
        let g = grid(-6.0, 6.0, 0.01);
        let r = green_apply(&src, &g).unwrap();
        for i in (0..g.n).step_by(37) {
            let x = g.x(i);
            let exact = 0.5 * (1.0 + x.abs()) * (-x.abs()).exp();
            assert!((r.g.values[i] - exact).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn green_of_cosine_mode() {
        let k = 1.0;
        let f = move |x: f64| (k * x).cos();
        // no asymptotes: the tail strip is integrated numerically
        let g = grid(-1.0, 1.0, 0.01);
        let r = green_apply(&Source::function(&f), &g).unwrap();
        let i0 = g.n / 2;
        assert!((r.g.values[i0] - 1.0 / (1.0 + k * k)).abs() < 1e-10);
    }

    #[test]
    fn green_is_linear() {
        let a = |x: f64| (-(x - 0.3) * (x - 0.3)).exp();
        let b = |x: f64| 1.0 / (1.0 + x * x).powi(3);
        let c = |x: f64| 2.0 * a(x) - 0.7 * b(x);
        let g = grid(-4.0, 4.0, 0.02);
        let ga = green_apply(&Source::function(&a), &g).unwrap().g;
        let gb = green_apply(&Source::function(&b), &g).unwrap().g;
        let gc = green_apply(&Source::function(&c), &g).unwrap().g;
        for i in 0..g.n {
            assert!((gc.values[i] - (2.0 * ga.values[i] - 0.7 * gb.values[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_error_without_decay() {
        let f = |x: f64| x.exp();
        assert!(matches!(green_apply(&Source::function(&f), &grid(-1.0, 1.0, 0.1)), Err(Error::Truncation { .. })));
    }

    #[test]
    fn homogeneous_backgrounds() {
        let g = grid(-3.0, 3.0, 0.05);
        let bp = background_state(&Heterogeneity::Zero, &Heterogeneity::Zero, Sign::Plus, &g, BoundaryPolicy::Strict).unwrap();
        assert!(bp.v.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(bp.q.values.iter().all(|q| q.abs() < 1e-12));
    }

    #[test]
    fn plus_minus_antisymmetric_and_even_reflection() {
        let (_, f2) = build_example_heterogeneity("ex3").unwrap();
        let g = grid(-15.0, 15.0, 0.01);
        let bp = background_state(&Heterogeneity::Zero, &f2, Sign::Plus, &g, BoundaryPolicy::Strict).unwrap();
        let bm = background_state(&Heterogeneity::Zero, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let n = g.n;
        for i in 0..n {
            assert_eq!(bp.v.values[i], -bm.v.values[i]);
            // f2 is even: v even, q odd
            assert!((bp.v.values[i] - bp.v.values[n - 1 - i]).abs() < 1e-10);
            assert!((bp.q.values[i] + bp.q.values[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn ex1_residual_and_positivity() {
        let (f1, f2) = build_example_heterogeneity("ex1").unwrap();
        let g = grid(-10.0, 10.0, 0.01);
        let bp = background_state(&f1, &f2, Sign::Plus, &g, BoundaryPolicy::Strict).unwrap();
        assert!(bp.v.values.iter().all(|v| *v > 0.0));
        let res = background_residual(&bp, &f1, &f2);
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn riccati_constant_cases() {
        let g = grid(-2.0, 2.0, 0.1);
        let s = riccati_slopes(&Heterogeneity::Constant { value: 3.0 }, &g).unwrap();
        assert!(s.a_u.values.iter().all(|a| (a - 2.0).abs() < 1e-15));
        assert!(s.a_s.values.iter().all(|a| (a + 2.0).abs() < 1e-15));
    }

    #[test]
    fn riccati_small_perturbation_is_linear_in_amplitude() {
        let g = grid(-10.0, 10.0, 0.01);
        let bump = |d: f64| Heterogeneity::GaussianSum {
            offset: 0.0,
            terms: vec![GaussianTerm { amplitude: d, center: 0.0, rate: 1.0 }],
        };
        let dev = |d: f64| {
            let s = riccati_slopes(&bump(d), &g).unwrap();
            s.a_u.values.iter().fold(0.0f64, |m, a| m.max((a - 1.0).abs()))
        };
        let (d1, d2) = (dev(0.02), dev(0.01));
        assert!((d1 / d2 - 2.0).abs() < 0.02, "ratio {}", d1 / d2);
    }

    #[test]
    fn riccati_solutions_satisfy_ode() {
        let f1 = Heterogeneity::GaussianSum {
            offset: 0.5,
            terms: vec![GaussianTerm { amplitude: 1.0, center: 0.0, rate: 2.0 }],
        };
        let g = grid(-8.0, 8.0, 0.01);
        let s = riccati_slopes(&f1, &g).unwrap();
        for i in 1..g.n - 1 {
            let d = (s.a_u.values[i + 1] - s.a_u.values[i - 1]) / (2.0 * g.dx);
            let x = g.x(i);
            assert!((d - (1.0 + f1.eval(x) - s.a_u.values[i].powi(2))).abs() < 1e-4);
        }
    }

    #[test]
    fn f1_path_matches_constant_coefficient_solution() {
        // f1 = k constant, f2 = 0: v = 1 / (1 + k)
        let g = grid(-5.0, 5.0, 0.01);
        let f1 = Heterogeneity::Constant { value: 1.5 };
        let bp = background_state(&f1, &Heterogeneity::Zero, Sign::Plus, &g, BoundaryPolicy::Strict).unwrap();
        assert!(bp.v.values.iter().all(|v| (v - 0.4).abs() < 1e-12));
        assert!(background_residual(&bp, &f1, &Heterogeneity::Zero) < 1e-8);
    }

    #[test]
    fn f1_path_agrees_with_kernel_path_for_tiny_f1() {
        let (_, f2) = build_example_heterogeneity("ex1").unwrap();
        let g = grid(-10.0, 10.0, 0.005);
        let zero = background_state(&Heterogeneity::Zero, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let tiny = Heterogeneity::GaussianSum {
            offset: 0.0,
            terms: vec![GaussianTerm { amplitude: 1e-9, center: 0.0, rate: 1.0 }],
        };
        let fd = background_state(&tiny, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        for i in 0..g.n {
            assert!((zero.v.values[i] - fd.v.values[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn strict_policy_rejects_unbounded_variation() {
        let (f1, f2) = build_example_heterogeneity("fig1").unwrap();
        let g = grid(0.0, 300.0, 0.05);
        assert!(background_state(&f1, &f2, Sign::Plus, &g, BoundaryPolicy::Strict).is_err());
        let bp = background_state(&f1, &f2, Sign::Plus, &g, BoundaryPolicy::Frozen).unwrap();
        assert!(bp.v.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn ex1_stationary_fronts() {
        let (f1, f2) = build_example_heterogeneity("ex1").unwrap();
        let g = grid(-10.0, 10.0, 0.01);
        let bm = background_state(&f1, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let sl = riccati_slopes(&f1, &g).unwrap();
        let p = ModelParams::example("ex1").unwrap();
        let set = stationary_front_positions(&p, &bm, &sl).unwrap();
        assert_eq!(set.positions.len(), 2);
        let (a, b) = (set.positions[0], set.positions[1]);
        assert!((a.x0 - 0.38).abs() < 1e-2 && a.classification == Stability::Unstable);
        assert!((b.x0 - 0.90).abs() < 1e-2 && b.classification == Stability::Stable);
        for sf in &set.positions {
            assert!((bm.q_at(sf.x0) - 0.1).abs() < 1e-8);
            let v = v_sf(sf.x0, &bm, &sl).unwrap();
            assert!((v + bm.q_at(sf.x0)).abs() < 1e-12);
            assert!((p.alpha * v + p.gamma).abs() < 1e-8);
        }
    }

    #[test]
    fn ex0_has_no_stationary_fronts() {
        let (f1, f2) = build_example_heterogeneity("ex0").unwrap();
        let g = grid(-10.0, 20.0, 0.01);
        let bm = background_state(&f1, &f2, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let sl = riccati_slopes(&f1, &g).unwrap();
        let set = stationary_front_positions(&ModelParams::example("ex0").unwrap(), &bm, &sl).unwrap();
        assert!(set.positions.is_empty() && !set.degenerate);
    }

    #[test]
    fn homogeneous_symmetric_case_is_degenerate() {
        let g = grid(-5.0, 5.0, 0.05);
        let bm = background_state(&Heterogeneity::Zero, &Heterogeneity::Zero, Sign::Minus, &g, BoundaryPolicy::Strict).unwrap();
        let sl = riccati_slopes(&Heterogeneity::Zero, &g).unwrap();
        let p = ModelParams::new(2.5, 0.0, 1.0, 0.0).unwrap();
        assert!(stationary_front_positions(&p, &bm, &sl).unwrap().degenerate);
        assert!(v_sf(1.3, &bm, &sl).unwrap().abs() < 1e-12);
    }
}
