//! Closed-form results for the homogeneous model (`f1 = f2 = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::roots::brent;

/// `sqrt(2)/3`, the leading-order jump coefficient of the fast front.
pub const JUMP: f64 = std::f64::consts::SQRT_2 / 3.0;

/// Value of `V` at a front moving with constant speed `c`.
pub fn vstar(c: f64, tauhat: f64) -> f64 {
    c * tauhat / (c * c * tauhat * tauhat + 4.0).sqrt()
}

pub fn vstar_deriv(c: f64, tauhat: f64) -> f64 {
    4.0 * tauhat / (c * c * tauhat * tauhat + 4.0).powf(1.5)
}

/// `F(c) = gamma + alpha v*(c) - (sqrt 2 / 3) c`; speeds are its zeros.
pub fn existence_fn(c: f64, alpha: f64, gamma: f64, tauhat: f64) -> f64 {
    gamma + alpha * vstar(c, tauhat) - JUMP * c
}

pub fn existence_fn_deriv(c: f64, alpha: f64, tauhat: f64) -> f64 {
    alpha * vstar_deriv(c, tauhat) - JUMP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Single,
    Triple,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedRoots {
    pub roots: Vec<f64>,
    pub regime: Regime,
}

impl SpeedRoots {
    /// `c_m`, `c_0`, `c_p` when three roots exist.
    pub fn triple(&self) -> Option<(f64, f64, f64)> {
        (self.roots.len() == 3).then(|| (self.roots[0], self.roots[1], self.roots[2]))
    }
}

const MERGE_TOL: f64 = 1e-7;

/// Critical points of `F`, where `alpha v*'(c) = sqrt(2)/3`.
pub fn critical_speeds(alpha: f64, tauhat: f64) -> Option<f64> {
    if alpha <= 0.0 {
        return None;
    }
    let k = 6.0 * std::f64::consts::SQRT_2 * alpha * tauhat;
    let w = k.powf(2.0 / 3.0) - 4.0;
    (w > 0.0).then(|| w.sqrt() / tauhat)
}

/// All real zeros of [`existence_fn`], isolated on the monotone pieces of `F`.
pub fn speed_roots(p: &ModelParams) -> Result<SpeedRoots> {
    p.validate()?;
    let (a, g, t) = (p.alpha, p.gamma, p.tauhat);
    let f = |c: f64| existence_fn(c, a, g, t);
    // |v*| < 1 bounds every root
    let bound = 3.0 * (g.abs() + a.abs()) / std::f64::consts::SQRT_2 + 1.0;
    let mut edges = vec![-bound];
    let crit = critical_speeds(a, t);
    if let Some(cc) = crit {
        edges.push(-cc);
        edges.push(cc);
    }
    edges.push(bound);
    let mut roots: Vec<f64> = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
        } else if flo * fhi < 0.0 {
            let (r, _) = brent(|c| Ok(f(c)), lo, hi, flo, fhi, 1e-15, 200)?;
            roots.push(r);
        }
    }
    if f(bound) == 0.0 {
        roots.push(bound);
    }
    // tangential zeros at a fold are double roots
    if let Some(cc) = crit {
        for c in [-cc, cc] {
            if f(c).abs() < 1e-12 {
                roots.retain(|r| (r - c).abs() > MERGE_TOL);
                roots.push(c);
                roots.push(c);
            }
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
    if roots.is_empty() {
        return Err(Error::Solver("no speed found".into()));
    }
    let close = roots.windows(2).any(|w| (w[1] - w[0]).abs() < MERGE_TOL);
    let regime = if close {
        Regime::Critical
    } else if roots.len() == 3 {
        Regime::Triple
    } else {
        Regime::Single
    };
    Ok(SpeedRoots { roots, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub c_bp: f64,
    pub alpha_bp: f64,
}

/// Fold where the negative pair of speeds is born (double zero of `F`).
pub fn bifurcation_point(gamma: f64, tauhat: f64) -> Result<BifurcationPoint> {
    if gamma == 0.0 {
        return Err(Error::Validation("gamma = 0 is degenerate".into()));
    }
    if !(tauhat > 0.0) {
        return Err(Error::Validation("tauhat must be positive".into()));
    }
    let c = -(12.0 * gamma / (std::f64::consts::SQRT_2 * tauhat * tauhat)).cbrt();
    let alpha = (JUMP * c - gamma) * (4.0 + c * c * tauhat * tauhat).sqrt() / (c * tauhat);
    Ok(BifurcationPoint { c_bp: c, alpha_bp: alpha })
}
