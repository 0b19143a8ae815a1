//! The delay functional `W[z](s)`: Monte Carlo and deterministic quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::heterogeneity::Heterogeneity;
use crate::history::PathEval;
use crate::numerics::quad::integrate;
use crate::numerics::special::erfcx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DelayMethod {
    #[default]
    Mc,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayFunctionalEstimate {
    pub value: f64,
    /// Standard error of the mean (zero for quadrature).
    pub stderr: f64,
    pub method: DelayMethod,
    pub samples_or_nodes: usize,
    /// Bound on the neglected tail (quadrature only).
    pub truncation_bound: f64,
}

/// Draw from the Levy distribution with location 0 and scale `c`, as `c / Z^2`.
pub fn sample_levy(c: f64, rng: &mut impl Rng) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    c / (z * z)
}

/// `ln(2 cosh y)` without overflow.
#[inline]
pub fn ln_2cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Deterministic generator for one block of samples.
pub fn block_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Pairs `(X, R)` with `X ~ Exp(1)` and `R | X ~ Levy(0, tauhat X^2 / 2)`.
pub fn sample_block(seed: u64, stream: u64, m: usize, tauhat: f64) -> Vec<(f64, f64)> {
    let mut rng = block_rng(seed, stream);
    (0..m)
        .map(|_| {
            let x: f64 = Exp1.sample(&mut rng);
            let r = sample_levy(0.5 * tauhat * x * x, &mut rng);
            (x, r)
        })
        .collect()
}

/// One Monte Carlo weight; its expectation is `W`.
#[inline]
pub fn mc_weight(x: f64, r: f64, dz: f64, one_plus_f2: f64, delta: f64, tauhat: f64) -> f64 {
    if dz == 0.0 || one_plus_f2 == 0.0 || r == 0.0 || x == 0.0 {
        return 0.0;
    }
    let expo = -r / tauhat - tauhat * delta * delta / (4.0 * r) + ln_2cosh(0.5 * tauhat * delta * x / r);
    dz * one_plus_f2 * r / (tauhat * x) * expo.exp()
}

/// Mean and standard error of `terms`, padded with `zeros` zero terms, in fixed order.
pub fn mean_stderr(terms: &[f64], zeros: usize) -> (f64, f64) {
    let m = terms.len() + zeros;
    if m == 0 {
        return (0.0, 0.0);
    }
    let mean = terms.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (mean, 0.0);
    }
    let ss = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() + zeros as f64 * mean * mean;
    (mean, (ss / (m - 1) as f64).sqrt() / (m as f64).sqrt())
}

/// Monte Carlo estimate of `W[z](s)` over a prepared sample block.
pub fn delay_functional_mc_block(
    path: &impl PathEval,
    s: f64,
    tauhat: f64,
    f2: &Heterogeneity,
    block: &[(f64, f64)],
) -> Result<DelayFunctionalEstimate> {
    let (zs, _) = path.eval(s)?;
    let mut terms = Vec::with_capacity(block.len());
    for &(x, r) in block {
        let (zr, dz) = path.eval(s - r)?;
        terms.push(mc_weight(x, r, dz, 1.0 + f2.eval(zr), zs - zr, tauhat));
    }
    let (value, stderr) = mean_stderr(&terms, 0);
    Ok(DelayFunctionalEstimate { value, stderr, method: DelayMethod::Mc, samples_or_nodes: block.len(), truncation_bound: 0.0 })
}

/// Monte Carlo estimate with `m` samples drawn from `(seed, stream)`.
pub fn delay_functional_mc(
    path: &impl PathEval,
    s: f64,
    tauhat: f64,
    f2: &Heterogeneity,
    m: usize,
    seed: u64,
    stream: u64,
) -> Result<DelayFunctionalEstimate> {
    delay_functional_mc_block(path, s, tauhat, f2, &sample_block(seed, stream, m, tauhat))
}

/// `e^{m+D} erfc((m + 2D) / (2 sqrt D))` with `D = R / tauhat`, free of overflow.
#[inline]
pub fn kernel_k(m: f64, d: f64) -> f64 {
    let sd = d.sqrt();
    let y = (m + 2.0 * d) / (2.0 * sd);
    if y > 0.0 {
        (-m * m / (4.0 * d)).exp() * erfcx(y)
    } else {
        (m + d).exp() * libm::erfc(y)
    }
}

/// Deterministic `W[z](s)`: the inner Gaussian integral is done in closed form,
/// leaving `tauhat W = 1/2 int_0^Rmax e^{-R/tauhat} z'(s-R)(1+f2(z(s-R))) [K(D) + K(-D)] dR`.
pub fn delay_functional_quadrature(
    path: &impl PathEval,
    s: f64,
    tauhat: f64,
    f2: &Heterogeneity,
    r_max: f64,
    tol: f64,
) -> Result<DelayFunctionalEstimate> {
    let (zs, _) = path.eval(s)?;
    let mut edges = vec![0.0];
    // resolve the sqrt-type behaviour near R = 0 and the exponential decay
    let mut e = 1e-6 * tauhat;
    while e < r_max {
        edges.push(e);
        e *= 4.0;
    }
    edges.extend(path.kinks(s - r_max, s).into_iter().map(|k| s - k).filter(|r| *r > 0.0 && *r < r_max));
    edges.push(r_max);
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    let mut failure = None;
    let mut sup_g = 0.0f64;
    let mut f = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match path.eval(s - r) {
            Ok((zr, dz)) => {
                if dz == 0.0 {
                    return 0.0;
                }
                let g = dz * (1.0 + f2.eval(zr));
                sup_g = sup_g.max(g.abs());
                if g == 0.0 {
                    return 0.0;
                }
                let d = r / tauhat;
                let delta = zs - zr;
                0.5 * (-d).exp() * g * (kernel_k(delta, d) + kernel_k(-delta, d)) / tauhat
            }
            Err(err) => {
                failure.get_or_insert(err);
                0.0
            }
        }
    };
    let (value, _err) = integrate(&mut f, &edges, tol, tol, 200_000)?;
    if let Some(err) = failure {
        return Err(err);
    }
    // K <= 2, so the neglected part is at most 2 sup|g| e^{-Rmax/tauhat}
    let bound = 2.0 * sup_g.max(path.max_abs_slope()) * (-r_max / tauhat).exp();
    Ok(DelayFunctionalEstimate {
        value,
        stderr: 0.0,
        method: DelayMethod::Quadrature,
        samples_or_nodes: edges.len() - 1,
        truncation_bound: bound,
    })
}
