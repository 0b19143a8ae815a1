//! Spatial heterogeneities f1, f2 and the named experiment set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Gaussian bump `amplitude * exp(-rate (x - center)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub amplitude: f64,
    pub center: f64,
    pub rate: f64,
}

/// Declarative description of a coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Heterogeneity {
    Zero,
    Constant { value: f64 },
    GaussianSum { #[serde(default)] offset: f64, terms: Vec<GaussianTerm> },
    /// C1 piecewise cubic Hermite on `knots = [x, y, dy/dx]`, equal to `outside` beyond them.
    CompactPiecewiseCubic { knots: Vec<[f64; 3]>, #[serde(default)] outside: f64 },
    /// Closed-form expressions that fit none of the above.
    NamedExample { id: String },
}

/// Magnitude below which a Gaussian term counts as absent.
const GAUSS_CUTOFF: f64 = 1e-18;

const FIG1_F2: &str = "fig1.f2";

impl Heterogeneity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Heterogeneity::Zero => Ok(()),
            Heterogeneity::Constant { value } => finite(*value, "constant"),
            Heterogeneity::GaussianSum { offset, terms } => {
                finite(*offset, "offset")?;
                for t in terms {
                    finite(t.amplitude, "amplitude")?;
                    finite(t.center, "center")?;
                    if !(t.rate > 0.0) || !t.rate.is_finite() {
                        return Err(Error::Validation(format!("gaussian rate must be positive, got {}", t.rate)));
                    }
                }
                Ok(())
            }
            Heterogeneity::CompactPiecewiseCubic { knots, outside } => {
                finite(*outside, "outside")?;
                if knots.len() < 2 {
                    return Err(Error::Validation("piecewise cubic needs at least two knots".into()));
                }
                for k in knots {
                    for v in k {
                        finite(*v, "knot")?;
                    }
                }
                if knots.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::Validation("knots must be strictly increasing".into()));
                }
                Ok(())
            }
            Heterogeneity::NamedExample { id } if id == FIG1_F2 => Ok(()),
            Heterogeneity::NamedExample { id } => Err(Error::UnknownExample(id.clone())),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Heterogeneity::Zero => 0.0,
            Heterogeneity::Constant { value } => *value,
            Heterogeneity::GaussianSum { offset, terms } => {
                if let Some((a, b)) = self.support() {
                    if x < a || x > b {
                        return *offset;
                    }
                }
                offset + terms.iter().map(|t| t.amplitude * (-t.rate * (x - t.center).powi(2)).exp()).sum::<f64>()
            }
            Heterogeneity::CompactPiecewiseCubic { knots, outside } => {
                let (first, last) = (knots[0][0], knots[knots.len() - 1][0]);
                if x < first || x > last {
                    return *outside;
                }
                let j = knots.partition_point(|k| k[0] <= x).clamp(1, knots.len() - 1) - 1;
                let [x0, y0, d0] = knots[j];
                let [x1, y1, d1] = knots[j + 1];
                let h = x1 - x0;
                let t = (x - x0) / h;
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * d1
            }
            Heterogeneity::NamedExample { .. } => fig1_f2(x),
        }
    }

    /// Interval outside which the value is exactly constant; `None` if unbounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Heterogeneity::Zero | Heterogeneity::Constant { .. } => Some((0.0, 0.0)),
            Heterogeneity::GaussianSum { terms, .. } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for t in terms.iter().filter(|t| t.amplitude != 0.0) {
                    let r = ((t.amplitude.abs() / GAUSS_CUTOFF).ln().max(0.0) / t.rate).sqrt();
                    lo = lo.min(t.center - r);
                    hi = hi.max(t.center + r);
                }
                if lo > hi {
                    Some((0.0, 0.0))
                } else {
                    Some((lo, hi))
                }
            }
            Heterogeneity::CompactPiecewiseCubic { knots, .. } => Some((knots[0][0], knots[knots.len() - 1][0])),
            Heterogeneity::NamedExample { .. } => None,
        }
    }

    /// Values at -inf and +inf when they exist.
    pub fn asymptotes(&self) -> Option<(f64, f64)> {
        match self {
            Heterogeneity::Zero => Some((0.0, 0.0)),
            Heterogeneity::Constant { value } => Some((*value, *value)),
            Heterogeneity::GaussianSum { offset, .. } => Some((*offset, *offset)),
            Heterogeneity::CompactPiecewiseCubic { outside, .. } => Some((*outside, *outside)),
            Heterogeneity::NamedExample { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Heterogeneity::Zero => true,
            Heterogeneity::Constant { value } => *value == 0.0,
            Heterogeneity::GaussianSum { offset, terms } => *offset == 0.0 && terms.iter().all(|t| t.amplitude == 0.0),
            _ => false,
        }
    }

    /// Lower bound of `1 + f` sampled on `[a, b]` (plus asymptotes).
    pub fn inf_one_plus(&self, a: f64, b: f64) -> f64 {
        let n = 20_000;
        let mut m = f64::INFINITY;
        for i in 0..=n {
            m = m.min(1.0 + self.eval(a + (b - a) * i as f64 / n as f64));
        }
        if let Some((l, r)) = self.asymptotes() {
            m = m.min(1.0 + l).min(1.0 + r);
        }
        m
    }

    /// Checks `inf (1 + f) > 0` on `[a, b]`; logs a warning when violated.
    pub fn positivity_ok(&self, a: f64, b: f64) -> bool {
        let m = self.inf_one_plus(a, b);
        if m <= 0.0 {
            log::warn!("1 + f attains {m:.4} <= 0; sign results for background states do not apply");
        }
        m > 0.0
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} is not finite")))
    }
}

fn fig1_f2(x: f64) -> f64 {
    let g = |c: f64, k: f64| (-(k * (x - c)).powi(2)).exp();
    3.0 + 0.8
        * (g(50.0, 1.0) - g(80.0, 0.1) + g(120.0, 0.05) - g(200.0, 0.05)
            + 2.0 * g(240.0, 0.05) * (1.5 * x).cos()
            + 0.5 * ((0.04 * x).powi(2)).cos())
}

/// Modified Akima (makima) derivatives at the knots.
pub fn makima_slopes(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::Validation("makima needs at least three matching points".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("makima abscissae must increase".into()));
    }
    // secant slopes padded with two linear extrapolations per side: del[k+2] is the slope of interval k
    let m = n - 1;
    let mut del = vec![0.0; m + 4];
    for k in 0..m {
        del[k + 2] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    }
    del[1] = 2.0 * del[2] - del[3];
    del[0] = 2.0 * del[1] - del[2];
    del[m + 2] = 2.0 * del[m + 1] - del[m];
    del[m + 3] = 2.0 * del[m + 2] - del[m + 1];
    let w = |a: f64, b: f64| (b - a).abs() + 0.5 * (a + b).abs();
    Ok((0..n)
        .map(|i| {
            // intervals around node i: i-2, i-1 (left) and i, i+1 (right), shifted by 2
            let (dm2, dm1, d0, dp1) = (del[i], del[i + 1], del[i + 2], del[i + 3]);
            let w1 = w(d0, dp1);
            let w2 = w(dm2, dm1);
            if w1 + w2 == 0.0 {
                0.0
            } else {
                (w1 * dm1 + w2 * d0) / (w1 + w2)
            }
        })
        .collect())
}

/// Builds a compact piecewise cubic from samples using makima slopes.
pub fn makima(x: &[f64], y: &[f64], outside: f64) -> Result<Heterogeneity> {
    let d = makima_slopes(x, y)?;
    Ok(Heterogeneity::CompactPiecewiseCubic {
        knots: x.iter().zip(y).zip(&d).map(|((a, b), c)| [*a, *b, *c]).collect(),
        outside,
    })
}

fn gauss(terms: &[(f64, f64, f64)]) -> Heterogeneity {
    Heterogeneity::GaussianSum {
        offset: 0.0,
        terms: terms.iter().map(|&(amplitude, center, rate)| GaussianTerm { amplitude, center, rate }).collect(),
    }
}

/// The sampled profile used for the time-dependent-speed experiment.
pub fn ex0_profile(y: f64) -> f64 {
    (y - 3.0) * (1.0 + 14.0 * (y - 3.0).powi(3)).sin() * (-1.2 * (y - 3.0).abs()).exp()
}

/// `(f1, f2)` for the named experiments `fig1`, `ex0`..`ex3`.
pub fn build_example_heterogeneity(id: &str) -> Result<(Heterogeneity, Heterogeneity)> {
    match id {
        "fig1" => Ok((
            Heterogeneity::GaussianSum {
                offset: 4.0,
                terms: vec![GaussianTerm { amplitude: 1.0, center: 150.0, rate: 1.0 }],
            },
            Heterogeneity::NamedExample { id: FIG1_F2.into() },
        )),
        "ex0" => {
            let mut xs: Vec<f64> = (3..=9).map(f64::from).collect();
            let mut ys: Vec<f64> = xs.iter().map(|&y| ex0_profile(y)).collect();
            xs.push(10.0);
            ys.push(0.0);
            Ok((Heterogeneity::Zero, makima(&xs, &ys, 0.0)?))
        }
        "ex1" => Ok((
            Heterogeneity::Zero,
            gauss(&[(0.3, -0.1, 0.5), (0.33, -1.5, 2.0), (-0.53, -0.75, 2.0), (0.25, 0.1, 4.0), (-0.4, 1.0, 3.0)]),
        )),
        "ex2" => Ok((Heterogeneity::Zero, Heterogeneity::Zero)),
        "ex3" => Ok((Heterogeneity::Zero, gauss(&[(-12.0, -11.0, 40.0), (-12.0, 11.0, 40.0)]))),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_constant() {
        assert_eq!(Heterogeneity::Zero.eval(3.7), 0.0);
        assert_eq!(Heterogeneity::Constant { value: 2.5 }.eval(-1e3), 2.5);
    }

    #[test]
    fn ex1_at_origin_matches_hand_evaluation() {
        let (_, f2) = build_example_heterogeneity("ex1").unwrap();
        let hand = 0.3 * (-0.5f64 * 0.01).exp() + 0.33 * (-2.0f64 * 2.25).exp() - 0.53 * (-2.0f64 * 0.5625).exp()
            + 0.25 * (-4.0f64 * 0.01).exp()
            - 0.4 * (-3.0f64).exp();
        assert!((f2.eval(0.0) - hand).abs() < 1e-15);
        assert!((f2.eval(0.0) - 0.350386437356434).abs() < 1e-14);
    }

    #[test]
    fn ex3_pulse_depth() {
        let (_, f2) = build_example_heterogeneity("ex3").unwrap();
        assert!((f2.eval(11.0) + 12.0).abs() < 1e-12);
        assert!((f2.eval(-11.0) + 12.0).abs() < 1e-12);
        assert_eq!(f2.eval(0.0), 0.0);
    }

    #[test]
    fn ex0_endpoints_and_outside() {
        let (f1, f2) = build_example_heterogeneity("ex0").unwrap();
        assert!(f1.is_zero());
        assert_eq!(f2.eval(3.0), 0.0);
        assert_eq!(f2.eval(10.0), 0.0);
        assert_eq!(f2.eval(-5.0), 0.0);
        assert_eq!(f2.eval(12.0), 0.0);
        for y in 4..=9 {
            assert!((f2.eval(y as f64) - ex0_profile(y as f64)).abs() < 1e-14);
        }
    }

    #[test]
    fn ex2_is_homogeneous() {
        let (f1, f2) = build_example_heterogeneity("ex2").unwrap();
        assert!(f1.is_zero() && f2.is_zero());
    }

    #[test]
    fn unknown_example() {
        assert!(matches!(build_example_heterogeneity("ex9"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn outside_support_is_bit_identical() {
        let f = Heterogeneity::GaussianSum {
            offset: 0.7,
            terms: vec![GaussianTerm { amplitude: 3.0, center: 1.0, rate: 2.0 }],
        };
        let (a, b) = f.support().unwrap();
        assert_eq!(f.eval(a - 1e-9), 0.7);
        assert_eq!(f.eval(b + 5.0), 0.7);
        assert!((f.eval(b - 1e-9) - 0.7).abs() < 1e-17);
    }

    #[test]
    fn unordered_knots_rejected() {
        let f = Heterogeneity::CompactPiecewiseCubic { knots: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], outside: 0.0 };
        assert!(f.validate().is_err());
    }

    #[test]
    fn makima_reproduces_lines_and_is_c1() {
        let x = [0.0, 1.0, 2.5, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let d = makima_slopes(&x, &y).unwrap();
        assert!(d.iter().all(|s| (s - 2.0).abs() < 1e-14));
    }

    #[test]
    fn makima_flat_plateaus_stay_flat() {
        // equal neighbouring values give zero slope at the plateau node (no overshoot)
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let d = makima_slopes(&x, &y).unwrap();
        assert_eq!(d[1], 0.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn serde_roundtrip() {
        let (_, f2) = build_example_heterogeneity("ex1").unwrap();
        let s = serde_json::to_string(&f2).unwrap();
        assert!(s.contains("\"kind\":\"gaussian-sum\""));
        let back: Heterogeneity = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f2);
    }
}
