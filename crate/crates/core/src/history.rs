//! Piecewise-linear front position paths with a constant-speed tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A committed point of the path; `slope` belongs to the segment ending here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub s: f64,
    pub z: f64,
    pub slope: f64,
}

/// Anything that yields `(z, dz/ds)` for times up to some horizon.
pub trait PathEval {
    fn eval(&self, s: f64) -> Result<(f64, f64)>;

    /// Times in `(lo, hi)` where the slope may jump.
    fn kinks(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Bound on `|z'|`.
    fn max_abs_slope(&self) -> f64;
}

/// `z(s)` on `(-inf, s_N]`: a linear tail for `s <= s_0` and linear segments after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontHistory {
    pub tail_speed: f64,
    breakpoints: Vec<Breakpoint>,
}

impl FrontHistory {
    /// Pure tail through `(s0, z0)` with speed `c`.
    pub fn constant_speed(z0: f64, c: f64, s0: f64) -> Self {
        Self { tail_speed: c, breakpoints: vec![Breakpoint { s: s0, z: z0, slope: c }] }
    }

    /// Builds from explicit breakpoints, checking order and continuity.
    pub fn from_parts(tail_speed: f64, breakpoints: Vec<Breakpoint>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::Validation("history needs a tail anchor".into()));
        }
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b.s > a.s) {
                return Err(Error::Validation("breakpoint times must increase".into()));
            }
            let expect = a.z + b.slope * (b.s - a.s);
            if (expect - b.z).abs() > 1e-12 * (1.0 + b.z.abs().max(a.z.abs())) {
                return Err(Error::Validation(format!("history discontinuous at s = {}", b.s)));
            }
        }
        Ok(Self { tail_speed, breakpoints })
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn tail_time(&self) -> f64 {
        self.breakpoints[0].s
    }

    pub fn tail_position(&self) -> f64 {
        self.breakpoints[0].z
    }

    pub fn last(&self) -> Breakpoint {
        *self.breakpoints.last().expect("nonempty")
    }

    /// Appends a segment of the given slope ending at `s`.
    pub fn push(&mut self, s: f64, slope: f64) -> Result<()> {
        let b = self.last();
        if !(s > b.s) {
            return Err(Error::Validation("new breakpoint must lie after the last one".into()));
        }
        self.breakpoints.push(Breakpoint { s, z: b.z + slope * (s - b.s), slope });
        Ok(())
    }

    /// Linear extension with slope `slope_N + a`, evaluated at `s >= s_N`.
    pub fn extend(&self, a: f64, s: f64) -> Result<(f64, f64)> {
        let b = self.last();
        if s < b.s {
            return Err(Error::ExtensionRange { s, s_last: b.s });
        }
        let sl = b.slope + a;
        Ok((b.z + sl * (s - b.s), sl))
    }

    /// The history together with its extension of slope `slope_N + a`.
    pub fn extended(&self, a: f64) -> Extended<'_> {
        Extended { base: self, slope: self.last().slope + a }
    }

    /// Breakpoint times that fall in `(lo, hi)`.
    pub fn breaks_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        let start = self.breakpoints.partition_point(|b| b.s <= lo);
        self.breakpoints[start..].iter().map(|b| b.s).take_while(move |&s| s < hi)
    }

    pub fn max_abs_slope(&self) -> f64 {
        self.breakpoints.iter().fold(self.tail_speed.abs(), |m, b| m.max(b.slope.abs()))
    }

    /// Evaluation assuming `s <= s_N`.
    fn eval_inner(&self, s: f64) -> (f64, f64) {
        let bp = &self.breakpoints;
        let b0 = bp[0];
        if s <= b0.s {
            return (b0.z + self.tail_speed * (s - b0.s), self.tail_speed);
        }
        // first breakpoint with time >= s; its slope is the left limit there
        let k = bp.partition_point(|b| b.s < s).min(bp.len() - 1);
        let b = bp[k];
        (b.z + b.slope * (s - b.s), b.slope)
    }
}

impl PathEval for FrontHistory {
    fn eval(&self, s: f64) -> Result<(f64, f64)> {
        let last = self.last().s;
        if s > last {
            return Err(Error::HistoryRange { s, s_last: last });
        }
        Ok(self.eval_inner(s))
    }

    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.breaks_in(lo, hi).collect()
    }

    fn max_abs_slope(&self) -> f64 {
        FrontHistory::max_abs_slope(self)
    }
}

/// A history continued linearly past its last breakpoint.
#[derive(Debug, Clone, Copy)]
pub struct Extended<'a> {
    pub base: &'a FrontHistory,
    pub slope: f64,
}

impl PathEval for Extended<'_> {
    fn eval(&self, s: f64) -> Result<(f64, f64)> {
        let b = self.base.last();
        if s <= b.s {
            Ok(self.base.eval_inner(s))
        } else {
            Ok((b.z + self.slope * (s - b.s), self.slope))
        }
    }

    fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.base.breaks_in(lo, hi).collect()
    }

    fn max_abs_slope(&self) -> f64 {
        self.base.max_abs_slope().max(self.slope.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_tail() {
        let h = FrontHistory::constant_speed(1.0, 0.5, 2.0);
        assert_eq!(h.eval(-3.0).unwrap(), (1.0 - 2.5, 0.5));
    }

    #[test]
    fn left_limit_at_breakpoints() {
        let mut h = FrontHistory::constant_speed(0.0, 1.0, 0.0);
        h.push(1.0, 2.0).unwrap();
        h.push(2.0, -1.0).unwrap();
        assert_eq!(h.eval(1.0).unwrap(), (2.0, 2.0));
        assert_eq!(h.eval(2.0).unwrap(), (1.0, -1.0));
        assert_eq!(h.eval(0.0).unwrap(), (0.0, 1.0));
        let (z, d) = h.eval(1.5).unwrap();
        assert!((z - 1.5).abs() < 1e-15 && d == -1.0);
    }

    #[test]
    fn beyond_last_is_error() {
        let h = FrontHistory::constant_speed(0.0, 1.0, 0.0);
        assert!(h.eval(0.1).is_err());
        assert!(h.extend(0.0, -0.1).is_err());
    }

    #[test]
    fn extension_formulas() {
        let mut h = FrontHistory::constant_speed(0.0, 0.3, 0.0);
        h.push(1.0, 0.7).unwrap();
        assert_eq!(h.extend(0.0, 1.0).unwrap(), (0.7, 0.7));
        let (z, d) = h.extend(1.0, 3.0).unwrap();
        assert!((z - (0.7 + 1.7 * 2.0)).abs() < 1e-15 && d == 1.7);
        assert_eq!(h.extend(-0.7, 9.0).unwrap().0, 0.7);
    }

    #[test]
    fn from_parts_checks_continuity() {
        let ok = vec![Breakpoint { s: 0.0, z: 0.0, slope: 1.0 }, Breakpoint { s: 1.0, z: 2.0, slope: 2.0 }];
        assert!(FrontHistory::from_parts(1.0, ok).is_ok());
        let bad = vec![Breakpoint { s: 0.0, z: 0.0, slope: 1.0 }, Breakpoint { s: 1.0, z: 2.1, slope: 2.0 }];
        assert!(FrontHistory::from_parts(1.0, bad).is_err());
    }

    proptest! {
        #[test]
        fn continuous_across_breakpoints(slopes in prop::collection::vec(-3.0f64..3.0, 1..12), tail in -2.0f64..2.0) {
            let mut h = FrontHistory::constant_speed(0.3, tail, 0.0);
            for (i, s) in slopes.iter().enumerate() {
                h.push(0.25 * (i + 1) as f64, *s).unwrap();
            }
            for b in h.breakpoints().to_vec() {
                for d in [1e-6, 1e-9] {
                    let lo = h.eval(b.s - d).unwrap().0;
                    let hi = h.extended(0.0).eval(b.s + d).unwrap().0;
                    prop_assert!((lo - b.z).abs() <= 4.0 * d);
                    prop_assert!((hi - b.z).abs() <= 4.0 * d);
                }
            }
            for a in [-1.0, 0.0, 2.5] {
                prop_assert_eq!(h.extend(a, h.last().s).unwrap().0, h.eval(h.last().s).unwrap().0);
            }
        }
    }
}
