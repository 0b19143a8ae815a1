//! Uniform grids and sampled profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `x_min + i*dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl UniformGrid {
    /// Grid covering `[x_min, x_max]` with spacing at most `dx_max`.
    pub fn covering(x_min: f64, x_max: f64, dx_max: f64) -> Result<Self> {
        if !(x_max > x_min) || !(dx_max > 0.0) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Validation(format!(
                "bad grid [{x_min}, {x_max}] with dx {dx_max}"
            )));
        }
        let cells = ((x_max - x_min) / dx_max - 1e-9).ceil().max(1.0) as usize;
        Ok(Self { x_min, dx: (x_max - x_min) / cells as f64, n: cells + 1 })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridProfile {
        GridProfile { x_min: self.x_min, dx: self.dx, values: (0..self.n).map(|i| f(self.x(i))).collect() }
    }
}

/// Samples of a scalar function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl GridProfile {
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(dx > 0.0) {
            return Err(Error::Validation("profile needs values and dx > 0".into()));
        }
        Ok(Self { x_min, dx, values })
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid { x_min: self.x_min, dx: self.dx, n: self.values.len() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Cell index and local coordinate in [0, 1]; clamps to the grid.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.values.len();
        if n == 1 {
            return (0, 0.0);
        }
        let r = (x - self.x_min) / self.dx;
        if r <= 0.0 {
            return (0, 0.0);
        }
        let i = (r.floor() as usize).min(n - 2);
        (i, (r - i as f64).min(1.0))
    }

    /// Linear interpolation, constant extrapolation.
    pub fn interp(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        if self.values.len() == 1 {
            return self.values[0];
        }
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cubic Hermite interpolation from nodal values and derivatives.
pub fn hermite(values: &GridProfile, slopes: &GridProfile, x: f64) -> f64 {
    let (i, t) = values.locate(x);
    if values.values.len() == 1 {
        return values.values[0];
    }
    let h = values.dx;
    let (y0, y1) = (values.values[i], values.values[i + 1]);
    let (d0, d1) = (slopes.values[i] * h, slopes.values[i + 1] * h);
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
}

/// Derivative of [`hermite`].
pub fn hermite_deriv(values: &GridProfile, slopes: &GridProfile, x: f64) -> f64 {
    let (i, t) = values.locate(x);
    if values.values.len() == 1 {
        return slopes.values[0];
    }
    let h = values.dx;
    let (y0, y1) = (values.values[i], values.values[i + 1]);
    let (d0, d1) = (slopes.values[i] * h, slopes.values[i + 1] * h);
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * y0 + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (-6.0 * t2 + 6.0 * t) * y1 + (3.0 * t2 - 2.0 * t) * d1) / h
}

/// Catmull-Rom style cubic interpolation on uniform samples (used for grid shifts).
pub fn cubic_interp(p: &GridProfile, x: f64) -> f64 {
    let n = p.values.len();
    if n < 4 {
        return p.interp(x);
    }
    let (i, t) = p.locate(x);
    let v = &p.values;
    let im1 = i.saturating_sub(1);
    let ip2 = (i + 2).min(n - 1);
    let (y0, y1, y2, y3) = (v[im1], v[i], v[i + 1], v[ip2]);
    // Lagrange weights on nodes -1, 0, 1, 2; one-sided at the ends collapses gracefully.
    if i == 0 || i + 2 >= n {
        return y1 * (1.0 - t) + y2 * t;
    }
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_grid_hits_endpoints() {
        let g = UniformGrid::covering(-1.0, 2.0, 0.07).unwrap();
        assert!((g.x_max() - 2.0).abs() < 1e-12);
        assert!(g.dx <= 0.07);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let g = UniformGrid::covering(0.0, 1.0, 0.25).unwrap();
        let f = |x: f64| x * x * x - 2.0 * x + 0.5;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let (v, d) = (g.sample(f), g.sample(df));
        for &x in &[0.1, 0.33, 0.5, 0.91] {
            assert!((hermite(&v, &d, x) - f(x)).abs() < 1e-13);
            assert!((hermite_deriv(&v, &d, x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_interp_exact_on_cubic_interior() {
        let g = UniformGrid::covering(0.0, 2.0, 0.1).unwrap();
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0;
        let p = g.sample(f);
        assert!((cubic_interp(&p, 0.73) - f(0.73)).abs() < 1e-12);
    }
}
