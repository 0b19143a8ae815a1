//! Position time series and their CSV/JSON encoding.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: f64,
    pub z: f64,
    pub dz_ds: f64,
}

/// Provenance of a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub solver: String,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    /// Parameters and solver settings as given to the run.
    pub settings: serde_json::Value,
    /// Solver statistics and flags.
    pub stats: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(solver: &str) -> Self {
        Self { samples: Vec::new(), meta: TrajectoryMeta { solver: solver.into(), ..Default::default() } }
    }

    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, s: f64, z: f64, dz_ds: f64) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s > last.s) {
                return Err(Error::Validation(format!("trajectory time {s} not after {}", last.s)));
            }
        }
        self.samples.push(Sample { s, z, dz_ds });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn s(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.s).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.z).collect()
    }

    pub fn last(&self) -> Option<Sample> {
        self.samples.last().copied()
    }

    /// Linear interpolation of `(z, dz_ds)` at time `s` inside the sampled range.
    pub fn at(&self, s: f64) -> Option<(f64, f64)> {
        let p = &self.samples;
        if p.is_empty() || s < p[0].s || s > p[p.len() - 1].s {
            return None;
        }
        let k = p.partition_point(|q| q.s < s);
        if k == 0 {
            return Some((p[0].z, p[0].dz_ds));
        }
        let (a, b) = (p[k - 1], p[k]);
        let t = (s - a.s) / (b.s - a.s);
        Some((a.z + t * (b.z - a.z), a.dz_ds + t * (b.dz_ds - a.dz_ds)))
    }

    /// First time the position crosses `z_star`, by linear interpolation.
    pub fn crossing_time(&self, z_star: f64) -> Option<f64> {
        let p = &self.samples;
        if p.first().map(|q| q.z == z_star).unwrap_or(false) {
            return Some(p[0].s);
        }
        p.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let (da, db) = (a.z - z_star, b.z - z_star);
            if db == 0.0 {
                Some(b.s)
            } else if da * db < 0.0 {
                Some(a.s + (b.s - a.s) * da / (da - db))
            } else {
                None
            }
        })
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "s,z,dz_ds")?;
        for p in &self.samples {
            writeln!(w, "{},{},{}", fmt_g15(p.s), fmt_g15(p.z), fmt_g15(p.dz_ds))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let meta_path = csv_path.with_extension("json");
        std::fs::write(meta_path, serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut t = Trajectory::new("file");
        for (i, line) in f.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Validation(format!("{}: line {} has {} columns", path.display(), i + 1, cols.len())));
            }
            let num = |c: &str| c.trim().parse::<f64>().map_err(|e| Error::Validation(format!("line {}: {e}", i + 1)));
            t.push(num(cols[0])?, num(cols[1])?, num(cols[2])?)?;
        }
        Ok(t)
    }
}

/// Formats with 15 significant digits, like C's `%.15g`.
pub fn fmt_g15(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.14e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Writes `x,U,V` profile rows.
pub fn write_profile_csv(path: &Path, xs: &[f64], u: &[f64], v: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,U,V")?;
    for i in 0..xs.len() {
        writeln!(f, "{},{},{}", fmt_g15(xs[i]), fmt_g15(u[i]), fmt_g15(v[i]))?;
    }
    f.flush()?;
    Ok(())
}
