//! Adaptive quadrature.

use crate::error::{Error, Result};

/// Adaptive Simpson for a pair of integrands sharing evaluations.
pub fn simpson2(f: &mut impl FnMut(f64) -> [f64; 2], a: f64, b: f64, tol: f64) -> [f64; 2] {
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson_rule(a, b, fa, fm, fb);
    simpson2_rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn simpson_rule(a: f64, b: f64, fa: [f64; 2], fm: [f64; 2], fb: [f64; 2]) -> [f64; 2] {
    let h = (b - a) / 6.0;
    [h * (fa[0] + 4.0 * fm[0] + fb[0]), h * (fa[1] + 4.0 * fm[1] + fb[1])]
}

#[allow(clippy::too_many_arguments)]
fn simpson2_rec(
    f: &mut impl FnMut(f64) -> [f64; 2],
    a: f64,
    b: f64,
    fa: [f64; 2],
    fm: [f64; 2],
    fb: [f64; 2],
    whole: [f64; 2],
    tol: f64,
    depth: u32,
) -> [f64; 2] {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson_rule(a, m, fa, flm, fm);
    let right = simpson_rule(m, b, fm, frm, fb);
    let d0 = left[0] + right[0] - whole[0];
    let d1 = left[1] + right[1] - whole[1];
    if depth == 0 || (d0.abs() <= 15.0 * tol && d1.abs() <= 15.0 * tol) {
        return [left[0] + right[0] + d0 / 15.0, left[1] + right[1] + d1 / 15.0];
    }
    let l = simpson2_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let r = simpson2_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    [l[0] + r[0], l[1] + r[1]]
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7/15 panel: (kronrod value, error estimate).
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive Gauss-Kronrod integration over the panels given by `edges`.
pub fn integrate(
    f: &mut impl FnMut(f64) -> f64,
    edges: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(edges.len() * 2);
    for w in edges.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(f, w[0], w[1]);
            panels.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if panels.len() >= max_panels {
            return Err(Error::Quadrature { estimate: total, error: err });
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bk, be), (i, p)| if p.3 > be { (i, p.3) } else { (bk, be) });
        let (a, b, _, _) = panels[k];
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Err(Error::Quadrature { estimate: total, error: err });
        }
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        panels[k] = (a, m, v1, e1);
        panels.push((m, b, v2, e2));
    }
}
