//! Explicit adaptive Runge-Kutta (Dormand-Prince 5(4)) for small non-stiff systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h0: 1e-3, h_max: 0.5, max_steps: 1_000_000 }
    }
}

/// Returned by observers after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// One Dormand-Prince step: (5th-order solution, embedded error vector).
pub fn dopri_step<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N]) {
    let k1 = f(t, y);
    let k2 = f(t + h / 5.0, &axpy(y, &[(h / 5.0, &k1)]));
    let k3 = f(t + 0.3 * h, &axpy(y, &[(h * 3.0 / 40.0, &k1), (h * 9.0 / 40.0, &k2)]));
    let k4 = f(
        t + 0.8 * h,
        &axpy(y, &[(h * 44.0 / 45.0, &k1), (-h * 56.0 / 15.0, &k2), (h * 32.0 / 9.0, &k3)]),
    );
    let k5 = f(
        t + h * 8.0 / 9.0,
        &axpy(
            y,
            &[
                (h * 19372.0 / 6561.0, &k1),
                (-h * 25360.0 / 2187.0, &k2),
                (h * 64448.0 / 6561.0, &k3),
                (-h * 212.0 / 729.0, &k4),
            ],
        ),
    );
    let k6 = f(
        t + h,
        &axpy(
            y,
            &[
                (h * 9017.0 / 3168.0, &k1),
                (-h * 355.0 / 33.0, &k2),
                (h * 46732.0 / 5247.0, &k3),
                (h * 49.0 / 176.0, &k4),
                (-h * 5103.0 / 18656.0, &k5),
            ],
        ),
    );
    let y5 = axpy(
        y,
        &[
            (h * 35.0 / 384.0, &k1),
            (h * 500.0 / 1113.0, &k3),
            (h * 125.0 / 192.0, &k4),
            (-h * 2187.0 / 6784.0, &k5),
            (h * 11.0 / 84.0, &k6),
        ],
    );
    let k7 = f(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h
            * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i] + 71.0 / 1920.0 * k4[i] - 17253.0 / 339200.0 * k5[i]
                + 22.0 / 525.0 * k6[i]
                - 1.0 / 40.0 * k7[i]);
    }
    (y5, err)
}

/// Integrates from `t0` toward `t_end` (either direction). The observer sees
/// `(t_prev, y_prev, t, y)` after every accepted step and may stop early.
pub fn integrate<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &RkOptions,
    observer: &mut impl FnMut(f64, &[f64; N], f64, &[f64; N]) -> Control,
) -> Result<(f64, [f64; N])> {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h0.min(opts.h_max).min((t_end - t0).abs()).max(1e-14);
    for _ in 0..opts.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok((t, y));
        }
        h = h.min((t_end - t).abs());
        let (yn, err) = dopri_step(f, t, &y, dir * h);
        let mut en = 0.0f64;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs().max(yn[i].abs());
            en = en.max((err[i] / sc).abs());
        }
        if !en.is_finite() {
            h *= 0.25;
            if h < 1e-14 {
                return Err(Error::Solver("non-finite state in explicit integration".into()));
            }
            continue;
        }
        if en <= 1.0 {
            let tn = t + dir * h;
            let ctl = observer(t, &y, tn, &yn);
            t = tn;
            y = yn;
            if ctl == Control::Stop {
                return Ok((t, y));
            }
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
        if h < 1e-13 {
            return Err(Error::Solver(format!("step size underflow at t = {t}")));
        }
    }
    Err(Error::Solver("too many explicit steps".into()))
}

/// Locates `g(y(t)) = 0` inside an accepted step by re-stepping from its start.
pub fn locate_event<const N: usize>(
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    t_next: f64,
    g: impl Fn(&[f64; N]) -> f64,
) -> (f64, [f64; N]) {
    let (mut lo, mut hi) = (0.0f64, t_next - t);
    let (mut glo, mut ghi) = (g(y), g(&dopri_step(f, t, y, hi).0));
    let mut best = (t_next, dopri_step(f, t, y, hi).0);
    for it in 0..60 {
        // Illinois-flavoured regula falsi with bisection fallback
        let mut m = if it % 3 == 2 { 0.5 * (lo + hi) } else { lo - glo * (hi - lo) / (ghi - glo) };
        if !(m > lo.min(hi) && m < lo.max(hi)) {
            m = 0.5 * (lo + hi);
        }
        let ym = dopri_step(f, t, y, m).0;
        let gm = g(&ym);
        best = (t + m, ym);
        if gm == 0.0 || (hi - lo).abs() < 1e-14 * (1.0 + t.abs()) {
            break;
        }
        if gm.signum() == glo.signum() {
            lo = m;
            glo = gm;
        } else {
            hi = m;
            ghi = gm;
        }
        if gm.abs() < 1e-15 {
            break;
        }
    }
    best
}
