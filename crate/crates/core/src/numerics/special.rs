//! Scaled complementary error function.

/// `exp(y^2) erfc(y)`, accurate for all finite `y`.
pub fn erfcx(y: f64) -> f64 {
    if y < 25.0 {
        // erfc stays normal and exp(y^2) finite in this range
        (y * y).exp() * libm::erfc(y)
    } else {
        let r = 1.0 / (y * y);
        let series = 1.0 - 0.5 * r + 0.75 * r * r - 1.875 * r * r * r + 6.5625 * r * r * r * r;
        series / (y * std::f64::consts::PI.sqrt())
    }
}

/// `exp(a) erfc(b)` without intermediate overflow.
pub fn exp_erfc(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a - b * b).exp() * erfcx(b)
    } else {
        a.exp() * libm::erfc(b)
    }
}
