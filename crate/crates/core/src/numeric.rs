//! Small numerical helpers shared across modules.

use statrs::function::erf;

/// Trapezoidal integral of `y` sampled at `x` (any ordering of a monotone axis).
pub fn trapz(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

/// Linear interpolation on an ascending grid. Returns `None` outside the grid.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let n = xs.len();
    if n == 0 || x < xs[0] || x > xs[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let idx = match xs.partition_point(|&v| v <= x) {
        0 => 0,
        i if i >= n => n - 2,
        i => i - 1,
    };
    let (x0, x1) = (xs[idx], xs[idx + 1]);
    let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(ys[idx] + t * (ys[idx + 1] - ys[idx]))
}

/// Median of a slice (NaN-free input assumed).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation about the median (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

pub fn erf(x: f64) -> f64 {
    erf::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    erf::erfc(x)
}

/// Scaled complementary error function exp(x²)·erfc(x), stable for large x.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfcx(-x) = 2 exp(x²) - erfcx(x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 20.0 {
        (x * x).exp() * erf::erfc(x)
    } else {
        let inv2 = 1.0 / (x * x);
        let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2
            + 6.5625 * inv2 * inv2 * inv2 * inv2;
        series / (x * std::f64::consts::PI.sqrt())
    }
}
