//! First-order Bessel function of the first kind.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 12.0;

/// J₁(x) for real x.
pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x <= SERIES_LIMIT {
        let half = 0.5 * x;
        half * j1_series(half * half)
    } else {
        j1_asymptotic(x)
    }
}

/// J₁(2√y)/√y, an entire function of y equal to 1 at y = 0.
///
/// The coherent single-line response is ξ²·g(ξt/τ₀)², so evaluating g
/// directly avoids the removable singularity of (ξ/T)·J₁²(2√(ξT)) at T = 0.
pub fn j1_ratio(y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    if y < 1e-8 {
        // 1 - y/2 + y²/12
        return 1.0 - 0.5 * y + y * y / 12.0;
    }
    let x = 2.0 * y.sqrt();
    if x <= SERIES_LIMIT {
        j1_series(y)
    } else {
        bessel_j1(x) / y.sqrt()
    }
}

/// Σ_k (−q)^k / (k! (k+1)!)
fn j1_series(q: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        let k = k as f64;
        term *= -q / ((k + 1.0) * (k + 2.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Hankel expansion, valid for large x.
fn j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kk = (2 * k - 1) as f64;
        term *= (mu - kk * kk) / (k as f64 * z);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // odd k feed Q, even k feed P, with alternating signs
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// J₁(x) = (1/π) ∫₀^π cos(τ − x sin τ) dτ, composite Simpson.
    fn j1_quadrature(x: f64) -> f64 {
        let n = 20_000;
        let h = PI / n as f64;
        let f = |t: f64| (t - x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn matches_integral_representation() {
        for &x in &[0.0, 1e-3, 0.1, 0.5, 1.0, 2.0, 3.8, 5.0, 8.0, 11.9, 12.1, 15.0, 25.0, 40.0] {
            let a = bessel_j1(x);
            let b = j1_quadrature(x);
            assert!((a - b).abs() < 1e-11, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn first_zero() {
        assert!(bessel_j1(3.831_705_970_207_512_3).abs() < 1e-14);
    }

    #[test]
    fn ratio_is_continuous_at_origin_and_switchover() {
        assert_eq!(j1_ratio(0.0), 1.0);
        for &y in &[1e-9, 1e-6, 1e-3, 0.5, 2.0, 35.9, 36.1, 100.0] {
            let direct = bessel_j1(2.0 * f64::sqrt(y)) / y.sqrt();
            assert!((j1_ratio(y) - direct).abs() < 1e-12, "y={y}");
        }
    }
}
