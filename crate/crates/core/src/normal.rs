//! Standard normal helpers with tail-safe log forms.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn pdf(x: f64) -> f64 {
    log_pdf(x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 - cdf(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `ln cdf(x)`, finite for any finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return cdf(x).ln();
    }
    // Mills-ratio asymptotic series for the far lower tail.
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    log_pdf(x) - (-x).ln() + series.ln()
}

pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the more accurate cdf
    let step = if p < 0.5 { (cdf(x) - p) / pdf(x) } else { (p - 1.0 + sf(x)) / pdf(x) };
    if step.is_finite() { x - step } else { x }
}

/// `ln(cdf(b) - cdf(a))` for `a < b`.
pub fn log_interval_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    if a > 0.0 {
        // Mirror into the lower tail where cdf keeps relative precision.
        return log_interval_mass(-b, -a);
    }
    let lb = log_cdf(b);
    let la = log_cdf(a);
    lb + (-(la - lb).exp()).ln_1p()
}

/// Quantile `p` of a standard normal truncated to `[a, b]`.
pub fn truncated_quantile(a: f64, b: f64, p: f64) -> f64 {
    debug_assert!(a < b);
    let x = if a > 0.0 {
        -truncated_quantile(-b, -a, 1.0 - p)
    } else {
        let lo = cdf(a);
        let hi = cdf(b);
        if hi - lo > 1e-300 && lo + p * (hi - lo) > 0.0 {
            quantile(lo + p * (hi - lo))
        } else {
            // Interval lies so deep in the lower tail that cdf underflows.
            // There the density is close to exp(|b|·(x - b)) on [a, b].
            let rate = -b;
            let floor = (-rate * (b - a)).exp();
            let q = floor + p * (1.0 - floor);
            b + q.ln() / rate
        }
    };
    x.clamp(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        assert!((sf(5.0) - 2.866_515_718_791_939e-7).abs() < 1e-19);
    }

    #[test]
    fn log_cdf_is_continuous_across_switch() {
        let inner = cdf(-19.999_999).ln();
        let outer = log_cdf(-20.000_001);
        assert!((inner - outer).abs() < 1e-4);
        assert!(log_cdf(-1e4).is_finite());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-12, 1e-3, 0.2, 0.5, 0.9, 0.999] {
            assert!((cdf(quantile(p)) - p).abs() / p < 1e-9, "{p}");
        }
    }

    #[test]
    fn interval_mass_tails() {
        let m = log_interval_mass(-1.0, 1.0).exp();
        assert!((m - 0.682_689_492_137_086).abs() < 1e-12);
        // symmetric forms agree
        assert!((log_interval_mass(3.0, 4.0) - log_interval_mass(-4.0, -3.0)).abs() < 1e-12);
        assert!(log_interval_mass(40.0, 41.0).is_finite());
    }

    #[test]
    fn truncated_quantile_stays_in_bounds() {
        for &(a, b) in &[(-1.0, 1.0), (3.0, 3.5), (-60.0, -59.0), (45.0, 50.0)] {
            for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let x = truncated_quantile(a, b, p);
                assert!((a..=b).contains(&x), "{a} {b} {p} -> {x}");
            }
        }
        assert!(truncated_quantile(-1.0, 1.0, 0.5).abs() < 1e-12);
    }
}
