/// Bernoulli function `B(t) = t / (eᵗ − 1)`, with `B(0) = 1`.
///
/// Uses a Taylor series for `|t| < 1e-3` and `expm1` elsewhere; for large
/// positive `t` the value underflows gracefully to zero, for large negative
/// `t` it approaches `|t|`.
pub fn bernoulli(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let t2 = t * t;
        1.0 - 0.5 * t + t2 / 12.0 * (1.0 - t2 / 60.0 * (1.0 - t2 / 42.0))
    } else if t > 700.0 {
        t * (-t).exp()
    } else {
        t / t.exp_m1()
    }
}

/// Inverse of the edge mean of `eˢ` where `s` varies linearly from `a` to
/// `b`: `(b − a) / (eᵇ − eᵃ) = e^{−a} B(b − a)`.
pub fn edge_harmonic_average(a: f64, b: f64) -> f64 {
    (-a).exp() * bernoulli(b - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(0.0), 1.0);
        let e = std::f64::consts::E;
        assert!((bernoulli(1.0) - 1.0 / (e - 1.0)).abs() < 1e-15);
        assert!((bernoulli(1.0) - 0.581_976_706_869_326_4).abs() < 1e-15);
        assert!(bernoulli(800.0) >= 0.0);
        assert!((bernoulli(-800.0) - 800.0).abs() < 1e-12);
    }

    #[test]
    fn series_branch_matches_direct_formula() {
        // Near the switch point both branches must agree closely.
        for &t in &[9.99e-4, -9.99e-4, 5e-4, -2e-4] {
            let series = bernoulli(t);
            let direct = t / t.exp_m1();
            assert!((series - direct).abs() <= 2e-15, "{t}: {series} vs {direct}");
        }
    }

    #[test]
    fn bernoulli_reflection_identity() {
        for &t in &[1e-8, 1.0, 50.0] {
            let lhs = bernoulli(-t) - bernoulli(t);
            let scale = bernoulli(-t).abs().max(t);
            assert!((lhs - t).abs() <= 1e-12 * scale, "{t}");
        }
    }

    #[test]
    fn bernoulli_is_positive_and_decreasing() {
        let mut prev = f64::INFINITY;
        let mut t = -60.0;
        while t < 60.0 {
            let b = bernoulli(t);
            assert!(b > 0.0);
            assert!(b < prev, "not decreasing at {t}");
            prev = b;
            t += 0.01;
        }
    }

    #[test]
    fn harmonic_average_values() {
        assert_eq!(edge_harmonic_average(0.0, 0.0), 1.0);
        assert!((edge_harmonic_average(0.7, 0.7) - (-0.7f64).exp()).abs() < 1e-15);
        for &(a, b) in &[(0.0, 1.0), (-2.0, 3.0), (1e-6, 2e-6)] {
            let x = edge_harmonic_average(a, b);
            let y = edge_harmonic_average(b, a);
            assert!((x - y).abs() <= 1e-14 * x);
            let flux = x * b.exp() - x * a.exp();
            assert!((flux - (b - a)).abs() <= 1e-13 * (b - a).abs().max(1e-300) + 1e-15);
        }
    }
}
