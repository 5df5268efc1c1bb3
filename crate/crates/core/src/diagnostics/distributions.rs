//! Tail probabilities used by the diagnostic tests.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail P(F > f) of the F(d1, d2) distribution.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    match FisherSnedecor::new(d1, d2) {
        Ok(dist) => dist.sf(f).clamp(0.0, 1.0),
        Err(_) => f64::NAN,
    }
}

/// Upper tail of the limiting Kolmogorov distribution,
/// `Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_upper_tail(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small λ
        let c = PI * PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..100 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < 1e-17 * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // reference values of the limiting distribution's survival function
        let table = [
            (0.3, 0.9999906941986655),
            (0.5, 0.9639452436648751),
            (0.8, 0.5441424115741981),
            (1.0, 0.26999967167735456),
            (1.17, 0.12939004218561884),
            (1.19, 0.11774229287977166),
            (1.36, 0.049485876755377876),
            (1.5, 0.022217962616525127),
            (2.0, 0.0006709252557796953),
            (3.0, 3.045995948942526e-08),
        ];
        for (l, q) in table {
            let got = kolmogorov_upper_tail(l);
            assert!((got - q).abs() < 1e-8, "Q({l}) = {got}, expected {q}");
        }
        assert_eq!(kolmogorov_upper_tail(0.0), 1.0);
    }

    #[test]
    fn kolmogorov_branches_agree_at_switch() {
        let below = kolmogorov_upper_tail(1.18 - 1e-12);
        let above = kolmogorov_upper_tail(1.18);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn f_tail_reference_values() {
        let table = [
            (2.5, 3.0, 20.0, 0.0888437519376892),
            (0.7, 1.0, 5.0, 0.44092462406977073),
            (10.0, 2.0, 100.0, 0.00010988481911717253),
        ];
        for (f, d1, d2, p) in table {
            let got = f_upper_tail(f, d1, d2);
            assert!((got - p).abs() < 1e-8, "{got} vs {p}");
        }
        assert_eq!(f_upper_tail(0.0, 2.0, 10.0), 1.0);
        assert_eq!(f_upper_tail(f64::INFINITY, 2.0, 10.0), 0.0);
    }

    #[test]
    fn f_tail_monotone_in_statistic() {
        for (d1, d2) in [(1.0, 10.0), (3.0, 50.0), (5.0, 200.0)] {
            let mut prev = 1.0;
            for i in 1..400 {
                let p = f_upper_tail(i as f64 * 0.05, d1, d2);
                assert!(p <= prev, "F tail increased at {} for ({d1}, {d2})", i as f64 * 0.05);
                prev = p;
            }
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // statrs erfc is good to ~1e-11 here, well inside the 1e-8 contract
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-10);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-10);
    }
}
