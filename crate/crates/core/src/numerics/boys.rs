use std::f64::consts::PI;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Error function. Uses the positive-term series
/// `erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!` for `|x| < 3` and the
/// Laplace continued fraction for `erfc` beyond.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let value = if ax < 3.0 {
        erf_series(ax)
    } else {
        1.0 - erfc_continued_fraction(ax)
    };
    value.copysign(x)
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x ≥ 3` via modified Lentz evaluation of
/// `e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Boys function of order zero, `F₀(t) = ∫₀¹ exp(−t u²) du`.
pub fn boys_f0(t: f64) -> f64 {
    debug_assert!(t >= 0.0, "boys_f0 is defined for t >= 0");
    if t <= 1e-6 {
        // Σ (−t)^k / (k! (2k+1)), six terms
        let mut sum = 0.0;
        let mut power = 1.0;
        let mut factorial = 1.0;
        for k in 0..6 {
            if k > 0 {
                power *= -t;
                factorial *= k as f64;
            }
            sum += power / (factorial * (2 * k + 1) as f64);
        }
        sum
    } else {
        let s = t.sqrt();
        0.5 * (PI / t).sqrt() * erf(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::adaptive_simpson;

    #[test]
    fn zero_argument() {
        assert_eq!(boys_f0(0.0), 1.0);
    }

    #[test]
    fn large_argument_asymptote() {
        let t = 40.0;
        let asym = 0.5 * (PI / t).sqrt();
        assert!(((boys_f0(t) - asym) / asym).abs() < 1e-10);
    }

    #[test]
    fn matches_quadrature() {
        for &t in &[1.0, 1e-7, 1e-5, 0.3, 2.5, 8.9, 9.1, 17.0, 60.0] {
            let q = adaptive_simpson(&|u: f64| (-t * u * u).exp(), 0.0, 1.0, 1e-16);
            let f = boys_f0(t);
            assert!(((f - q) / q).abs() < 1e-12, "t={t}: {f} vs {q}");
        }
    }

    #[test]
    fn erf_reference_values() {
        // erf(1), erf(0.5), erf(3.5) from standard tables
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(3.5) - 0.999_999_256_901_627_7).abs() < 1e-15);
        assert!((erf(-1.0) + erf(1.0)).abs() < 1e-16);
        // continuity at the split point
        assert!((erf(3.0 - 1e-12) - erf(3.0)).abs() < 1e-14);
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = boys_f0(0.0);
        let mut t = 1e-9;
        while t < 200.0 {
            let f = boys_f0(t);
            assert!(f > 0.0 && f <= 1.0);
            assert!(f <= prev, "not monotone at t={t}");
            prev = f;
            t *= 1.07;
        }
    }
}
