//! Closed-form expectations and bounds: the three-token product formula, the
//! worst-case quadratic bound, per-stage random-walk bounds, and the expected
//! token-count curves for the all-tokens start.

use std::f64::consts::PI;

use num::bigint::BigInt;
use num::rational::BigRational;

use crate::{Error, Result};

/// Expected stabilization time of a three-token ring with gaps a, b, c:
/// a·b·c / (D·(a+b+c)).
pub fn triangle_formula(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("D", d)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(a * b * c / (d * (a + b + c)))
}

/// Exact-fraction form of the same product formula.
pub fn triangle_formula_rational(a: u64, b: u64, c: u64, d: &BigRational) -> Result<BigRational> {
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::InvalidInput("gap lengths must be at least 1".into()));
    }
    if !(d > &BigRational::from_integer(BigInt::from(0))) {
        return Err(Error::InvalidInput(
            "diffusion constant must be positive".into(),
        ));
    }
    let abc = BigRational::from_integer(BigInt::from(a) * BigInt::from(b) * BigInt::from(c));
    let n = BigRational::from_integer(BigInt::from(a + b + c));
    Ok(abc / (d * n))
}

/// Quadratic worst-case bound over all starting configurations:
/// (pi^2/8 - 29/27) * n^2 / D, about 0.6385 n^2 at r = 1/2.
pub fn worst_case_bound(n: usize, d: f64) -> f64 {
    assert!(n >= 3 && n % 2 == 1, "ring size must be odd and at least 3");
    assert!(d > 0.0, "diffusion constant must be positive");
    (PI * PI / 8.0 - 29.0 / 27.0) * (n * n) as f64 / d
}

/// Expected time for the minimal token distance to hit zero while at most
/// m tokens remain: floor(n/m)(floor(n/m)+1)/(2D).
pub fn stage_bound_tau(n: usize, m: usize, d: f64) -> f64 {
    assert!(
        m >= 3 && m % 2 == 1,
        "stage index must be odd and at least 3"
    );
    assert!(d > 0.0, "diffusion constant must be positive");
    let q = (n / m) as f64;
    q * (q + 1.0) / (2.0 * d)
}

/// Sum of the per-stage bounds over odd stages 3..=m_max; an upper bound on
/// the expected stabilization time from any start with at most m_max tokens.
pub fn cumulative_stage_bound(n: usize, m_max: usize, d: f64) -> f64 {
    let mut total = 0.0;
    let mut m = 3;
    while m <= m_max {
        total += stage_bound_tau(n, m, d);
        m += 2;
    }
    total
}

/// Limit of the per-stage sum when each stage is relaxed to n^2/(m^2 D):
/// (pi^2/8 - 1) n^2 / D, about 0.93 n^2 at r = 1/2.
pub fn cumulative_stage_limit(n: usize, d: f64) -> f64 {
    assert!(d > 0.0, "diffusion constant must be positive");
    (PI * PI / 8.0 - 1.0) * (n * n) as f64 / d
}

const SERIES_RELATIVE_TOL: f64 = 1e-14;
const SERIES_TERM_CAP: usize = 50_000_000;

/// Expected token count at time t when every processor starts with a token,
/// for ring size n: 1 + (2n/pi) sum_j (1/j) tan(j pi/n) e^{-4 pi^2 j^2 s^2 t}
/// with s^2 = D/n^2.  The term-wise series diverges at t = 0, where the
/// value is n by definition.
///
/// n odd keeps every tan factor finite: |tan(j pi/n)| <= cot(pi/(2n)), so
/// a geometric envelope controls the tail and the loop stops once that
/// envelope drops below 1e-14 of the running sum.
pub fn full_token_expectation_s(n: usize, d: f64, t: f64) -> f64 {
    assert!(n >= 3 && n % 2 == 1, "ring size must be odd and at least 3");
    assert!(d > 0.0, "diffusion constant must be positive");
    assert!(t >= 0.0, "time must be nonnegative");
    let nf = n as f64;
    if t == 0.0 {
        return nf;
    }
    let sigma_sq = d / (nf * nf);
    let a = 4.0 * PI * PI * sigma_sq * t;
    let scale = 2.0 * nf / PI;
    let envelope = (2.0 * nf / PI) * scale; // (2n/pi) * cot(pi/(2n)) <= (2n/pi)^2
    let mut sum = 1.0f64;
    let mut j = 1usize;
    loop {
        let jf = j as f64;
        sum += scale * (jf * PI / nf).tan() * (-a * jf * jf).exp() / jf;
        // tail after j terms: envelope * e^{-a(j+1)^2}/(j+1) * 1/(1-ratio)
        let head = (-a * (jf + 1.0) * (jf + 1.0)).exp();
        let ratio = (-a * (2.0 * jf + 3.0)).exp();
        let tail = envelope * head / ((jf + 1.0) * (1.0 - ratio));
        if tail <= SERIES_RELATIVE_TOL * sum.abs().max(1.0) {
            break;
        }
        j += 1;
        assert!(
            j <= SERIES_TERM_CAP,
            "token-count series needs more than {SERIES_TERM_CAP} terms; t = {t} is too close to 0 for n = {n}"
        );
    }
    sum
}

/// Large-ring limit of the token-count curve: 1 + 2 sum_j e^{-4 pi^2 j^2 s^2 t}.
/// Diverges as t -> 0, so t = 0 returns infinity.
pub fn full_token_expectation_s_tilde(sigma_sq: f64, t: f64) -> f64 {
    assert!(sigma_sq > 0.0, "sigma^2 must be positive");
    assert!(t >= 0.0, "time must be nonnegative");
    if t == 0.0 {
        return f64::INFINITY;
    }
    let a = 4.0 * PI * PI * sigma_sq * t;
    let mut sum = 1.0f64;
    let mut j = 1usize;
    loop {
        let jf = j as f64;
        sum += 2.0 * (-a * jf * jf).exp();
        let head = 2.0 * (-a * (jf + 1.0) * (jf + 1.0)).exp();
        let ratio = (-a * (2.0 * jf + 3.0)).exp();
        let tail = head / (1.0 - ratio);
        if tail <= SERIES_RELATIVE_TOL * sum {
            break;
        }
        j += 1;
        assert!(
            j <= SERIES_TERM_CAP,
            "limit token-count series needs more than {SERIES_TERM_CAP} terms; t = {t} is too close to 0"
        );
    }
    sum
}

/// Bounds for the all-tokens start: expected time at most 0.0285 n^2/D, and
/// the time exceeded with probability under one half, 0.02 n^2/D.
pub fn full_config_bounds(n: usize, d: f64) -> (f64, f64) {
    assert!(n >= 3 && n % 2 == 1, "ring size must be odd and at least 3");
    assert!(d > 0.0, "diffusion constant must be positive");
    let n2_over_d = (n * n) as f64 / d;
    (0.0285 * n2_over_d, 0.02 * n2_over_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;

    #[test]
    fn triangle_matches_hand_values() {
        assert!((triangle_formula(3.0, 3.0, 3.0, 0.25).unwrap() - 12.0).abs() < 1e-12);
        assert!((triangle_formula(1.0, 1.0, 1.0, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(triangle_formula(0.0, 1.0, 1.0, 0.25).is_err());
        assert!(triangle_formula(1.0, 1.0, 1.0, -0.25).is_err());
    }

    #[test]
    fn triangle_rational_equilateral_multiple_of_three() {
        // at n = 3k the equilateral value is n^2/(27 D)
        for k in 1..6u64 {
            let n = 3 * k;
            let v = triangle_formula_rational(k, k, k, &ratio(1, 4)).unwrap();
            assert_eq!(v, ratio((n * n) as i64, 1) * ratio(4, 27));
        }
    }

    #[test]
    fn worst_case_constant() {
        let v = worst_case_bound(9, 0.25);
        assert!((v - 51.719).abs() < 0.01, "{v}");
        // about 0.6385 n^2 at r = 1/2
        let big = worst_case_bound(1001, 0.25);
        assert!((big / (1001.0 * 1001.0) - 0.6385).abs() < 0.0005);
    }

    #[test]
    fn stage_bound_values_and_relaxation() {
        assert_eq!(stage_bound_tau(9, 3, 0.25), 24.0);
        // floor-based bound never exceeds n^2/(m^2 D)
        for n in [9usize, 15, 101, 1001] {
            let mut m = 3;
            while m <= n {
                let tau = stage_bound_tau(n, m, 0.25);
                let relaxed = (n * n) as f64 / ((m * m) as f64 * 0.25);
                assert!(tau <= relaxed + 1e-9, "n={n} m={m}");
                m += 2;
            }
        }
    }

    #[test]
    fn cumulative_bound_stays_under_limit() {
        for n in [101usize, 1001] {
            let cum = cumulative_stage_bound(n, n, 0.25);
            let lim = cumulative_stage_limit(n, 0.25);
            assert!(cum <= lim, "n={n}: {cum} vs {lim}");
        }
        // the relaxed limit is the classical headline: about 0.93 n^2
        let lim = cumulative_stage_limit(1001, 0.25);
        assert!((lim / (1001.0 * 1001.0) - 0.9348).abs() < 0.001);
    }

    #[test]
    fn token_curve_at_zero_and_monotone() {
        assert_eq!(full_token_expectation_s(101, 0.25, 0.0), 101.0);
        let sigma_sq = 0.25 / (101.0 * 101.0);
        let mut prev = f64::INFINITY;
        for step in 1..40 {
            let t = step as f64 * 0.5 / (100.0 * sigma_sq);
            let s = full_token_expectation_s(101, 0.25, t);
            assert!(s >= 1.0 - 1e-9);
            assert!(s <= prev + 1e-6, "curve must decrease");
            prev = s;
        }
    }

    #[test]
    fn limit_curve_frozen_values() {
        // (S~(t)-1)/2 at t = 1/(100 s^2) and 2/(100 s^2)
        let sigma_sq = 0.731; // arbitrary; the product s^2 t is what matters
        let t1 = 1.0 / (100.0 * sigma_sq);
        let t2 = 2.0 / (100.0 * sigma_sq);
        let v1 = (full_token_expectation_s_tilde(sigma_sq, t1) - 1.0) / 2.0;
        let v2 = (full_token_expectation_s_tilde(sigma_sq, t2) - 1.0) / 2.0;
        assert!((v1 - 0.91).abs() < 0.005, "{v1}");
        assert!((v2 - 0.497).abs() < 0.003, "{v2}");
        assert!(full_token_expectation_s_tilde(sigma_sq, 0.0).is_infinite());
        // long-time limit is a single surviving token
        assert!((full_token_expectation_s_tilde(sigma_sq, 50.0 / sigma_sq) - 1.0) < 1e-12);
    }

    #[test]
    fn finite_curve_approaches_limit_for_large_n() {
        let d = 0.25;
        for n in [101usize, 1001] {
            let sigma_sq = d / ((n * n) as f64);
            let t = 1.0 / (100.0 * sigma_sq);
            let s = full_token_expectation_s(n, d, t);
            let s_tilde = full_token_expectation_s_tilde(sigma_sq, t);
            let gap = (s - s_tilde).abs() / s_tilde;
            assert!(gap < 10.0 / n as f64, "n={n}: {s} vs {s_tilde}");
        }
    }

    #[test]
    fn full_config_bound_values() {
        let (mean_b, median_b) = full_config_bounds(101, 0.25);
        assert!((mean_b - 0.0285 * 101.0 * 101.0 * 4.0).abs() < 1e-9);
        assert!((median_b - 0.02 * 101.0 * 101.0 * 4.0).abs() < 1e-9);
        // doubling D halves both
        let (m2, q2) = full_config_bounds(101, 0.5);
        assert!((m2 * 2.0 - mean_b).abs() < 1e-9);
        assert!((q2 * 2.0 - median_b).abs() < 1e-9);
        // full start beats the equilateral closed form for every n
        for n in (3..400usize).step_by(2) {
            let (mean_b, _) = full_config_bounds(n, 0.25);
            let equilateral = (n * n) as f64 / (27.0 * 0.25);
            assert!(mean_b < equilateral);
        }
    }
}
