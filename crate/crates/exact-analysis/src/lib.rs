//! Exact expected stabilization times on the reachable configuration space,
//! plus the closed-form bounds the simulator is checked against.
//!
//! The solvers build the Markov chain reachable from a start configuration
//! (token positions as state, annihilation built into the kernel) and solve
//! the linear hitting-time system.  Float mode answers in f64; rational mode
//! answers in exact fractions and is the ground truth the rest of the
//! workspace calibrates against.

mod bounds;
mod cdf;
mod chain;
mod error;
mod solution;
mod solve;

pub use bounds::{
    cumulative_stage_bound, cumulative_stage_limit, full_config_bounds, full_token_expectation_s,
    full_token_expectation_s_tilde, stage_bound_tau, triangle_formula, triangle_formula_rational,
    worst_case_bound,
};
pub use cdf::cdf_sync;
pub use error::Error;
pub use num::rational::BigRational;
pub use solution::{ArithmeticMode, ExactSolution, StateKey};

use num::bigint::BigInt;
use num::{One, Zero};
use ring_core::{ProtocolParams, RingConfig};

pub type Result<T> = std::result::Result<T, Error>;

/// Limits for state enumeration.  The default budget keeps rational solves
/// in the seconds range (three tokens up to n = 25, five tokens up to
/// n = 15).  Rotation reduction shrinks the space about n-fold; it is off by
/// default so the straightforward enumeration stays the reference.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub budget_states: usize,
    pub symmetry_reduction: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            budget_states: 4000,
            symmetry_reduction: false,
        }
    }
}

/// Convenience constructor for exact fractions.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn check_r_f64(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pass probability must lie strictly between 0 and 1, got {r}"
        )));
    }
    Ok(())
}

fn check_lambda_f64(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pass rate must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Expected synchronous stabilization time from `c0`, f64 arithmetic.
pub fn exact_sync(c0: &RingConfig, r: f64, opts: &SolveOptions) -> Result<ExactSolution> {
    check_r_f64(r)?;
    let chain = chain::build_chain(c0, chain::Kernel::Sync, opts)?;
    let values = solve::solve_f64(&chain, r)?;
    Ok(ExactSolution::from_float(
        &chain,
        ProtocolParams::sync(r)?,
        values,
    ))
}

/// Expected synchronous stabilization time in exact fractions.
pub fn exact_sync_rational(
    c0: &RingConfig,
    r: &BigRational,
    opts: &SolveOptions,
) -> Result<ExactSolution> {
    if !(r > &BigRational::zero() && r < &BigRational::one()) {
        return Err(Error::InvalidInput(format!(
            "pass probability must lie strictly between 0 and 1, got {r}"
        )));
    }
    let chain = chain::build_chain(c0, chain::Kernel::Sync, opts)?;
    let values = solve::solve_exact(&chain, r)?;
    let r_f64 = num::ToPrimitive::to_f64(r).expect("r fits f64");
    Ok(ExactSolution::from_rational(
        &chain,
        ProtocolParams::sync(r_f64)?,
        values,
    ))
}

/// Expected asynchronous stabilization time from `c0`, f64 arithmetic.
pub fn exact_async(c0: &RingConfig, lambda: f64, opts: &SolveOptions) -> Result<ExactSolution> {
    check_lambda_f64(lambda)?;
    let chain = chain::build_chain(c0, chain::Kernel::Async, opts)?;
    let values = solve::solve_f64(&chain, lambda)?;
    Ok(ExactSolution::from_float(
        &chain,
        ProtocolParams::asynchronous(lambda)?,
        values,
    ))
}

/// Expected asynchronous stabilization time in exact fractions.
pub fn exact_async_rational(
    c0: &RingConfig,
    lambda: &BigRational,
    opts: &SolveOptions,
) -> Result<ExactSolution> {
    if !(lambda > &BigRational::zero()) {
        return Err(Error::InvalidInput(format!(
            "pass rate must be positive, got {lambda}"
        )));
    }
    let chain = chain::build_chain(c0, chain::Kernel::Async, opts)?;
    let values = solve::solve_exact(&chain, lambda)?;
    let l_f64 = num::ToPrimitive::to_f64(lambda).expect("lambda fits f64");
    Ok(ExactSolution::from_rational(
        &chain,
        ProtocolParams::asynchronous(l_f64)?,
        values,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ring_core::{gen_equilateral, gen_full, gen_legitimate};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn sync_full_three_ring() {
        let sol = exact_sync_rational(&gen_full(3).unwrap(), &ratio(1, 2), &opts()).unwrap();
        assert_eq!(sol.expected_time_rational().unwrap(), &ratio(4, 3));
    }

    #[test]
    fn sync_full_five_ring() {
        let sol = exact_sync_rational(&gen_full(5).unwrap(), &ratio(1, 2), &opts()).unwrap();
        assert_eq!(sol.expected_time_rational().unwrap(), &ratio(44, 15));
    }

    #[test]
    fn sync_five_tokens_on_seven_ring() {
        let c0 = ring_core::RingConfig::from_tokens(7, &[1, 2, 4, 5, 6]).unwrap();
        let sol = exact_sync_rational(&c0, &ratio(1, 2), &opts()).unwrap();
        assert_eq!(sol.expected_time_rational().unwrap(), &ratio(2000, 377));
    }

    #[test]
    fn sync_equilateral_nine_ring() {
        let sol = exact_sync_rational(&gen_equilateral(9).unwrap(), &ratio(1, 2), &opts()).unwrap();
        assert_eq!(sol.expected_time_rational().unwrap(), &ratio(12, 1));
    }

    #[test]
    fn async_frozen_oracles() {
        let one = ratio(1, 1);
        let cases: [(ring_core::RingConfig, BigRational); 4] = [
            (gen_full(3).unwrap(), ratio(1, 3)),
            (gen_full(5).unwrap(), ratio(4, 5)),
            (
                ring_core::RingConfig::from_tokens(7, &[1, 2, 4, 5, 6]).unwrap(),
                ratio(18, 13),
            ),
            (gen_equilateral(9).unwrap(), ratio(3, 1)),
        ];
        for (c0, want) in cases {
            let sol = exact_async_rational(&c0, &one, &opts()).unwrap();
            assert_eq!(sol.expected_time_rational().unwrap(), &want, "{c0}");
        }
    }

    #[test]
    fn single_token_start_is_zero() {
        let c0 = gen_legitimate(7, 2).unwrap();
        let sol = exact_sync(&c0, 0.5, &opts()).unwrap();
        assert_eq!(sol.expected_time(), 0.0);
        let sol = exact_async_rational(&c0, &ratio(1, 1), &opts()).unwrap();
        assert!(num::Zero::is_zero(sol.expected_time_rational().unwrap()));
    }

    #[test]
    fn float_mode_tracks_rational_mode() {
        let c0 = gen_full(7).unwrap();
        let rat = exact_sync_rational(&c0, &ratio(3, 10), &opts()).unwrap();
        let flt = exact_sync(&c0, 0.3, &opts()).unwrap();
        let want = num::ToPrimitive::to_f64(rat.expected_time_rational().unwrap()).unwrap();
        assert!((flt.expected_time() - want).abs() < 1e-9 * want.max(1.0));
    }

    /// Every 3-token configuration must agree with the product formula
    /// a·b·c/(D·n), exactly, in both variants.
    #[test]
    fn three_token_solutions_match_product_formula() {
        for n in [5usize, 7, 9] {
            let start = gen_equilateral(n).unwrap();
            let d_sync = ratio(1, 2) * (ratio(1, 1) - ratio(1, 2));
            let sol = exact_sync_rational(&start, &ratio(1, 2), &opts()).unwrap();
            let lam = ratio(1, 1);
            let sol_a = exact_async_rational(&start, &lam, &opts()).unwrap();
            let mut checked = 0;
            for u in 1..=n - 2 {
                for v in u + 1..=n - 1 {
                    for w in v + 1..=n {
                        let c = ring_core::RingConfig::from_tokens(n, &[u, v, w]).unwrap();
                        let g = c.gaps();
                        let gaps = g.gaps();
                        let want = triangle_formula_rational(
                            gaps[0] as u64,
                            gaps[1] as u64,
                            gaps[2] as u64,
                            &d_sync,
                        )
                        .unwrap();
                        let got = sol.value_rational(&c).expect("state reachable");
                        assert_eq!(got, &want, "sync n={n} tokens=({u},{v},{w})");
                        let want_a = triangle_formula_rational(
                            gaps[0] as u64,
                            gaps[1] as u64,
                            gaps[2] as u64,
                            &lam,
                        )
                        .unwrap();
                        let got_a = sol_a.value_rational(&c).expect("state reachable");
                        assert_eq!(got_a, &want_a, "async n={n} tokens=({u},{v},{w})");
                        checked += 1;
                    }
                }
            }
            assert_eq!(checked, n * (n - 1) * (n - 2) / 6);
        }
    }

    #[test]
    fn rotation_reduction_changes_nothing() {
        let red = SolveOptions {
            symmetry_reduction: true,
            ..Default::default()
        };
        for c0 in [gen_full(7).unwrap(), gen_equilateral(11).unwrap()] {
            let a = exact_sync_rational(&c0, &ratio(2, 5), &opts()).unwrap();
            let b = exact_sync_rational(&c0, &ratio(2, 5), &red).unwrap();
            assert_eq!(
                a.expected_time_rational().unwrap(),
                b.expected_time_rational().unwrap()
            );
            assert!(b.state_count() < a.state_count());
            // per-config queries agree too
            for (key, v) in a.iter() {
                let c = ring_core::RingConfig::from_tokens(
                    c0.n(),
                    &key.iter().map(|&p| p as usize).collect::<Vec<_>>(),
                )
                .unwrap();
                let w = b.value(&c).expect("reduced solution answers any rotation");
                assert!((v - w).abs() < 1e-9 * v.max(1.0), "{key:?}");
            }
        }
    }

    #[test]
    fn budget_overflow_names_the_state_count() {
        let tight = SolveOptions {
            budget_states: 10,
            ..Default::default()
        };
        let err = exact_sync(&gen_full(9).unwrap(), 0.5, &tight).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("budget allows 10"), "{msg}");
    }

    #[test]
    fn worst_case_bound_dominates_three_token_solutions() {
        for n in [5usize, 7, 9, 11, 13] {
            let sol = exact_sync(&gen_equilateral(n).unwrap(), 0.5, &opts()).unwrap();
            let bound = worst_case_bound(n, 0.25);
            for (key, v) in sol.iter() {
                assert!(v <= bound, "n={n} key={key:?}: {v} > {bound}");
            }
        }
    }

    /// With three tokens the first annihilation stabilizes the ring, so the
    /// stage bound for the three-token phase caps the full expected time.
    #[test]
    fn stage_bound_dominates_three_token_phase() {
        for n in [5usize, 7, 9, 11, 13] {
            let sol = exact_sync(&gen_equilateral(n).unwrap(), 0.5, &opts()).unwrap();
            let tau3 = stage_bound_tau(n, 3, 0.25);
            for (key, v) in sol.iter() {
                if key.len() == 3 {
                    assert!(v <= tau3 + 1e-9, "n={n} key={key:?}: {v} > {tau3}");
                }
            }
        }
    }
}
