use num::{BigInt, BigRational, One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ring_core::{ProtocolParams, RingConfig};

use crate::driver::{directed_layouts, Kahan};
use crate::{Error, Result};

/// A Monte Carlo estimate of the expected stabilization time through the
/// signed pairing decomposition.  A statistical cross-check of the
/// decomposition itself, not a production estimator.
#[derive(Debug, Clone, Copy)]
pub struct McExpectation {
    pub value: f64,
    /// Standard error combining the per-pairing sample errors with their
    /// exact absorption weights.
    pub std_error: f64,
    pub trials_per_pairing: u64,
}

/// Estimates sum over directed pairings of sign * E[max pair collision
/// time | every pair collides its assigned way] * P(it does), sampling each
/// pair's distance as an independent absorbed walk conditioned by
/// rejection.  Works for both variants: the synchronous walk steps each
/// round with probability r(1-r) per direction, the asynchronous one jumps
/// after Exp(2 lambda) waits.  Refuses when some required collision side
/// has probability under 10^-3, since rejection would starve.
pub fn pairing_expectation_mc(
    c: &RingConfig,
    params: ProtocolParams,
    trials: u64,
    seed: u64,
) -> Result<McExpectation> {
    if trials < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 trials per pairing for an error estimate, got {trials}"
        )));
    }
    let n = c.n();
    let layouts = directed_layouts(c)?;
    for l in &layouts {
        for &z in &l.z {
            let p = 1.0 - z as f64 / n as f64;
            if p < 1e-3 {
                return Err(Error::Starvation { prob: p });
            }
        }
    }

    let per_layout: Vec<(f64, f64)> = layouts
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let mut t_max = 0.0f64;
                for &z in &l.z {
                    t_max = t_max.max(sample_conditioned(&mut rng, z as usize, n, params));
                }
                sum += t_max;
                sum_sq += t_max * t_max;
            }
            let tf = trials as f64;
            let mean = sum / tf;
            let var = ((sum_sq - sum * sum / tf) / (tf - 1.0)).max(0.0);
            (mean, (var / tf).sqrt())
        })
        .collect();

    let nb = BigInt::from(n);
    let mut value = Kahan::new();
    let mut var_acc = 0.0;
    for (l, &(mean, se)) in layouts.iter().zip(&per_layout) {
        let mut mass = BigRational::one();
        for &z in &l.z {
            mass *= BigRational::new(BigInt::from(n as u64 - z as u64), nb.clone());
        }
        let weight = mass.to_f64().expect("absorption mass fits f64");
        value.add(l.sign as f64 * weight * mean);
        var_acc += (weight * se) * (weight * se);
    }
    Ok(McExpectation {
        value: value.sum(),
        std_error: var_acc.sqrt(),
        trials_per_pairing: trials,
    })
}

/// One sample of the pair collision time started at directed distance z,
/// conditioned on hitting 0 before n, by rejection.
fn sample_conditioned(rng: &mut ChaCha8Rng, z: usize, n: usize, params: ProtocolParams) -> f64 {
    let p = 1.0 - z as f64 / n as f64;
    let attempt_cap = (2000.0 / p).ceil() as u64;
    for _ in 0..attempt_cap {
        let (down, t) = walk_once(rng, z, n, params);
        if down {
            return t;
        }
    }
    unreachable!("rejection sampling failed {attempt_cap} times at acceptance {p}");
}

fn walk_once(rng: &mut ChaCha8Rng, z0: usize, n: usize, params: ProtocolParams) -> (bool, f64) {
    let mut z = z0;
    match params {
        ProtocolParams::Synchronous { r } => {
            let q = r * (1.0 - r);
            let mut t = 0u64;
            loop {
                t += 1;
                let u: f64 = rng.random();
                if u < q {
                    z += 1;
                } else if u < 2.0 * q {
                    z -= 1;
                }
                if z == 0 {
                    return (true, t as f64);
                }
                if z == n {
                    return (false, t as f64);
                }
            }
        }
        ProtocolParams::Asynchronous { lambda } => {
            let mut t = 0.0f64;
            loop {
                let u: f64 = rng.random();
                t -= (1.0 - u).ln() / (2.0 * lambda);
                if rng.random_bool(0.5) {
                    z += 1;
                } else {
                    z -= 1;
                }
                if z == 0 {
                    return (true, t);
                }
                if z == n {
                    return (false, t);
                }
            }
        }
    }
}
