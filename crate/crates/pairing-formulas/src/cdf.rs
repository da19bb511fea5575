use std::collections::HashMap;

use ring_core::RingConfig;

use crate::combinat::enumerate_pairings;
use crate::driver::Kahan;
use crate::walk::pair_survival;
use crate::{Error, Result};

/// P(T <= t) for the synchronous stabilization time, by the signed pairing
/// expansion.  Each pair at clockwise distance z contributes the difference
/// of its two absorbed-by-t masses,
/// (P(down) - survival(z)) - (P(up) - survival(n - z)),
/// and the products over pairs alternate by pairing sign.
pub fn pairing_cdf(c: &RingConfig, r: f64, t: u64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pass probability must lie strictly between 0 and 1, got {r}"
        )));
    }
    let pairings = enumerate_pairings(c.token_count())?;
    let n = c.n();
    let nf = n as f64;
    let gaps = c.gaps();
    let mut factor_by_z: HashMap<usize, f64> = HashMap::new();
    let mut acc = Kahan::new();
    for p in &pairings {
        let mut prod = 1.0;
        for &(u, v) in p.pairs() {
            let z = gaps.pairwise_distance(u as usize, v as usize);
            let factor = *factor_by_z.entry(z).or_insert_with(|| {
                let down = (1.0 - z as f64 / nf) - pair_survival(z, n, r, t);
                let up = z as f64 / nf - pair_survival(n - z, n, r, t);
                down - up
            });
            prod *= factor;
        }
        acc.add(p.sign() as f64 * prod);
    }
    let sum = acc.sum();
    assert!(
        (-1e-9..=1.0 + 1e-9).contains(&sum),
        "distribution value {sum} escaped [0,1]"
    );
    Ok(sum.clamp(0.0, 1.0))
}
