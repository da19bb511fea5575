use rand::Rng;
use ring_core::RingConfig;

/// One synchronous round in the bit representation, the authoritative
/// semantics: every processor reads the previous state; a processor whose
/// bit equals its counterclockwise neighbor's flips with probability `r`,
/// all others keep their bit.
///
/// Draw discipline: one uniform per token-holding processor, in ascending
/// position order. `sync_step_tokens` consumes draws identically, so the
/// two implementations can be coupled on a shared generator.
pub fn sync_step<R: Rng + ?Sized>(c: &RingConfig, r: f64, rng: &mut R) -> RingConfig {
    assert!(r > 0.0 && r < 1.0, "pass probability out of range: {}", r);
    let n = c.n();
    let bits = c.bits();
    let mut next = bits.to_vec();
    for i in 0..n {
        let ccw = bits[if i == 0 { n - 1 } else { i - 1 }];
        if bits[i] == ccw && rng.random::<f64>() < r {
            next[i] ^= 1;
        }
    }
    let out = RingConfig::from_bits(n, &next).expect("synchronous step left the ring valid");
    debug_assert!(out.token_count() <= c.token_count());
    out
}

/// The same round in the token representation: each token advances one
/// position clockwise with probability `r`; a token landing on one that
/// stayed annihilates both. A token that moves onto a position just vacated
/// by another mover survives (the receiving processor passed its own token
/// in the same round).
pub fn sync_step_tokens<R: Rng + ?Sized>(
    n: usize,
    tokens: &[usize],
    r: f64,
    rng: &mut R,
) -> Vec<usize> {
    assert!(r > 0.0 && r < 1.0, "pass probability out of range: {}", r);
    let mut cur = tokens.to_vec();
    let mut scratch = Vec::with_capacity(tokens.len());
    step_tokens_in_place(n, &mut cur, &mut scratch, r, rng);
    cur
}

/// In-place round used by the trial loops; buffers are reused across steps.
pub(crate) fn step_tokens_in_place<R: Rng + ?Sized>(
    n: usize,
    tokens: &mut Vec<usize>,
    scratch: &mut Vec<usize>,
    r: f64,
    rng: &mut R,
) {
    let m = tokens.len();
    scratch.clear();
    for &z in tokens.iter() {
        scratch.push(if rng.random::<f64>() < r {
            z % n + 1
        } else {
            z
        });
    }
    scratch.sort_unstable();
    tokens.clear();
    let mut i = 0;
    while i < m {
        if i + 1 < m && scratch[i] == scratch[i + 1] {
            // Mover met a stayer; a position is never shared three ways
            // because only the clockwise predecessor can move onto it.
            debug_assert!(i + 2 >= m || scratch[i + 2] != scratch[i]);
            i += 2;
        } else {
            tokens.push(scratch[i]);
            i += 1;
        }
    }
    debug_assert!(tokens.len() % 2 == 1, "token parity broken");
    debug_assert!(tokens.len() <= m);
}
