use num::{BigInt, BigRational, One, Zero};
use ring_core::{Direction, RingConfig};

use crate::{Error, Result};

/// A partition of the token indices 1..=M into m unordered pairs (stored
/// with u < v) plus one leftover index, M = 2m + 1.  The sign is the parity
/// of the word u1 v1 ... um vm w0 read as a permutation of 1..=M; swapping
/// two whole pairs moves two elements an even distance, so the stored pair
/// order cannot change it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pairs: Vec<(u8, u8)>,
    leftover: u8,
    sign: i8,
}

impl Pairing {
    fn assemble(pairs: &[(u8, u8)], leftover: u8) -> Self {
        let mut word: Vec<u8> = Vec::with_capacity(pairs.len() * 2 + 1);
        for &(u, v) in pairs {
            debug_assert!(u < v);
            word.push(u);
            word.push(v);
        }
        word.push(leftover);
        Pairing {
            pairs: pairs.to_vec(),
            leftover,
            sign: perm_sign(&word),
        }
    }

    /// The m pairs, ascending in their smaller element.
    pub fn pairs(&self) -> &[(u8, u8)] {
        &self.pairs
    }

    pub fn leftover(&self) -> u8 {
        self.leftover
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

fn perm_sign(word: &[u8]) -> i8 {
    let mut inversions = 0usize;
    for i in 0..word.len() {
        for j in i + 1..word.len() {
            if word[i] > word[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All M!/(2^m m!) pairings of 1..=M, each with its sign.  The order is
/// deterministic: the smallest unplaced index pairs with each larger one in
/// turn, and becomes the leftover last.
pub fn enumerate_pairings(m_tokens: usize) -> Result<Vec<Pairing>> {
    if m_tokens < 3 || m_tokens % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "pairings need an odd token count of at least 3, got {m_tokens}"
        )));
    }
    if m_tokens > 13 {
        return Err(Error::InvalidInput(format!(
            "pairing enumeration supports odd token counts 3..=13, got {m_tokens}"
        )));
    }
    let all: Vec<u8> = (1..=m_tokens as u8).collect();
    let mut out = Vec::new();
    let mut pairs = Vec::with_capacity((m_tokens - 1) / 2);
    recurse(&all, None, &mut pairs, &mut out);
    Ok(out)
}

fn recurse(
    remaining: &[u8],
    leftover: Option<u8>,
    pairs: &mut Vec<(u8, u8)>,
    out: &mut Vec<Pairing>,
) {
    if remaining.is_empty() {
        let leftover = leftover.expect("odd count leaves one index over");
        out.push(Pairing::assemble(pairs, leftover));
        return;
    }
    let a = remaining[0];
    for idx in 1..remaining.len() {
        let b = remaining[idx];
        let rest: Vec<u8> = remaining[1..].iter().copied().filter(|&x| x != b).collect();
        pairs.push((a, b));
        recurse(&rest, leftover, pairs, out);
        pairs.pop();
    }
    if leftover.is_none() {
        recurse(&remaining[1..], Some(a), pairs, out);
    }
}

/// A pairing with a collision direction chosen per pair.  Down keeps the
/// clockwise pair distance, up replaces it with n - z; the directed sign
/// flips once per up tag.
#[derive(Debug, Clone)]
pub struct DirectedPairing {
    base: Pairing,
    directions: Vec<Direction>,
    directed_sign: i8,
}

impl DirectedPairing {
    pub fn base(&self) -> &Pairing {
        &self.base
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn directed_sign(&self) -> i8 {
        self.directed_sign
    }
}

/// The 2^m direction assignments of one pairing, in ascending bitmask order
/// (bit i set means pair i points up).
pub fn enumerate_directed(base: &Pairing) -> Vec<DirectedPairing> {
    let m = base.pair_count();
    (0u32..1 << m)
        .map(|mask| {
            let directions: Vec<Direction> = (0..m)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Direction::Up
                    } else {
                        Direction::Down
                    }
                })
                .collect();
            let directed_sign = if mask.count_ones() % 2 == 1 {
                -base.sign()
            } else {
                base.sign()
            };
            DirectedPairing {
                base: base.clone(),
                directions,
                directed_sign,
            }
        })
        .collect()
}

/// Sum of directed sign times the product of per-pair absorption
/// probabilities, in exact rationals.  Equals 1 for every configuration;
/// the full-mass identity behind the signed expansion.
pub fn signed_absorption_identity(c: &RingConfig) -> Result<BigRational> {
    let n = c.n();
    let layouts = crate::driver::directed_layouts(c)?;
    let nb = BigInt::from(n);
    let mut acc = BigRational::zero();
    for l in &layouts {
        let mut mass = BigRational::one();
        for &z in &l.z {
            mass *= BigRational::new(BigInt::from(n as u64 - z as u64), nb.clone());
        }
        if l.sign > 0 {
            acc += mass;
        } else {
            acc -= mass;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_match_closed_form() {
        // M! / (2^m m!)
        for (m_tokens, want) in [(3usize, 3usize), (5, 15), (7, 105), (9, 945)] {
            assert_eq!(enumerate_pairings(m_tokens).unwrap().len(), want);
        }
    }

    #[test]
    fn three_token_pairings_and_signs() {
        let ps = enumerate_pairings(3).unwrap();
        let find = |u: u8, v: u8| ps.iter().find(|p| p.pairs() == [(u, v)]).unwrap();
        let p12 = find(1, 2);
        assert_eq!((p12.leftover(), p12.sign()), (3, 1));
        let p13 = find(1, 3);
        assert_eq!((p13.leftover(), p13.sign()), (2, -1));
        let p23 = find(2, 3);
        assert_eq!((p23.leftover(), p23.sign()), (1, 1));
    }

    #[test]
    fn pairings_partition_the_indices() {
        for p in enumerate_pairings(7).unwrap() {
            let mut seen = vec![false; 8];
            for &(u, v) in p.pairs() {
                assert!(u < v);
                for x in [u, v] {
                    assert!(!seen[x as usize], "index {x} placed twice");
                    seen[x as usize] = true;
                }
            }
            assert!(!seen[p.leftover() as usize]);
            seen[p.leftover() as usize] = true;
            assert!(seen[1..].iter().all(|&s| s));
            // pairs come out ascending in their smaller element
            for w in p.pairs().windows(2) {
                assert!(w[0].0 < w[1].0);
            }
        }
    }

    #[test]
    fn directed_enumeration_counts_and_signs() {
        let ps = enumerate_pairings(5).unwrap();
        for p in &ps {
            let directed = enumerate_directed(p);
            assert_eq!(directed.len(), 4);
            for (mask, d) in directed.iter().enumerate() {
                assert_eq!(d.directions().len(), 2);
                let ups = d
                    .directions()
                    .iter()
                    .filter(|&&dir| dir == Direction::Up)
                    .count();
                assert_eq!(ups, (mask as u32).count_ones() as usize);
                let want = if ups % 2 == 1 { -p.sign() } else { p.sign() };
                assert_eq!(d.directed_sign(), want);
            }
        }
    }

    fn random_config(rng: &mut ChaCha8Rng, m_tokens: usize) -> RingConfig {
        let n = 2 * rng.random_range((m_tokens / 2 + 1)..=20) + 1;
        let mut positions: Vec<usize> = rand::seq::index::sample(rng, n, m_tokens)
            .iter()
            .map(|i| i + 1)
            .collect();
        positions.sort_unstable();
        RingConfig::from_tokens(n, &positions).unwrap()
    }

    #[test]
    fn sign_sum_identity_holds_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for m_tokens in [3usize, 5, 7] {
            for _ in 0..200 {
                let c = random_config(&mut rng, m_tokens);
                let total = signed_absorption_identity(&c).unwrap();
                assert!(total.is_one(), "{c}: identity sum {total}");
            }
        }
    }

    /// With three tokens the identity collapses to sign * (1 - 2z/n) per
    /// pairing, and z_13 = z_12 + z_23 telescopes the sum to 1.
    #[test]
    fn three_token_telescoping() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = random_config(&mut rng, 3);
            let n = c.n();
            let g = c.gaps();
            let mut acc = BigRational::zero();
            for p in enumerate_pairings(3).unwrap() {
                let &(u, v) = &p.pairs()[0];
                let z = g.pairwise_distance(u as usize, v as usize);
                let term =
                    BigRational::one() - BigRational::new(BigInt::from(2 * z), BigInt::from(n));
                acc += term * BigRational::from(BigInt::from(p.sign() as i64));
            }
            assert!(acc.is_one(), "{c}: telescoped sum {acc}");
        }
    }

    #[test]
    fn rejects_out_of_range_counts() {
        for bad in [0usize, 1, 2, 4, 8, 15] {
            assert!(matches!(
                enumerate_pairings(bad),
                Err(Error::InvalidInput(_))
            ));
        }
    }
}
