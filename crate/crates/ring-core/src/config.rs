use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// An immutable ring configuration: `n` processors (1..=n clockwise), one
/// bit each. Token positions are derived once at construction and cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingConfig {
    n: usize,
    bits: Vec<u8>,
    tokens: Vec<usize>,
}

/// Clockwise distances between consecutive tokens, one entry per token,
/// wrapping around. Entries sum to n; for a single token the sole gap is n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapVector {
    n: usize,
    gaps: Vec<usize>,
}

fn check_ring_size(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::RingSize(n));
    }
    Ok(())
}

/// Positions i (1-indexed) with bits[i] == bits[i-1], the ccw neighbor of 1
/// being n.
fn tokens_of_bits(n: usize, bits: &[u8]) -> Vec<usize> {
    (1..=n)
        .filter(|&i| bits[i - 1] == bits[if i == 1 { n - 1 } else { i - 2 }])
        .collect()
}

impl RingConfig {
    pub fn from_bits(n: usize, bits: &[u8]) -> Result<Self> {
        check_ring_size(n)?;
        if bits.len() != n {
            return Err(Error::BitLength { n, got: bits.len() });
        }
        for (idx, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::BitValue {
                    position: idx + 1,
                    value: b,
                });
            }
        }
        let tokens = tokens_of_bits(n, bits);
        // For odd n the equal/unequal constraints around the ring force an
        // odd number of equalities; anything else is a bug, not bad input.
        assert!(tokens.len() % 2 == 1, "even token count on odd ring");
        Ok(RingConfig {
            n,
            bits: bits.to_vec(),
            tokens,
        })
    }

    /// Builds the configuration with exactly the given token set, choosing
    /// the bit pattern canonically: bits[1] = 0, then each later bit copies
    /// or inverts its predecessor so the token constraint holds. The other
    /// valid pattern is the all-flipped one and carries the same tokens.
    pub fn from_tokens(n: usize, positions: &[usize]) -> Result<Self> {
        check_ring_size(n)?;
        if positions.is_empty() || positions.len() % 2 == 0 {
            return Err(Error::TokenParity(positions.len()));
        }
        for w in positions.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::TokenPositions {
                    n,
                    detail: format!("{} then {}", w[0], w[1]),
                });
            }
        }
        if positions[0] < 1 || *positions.last().unwrap() > n {
            return Err(Error::TokenPositions {
                n,
                detail: format!("{:?} out of range", positions),
            });
        }
        let mut has_token = vec![false; n + 1];
        for &p in positions {
            has_token[p] = true;
        }
        let mut bits = vec![0u8; n];
        for i in 2..=n {
            bits[i - 1] = if has_token[i] {
                bits[i - 2]
            } else {
                1 - bits[i - 2]
            };
        }
        // Wrap-around consistency at position 1 is forced by the parity of
        // the non-token count; odd n with odd token count always closes.
        assert_eq!(
            has_token[1],
            bits[0] == bits[n - 1],
            "token set does not close around the ring"
        );
        let tokens = positions.to_vec();
        debug_assert_eq!(tokens_of_bits(n, &bits), tokens);
        Ok(RingConfig { n, bits, tokens })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Token positions z(1) < ... < z(M), 1-indexed.
    pub fn token_positions(&self) -> &[usize] {
        &self.tokens
    }

    /// M, the number of tokens. Always odd.
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// m = (M-1)/2, the number of pairs in any pairing of the tokens.
    pub fn pair_count(&self) -> usize {
        (self.tokens.len() - 1) / 2
    }

    pub fn is_legitimate(&self) -> bool {
        self.tokens.len() == 1
    }

    pub fn gaps(&self) -> GapVector {
        let m = self.tokens.len();
        let mut gaps = Vec::with_capacity(m);
        for i in 0..m {
            let next = self.tokens[(i + 1) % m];
            let cur = self.tokens[i];
            gaps.push(if i + 1 < m {
                next - cur
            } else {
                self.n - cur + next
            });
        }
        debug_assert_eq!(gaps.iter().sum::<usize>(), self.n);
        GapVector { n: self.n, gaps }
    }

    /// Minimal inter-token distance delta, the potential driving the
    /// per-stage stabilization bound. Fewer than 3 tokens count as already
    /// stabilized for that argument, so the convention there is 0.
    pub fn min_token_gap(&self) -> usize {
        if self.tokens.len() < 3 {
            return 0;
        }
        self.gaps().gaps().iter().copied().min().unwrap()
    }

    /// True iff the tokens admit a perfect matching of all but one into
    /// pairs of ring distance <= m. Exactly the configurations reachable by
    /// m bit flips from a one-token configuration.
    pub fn is_flip_m(&self, m: usize) -> bool {
        let count = self.tokens.len();
        if count > 2 * m + 1 {
            return false;
        }
        if count == 1 {
            return true;
        }
        let n = self.n;
        let dist = |a: usize, b: usize| {
            let d = self.tokens[b] - self.tokens[a];
            d.min(n - d)
        };
        // Backtracking over the at most 2m+1 tokens; the leftover token is
        // whichever remains unmatched.
        fn matchable(
            unmatched: &mut Vec<usize>,
            leftover_used: bool,
            m: usize,
            dist: &impl Fn(usize, usize) -> usize,
        ) -> bool {
            if unmatched.is_empty() {
                return true;
            }
            if unmatched.len() == 1 {
                return !leftover_used;
            }
            let a = unmatched[0];
            // Try leaving `a` over.
            if !leftover_used {
                let rest: Vec<usize> = unmatched[1..].to_vec();
                let mut rest = rest;
                if matchable(&mut rest, true, m, dist) {
                    return true;
                }
            }
            for j in 1..unmatched.len() {
                let b = unmatched[j];
                if dist(a, b) <= m {
                    let mut rest: Vec<usize> = unmatched
                        .iter()
                        .copied()
                        .filter(|&x| x != a && x != b)
                        .collect();
                    if matchable(&mut rest, leftover_used, m, dist) {
                        return true;
                    }
                }
            }
            false
        }
        let mut all: Vec<usize> = (0..count).collect();
        matchable(&mut all, false, m, &dist)
    }
}

impl GapVector {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn token_count(&self) -> usize {
        self.gaps.len()
    }

    /// Clockwise distance z_uv = z(v) - z(u) for token indices 1 <= u < v <= M.
    pub fn pairwise_distance(&self, u: usize, v: usize) -> usize {
        assert!(1 <= u && u < v && v <= self.gaps.len());
        self.gaps[u - 1..v - 1].iter().sum()
    }

    /// Directed distance of the pair (u, v): z_uv for Down, n - z_uv for Up.
    pub fn directed_distance(&self, u: usize, v: usize, dir: crate::Direction) -> usize {
        dir.directed_distance(self.pairwise_distance(u, v), self.n)
    }
}

// Generators for the named configuration families.

/// Three tokens with gaps as equal as integrality allows, smaller gaps
/// first: (q, q, q), (q, q, q+1) or (q, q+1, q+1) for n = 3q + {0,1,2}.
/// The fixed order keeps experiments reproducible; expected stabilization
/// time is symmetric in the gaps, so the order carries no bias.
pub fn gen_equilateral(n: usize) -> Result<RingConfig> {
    check_ring_size(n)?;
    let q = n / 3;
    let gaps = match n % 3 {
        0 => [q, q, q],
        1 => [q, q, q + 1],
        _ => [q, q + 1, q + 1],
    };
    RingConfig::from_tokens(n, &[1, 1 + gaps[0], 1 + gaps[0] + gaps[1]])
}

/// Every processor holds a token: all bits equal.
pub fn gen_full(n: usize) -> Result<RingConfig> {
    check_ring_size(n)?;
    RingConfig::from_bits(n, &vec![0u8; n])
}

/// Each bit reset independently and uniformly at random.
pub fn gen_random_bits(n: usize, seed: u64) -> Result<RingConfig> {
    check_ring_size(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
    RingConfig::from_bits(n, &bits)
}

/// The legitimate configuration with its single token at `position`.
pub fn gen_legitimate(n: usize, position: usize) -> Result<RingConfig> {
    RingConfig::from_tokens(n, &[position])
}

/// Flips the given bits of a legitimate configuration (token at 1).
pub fn gen_flip_m_at(n: usize, flip_positions: &[usize]) -> Result<RingConfig> {
    check_ring_size(n)?;
    let m = flip_positions.len();
    if n < 2 * m + 1 {
        return Err(Error::FlipCount { n, m });
    }
    let mut seen = vec![false; n + 1];
    for &p in flip_positions {
        if p < 1 || p > n {
            return Err(Error::TokenPositions {
                n,
                detail: format!("flip position {} out of range", p),
            });
        }
        if seen[p] {
            return Err(Error::DuplicateFlip(p));
        }
        seen[p] = true;
    }
    let base = gen_legitimate(n, 1)?;
    let mut bits = base.bits().to_vec();
    for &p in flip_positions {
        bits[p - 1] ^= 1;
    }
    RingConfig::from_bits(n, &bits)
}

/// Corrupts a legitimate configuration with m bit flips drawn uniformly
/// without replacement. The result always satisfies `is_flip_m(m)`.
pub fn gen_flip_m(n: usize, m: usize, seed: u64) -> Result<RingConfig> {
    check_ring_size(n)?;
    if n < 2 * m + 1 {
        return Err(Error::FlipCount { n, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, n, m)
        .iter()
        .map(|i| i + 1)
        .collect();
    picks.sort_unstable();
    gen_flip_m_at(n, &picks)
}

// Textual literal: `N=9;tokens=1,4,7` or `N=9;bits=010010010`.

impl fmt::Display for RingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={};bits=", self.n)?;
        for &b in &self.bits {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

impl FromStr for RingConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Literal(format!("{} (in `{}`)", msg, s));
        let mut parts = s.trim().splitn(2, ';');
        let head = parts.next().unwrap_or_default().trim();
        let body = parts
            .next()
            .ok_or_else(|| bad("expected two `;`-separated fields"))?
            .trim();
        let n: usize = head
            .strip_prefix("N=")
            .ok_or_else(|| bad("first field must be N=<odd size>"))?
            .trim()
            .parse()
            .map_err(|_| bad("cannot parse ring size"))?;
        if let Some(list) = body.strip_prefix("tokens=") {
            let mut positions = Vec::new();
            for item in list.split(',') {
                let p: usize = item
                    .trim()
                    .parse()
                    .map_err(|_| bad("cannot parse token position"))?;
                positions.push(p);
            }
            RingConfig::from_tokens(n, &positions)
        } else if let Some(pattern) = body.strip_prefix("bits=") {
            let mut bits = Vec::with_capacity(pattern.len());
            for ch in pattern.trim().chars() {
                match ch {
                    '0' => bits.push(0),
                    '1' => bits.push(1),
                    _ => return Err(bad("bits must be 0/1 characters")),
                }
            }
            RingConfig::from_bits(n, &bits)
        } else {
            Err(bad("second field must be tokens=... or bits=..."))
        }
    }
}
