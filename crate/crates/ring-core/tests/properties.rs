use proptest::prelude::*;
use ring_core::{gen_flip_m, RingConfig};

fn odd_ring() -> impl Strategy<Value = usize> {
    (1usize..=7).prop_map(|k| 2 * k + 1)
}

proptest! {
    // Token parity: every bit vector on an odd ring yields an odd token count.
    #[test]
    fn token_count_is_odd(n in odd_ring(), seed in any::<u64>()) {
        let mut bits = vec![0u8; n];
        let mut s = seed;
        for b in bits.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *b = (s >> 33) as u8 & 1;
        }
        let c = RingConfig::from_bits(n, &bits).unwrap();
        prop_assert_eq!(c.token_count() % 2, 1);
    }

    // Round trip: rebuilding from the token set reproduces the token set.
    #[test]
    fn token_round_trip(n in odd_ring(), seed in any::<u64>()) {
        let c = ring_core::gen_random_bits(n, seed).unwrap();
        let back = RingConfig::from_tokens(n, c.token_positions()).unwrap();
        prop_assert_eq!(back.token_positions(), c.token_positions());
    }

    // Gap sum: gaps always add up to the ring size.
    #[test]
    fn gaps_sum_to_n(n in odd_ring(), seed in any::<u64>()) {
        let c = ring_core::gen_random_bits(n, seed).unwrap();
        prop_assert_eq!(c.gaps().gaps().iter().sum::<usize>(), n);
    }

    // Generated flip-m configurations satisfy their own characterization.
    #[test]
    fn flip_m_self_consistent(k in 1usize..=6, m in 0usize..=4, seed in any::<u64>()) {
        let n = (2 * m + 1).max(2 * k + 1) | 1;
        let c = gen_flip_m(n, m, seed).unwrap();
        prop_assert!(c.is_flip_m(m), "n={} m={} tokens={:?}", n, m, c.token_positions());
    }

    // Literal parse of the canonical rendering is the identity.
    #[test]
    fn literal_round_trip(n in odd_ring(), seed in any::<u64>()) {
        let c = ring_core::gen_random_bits(n, seed).unwrap();
        let back: RingConfig = c.to_string().parse().unwrap();
        prop_assert_eq!(back, c);
    }
}
