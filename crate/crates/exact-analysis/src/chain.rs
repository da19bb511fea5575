//! Reachable-state enumeration for the token chain.
//!
//! States are sorted 1-indexed token position vectors.  A state with a single
//! token is absorbing and gets an empty transition row.  The synchronous
//! kernel enumerates all 2^M mover subsets of a state and aggregates the
//! successors by (successor, mover count), so a row stores counts rather than
//! probabilities; the caller turns a count into a probability with whatever
//! arithmetic it is running (f64, mod p, or big rational).  The asynchronous
//! kernel stores one arc per token with `movers = 1`.

use std::collections::HashMap;

use ring_core::RingConfig;

use crate::{Error, Result, SolveOptions};

pub(crate) type Key = Vec<u16>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Kernel {
    Sync,
    Async,
}

#[derive(Clone, Debug)]
pub(crate) struct Arc {
    pub succ: u32,
    /// How many tokens moved on this arc (sync only; always 1 for async).
    pub movers: u8,
    /// Number of mover subsets that land on `succ` with that mover count.
    pub count: u64,
}

#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub tokens: u8,
    pub arcs: Vec<Arc>,
}

#[derive(Debug)]
pub(crate) struct Chain {
    pub n: usize,
    pub kernel: Kernel,
    pub reduced: bool,
    pub start: u32,
    pub states: Vec<Key>,
    pub rows: Vec<Row>,
}

/// Rotating the whole ring does not change the law of the chain, so when
/// reduction is on every state is replaced by the representative that lists
/// the lexicographically smallest gap cycle starting from position 1.
pub(crate) fn canonical_key(key: &[u16], n: usize, reduced: bool) -> Key {
    if !reduced {
        return key.to_vec();
    }
    if key.len() == 1 {
        return vec![1];
    }
    let m = key.len();
    let mut gaps = vec![0u16; m];
    for i in 0..m {
        let next = key[(i + 1) % m];
        let cur = key[i];
        gaps[i] = if next > cur {
            next - cur
        } else {
            next + n as u16 - cur
        };
    }
    let mut best = 0usize;
    for cand in 1..m {
        for off in 0..m {
            let a = gaps[(cand + off) % m];
            let b = gaps[(best + off) % m];
            if a != b {
                if a < b {
                    best = cand;
                }
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(m);
    let mut pos = 1u16;
    for off in 0..m {
        out.push(pos);
        pos += gaps[(best + off) % m];
    }
    debug_assert_eq!(pos as usize, n + 1);
    out
}

/// Apply one move set: `moved[i]` says token i steps clockwise.  Colliding
/// pairs annihilate; a token landing where another just left survives.
pub(crate) fn apply_moves(n: usize, tokens: &[u16], moved_mask: u32) -> Key {
    let mut cand: Vec<u16> = tokens
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if moved_mask >> i & 1 == 1 {
                p % n as u16 + 1
            } else {
                p
            }
        })
        .collect();
    cand.sort_unstable();
    let mut out = Vec::with_capacity(cand.len());
    let mut i = 0;
    while i < cand.len() {
        if i + 1 < cand.len() && cand[i] == cand[i + 1] {
            i += 2;
        } else {
            out.push(cand[i]);
            i += 1;
        }
    }
    debug_assert_eq!(out.len() % 2, 1, "odd token parity must be preserved");
    out
}

pub(crate) fn build_chain(c0: &RingConfig, kernel: Kernel, opts: &SolveOptions) -> Result<Chain> {
    let n = c0.n();
    let m0 = c0.token_count();
    if kernel == Kernel::Sync && m0 > 20 {
        return Err(Error::MoveFanout { tokens: m0 });
    }
    let reduced = opts.symmetry_reduction;
    let budget = opts.budget_states;

    let start_key: Key = c0.token_positions().iter().map(|&p| p as u16).collect();
    let start_key = canonical_key(&start_key, n, reduced);

    let mut states: Vec<Key> = Vec::new();
    let mut index: HashMap<Key, u32> = HashMap::new();
    let mut rows: Vec<Row> = Vec::new();

    let intern = |key: Key, states: &mut Vec<Key>, index: &mut HashMap<Key, u32>| -> u32 {
        if let Some(&i) = index.get(&key) {
            return i;
        }
        let i = states.len() as u32;
        index.insert(key.clone(), i);
        states.push(key);
        i
    };

    let start = intern(start_key, &mut states, &mut index);
    let mut frontier = 0usize;
    while frontier < states.len() {
        if states.len() > budget {
            return Err(Error::StateBudget {
                states: states.len(),
                budget,
            });
        }
        let key = states[frontier].clone();
        let m = key.len();
        if m == 1 {
            rows.push(Row {
                tokens: 1,
                arcs: Vec::new(),
            });
            frontier += 1;
            continue;
        }
        // counts[(succ, movers)] accumulates over mover subsets
        let mut counts: HashMap<(u32, u8), u64> = HashMap::new();
        match kernel {
            Kernel::Sync => {
                for mask in 0..(1u32 << m) {
                    let succ = canonical_key(&apply_moves(n, &key, mask), n, reduced);
                    let idx = intern(succ, &mut states, &mut index);
                    *counts.entry((idx, mask.count_ones() as u8)).or_insert(0) += 1;
                }
            }
            Kernel::Async => {
                for i in 0..m {
                    let succ = canonical_key(&apply_moves(n, &key, 1 << i), n, reduced);
                    let idx = intern(succ, &mut states, &mut index);
                    *counts.entry((idx, 1)).or_insert(0) += 1;
                }
            }
        }
        let mut arcs: Vec<Arc> = counts
            .into_iter()
            .map(|((succ, movers), count)| Arc {
                succ,
                movers,
                count,
            })
            .collect();
        arcs.sort_unstable_by_key(|a| (a.succ, a.movers));
        rows.push(Row {
            tokens: m as u8,
            arcs,
        });
        frontier += 1;
    }
    if states.len() > budget {
        return Err(Error::StateBudget {
            states: states.len(),
            budget,
        });
    }

    Ok(Chain {
        n,
        kernel,
        reduced,
        start,
        states,
        rows,
    })
}

impl Chain {
    /// Indices of non-absorbing states plus the reverse map
    /// (state index -> position in the transient ordering).
    pub(crate) fn transients(&self) -> (Vec<u32>, Vec<Option<u32>>) {
        let mut list = Vec::new();
        let mut back = vec![None; self.states.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if row.tokens > 1 {
                back[i] = Some(list.len() as u32);
                list.push(i as u32);
            }
        }
        (list, back)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moves_cancel_colliding_pairs() {
        // tokens 2 and 3 collide when 2 moves and 3 stays
        assert_eq!(apply_moves(5, &[2, 3, 5], 0b001), vec![5]);
        // mover onto a just-vacated slot survives
        assert_eq!(apply_moves(5, &[2, 3, 5], 0b011), vec![3, 4, 5]);
    }

    #[test]
    fn wrap_move_cancels_on_position_one() {
        // token at 5 moves to 1 where a stayer sits
        assert_eq!(apply_moves(5, &[1, 3, 5], 0b100), vec![3]);
    }

    #[test]
    fn canonical_rotation_identifies_rotated_configs() {
        let a = canonical_key(&[1, 4, 7], 9, true);
        let b = canonical_key(&[2, 5, 8], 9, true);
        let c = canonical_key(&[3, 6, 9], 9, true);
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert_eq!(a, vec![1, 4, 7]);
    }

    #[test]
    fn canonical_picks_smallest_gap_rotation() {
        // gaps of [1,2,9] on n=11: (1,7,3); minimal rotation (1,7,3) vs (7,3,1) vs (3,1,7)
        let k = canonical_key(&[1, 2, 9], 11, true);
        // minimal gap cycle is (1,7,3) -> positions 1,2,9
        assert_eq!(k, vec![1, 2, 9]);
        // a rotated copy lands on the same representative
        let r = canonical_key(&[3, 4, 11], 11, true);
        assert_eq!(r, k);
    }

    #[test]
    fn sync_row_counts_sum_to_mask_count() {
        let c0 = "N=9;tokens=1,4,7".parse::<RingConfig>().unwrap();
        let chain = build_chain(&c0, Kernel::Sync, &SolveOptions::default()).unwrap();
        for row in &chain.rows {
            if row.tokens <= 1 {
                continue;
            }
            let total: u64 = row.arcs.iter().map(|a| a.count).sum();
            assert_eq!(total, 1u64 << row.tokens);
        }
    }

    #[test]
    fn reduction_shrinks_state_count() {
        let c0 = "N=9;tokens=1,4,7".parse::<RingConfig>().unwrap();
        let full = build_chain(&c0, Kernel::Sync, &SolveOptions::default()).unwrap();
        let red = build_chain(
            &c0,
            Kernel::Sync,
            &SolveOptions {
                symmetry_reduction: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(red.states.len() < full.states.len());
    }

    #[test]
    fn budget_error_reports_state_count() {
        let c0 = "N=9;tokens=1,4,7".parse::<RingConfig>().unwrap();
        let err = build_chain(
            &c0,
            Kernel::Sync,
            &SolveOptions {
                budget_states: 3,
                ..Default::default()
            },
        )
        .unwrap_err();
        match err {
            Error::StateBudget { states, budget } => {
                assert!(states > 3);
                assert_eq!(budget, 3);
            }
            other => panic!("wrong error: {other}"),
        }
    }
}
