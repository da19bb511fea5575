use ring_core::{Direction, RingConfig};

use crate::combinat::enumerate_pairings;
use crate::finite::TermRecord;
use crate::{Error, Result};

/// Compensated accumulator.  The pairing sums alternate in sign and cancel
/// hard, so plain summation sheds digits.
#[derive(Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }
}

/// One directed pairing flattened against a concrete configuration: its
/// directed sign and the directed distance z_d of each pair.
pub(crate) struct DirectedLayout {
    pub sign: i8,
    pub z: Vec<u16>,
}

/// Hard cap on materialized directed pairings; past this the Vec alone
/// would dominate memory.
const DIRECTED_CAP: u64 = 1 << 20;

/// Summand-evaluation budget for the finite expression and its continuous
/// twin: (n-1)^m mode tuples for each of the M!/m! directed pairings.
pub(crate) const TERM_BUDGET: u128 = 1_000_000_000;

pub(crate) fn check_term_budget(m_tokens: usize, n: usize) -> Result<()> {
    let m = (m_tokens - 1) / 2;
    let mut terms: u128 = 1;
    for i in (m + 1)..=m_tokens {
        terms *= i as u128;
    }
    for _ in 0..m {
        terms = terms.saturating_mul((n - 1) as u128);
    }
    if terms > TERM_BUDGET {
        return Err(Error::TermBudget {
            terms,
            budget: TERM_BUDGET,
        });
    }
    Ok(())
}

/// All 2^m-directed versions of all pairings of the configuration's tokens,
/// in pairing order then ascending direction mask (bit i up = pair i up).
pub(crate) fn directed_layouts(c: &RingConfig) -> Result<Vec<DirectedLayout>> {
    let n = c.n();
    if n > u16::MAX as usize {
        return Err(Error::InvalidInput(format!(
            "ring size {n} exceeds the pairing machinery's limit of {}",
            u16::MAX
        )));
    }
    let pairings = enumerate_pairings(c.token_count())?;
    let m = (c.token_count() - 1) / 2;
    let directed = pairings.len() as u64 * (1u64 << m);
    if directed > DIRECTED_CAP {
        return Err(Error::TermBudget {
            terms: directed as u128,
            budget: DIRECTED_CAP as u128,
        });
    }
    let gaps = c.gaps();
    let mut out = Vec::with_capacity(directed as usize);
    for p in &pairings {
        let base: Vec<usize> = p
            .pairs()
            .iter()
            .map(|&(u, v)| gaps.pairwise_distance(u as usize, v as usize))
            .collect();
        for mask in 0u32..1 << m {
            let z: Vec<u16> = base
                .iter()
                .enumerate()
                .map(|(i, &zuv)| {
                    let dir = if mask >> i & 1 == 1 {
                        Direction::Up
                    } else {
                        Direction::Down
                    };
                    dir.directed_distance(zuv, n) as u16
                })
                .collect();
            let sign = if mask.count_ones() % 2 == 1 {
                -p.sign()
            } else {
                p.sign()
            };
            out.push(DirectedLayout { sign, z });
        }
    }
    Ok(out)
}

fn subset_key(z: &[u16], mask: u32) -> Vec<u16> {
    let mut key: Vec<u16> = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask >> i & 1 == 1)
        .map(|(_, &zi)| zi)
        .collect();
    key.sort_unstable();
    key
}

/// Distinct sorted distance tuples over all nonempty pair subsets of all
/// layouts; the kernel F is symmetric, so these are its argument classes.
pub(crate) fn subset_keys(layouts: &[DirectedLayout]) -> Vec<Vec<u16>> {
    let mut set = std::collections::BTreeSet::new();
    for l in layouts {
        let m = l.z.len();
        for mask in 1u32..1 << m {
            set.insert(subset_key(&l.z, mask));
        }
    }
    set.into_iter().collect()
}

/// The alternating double sum: over directed pairings and nonempty pair
/// subsets, directed sign times F(subset distances) times the complement's
/// absorption product G.  `kernel` maps a sorted distance tuple to
/// (F value, F truncation bound); the second return is the accumulated
/// bound, zero for exact kernels.  Sequential, so the compensated order is
/// reproducible.
pub(crate) fn assemble<K>(
    layouts: &[DirectedLayout],
    n: usize,
    mut kernel: K,
    mut records: Option<&mut Vec<TermRecord>>,
) -> (f64, f64)
where
    K: FnMut(&[u16]) -> (f64, f64),
{
    let nf = n as f64;
    let mut value = Kahan::new();
    let mut tail = Kahan::new();
    for (pid, layout) in layouts.iter().enumerate() {
        let m = layout.z.len();
        for mask in 1u32..1 << m {
            let key = subset_key(&layout.z, mask);
            let mut g_value = 1.0;
            for (i, &zi) in layout.z.iter().enumerate() {
                if mask >> i & 1 == 0 {
                    g_value *= 1.0 - zi as f64 / nf;
                }
            }
            let (f_value, f_tail) = kernel(&key);
            let contribution = layout.sign as f64 * f_value * g_value;
            value.add(contribution);
            tail.add(f_tail * g_value);
            if let Some(recs) = records.as_deref_mut() {
                recs.push(TermRecord {
                    pairing_id: pid as u32,
                    subset_mask: mask,
                    sign: layout.sign,
                    f_value,
                    g_value,
                    contribution,
                });
            }
        }
    }
    (value.sum(), tail.sum())
}
