use std::collections::HashMap;
use std::f64::consts::PI;
use std::io;

use rayon::prelude::*;
use ring_core::RingConfig;

use crate::driver::{
    assemble, check_term_budget, directed_layouts, subset_keys, DirectedLayout, Kahan,
};
use crate::walk::{g, h};
use crate::{Error, Result};

/// One addend of the alternating expectation sum, for audit dumps.
#[derive(Debug, Clone)]
pub struct TermRecord {
    /// Index of the directed pairing (pairing order, then direction mask).
    pub pairing_id: u32,
    /// Nonempty subset of that pairing's pairs fed to the kernel F.
    pub subset_mask: u32,
    /// Directed sign of the pairing.
    pub sign: i8,
    pub f_value: f64,
    pub g_value: f64,
    pub contribution: f64,
}

/// Mode tables for one (ring size, pass probability): g rows per directed
/// distance in use, the h row, and the denominator floor.
struct ModeTables {
    n: usize,
    floor: f64,
    h_row: Vec<f64>,
    g_rows: HashMap<u16, Vec<f64>>,
}

impl ModeTables {
    fn new(layouts: &[DirectedLayout], n: usize, r: f64) -> Self {
        let u = 1.0 / n as f64;
        let h_row: Vec<f64> = (1..n).map(|j| h(j, u, r)).collect();
        let mut g_rows: HashMap<u16, Vec<f64>> = HashMap::new();
        for l in layouts {
            for &z in &l.z {
                g_rows.entry(z).or_insert_with(|| {
                    let y = z as f64 * u;
                    (1..n).map(|j| g(j, y, u)).collect()
                });
            }
        }
        // Every h factor is at most 1 - floor, so no mode denominator in
        // f_value can drop under the floor.
        let floor = 2.0 * r * (1.0 - r) * (1.0 - (PI * u).cos());
        ModeTables {
            n,
            floor,
            h_row,
            g_rows,
        }
    }

    /// F over the mode lattice {1..n-1}^k at the sorted distance tuple:
    /// -(-1/n)^k sum of (product of g) / (1 - product of h).
    fn f_value(&self, key: &[u16]) -> f64 {
        let rows: Vec<&[f64]> = key.iter().map(|z| self.g_rows[z].as_slice()).collect();
        let mut acc = Kahan::new();
        mode_sum(&rows, &self.h_row, 0, 1.0, 1.0, self.floor, &mut acc);
        -(-1.0 / self.n as f64).powi(key.len() as i32) * acc.sum()
    }
}

fn mode_sum(
    rows: &[&[f64]],
    h_row: &[f64],
    depth: usize,
    g_prod: f64,
    h_prod: f64,
    floor: f64,
    acc: &mut Kahan,
) {
    let row = rows[depth];
    if depth + 1 == rows.len() {
        for (i, &gv) in row.iter().enumerate() {
            let den = 1.0 - h_prod * h_row[i];
            assert!(
                den >= 0.999 * floor,
                "mode denominator {den} under the floor {floor}"
            );
            acc.add(g_prod * gv / den);
        }
    } else {
        for (i, &gv) in row.iter().enumerate() {
            mode_sum(
                rows,
                h_row,
                depth + 1,
                g_prod * gv,
                h_prod * h_row[i],
                floor,
                acc,
            );
        }
    }
}

fn finite_parts(c: &RingConfig, r: f64) -> Result<(Vec<DirectedLayout>, HashMap<Vec<u16>, f64>)> {
    if c.token_count() < 3 {
        return Err(Error::InvalidInput(format!(
            "the expectation expansion needs at least 3 tokens, got {}",
            c.token_count()
        )));
    }
    if !(r > 0.0 && r < 1.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pass probability must lie strictly between 0 and 1, got {r}"
        )));
    }
    check_term_budget(c.token_count(), c.n())?;
    let layouts = directed_layouts(c)?;
    let tables = ModeTables::new(&layouts, c.n(), r);
    let keys = subset_keys(&layouts);
    let memo: HashMap<Vec<u16>, f64> = keys
        .into_par_iter()
        .map(|k| {
            let v = tables.f_value(&k);
            (k, v)
        })
        .collect();
    Ok((layouts, memo))
}

/// Exact expected synchronous stabilization time by the alternating pairing
/// expansion, in f64.  Cost is (n-1)^m mode tuples per directed pairing,
/// refused past a 10^9 summand budget; the kernel is memoized over sorted
/// distance tuples, so the practical cost is far lower.
pub fn expected_time_finite(c: &RingConfig, r: f64) -> Result<f64> {
    let (layouts, memo) = finite_parts(c, r)?;
    let (value, _) = assemble(&layouts, c.n(), |k| (memo[k], 0.0), None);
    Ok(value)
}

/// Every addend of the expansion, in evaluation order.  Their sum is
/// `expected_time_finite` up to summation order.
pub fn finite_expression_terms(c: &RingConfig, r: f64) -> Result<Vec<TermRecord>> {
    let (layouts, memo) = finite_parts(c, r)?;
    let mut records = Vec::new();
    assemble(&layouts, c.n(), |k| (memo[k], 0.0), Some(&mut records));
    Ok(records)
}

pub fn write_terms_csv<W: io::Write>(w: &mut W, records: &[TermRecord]) -> io::Result<()> {
    writeln!(
        w,
        "pairing_id,subset_mask,sign,F_value,G_value,contribution"
    )?;
    for t in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            t.pairing_id, t.subset_mask, t.sign, t.f_value, t.g_value, t.contribution
        )?;
    }
    Ok(())
}
