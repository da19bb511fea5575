use ring_core::RingConfig;

use crate::chain::{build_chain, Kernel};
use crate::{Error, Result, SolveOptions};

/// Distribution of the synchronous stabilization time: returns
/// P(T <= t) for t = 0..=t_max by pushing the state distribution through
/// the transition kernel and accumulating mass that reaches one token.
pub fn cdf_sync(c0: &RingConfig, r: f64, t_max: usize, opts: &SolveOptions) -> Result<Vec<f64>> {
    if !(r > 0.0 && r < 1.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "pass probability must lie strictly between 0 and 1, got {r}"
        )));
    }
    let chain = build_chain(c0, Kernel::Sync, opts)?;
    let (trans, back) = chain.transients();
    let s = trans.len();

    // arc probabilities, flattened per transient row: (target transient or
    // absorbed, probability)
    enum Dest {
        Transient(usize),
        Absorbed,
    }
    let mut rows: Vec<Vec<(Dest, f64)>> = Vec::with_capacity(s);
    for &si in &trans {
        let row = &chain.rows[si as usize];
        let m = row.tokens as i32;
        let arcs = row
            .arcs
            .iter()
            .map(|arc| {
                let p = arc.count as f64
                    * r.powi(arc.movers as i32)
                    * (1.0 - r).powi(m - arc.movers as i32);
                let dest = match back[arc.succ as usize] {
                    Some(tj) => Dest::Transient(tj as usize),
                    None => Dest::Absorbed,
                };
                (dest, p)
            })
            .collect();
        rows.push(arcs);
    }

    let mut dist = vec![0.0f64; s];
    let mut absorbed = 0.0f64;
    match back[chain.start as usize] {
        Some(ti) => dist[ti as usize] = 1.0,
        None => absorbed = 1.0,
    }

    let mut out = Vec::with_capacity(t_max + 1);
    out.push(absorbed);
    let mut next = vec![0.0f64; s];
    for _ in 1..=t_max {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (ti, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (dest, p) in &rows[ti] {
                match dest {
                    Dest::Transient(tj) => next[*tj] += mass * p,
                    Dest::Absorbed => absorbed += mass * p,
                }
            }
        }
        std::mem::swap(&mut dist, &mut next);
        out.push(absorbed);
    }
    Ok(out)
}
