use rand::Rng;
use ring_core::{ProtocolParams, RingConfig};

use crate::step::step_tokens_in_place;

/// Result of one protocol run: steps (synchronous) or elapsed time
/// (asynchronous) until a single token remained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub time: f64,
    /// The run hit its time limit before stabilizing; `time` is the limit.
    pub censored: bool,
    /// (time, live token count) at the start and after every annihilation.
    pub trace: Option<Vec<(f64, usize)>>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrialOptions {
    /// None picks `default_time_limit`, an order of magnitude above the
    /// worst-case expected stabilization time.
    pub time_limit: Option<f64>,
    pub record_trace: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            time_limit: None,
            record_trace: false,
        }
    }
}

/// 50 n^2 / D steps or time units.
pub fn default_time_limit(n: usize, params: &ProtocolParams) -> f64 {
    50.0 * (n * n) as f64 / params.diffusion()
}

/// Runs one trial of either variant to stabilization or censoring.
pub fn run_trial<R: Rng + ?Sized>(
    c: &RingConfig,
    params: &ProtocolParams,
    rng: &mut R,
    opts: &TrialOptions,
) -> TrialOutcome {
    match *params {
        ProtocolParams::Synchronous { r } => sync_run(c, r, rng, opts),
        ProtocolParams::Asynchronous { lambda } => async_run(c, lambda, rng, opts),
    }
}

fn sync_run<R: Rng + ?Sized>(
    c: &RingConfig,
    r: f64,
    rng: &mut R,
    opts: &TrialOptions,
) -> TrialOutcome {
    let n = c.n();
    let limit = opts
        .time_limit
        .unwrap_or_else(|| default_time_limit(n, &ProtocolParams::Synchronous { r }));
    let limit_steps = limit.floor() as u64;
    let mut tokens = c.token_positions().to_vec();
    let mut scratch = Vec::with_capacity(tokens.len());
    let mut trace = opts.record_trace.then(|| vec![(0.0, tokens.len())]);
    let mut t: u64 = 0;
    while tokens.len() > 1 {
        if t >= limit_steps {
            return TrialOutcome {
                time: t as f64,
                censored: true,
                trace,
            };
        }
        let before = tokens.len();
        step_tokens_in_place(n, &mut tokens, &mut scratch, r, rng);
        t += 1;
        if tokens.len() != before {
            if let Some(tr) = trace.as_mut() {
                tr.push((t as f64, tokens.len()));
            }
        }
    }
    TrialOutcome {
        time: t as f64,
        censored: false,
        trace,
    }
}

/// Continuous-time run: with M live tokens the next event comes after an
/// Exp(M lambda) holding time; the mover is uniform among live tokens and
/// advances one position clockwise, annihilating pairwise on arrival at an
/// occupied position.
pub fn async_run<R: Rng + ?Sized>(
    c: &RingConfig,
    lambda: f64,
    rng: &mut R,
    opts: &TrialOptions,
) -> TrialOutcome {
    assert!(lambda > 0.0, "pass rate out of range: {}", lambda);
    let n = c.n();
    let limit = opts
        .time_limit
        .unwrap_or_else(|| default_time_limit(n, &ProtocolParams::Asynchronous { lambda }));
    let mut tokens = c.token_positions().to_vec();
    let mut trace = opts.record_trace.then(|| vec![(0.0, tokens.len())]);
    let mut t = 0.0f64;
    while tokens.len() > 1 {
        let m = tokens.len();
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / (m as f64 * lambda);
        if t > limit {
            return TrialOutcome {
                time: limit,
                censored: true,
                trace,
            };
        }
        let idx = rng.random_range(0..m);
        let dest = tokens[idx] % n + 1;
        match tokens.binary_search(&dest) {
            Ok(hit) => {
                // Arrival on an occupied position: both tokens go.
                let (a, b) = (idx.min(hit), idx.max(hit));
                tokens.remove(b);
                tokens.remove(a);
                if let Some(tr) = trace.as_mut() {
                    tr.push((t, tokens.len()));
                }
            }
            Err(_) => {
                tokens[idx] = dest;
                tokens.sort_unstable();
            }
        }
        debug_assert!(tokens.len() % 2 == 1);
    }
    TrialOutcome {
        time: t,
        censored: false,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use ring_core::{gen_full, gen_legitimate};

    #[test]
    fn single_token_is_instant() {
        let c = gen_legitimate(7, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for params in [
            ProtocolParams::sync(0.5).unwrap(),
            ProtocolParams::asynchronous(1.0).unwrap(),
        ] {
            let out = run_trial(&c, &params, &mut rng, &TrialOptions::default());
            assert_eq!(out.time, 0.0);
            assert!(!out.censored);
        }
    }

    #[test]
    fn trace_is_odd_and_non_increasing() {
        let c = gen_full(9).unwrap();
        let params = ProtocolParams::sync(0.5).unwrap();
        let opts = TrialOptions {
            record_trace: true,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let out = run_trial(&c, &params, &mut rng, &opts);
            let trace = out.trace.unwrap();
            assert_eq!(trace[0], (0.0, 9));
            assert_eq!(trace.last().unwrap().1, 1);
            for w in trace.windows(2) {
                assert!(w[0].1 > w[1].1);
                assert!(w[0].0 < w[1].0);
            }
            for &(_, m) in &trace {
                assert_eq!(m % 2, 1);
            }
        }
    }

    #[test]
    fn censoring_flags_truncated_runs() {
        let c = gen_full(9).unwrap();
        let params = ProtocolParams::sync(0.5).unwrap();
        let opts = TrialOptions {
            time_limit: Some(1.0),
            record_trace: false,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut censored = 0;
        for _ in 0..50 {
            let out = run_trial(&c, &params, &mut rng, &opts);
            if out.censored {
                censored += 1;
                assert_eq!(out.time, 1.0);
            }
        }
        assert!(
            censored > 0,
            "one-step limit must censor most full-ring runs"
        );
    }

    #[test]
    fn async_full_triangle_mean() {
        // n=3 full with rate 1: the first event always annihilates, so the
        // stabilization time is Exp(3) with mean 1/3.
        let c = gen_full(3).unwrap();
        let params = ProtocolParams::asynchronous(1.0).unwrap();
        let mut sum = 0.0;
        let trials = 20000;
        for i in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            rng.set_stream(i);
            sum += run_trial(&c, &params, &mut rng, &TrialOptions::default()).time;
        }
        let mean = sum / trials as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01, "mean {}", mean);
    }
}
