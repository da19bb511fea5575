use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use ring_core::{ProtocolParams, RingConfig};
use serde::Serialize;

use crate::trial::{run_trial, TrialOptions, TrialOutcome};

/// Monte Carlo summary. `stats` is None whenever any trial was censored:
/// a truncated sample would bias every statistic, so none are reported.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub trials: u64,
    pub censored: u64,
    pub stats: Option<SummaryStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    /// (requested quantile, empirical value) pairs.
    pub quantiles: Vec<(f64, f64)>,
    /// (threshold t0, empirical P(T >= t0)) pairs.
    pub tail_probs: Vec<(f64, f64)>,
}

/// Runs `trials` independent trials. Trial `i` draws from stream `i` of a
/// ChaCha8 generator seeded with `base_seed`; the reduction runs in trial
/// order, so the summary is bit-identical at any rayon thread count.
pub fn monte_carlo(
    c: &RingConfig,
    params: &ProtocolParams,
    trials: u64,
    base_seed: u64,
    thresholds: &[f64],
    quantiles: &[f64],
) -> EstimateSummary {
    assert!(trials >= 1);
    for &q in quantiles {
        assert!((0.0..=1.0).contains(&q), "quantile {} out of range", q);
    }
    let opts = TrialOptions::default();
    let outcomes = run_all(c, params, trials, base_seed, &opts);
    summarize(&outcomes, thresholds, quantiles)
}

fn run_all(
    c: &RingConfig,
    params: &ProtocolParams,
    trials: u64,
    base_seed: u64,
    opts: &TrialOptions,
) -> Vec<TrialOutcome> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(i);
            run_trial(c, params, &mut rng, opts)
        })
        .collect()
}

fn summarize(outcomes: &[TrialOutcome], thresholds: &[f64], quantiles: &[f64]) -> EstimateSummary {
    let trials = outcomes.len() as u64;
    let censored = outcomes.iter().filter(|o| o.censored).count() as u64;
    if censored > 0 {
        return EstimateSummary {
            trials,
            censored,
            stats: None,
        };
    }
    let times: Vec<f64> = outcomes.iter().map(|o| o.time).collect();
    let mean = times.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    let std_error = (var / trials as f64).sqrt();
    let mut sorted = times.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let quantiles = quantiles
        .iter()
        .map(|&q| {
            // Nearest-rank: smallest value with at least q*trials mass.
            let rank = ((q * trials as f64).ceil() as usize).clamp(1, trials as usize);
            (q, sorted[rank - 1])
        })
        .collect();
    let tail_probs = thresholds
        .iter()
        .map(|&t0| {
            let hits = times.iter().filter(|&&t| t >= t0).count();
            (t0, hits as f64 / trials as f64)
        })
        .collect();
    EstimateSummary {
        trials,
        censored,
        stats: Some(SummaryStats {
            mean,
            std_error,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
            quantiles,
            tail_probs,
        }),
    }
}

/// Mean live-token count at each sample time, estimated over `trials`
/// seeded runs. Sample times must be non-decreasing; the synchronous
/// variant requires integer times.
pub fn token_count_curve(
    c: &RingConfig,
    params: &ProtocolParams,
    trials: u64,
    sample_times: &[f64],
    base_seed: u64,
) -> Vec<f64> {
    assert!(trials >= 1);
    assert!(
        sample_times.windows(2).all(|w| w[0] <= w[1]),
        "sample times must be sorted"
    );
    assert!(sample_times.iter().all(|&t| t >= 0.0));
    if params.is_sync() {
        assert!(
            sample_times.iter().all(|&t| t.fract() == 0.0),
            "synchronous sampling needs integer times"
        );
    }
    let counts: Vec<Vec<usize>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(i);
            let opts = TrialOptions {
                record_trace: true,
                time_limit: Some(f64::INFINITY),
            };
            let out = run_trial(c, params, &mut rng, &opts);
            let trace = out.trace.expect("trace requested");
            sample_trace(&trace, sample_times)
        })
        .collect();
    let mut means = vec![0.0f64; sample_times.len()];
    for row in &counts {
        for (acc, &m) in means.iter_mut().zip(row) {
            *acc += m as f64;
        }
    }
    for acc in &mut means {
        *acc /= trials as f64;
    }
    means
}

/// Token count at each sample time: the last trace entry at or before it.
fn sample_trace(trace: &[(f64, usize)], sample_times: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sample_times.len());
    let mut i = 0;
    for &t in sample_times {
        while i + 1 < trace.len() && trace[i + 1].0 <= t {
            i += 1;
        }
        out.push(trace[i].1);
    }
    out
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// CSV rows `trial,time,token_count` for recorded traces.
pub fn write_trace_csv<W: std::io::Write>(
    w: &mut W,
    traces: &[(u64, Vec<(f64, usize)>)],
) -> std::io::Result<()> {
    writeln!(w, "trial,time,token_count")?;
    for (trial, trace) in traces {
        for (t, m) in trace {
            writeln!(w, "{},{},{}", trial, t, m)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ring_core::{gen_equilateral, gen_full, gen_legitimate};

    #[test]
    fn legitimate_summary_is_zero() {
        let c = gen_legitimate(9, 4).unwrap();
        let params = ProtocolParams::sync(0.5).unwrap();
        let s = monte_carlo(&c, &params, 100, 7, &[1.0], &[0.5]);
        let stats = s.stats.unwrap();
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.std_error, 0.0);
        assert_eq!(stats.tail_probs[0].1, 0.0);
    }

    #[test]
    fn equilateral_mean_matches_triangle_value() {
        // gaps (3,3,3), D=1/4: expected stabilization 27/(0.25 * 9) = 12.
        let c = gen_equilateral(9).unwrap();
        let params = ProtocolParams::sync(0.5).unwrap();
        let s = monte_carlo(&c, &params, 30000, 42, &[], &[0.5]);
        let stats = s.stats.unwrap();
        assert!(
            (stats.ci95.0..=stats.ci95.1).contains(&12.0),
            "ci95 {:?}",
            stats.ci95
        );
    }

    #[test]
    fn curve_starts_at_n_and_ends_at_one() {
        let c = gen_full(9).unwrap();
        let params = ProtocolParams::asynchronous(1.0).unwrap();
        let curve = token_count_curve(&c, &params, 500, &[0.0, 0.5, 1e6], 9);
        assert_eq!(curve[0], 9.0);
        assert!(curve[1] < 9.0);
        assert_eq!(curve[2], 1.0);
    }

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - 0.5 < 0.11);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.05);
    }

    #[test]
    fn summary_serializes_to_json() {
        let c = gen_legitimate(5, 1).unwrap();
        let params = ProtocolParams::sync(0.5).unwrap();
        let s = monte_carlo(&c, &params, 10, 1, &[2.0], &[0.25, 0.5]);
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["trials"], 10);
        assert!(json["stats"]["mean"].is_number());
    }
}
