use dynamics::{monte_carlo, token_count_curve, wilson_interval, EstimateSummary};
use exact_analysis::{
    exact_async, exact_sync, full_config_bounds, full_token_expectation_s_tilde, triangle_formula,
    worst_case_bound, SolveOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ring_core::{gen_equilateral, gen_flip_m, gen_full, ProtocolParams, RingConfig};
use serde::Serialize;

use crate::spec::mix_seed;
use crate::{Error, Result};

const STUDY_SALT: u64 = 0x7374_7564_7900;

fn variant_rate(params: &ProtocolParams) -> (String, f64) {
    match *params {
        ProtocolParams::Synchronous { r } => ("synchronous".into(), r),
        ProtocolParams::Asynchronous { lambda } => ("asynchronous".into(), lambda),
    }
}

/// Ordinary least squares of y against a single regressor plus intercept.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> FitReport {
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    // all-zero (or constant) responses fit perfectly unless residuals say no
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-18 {
        1.0
    } else {
        0.0
    };
    FitReport {
        slope,
        intercept,
        r_squared,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlipScalingEntry {
    pub n: usize,
    pub configs: usize,
    pub trials_per_config: u64,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub worst_case_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlEntry {
    pub n: usize,
    pub mean: f64,
    pub per_n: f64,
    pub per_n2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlipScalingReport {
    pub m: usize,
    pub variant: String,
    pub rate: f64,
    pub entries: Vec<FlipScalingEntry>,
    /// Fit of the mean against n, and against n^2. Restabilization from a
    /// bounded flip is linear, so the first should explain the data and the
    /// second should need a negative-curvature crutch.
    pub linear_fit: FitReport,
    pub quadratic_fit: FitReport,
    pub ratio_series: Vec<(usize, f64)>,
    pub control: Vec<ControlEntry>,
    /// The equilateral ratio E/n^2 converges to this: 1/(27 D).
    pub control_reference: f64,
}

/// Averages Monte Carlo means over `configs_per_n` random flip-m starts per
/// ring size, fits the growth against n and n^2, and runs an equilateral
/// control at the same sizes. Any censored trial aborts the study: a
/// truncated sample would bias the fit it exists to support.
pub fn study_flip_scaling(
    m: usize,
    n_list: &[usize],
    params: &ProtocolParams,
    trials: u64,
    configs_per_n: usize,
    seed: u64,
) -> Result<FlipScalingReport> {
    if n_list.len() < 3 {
        return Err(Error::Invalid(format!(
            "the scaling fit needs at least 3 ring sizes, got {}",
            n_list.len()
        )));
    }
    let lo = *n_list.iter().min().unwrap();
    let hi = *n_list.iter().max().unwrap();
    if (hi as f64) < 4.0 * lo as f64 {
        return Err(Error::Invalid(format!(
            "the size range must span at least 4x to separate n from n^2 growth; got {lo}..{hi}"
        )));
    }
    if trials < 2 || configs_per_n == 0 {
        return Err(Error::Invalid(
            "give at least 2 trials and 1 config per size".into(),
        ));
    }
    let d = params.diffusion();
    let (variant, rate) = variant_rate(params);

    let mut entries = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut means = Vec::with_capacity(configs_per_n);
        let mut single_se = 0.0;
        for k in 0..configs_per_n {
            let c = gen_flip_m(n, m, mix_seed(seed, n as u64, k as u64))?;
            let s = monte_carlo(
                &c,
                params,
                trials,
                mix_seed(seed ^ STUDY_SALT, n as u64, k as u64),
                &[],
                &[],
            );
            let stats = s.stats.ok_or_else(|| {
                Error::Engine(format!(
                    "flip study aborted: n={n}, sampled config {k}: {} of {trials} trials censored",
                    s.censored
                ))
            })?;
            means.push(stats.mean);
            single_se = stats.std_error;
        }
        let kf = means.len() as f64;
        let mean = means.iter().sum::<f64>() / kf;
        // spread across sampled configs already contains the per-config
        // Monte Carlo noise; with one config fall back to its own error
        let std_error = if means.len() > 1 {
            let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        } else {
            single_se
        };
        entries.push(FlipScalingEntry {
            n,
            configs: configs_per_n,
            trials_per_config: trials,
            mean,
            std_error,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
            worst_case_bound: worst_case_bound(n, d),
        });
    }

    let xs: Vec<f64> = entries.iter().map(|e| e.n as f64).collect();
    let xs2: Vec<f64> = entries.iter().map(|e| (e.n * e.n) as f64).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.mean).collect();
    let linear_fit = least_squares(&xs, &ys);
    let quadratic_fit = least_squares(&xs2, &ys);
    let ratio_series: Vec<(usize, f64)> =
        entries.iter().map(|e| (e.n, e.mean / e.n as f64)).collect();

    let mut control = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let c = gen_equilateral(n)?;
        let s = monte_carlo(
            &c,
            params,
            trials,
            mix_seed(seed ^ STUDY_SALT, n as u64, u64::MAX),
            &[],
            &[],
        );
        let stats = s.stats.ok_or_else(|| {
            Error::Engine(format!(
                "flip study aborted: equilateral control at n={n}: {} of {trials} trials censored",
                s.censored
            ))
        })?;
        control.push(ControlEntry {
            n,
            mean: stats.mean,
            per_n: stats.mean / n as f64,
            per_n2: stats.mean / (n * n) as f64,
        });
    }

    Ok(FlipScalingReport {
        m,
        variant,
        rate,
        entries,
        linear_fit,
        quadratic_fit,
        ratio_series,
        control,
        control_reference: 1.0 / (27.0 * d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// Solve the chain once and read off every three-token gap class.
    ExactThreeToken,
    /// Sample larger starts and estimate each by Monte Carlo.
    MonteCarlo { tokens: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjectureReport {
    pub n: usize,
    pub variant: String,
    pub rate: f64,
    pub mode: String,
    pub classes_scanned: u64,
    pub space_size: f64,
    pub coverage: f64,
    pub max_expected_time: f64,
    pub max_ci95: Option<(f64, f64)>,
    pub argmax_gaps: Vec<usize>,
    /// Whether the maximum sits at gaps as equal as integrality allows.
    pub near_equilateral: bool,
    pub three_token_reference: f64,
    pub equilateral_value: f64,
    pub statement: String,
}

/// All (a, b, c) with 1 <= a <= b <= c and a+b+c = n: the three-token gap
/// classes up to rotation and relabeling.
fn three_token_partitions(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 1..=n / 3 {
        for b in a..=(n - a) / 2 {
            out.push((a, b, n - a - b));
        }
    }
    out
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Scans for the worst starting configuration at one ring size. The exact
/// mode is exhaustive over three-token classes; the Monte Carlo mode samples
/// larger token counts. Either way the report states its coverage and
/// claims consistency, never proof.
pub fn study_conjecture_scan(
    n: usize,
    params: &ProtocolParams,
    mode: ScanMode,
    sample_size: usize,
    trials: u64,
    seed: u64,
    budget_states: usize,
) -> Result<ConjectureReport> {
    let d = params.diffusion();
    let (variant, rate) = variant_rate(params);
    let partitions = three_token_partitions(n);
    match mode {
        ScanMode::ExactThreeToken => {
            let opts = SolveOptions {
                budget_states,
                symmetry_reduction: true,
            };
            let start = RingConfig::from_tokens(n, &[1, 2, 3])?;
            let sol = match *params {
                ProtocolParams::Synchronous { r } => exact_sync(&start, r, &opts)?,
                ProtocolParams::Asynchronous { lambda } => exact_async(&start, lambda, &opts)?,
            };
            let mut best = (0.0f64, (0usize, 0usize, 0usize));
            for &(a, b, c) in &partitions {
                let config = RingConfig::from_tokens(n, &[1, 1 + a, 1 + a + b])?;
                let v = sol.value(&config).ok_or_else(|| {
                    Error::Engine(format!("gap class ({a},{b},{c}) missing from the solution"))
                })?;
                if v > best.0 {
                    best = (v, (a, b, c));
                }
            }
            let (a, b, c) = best.1;
            let near_equilateral = c - a <= 1;
            let equilateral_value = sol
                .value(&gen_equilateral(n)?)
                .expect("equilateral class solved");
            let statement = format!(
                "exhaustive scan of all {} three-token gap classes at n={n}: the maximum \
                 expected stabilization time {:.6} occurs at gaps ({a},{b},{c}), which {} the \
                 near-equilateral class; a full check at one ring size and token count proves \
                 nothing beyond it",
                partitions.len(),
                best.0,
                if near_equilateral { "is" } else { "is not" },
            );
            Ok(ConjectureReport {
                n,
                variant,
                rate,
                mode: "exact".into(),
                classes_scanned: partitions.len() as u64,
                space_size: partitions.len() as f64,
                coverage: 1.0,
                max_expected_time: best.0,
                max_ci95: None,
                argmax_gaps: vec![a, b, c],
                near_equilateral,
                three_token_reference: best.0,
                equilateral_value,
                statement,
            })
        }
        ScanMode::MonteCarlo { tokens } => {
            if tokens < 5 || tokens % 2 == 0 {
                return Err(Error::Invalid(format!(
                    "the sampling mode scans odd token counts of at least 5, got {tokens}"
                )));
            }
            if tokens > n {
                return Err(Error::Invalid(format!(
                    "cannot place {tokens} tokens on {n} positions"
                )));
            }
            if sample_size == 0 || trials < 2 {
                return Err(Error::Invalid("give at least 1 sample and 2 trials".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, n as u64, tokens as u64));
            let mut best: Option<(f64, (f64, f64), Vec<usize>)> = None;
            for k in 0..sample_size {
                let mut positions: Vec<usize> = rand::seq::index::sample(&mut rng, n, tokens)
                    .into_iter()
                    .map(|p| p + 1)
                    .collect();
                positions.sort_unstable();
                let config = RingConfig::from_tokens(n, &positions)?;
                let s = monte_carlo(
                    &config,
                    params,
                    trials,
                    mix_seed(seed ^ STUDY_SALT, n as u64, k as u64),
                    &[],
                    &[],
                );
                let stats = s.stats.ok_or_else(|| {
                    Error::Engine(format!(
                        "conjecture scan aborted: sample {k}: {} of {trials} trials censored",
                        s.censored
                    ))
                })?;
                if best.as_ref().map(|b| stats.mean > b.0).unwrap_or(true) {
                    best = Some((stats.mean, stats.ci95, config.gaps().gaps().to_vec()));
                }
            }
            let (max_mean, max_ci95, argmax_gaps) = best.expect("at least one sample");
            let three_token_reference = partitions
                .iter()
                .map(|&(a, b, c)| {
                    triangle_formula(a as f64, b as f64, c as f64, d).expect("positive gaps")
                })
                .fold(0.0f64, f64::max);
            let gap_lo = *argmax_gaps.iter().min().unwrap();
            let gap_hi = *argmax_gaps.iter().max().unwrap();
            let space_size = binomial_f64(n, tokens);
            let coverage = sample_size as f64 / space_size;
            let statement = format!(
                "sampled {sample_size} of about {space_size:.3e} {tokens}-token position sets \
                 at n={n} ({coverage:.2e} of the space): largest observed mean {max_mean:.4} \
                 (ci95 [{:.4}, {:.4}]) at gaps {argmax_gaps:?}; the three-token maximum is \
                 {three_token_reference:.4}; a sample at this coverage is evidence, not proof, \
                 and cannot rule out counterexamples outside it",
                max_ci95.0, max_ci95.1,
            );
            Ok(ConjectureReport {
                n,
                variant,
                rate,
                mode: "monte_carlo".into(),
                classes_scanned: sample_size as u64,
                space_size,
                coverage,
                max_expected_time: max_mean,
                max_ci95: Some(max_ci95),
                argmax_gaps,
                near_equilateral: gap_hi - gap_lo <= 1,
                three_token_reference,
                equilateral_value: (n * n) as f64 / (27.0 * d),
                statement,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub s_emp: f64,
    pub s_tilde: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullStudyReport {
    pub n: usize,
    pub variant: String,
    pub rate: f64,
    pub trials: u64,
    pub summary: EstimateSummary,
    pub mean_bound: f64,
    pub ci95_upper_within_mean_bound: bool,
    pub tail_threshold: f64,
    pub tail_prob: f64,
    pub tail_wilson95: (f64, f64),
    pub tail_below_half: bool,
    pub equilateral_reference: f64,
    pub mean_below_equilateral: bool,
    pub worst_case_bound: f64,
    pub ci95_lower_exceeds_worst_case: bool,
    pub curve: Vec<CurvePoint>,
}

/// Fractions of n^2/D where the token-count curve is sampled; past 0.12 the
/// curve is flat at one token for the all-tokens start.
const CURVE_GRID: [f64; 10] = [
    0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.05, 0.08, 0.12,
];

/// The all-tokens study: estimates mean and tail against their closed-form
/// bounds, compares against the equilateral reference, and records the
/// token-count decay next to its limit curve.
pub fn study_full(
    n: usize,
    params: &ProtocolParams,
    trials: u64,
    curve_trials: u64,
    seed: u64,
) -> Result<FullStudyReport> {
    if trials < 2 || curve_trials < 1 {
        return Err(Error::Invalid(
            "give at least 2 estimate trials and 1 curve trial".into(),
        ));
    }
    let c = gen_full(n)?;
    let d = params.diffusion();
    let (variant, rate) = variant_rate(params);
    let (mean_bound, tail_threshold) = full_config_bounds(n, d);

    let summary = monte_carlo(
        &c,
        params,
        trials,
        mix_seed(seed, n as u64, 1),
        &[tail_threshold],
        &[0.5, 0.9],
    );
    let stats = summary.stats.clone().ok_or_else(|| {
        Error::Engine(format!(
            "full study aborted: {} of {trials} trials censored",
            summary.censored
        ))
    })?;
    let tail_prob = stats.tail_probs[0].1;
    let hits = (tail_prob * trials as f64).round() as u64;
    let tail_wilson95 = wilson_interval(hits, trials, 1.96);

    let wc_bound = worst_case_bound(n, d);
    let exceeds_wc = stats.ci95.0 > wc_bound;
    if exceeds_wc {
        eprintln!("warning: n={n} full start: ci95 lower edge exceeds the worst-case bound");
    }

    let base = (n * n) as f64 / d;
    let mut times: Vec<f64> = CURVE_GRID.iter().map(|x| x * base).collect();
    if params.is_sync() {
        for t in &mut times {
            *t = t.round().max(1.0);
        }
        times.dedup();
    }
    let s_emp = token_count_curve(
        &c,
        params,
        curve_trials,
        &times,
        mix_seed(seed, n as u64, 2),
    );
    let sigma_sq = d / (n * n) as f64;
    let curve = times
        .iter()
        .zip(&s_emp)
        .map(|(&t, &emp)| CurvePoint {
            t,
            s_emp: emp,
            s_tilde: full_token_expectation_s_tilde(sigma_sq, t),
        })
        .collect();

    let equilateral_reference = (n * n) as f64 / (27.0 * d);
    Ok(FullStudyReport {
        n,
        variant,
        rate,
        trials,
        ci95_upper_within_mean_bound: stats.ci95.1 <= mean_bound,
        mean_bound,
        tail_threshold,
        tail_prob,
        tail_wilson95,
        tail_below_half: tail_wilson95.1 < 0.5,
        equilateral_reference,
        mean_below_equilateral: stats.mean < equilateral_reference,
        worst_case_bound: wc_bound,
        ci95_lower_exceeds_worst_case: exceeds_wc,
        curve,
        summary,
    })
}
