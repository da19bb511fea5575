use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use ring_core::RingConfig;

use crate::driver::{assemble, check_term_budget, directed_layouts, subset_keys, Kahan};
use crate::{Error, Result};

/// Which kernel the expectation driver uses: the exact size-n mode sum, or
/// its size-free limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    FiniteN,
    Continuous,
}

/// Truncation policy for the limit kernel's infinite mode sums.
#[derive(Debug, Clone)]
pub struct SeriesControl {
    pub mode: SeriesMode,
    /// Largest per-coordinate mode index the sum may use.
    pub truncation_cap: usize,
    /// Target bound on the absolute tail left out per kernel call.
    pub tolerance: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            mode: SeriesMode::Continuous,
            truncation_cap: 20_000,
            tolerance: 1e-8,
        }
    }
}

impl SeriesControl {
    fn validate(&self) -> Result<()> {
        if self.truncation_cap < 1 {
            return Err(Error::InvalidInput(
                "truncation cap must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// A truncated evaluation of the limit kernel, with the tail majorant that
/// justified stopping.
#[derive(Debug, Clone, Copy)]
pub struct FTildeValue {
    pub value: f64,
    pub tail_bound: f64,
    pub cap_used: usize,
}

/// Work ceiling per kernel call: cap^k mode tuples.
const WORK_CAP: f64 = 5e8;

/// Upper bound on zeta(s) for s > 1: a 1000-term partial sum plus the
/// integral tail.
fn zeta_upper(s: f64) -> f64 {
    let mut acc = 0.0;
    for j in 1..=1000u32 {
        acc += (j as f64).powf(-s);
    }
    acc + 1000f64.powf(1.0 - s) / (s - 1.0)
}

/// Bound on the kernel mass beyond per-coordinate cap j, prefactor
/// included.  k = 1 and 2 use sharp integral tails; k >= 3 bounds
/// 1/(sum of squares) through the geometric mean, leaving a product of
/// zeta factors.  `zeta_pow` must be zeta(1 + 2/k)^(k-1) for k >= 3 and is
/// ignored otherwise.
fn tail_majorant(k: usize, j: usize, zeta_pow: f64) -> f64 {
    let jf = j as f64;
    match k {
        1 => 1.0 / (PI.powi(3) * jf * jf),
        2 => 4.0 / PI.powi(4) * (jf.ln() + 3.0) / (jf * jf),
        _ => {
            let pref = (1.0 / (PI * PI)) * (2.0 / PI).powi(k as i32);
            pref * (k as f64 / 2.0) * jf.powf(-2.0 / k as f64) * zeta_pow
        }
    }
}

fn zeta_pow_for(k: usize) -> f64 {
    if k >= 3 {
        zeta_upper(1.0 + 2.0 / k as f64).powi(k as i32 - 1)
    } else {
        1.0
    }
}

/// Smallest per-coordinate cap whose tail majorant meets the tolerance,
/// subject to the control cap and the work ceiling.
fn pick_cap(k: usize, ctrl: &SeriesControl) -> Result<(usize, f64)> {
    let zeta_pow = zeta_pow_for(k);
    let work_max = WORK_CAP.powf(1.0 / k as f64).floor() as usize;
    let j_max = ctrl.truncation_cap.min(work_max.max(1));
    for j in 1..=j_max {
        let bound = tail_majorant(k, j, zeta_pow);
        if bound <= ctrl.tolerance {
            return Ok((j, bound));
        }
    }
    Err(Error::Truncation {
        achieved: tail_majorant(k, j_max, zeta_pow),
        tolerance: ctrl.tolerance,
    })
}

fn series_rec(rows: &[Vec<f64>], depth: usize, prod: f64, sum_sq: f64, acc: &mut Kahan) {
    let row = &rows[depth];
    if depth + 1 == rows.len() {
        for (i, &v) in row.iter().enumerate() {
            let j = (i + 1) as f64;
            acc.add(prod * v / (sum_sq + j * j));
        }
    } else {
        for (i, &v) in row.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let j = (i + 1) as f64;
            series_rec(rows, depth + 1, prod * v, sum_sq + j * j, acc);
        }
    }
}

/// The size-free limit kernel
/// -(1/pi^2)(-2/pi)^k sum over j in {1..}^k of
/// (product of sin(y_i j_i pi)) / ((product of j_i)(sum of j_i^2)),
/// truncated per `ctrl`.  Symmetric in its coordinates (they are sorted
/// internally, so reordering returns bit-identical results); exactly zero
/// when any coordinate is 0 or 1.
pub fn f_tilde(y: &[f64], ctrl: &SeriesControl) -> Result<FTildeValue> {
    ctrl.validate()?;
    if ctrl.mode != SeriesMode::Continuous {
        return Err(Error::InvalidInput(
            "the finite_N mode needs a ring size and pass probability; \
             use expected_time_finite or expected_time_continuous"
                .into(),
        ));
    }
    let k = y.len();
    if k == 0 {
        return Err(Error::InvalidInput("empty coordinate vector".into()));
    }
    for &yi in y {
        if !(0.0..=1.0).contains(&yi) {
            return Err(Error::InvalidInput(format!(
                "coordinate {yi} outside [0,1]"
            )));
        }
    }
    if y.iter().any(|&yi| yi == 0.0 || yi == 1.0) {
        return Ok(FTildeValue {
            value: 0.0,
            tail_bound: 0.0,
            cap_used: 0,
        });
    }
    let mut ys = y.to_vec();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (cap, tail_bound) = pick_cap(k, ctrl)?;
    let rows: Vec<Vec<f64>> = ys
        .iter()
        .map(|&yi| {
            (1..=cap)
                .map(|j| (yi * j as f64 * PI).sin() / j as f64)
                .collect()
        })
        .collect();
    let mut acc = Kahan::new();
    series_rec(&rows, 0, 1.0, 0.0, &mut acc);
    let pref = -(1.0 / (PI * PI)) * (-2.0 / PI).powi(k as i32);
    Ok(FTildeValue {
        value: pref * acc.sum(),
        tail_bound,
        cap_used: cap,
    })
}

/// The limit approximation of the expected synchronous stabilization time,
/// with an accumulated truncation bound and a flag for whether r sits in
/// the window where the size-free error spread is known to stay small.
#[derive(Debug, Clone, Copy)]
pub struct ContinuousEstimate {
    pub value: f64,
    pub truncation_bound: f64,
    pub r_in_error_range: bool,
}

/// Same alternating driver as `expected_time_finite` with the limit kernel
/// in place of the mode sum, scaled by n^2 / (r(1-r)).  In FiniteN mode it
/// evaluates the exact kernel instead (truncation bound zero), which makes
/// the pair directly comparable.  Shares the finite expression's summand
/// budget, since the combinatorial shell is identical.
pub fn expected_time_continuous(
    c: &RingConfig,
    r: f64,
    ctrl: &SeriesControl,
) -> Result<ContinuousEstimate> {
    ctrl.validate()?;
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
    // the window (1/2 - 27^(1/4)/6, 1/2 + 27^(1/4)/6), about (0.12, 0.88)
    let r_in_error_range = (r - 0.5).abs() < 27f64.powf(0.25) / 6.0;
    if ctrl.mode == SeriesMode::FiniteN {
        let value = crate::finite::expected_time_finite(c, r)?;
        return Ok(ContinuousEstimate {
            value,
            truncation_bound: 0.0,
            r_in_error_range,
        });
    }
    check_term_budget(c.token_count(), c.n())?;
    let n = c.n();
    let nf = n as f64;
    let layouts = directed_layouts(c)?;
    let keys = subset_keys(&layouts);
    let memo: HashMap<Vec<u16>, FTildeValue> = keys
        .into_par_iter()
        .map(|k| {
            let ys: Vec<f64> = k.iter().map(|&z| z as f64 / nf).collect();
            f_tilde(&ys, ctrl).map(|v| (k, v))
        })
        .collect::<Result<_>>()?;
    let (raw, tail) = assemble(
        &layouts,
        n,
        |k| {
            let v = &memo[k];
            (v.value, v.tail_bound)
        },
        None,
    );
    let scale = nf * nf / (r * (1.0 - r));
    Ok(ContinuousEstimate {
        value: raw * scale,
        truncation_bound: tail * scale,
        r_in_error_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::expected_time_finite;
    use ring_core::{gen_equilateral, RingConfig};

    fn ctrl(cap: usize, tol: f64) -> SeriesControl {
        SeriesControl {
            mode: SeriesMode::Continuous,
            truncation_cap: cap,
            tolerance: tol,
        }
    }

    #[test]
    fn k1_matches_the_closed_form_on_a_grid() {
        // F~ with one coordinate is y(1-y)(2-y)/6
        let c = ctrl(30_000, 5e-11);
        for i in 1..=99 {
            let y = i as f64 / 100.0;
            let got = f_tilde(&[y], &c).unwrap();
            let want = y * (1.0 - y) * (2.0 - y) / 6.0;
            assert!(
                (got.value - want).abs() < 1e-10,
                "y={y}: {} vs {want}",
                got.value
            );
            assert!(got.tail_bound <= 5e-11);
        }
        let third = f_tilde(&[1.0 / 3.0], &c).unwrap();
        assert!((third.value - 10.0 / 162.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_coordinates_vanish_exactly() {
        let c = SeriesControl::default();
        for ys in [vec![0.0], vec![1.0], vec![0.5, 1.0], vec![0.0, 0.3, 0.9]] {
            let v = f_tilde(&ys, &c).unwrap();
            assert_eq!(v.value, 0.0);
            assert_eq!(v.cap_used, 0);
        }
    }

    #[test]
    fn symmetric_in_coordinates_bit_for_bit() {
        let c = ctrl(20_000, 1e-6);
        let a = f_tilde(&[0.3, 0.7], &c).unwrap();
        let b = f_tilde(&[0.7, 0.3], &c).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn truncation_refusal_reports_the_achieved_bound() {
        match f_tilde(&[0.5], &ctrl(10, 1e-12)) {
            Err(Error::Truncation {
                achieved,
                tolerance,
            }) => {
                // 1/(pi^3 * 100)
                assert!((1e-4..1e-3).contains(&achieved), "{achieved}");
                assert_eq!(tolerance, 1e-12);
            }
            other => panic!("wanted a truncation refusal, got {other:?}"),
        }
    }

    #[test]
    fn three_coordinates_need_loose_tolerances() {
        let y = [0.2, 0.4, 0.6];
        let ok = f_tilde(&y, &ctrl(20_000, 5e-3)).unwrap();
        assert!(ok.value.abs() < 0.05);
        assert!(ok.tail_bound <= 5e-3);
        assert!(matches!(
            f_tilde(&y, &ctrl(20_000, 1e-8)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn invalid_controls_and_coordinates_are_rejected() {
        assert!(f_tilde(&[0.5], &ctrl(0, 1e-6)).is_err());
        assert!(f_tilde(&[0.5], &ctrl(100, -1.0)).is_err());
        assert!(f_tilde(&[1.2], &SeriesControl::default()).is_err());
        assert!(f_tilde(&[], &SeriesControl::default()).is_err());
        let finite_mode = SeriesControl {
            mode: SeriesMode::FiniteN,
            ..Default::default()
        };
        assert!(f_tilde(&[0.5], &finite_mode).is_err());
    }

    #[test]
    fn equilateral_nine_matches_the_product_formula() {
        // three equal gaps a = b = c = 3: a b c / (D n) = 27 / (0.25 * 9)
        let est =
            expected_time_continuous(&gen_equilateral(9).unwrap(), 0.5, &SeriesControl::default())
                .unwrap();
        assert!(
            (est.value - 12.0).abs() <= est.truncation_bound + 1e-9,
            "{} vs 12 (bound {})",
            est.value,
            est.truncation_bound
        );
        assert!(est.truncation_bound < 1e-3);
        assert!(est.r_in_error_range);
    }

    #[test]
    fn scalene_three_tokens_match_the_product_formula() {
        // gaps 1, 5, 3 on n = 9: a b c / (D n) = 15 / (0.21 * 9)
        let c = RingConfig::from_tokens(9, &[1, 2, 7]).unwrap();
        let est = expected_time_continuous(&c, 0.3, &SeriesControl::default()).unwrap();
        let want = 15.0 / (0.21 * 9.0);
        assert!(
            (est.value - want).abs() <= est.truncation_bound + 1e-9,
            "{} vs {want}",
            est.value
        );
        let off = expected_time_continuous(&c, 0.05, &SeriesControl::default()).unwrap();
        assert!(!off.r_in_error_range);
        assert!(off.value.is_finite());
    }

    /// The equal-gap five-token family: the relative gap between the exact
    /// finite expression and the limit shrinks as the ring grows.
    #[test]
    fn five_token_family_gap_shrinks() {
        let c5 = ctrl(20_000, 1e-6);
        let mut rel = Vec::new();
        for n in [15usize, 25, 35] {
            let q = n / 5;
            let tokens: Vec<usize> = (0..5).map(|i| 1 + q * i).collect();
            let cfg = RingConfig::from_tokens(n, &tokens).unwrap();
            let fin = expected_time_finite(&cfg, 0.5).unwrap();
            let cont = expected_time_continuous(&cfg, 0.5, &c5).unwrap();
            rel.push((fin - cont.value).abs() / fin);
        }
        assert!((rel[0] - 0.003456).abs() < 1e-4, "{rel:?}");
        assert!((rel[1] - 0.001210).abs() < 1e-4, "{rel:?}");
        assert!((rel[2] - 0.000613).abs() < 1e-4, "{rel:?}");
        assert!(rel[0] > rel[1] && rel[1] > rel[2], "{rel:?}");
    }

    #[test]
    fn finite_mode_delegates_to_the_exact_kernel() {
        let c = gen_equilateral(9).unwrap();
        let finite_mode = SeriesControl {
            mode: SeriesMode::FiniteN,
            ..Default::default()
        };
        let est = expected_time_continuous(&c, 0.4, &finite_mode).unwrap();
        let want = expected_time_finite(&c, 0.4).unwrap();
        assert_eq!(est.value.to_bits(), want.to_bits());
        assert_eq!(est.truncation_bound, 0.0);
    }
}
