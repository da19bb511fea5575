use std::fmt;
use std::path::PathBuf;

use ring_core::{
    gen_equilateral, gen_flip_m, gen_full, gen_random_bits, ProtocolParams, RingConfig,
};
use serde::Serialize;

use crate::{Error, Result};

/// Family the starting configuration of each (line, n) job is drawn from.
/// Random families consume a seed mixed from (base_seed, line, n), so any
/// single job can be rebuilt in isolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generator {
    Equilateral,
    Full,
    RandomBits,
    FlipM(usize),
    ExplicitTokens(Vec<usize>),
    ExplicitBits(Vec<u8>),
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Equilateral => write!(f, "equilateral"),
            Generator::Full => write!(f, "full"),
            Generator::RandomBits => write!(f, "random_bits"),
            Generator::FlipM(m) => write!(f, "flip_m({m})"),
            Generator::ExplicitTokens(t) => {
                let parts: Vec<String> = t.iter().map(|p| p.to_string()).collect();
                write!(f, "explicit(tokens={})", parts.join(","))
            }
            Generator::ExplicitBits(b) => {
                let s: String = b.iter().map(|&x| char::from(b'0' + x)).collect();
                write!(f, "explicit(bits={s})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    MonteCarlo {
        trials: u64,
    },
    Exact,
    FiniteFormula,
    ContinuousFormula {
        truncation_cap: usize,
        tolerance: f64,
    },
    Bounds,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Engine::MonteCarlo { trials } => write!(f, "monte_carlo({trials})"),
            Engine::Exact => write!(f, "exact"),
            Engine::FiniteFormula => write!(f, "finite_formula"),
            Engine::ContinuousFormula {
                truncation_cap,
                tolerance,
            } => write!(
                f,
                "continuous_formula(cap={truncation_cap},tol={tolerance:e})"
            ),
            Engine::Bounds => write!(f, "bounds"),
        }
    }
}

/// One experiment line: a generator family swept over ring sizes, dispatched
/// to one engine. `line` is the 1-based source line in a spec file, 0 for
/// specs assembled from command-line flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub n_list: Vec<usize>,
    pub params: ProtocolParams,
    pub engine: Engine,
    pub base_seed: u64,
    pub output_path: Option<PathBuf>,
    pub budget_states: usize,
    pub line: usize,
}

/// The deterministic half of a record's provenance. The output path is
/// deliberately left out: where a record is stored must not change its hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecEcho {
    pub generator: String,
    pub n_list: Vec<usize>,
    pub variant: String,
    pub rate: f64,
    pub engine: String,
    pub base_seed: u64,
    pub budget_states: usize,
}

impl ExperimentSpec {
    pub fn echo(&self) -> SpecEcho {
        let (variant, rate) = match self.params {
            ProtocolParams::Synchronous { r } => ("synchronous", r),
            ProtocolParams::Asynchronous { lambda } => ("asynchronous", lambda),
        };
        SpecEcho {
            generator: self.generator.to_string(),
            n_list: self.n_list.clone(),
            variant: variant.to_string(),
            rate,
            engine: self.engine.to_string(),
            base_seed: self.base_seed,
            budget_states: self.budget_states,
        }
    }

    /// Builds the starting configuration for one swept size.
    pub fn config_for(&self, n: usize) -> Result<RingConfig> {
        let seed = mix_seed(self.base_seed, self.line as u64, n as u64);
        let c = match &self.generator {
            Generator::Equilateral => gen_equilateral(n)?,
            Generator::Full => gen_full(n)?,
            Generator::RandomBits => gen_random_bits(n, seed)?,
            Generator::FlipM(m) => gen_flip_m(n, *m, seed)?,
            Generator::ExplicitTokens(t) => RingConfig::from_tokens(n, t)?,
            Generator::ExplicitBits(b) => RingConfig::from_bits(n, b)?,
        };
        Ok(c)
    }

    /// Structural checks plus the engine/budget compatibility gate, run
    /// before any job launches so a doomed sweep fails in microseconds
    /// instead of mid-run.
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Invalid("give at least one ring size".into()).at_line(self.line));
        }
        for &n in &self.n_list {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Invalid(format!(
                    "ring size must be odd and at least 3, got {n}"
                ))
                .at_line(self.line));
            }
        }
        self.compat_check().map_err(|e| e.at_line(self.line))
    }

    fn compat_check(&self) -> Result<()> {
        match self.engine {
            Engine::MonteCarlo { trials } => {
                if trials == 0 {
                    return Err(Error::Invalid("monte_carlo needs at least 1 trial".into()));
                }
            }
            Engine::Exact => {
                for &n in &self.n_list {
                    let c = self.config_for(n)?;
                    let m0 = c.token_count();
                    if self.params.is_sync() && m0 > 20 {
                        return Err(Error::Resource(format!(
                            "exact synchronous solve at n={n} starts with {m0} tokens; the kernel fans out 2^M moves per state and caps at M = 20"
                        )));
                    }
                    let bound = state_bound(n, m0);
                    if bound > self.budget_states {
                        return Err(Error::Resource(format!(
                            "exact solve at n={n} reaches about {bound} states, budget allows {}",
                            self.budget_states
                        )));
                    }
                }
            }
            Engine::FiniteFormula | Engine::ContinuousFormula { .. } => {
                if !self.params.is_sync() {
                    return Err(Error::Invalid(
                        "the formula engines cover the synchronous variant; give r, not lambda"
                            .into(),
                    ));
                }
                for &n in &self.n_list {
                    let m0 = self.config_for(n)?.token_count();
                    // one token short-circuits to 0 in the engine; the
                    // expansion itself enumerates pairings only up to M = 13
                    if m0 > 13 {
                        return Err(Error::Resource(format!(
                            "the pairing expansion at n={n} would start from {m0} tokens; past 13 the enumeration is out of reach"
                        )));
                    }
                }
            }
            Engine::Bounds => {}
        }
        Ok(())
    }
}

/// Upper estimate of the absorbing chain's state space from a start with m0
/// tokens: every token set of odd size at most m0. Tight for the shipped
/// generator families, whose gap shuffling reaches essentially all of them.
fn state_bound(n: usize, m0: usize) -> usize {
    let mut total: u128 = 0;
    let mut m = 1;
    while m <= m0 {
        total = total.saturating_add(binomial_u128(n, m));
        m += 2;
    }
    total.min(usize::MAX as u128) as usize
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// splitmix64; chained below to derive per-job seeds that are stable across
/// platforms, thread counts, and re-runs.
fn sm64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    sm64(sm64(sm64(base) ^ a) ^ b)
}

/// Parses a whole spec text: one experiment per non-empty, non-comment line
/// of whitespace-separated key=value pairs.
pub fn parse_spec_text(text: &str) -> Result<Vec<ExperimentSpec>> {
    let mut specs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if let Some(spec) = parse_spec_line(raw, idx + 1)? {
            specs.push(spec);
        }
    }
    if specs.is_empty() {
        return Err(Error::Invalid(
            "spec contains no experiment lines (only blanks or comments)".into(),
        ));
    }
    Ok(specs)
}

/// One line; `None` for blanks and `#` comments. Recognized keys:
/// generator, m, tokens, bits, n, r, lambda, engine, trials, cap, tolerance,
/// seed, out, budget_states. `generator=flip_m(2)` and
/// `engine=monte_carlo(5000)` are sugar for the split-key forms.
pub fn parse_spec_line(raw: &str, line: usize) -> Result<Option<ExperimentSpec>> {
    let body = raw.trim();
    if body.is_empty() || body.starts_with('#') {
        return Ok(None);
    }
    let fail = |msg: String| Error::Invalid(msg).at_line(line);

    let mut generator_name: Option<String> = None;
    let mut m_arg: Option<usize> = None;
    let mut tokens: Option<Vec<usize>> = None;
    let mut bits: Option<Vec<u8>> = None;
    let mut n_list: Vec<usize> = Vec::new();
    let mut r: Option<f64> = None;
    let mut lambda: Option<f64> = None;
    let mut engine_name: Option<String> = None;
    let mut trials: Option<u64> = None;
    let mut cap: Option<usize> = None;
    let mut tolerance: Option<f64> = None;
    let mut seed: u64 = 0;
    let mut out: Option<PathBuf> = None;
    let mut budget_states = exact_analysis::SolveOptions::default().budget_states;

    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| fail(format!("expected key=value, got {field:?}")))?;
        match key {
            "generator" => {
                let (name, arg) = split_call(value);
                if let Some(arg) = arg {
                    if name != "flip_m" {
                        return Err(fail(format!("generator {name} takes no argument")));
                    }
                    m_arg = Some(parse_num(arg, "m", line)?);
                }
                generator_name = Some(name.to_string());
            }
            "m" => m_arg = Some(parse_num(value, "m", line)?),
            "tokens" => tokens = Some(parse_list(value, "tokens", line)?),
            "bits" => bits = Some(parse_bits(value, line)?),
            "n" => n_list = parse_list(value, "n", line)?,
            "r" => r = Some(parse_num(value, "r", line)?),
            "lambda" => lambda = Some(parse_num(value, "lambda", line)?),
            "engine" => {
                let (name, arg) = split_call(value);
                if let Some(arg) = arg {
                    if name != "monte_carlo" {
                        return Err(fail(format!("engine {name} takes no argument")));
                    }
                    trials = Some(parse_num(arg, "trials", line)?);
                }
                engine_name = Some(name.to_string());
            }
            "trials" => trials = Some(parse_num(value, "trials", line)?),
            "cap" => cap = Some(parse_num(value, "cap", line)?),
            "tolerance" => tolerance = Some(parse_num(value, "tolerance", line)?),
            "seed" => seed = parse_num(value, "seed", line)?,
            "out" => out = Some(PathBuf::from(value)),
            "budget_states" => budget_states = parse_num(value, "budget_states", line)?,
            _ => return Err(fail(format!("unknown key {key:?}"))),
        }
    }

    let generator = match (generator_name.as_deref(), &tokens, &bits) {
        (Some("explicit") | None, Some(t), None) => Generator::ExplicitTokens(t.clone()),
        (Some("explicit") | None, None, Some(b)) => Generator::ExplicitBits(b.clone()),
        (Some("explicit"), None, None) => {
            return Err(fail("generator=explicit needs tokens= or bits=".into()))
        }
        (_, Some(_), Some(_)) => return Err(fail("give tokens= or bits=, not both".into())),
        (Some("equilateral"), None, None) => Generator::Equilateral,
        (Some("full"), None, None) => Generator::Full,
        (Some("random_bits"), None, None) => Generator::RandomBits,
        (Some("flip_m"), None, None) => Generator::FlipM(
            m_arg.ok_or_else(|| fail("generator=flip_m needs m= (or flip_m(M))".into()))?,
        ),
        (Some(other), None, None) => return Err(fail(format!("unknown generator {other:?}"))),
        (Some(_), ..) => return Err(fail("tokens=/bits= belong to generator=explicit".into())),
        (None, None, None) => return Err(fail("missing generator=".into())),
    };

    if let Generator::ExplicitBits(b) = &generator {
        let inferred = b.len();
        if n_list.is_empty() {
            n_list = vec![inferred];
        } else if n_list != [inferred] {
            return Err(fail(format!(
                "bits= fixes the ring size at {inferred}; drop n= or set it to match"
            )));
        }
    }

    let params = match (r, lambda) {
        (Some(r), None) => ProtocolParams::sync(r).map_err(|e| Error::from(e).at_line(line))?,
        (None, Some(l)) => {
            ProtocolParams::asynchronous(l).map_err(|e| Error::from(e).at_line(line))?
        }
        (Some(_), Some(_)) => return Err(fail("give r= or lambda=, not both".into())),
        (None, None) => {
            return Err(fail(
                "give r= (synchronous) or lambda= (asynchronous)".into(),
            ))
        }
    };

    let engine = match engine_name.as_deref() {
        Some("monte_carlo") => Engine::MonteCarlo {
            trials: trials.ok_or_else(|| {
                fail("engine=monte_carlo needs trials= (or monte_carlo(T))".into())
            })?,
        },
        Some("exact") => Engine::Exact,
        Some("finite_formula") => Engine::FiniteFormula,
        Some("continuous_formula") => Engine::ContinuousFormula {
            truncation_cap: cap.unwrap_or(20_000),
            tolerance: tolerance.unwrap_or(1e-8),
        },
        Some("bounds") => Engine::Bounds,
        Some(other) => return Err(fail(format!("unknown engine {other:?}"))),
        None => return Err(fail("missing engine=".into())),
    };

    let spec = ExperimentSpec {
        generator,
        n_list,
        params,
        engine,
        base_seed: seed,
        output_path: out,
        budget_states,
        line,
    };
    spec.validate()?;
    Ok(Some(spec))
}

/// Splits `name(arg)` into (name, Some(arg)); plain names pass through.
fn split_call(value: &str) -> (&str, Option<&str>) {
    match value.split_once('(') {
        Some((name, rest)) => match rest.strip_suffix(')') {
            Some(arg) => (name, Some(arg)),
            None => (value, None),
        },
        None => (value, None),
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("cannot parse {key}={value:?}")).at_line(line))
}

fn parse_list(value: &str, key: &str, line: usize) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|part| parse_num(part.trim(), key, line))
        .collect()
}

fn parse_bits(value: &str, line: usize) -> Result<Vec<u8>> {
    value
        .chars()
        .map(|ch| match ch {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => {
                Err(Error::Invalid(format!("bits= takes only 0s and 1s, got {ch:?}")).at_line(line))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_line() {
        let spec = parse_spec_line(
            "generator=equilateral n=9,15 r=0.5 engine=exact seed=3 out=res.jsonl",
            4,
        )
        .unwrap()
        .unwrap();
        assert_eq!(spec.generator, Generator::Equilateral);
        assert_eq!(spec.n_list, vec![9, 15]);
        assert_eq!(spec.engine, Engine::Exact);
        assert_eq!(spec.base_seed, 3);
        assert_eq!(spec.output_path, Some(PathBuf::from("res.jsonl")));
        assert_eq!(spec.line, 4);
        assert!(spec.params.is_sync());
    }

    #[test]
    fn call_sugar_matches_split_keys() {
        let a = parse_spec_line("generator=flip_m(2) n=19 r=0.5 engine=monte_carlo(500)", 1)
            .unwrap()
            .unwrap();
        let b = parse_spec_line(
            "generator=flip_m m=2 n=19 r=0.5 engine=monte_carlo trials=500",
            1,
        )
        .unwrap()
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.generator, Generator::FlipM(2));
        assert_eq!(a.engine, Engine::MonteCarlo { trials: 500 });
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        assert!(parse_spec_line("", 1).unwrap().is_none());
        assert!(parse_spec_line("  # comment", 2).unwrap().is_none());
        assert!(parse_spec_text("# only\n\n# comments").is_err());
    }

    #[test]
    fn bits_fix_the_ring_size() {
        let spec = parse_spec_line("bits=011010001 r=0.5 engine=exact", 1)
            .unwrap()
            .unwrap();
        assert_eq!(spec.n_list, vec![9]);
        let err = parse_spec_line("bits=011010001 n=11 r=0.5 engine=exact", 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_contradictions_and_unknowns() {
        for bad in [
            "generator=equilateral n=9 r=0.5 lambda=1 engine=exact",
            "generator=equilateral n=9 engine=exact",
            "generator=equilateral n=9 r=0.5 engine=warp",
            "generator=equilateral n=9 r=0.5 engine=exact color=red",
            "generator=equilateral n=8 r=0.5 engine=exact",
            "generator=flip_m n=9 r=0.5 engine=exact",
            "generator=equilateral n=9 r=0.5 engine=monte_carlo",
            "generator=full(3) n=9 r=0.5 engine=exact",
            "tokens=1,2 bits=01101 r=0.5 engine=exact",
        ] {
            let err = parse_spec_line(bad, 7).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
            assert!(err.to_string().contains("line 7"), "{bad}: {err}");
        }
    }

    #[test]
    fn compat_gate_refuses_oversized_exact_jobs() {
        // full n=21 reaches 2^20 states; the default budget is far smaller
        let ok = parse_spec_line("generator=full n=21 r=0.5 engine=monte_carlo trials=5", 1)
            .unwrap()
            .unwrap();
        assert!(ok.validate().is_ok());
        let err = parse_spec_line("generator=full n=21 r=0.5 engine=exact", 2).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("line 2"));
        // and the formula engines refuse past the pairing cap
        let err =
            parse_spec_line("generator=full n=15 r=0.5 engine=finite_formula", 3).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn formula_engines_are_synchronous_only() {
        let err = parse_spec_line(
            "generator=equilateral n=9 lambda=1 engine=finite_formula",
            1,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn job_seeds_are_stable_and_spread() {
        assert_eq!(mix_seed(7, 1, 9), mix_seed(7, 1, 9));
        assert_ne!(mix_seed(7, 1, 9), mix_seed(7, 1, 11));
        assert_ne!(mix_seed(7, 1, 9), mix_seed(7, 2, 9));
        assert_ne!(mix_seed(7, 1, 9), mix_seed(8, 1, 9));
    }

    #[test]
    fn state_bound_matches_hand_counts() {
        // n=9, three tokens: C(9,1) + C(9,3) = 9 + 84
        assert_eq!(super::state_bound(9, 3), 93);
        // full ring: all odd subsets, 2^(n-1)
        assert_eq!(super::state_bound(9, 9), 256);
        assert_eq!(super::state_bound(21, 21), 1 << 20);
    }

    #[test]
    fn explicit_tokens_build_per_size() {
        let spec = parse_spec_line("tokens=1,2,5 n=9,11 r=0.5 engine=finite_formula", 1)
            .unwrap()
            .unwrap();
        assert_eq!(spec.generator, Generator::ExplicitTokens(vec![1, 2, 5]));
        let c = spec.config_for(11).unwrap();
        assert_eq!(c.n(), 11);
        assert_eq!(c.token_positions(), &[1, 2, 5]);
    }
}
