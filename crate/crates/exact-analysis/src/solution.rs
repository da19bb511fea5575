use std::collections::BTreeMap;
use std::io::{self, Write};

use num::rational::BigRational;
use num::{ToPrimitive, Zero};
use ring_core::{ProtocolParams, RingConfig};

use crate::chain::{canonical_key, Chain};

/// Sorted 1-indexed token positions; the map key for solved values.
pub type StateKey = Vec<u16>;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ArithmeticMode {
    Float64,
    Rational,
}

/// Expected stabilization time for every configuration reachable from the
/// start configuration.  Queries canonicalize the key the same way the
/// solver did, so callers never need to know whether rotation reduction was
/// on.
#[derive(Debug)]
pub struct ExactSolution {
    params: ProtocolParams,
    mode: ArithmeticMode,
    reduced: bool,
    n: usize,
    start: StateKey,
    float: BTreeMap<StateKey, f64>,
    rational: Option<BTreeMap<StateKey, BigRational>>,
}

impl ExactSolution {
    pub(crate) fn from_float(chain: &Chain, params: ProtocolParams, values: Vec<f64>) -> Self {
        let float: BTreeMap<StateKey, f64> = chain.states.iter().cloned().zip(values).collect();
        for (key, v) in &float {
            assert!(
                v.is_finite() && *v >= 0.0,
                "hitting time for {key:?} must be finite and nonnegative, got {v}"
            );
            if key.len() == 1 {
                assert_eq!(*v, 0.0, "absorbing states carry zero time");
            }
        }
        ExactSolution {
            params,
            mode: ArithmeticMode::Float64,
            reduced: chain.reduced,
            n: chain.n,
            start: chain.states[chain.start as usize].clone(),
            float,
            rational: None,
        }
    }

    pub(crate) fn from_rational(
        chain: &Chain,
        params: ProtocolParams,
        values: Vec<BigRational>,
    ) -> Self {
        let float: BTreeMap<StateKey, f64> = chain
            .states
            .iter()
            .cloned()
            .zip(values.iter().map(|v| v.to_f64().expect("finite value")))
            .collect();
        let rational: BTreeMap<StateKey, BigRational> =
            chain.states.iter().cloned().zip(values).collect();
        for (key, v) in &rational {
            assert!(
                *v >= BigRational::zero(),
                "hitting time for {key:?} must be nonnegative"
            );
            if key.len() == 1 {
                assert!(v.is_zero(), "absorbing states carry zero time");
            }
        }
        ExactSolution {
            params,
            mode: ArithmeticMode::Rational,
            reduced: chain.reduced,
            n: chain.n,
            start: chain.states[chain.start as usize].clone(),
            float,
            rational: Some(rational),
        }
    }

    pub fn params(&self) -> ProtocolParams {
        self.params
    }

    pub fn arithmetic_mode(&self) -> ArithmeticMode {
        self.mode
    }

    pub fn reduced(&self) -> bool {
        self.reduced
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state_count(&self) -> usize {
        self.float.len()
    }

    /// Expected stabilization time from the start configuration.
    pub fn expected_time(&self) -> f64 {
        self.float[&self.start]
    }

    pub fn expected_time_rational(&self) -> Option<&BigRational> {
        self.rational.as_ref().map(|m| &m[&self.start])
    }

    fn key_for(&self, c: &RingConfig) -> Option<StateKey> {
        if c.n() != self.n {
            return None;
        }
        let key: StateKey = c.token_positions().iter().map(|&p| p as u16).collect();
        Some(canonical_key(&key, self.n, self.reduced))
    }

    /// Value for an arbitrary configuration, if it was reachable.
    pub fn value(&self, c: &RingConfig) -> Option<f64> {
        self.float.get(&self.key_for(c)?).copied()
    }

    pub fn value_rational(&self, c: &RingConfig) -> Option<&BigRational> {
        self.rational.as_ref()?.get(&self.key_for(c)?)
    }

    /// Iterate (token positions, expected time) over all solved states.
    pub fn iter(&self) -> impl Iterator<Item = (&StateKey, f64)> {
        self.float.iter().map(|(k, &v)| (k, v))
    }

    /// CSV rows of config_key, token count, expected time.  Keys print as
    /// dash-joined positions so they stay one CSV field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "config_key,tokens,expected_time")?;
        for (key, v) in &self.float {
            let joined = key
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("-");
            writeln!(out, "{joined},{},{v}", key.len())?;
        }
        Ok(())
    }
}
