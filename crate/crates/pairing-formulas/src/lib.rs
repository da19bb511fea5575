//! The signed-pairing expansion of the token ring's stabilization time.
//!
//! Pair the tokens up (one left over), give every pair a collision
//! direction, and weight by a permutation sign: inclusion-exclusion over
//! these directed pairings turns the stabilization law into sums of
//! two-token absorbed-walk quantities.  This crate houses that machinery:
//! the pairing combinatorics with exact signs, per-pair absorption and
//! survival formulas, the distribution function P(T <= t), the exact
//! finite-size expression for E[T], its size-free limit, and a Monte Carlo
//! sampler that checks the decomposition statistically on both protocol
//! variants.

mod cdf;
mod combinat;
mod continuous;
mod driver;
mod error;
mod finite;
mod mc;
mod walk;

pub use cdf::pairing_cdf;
pub use combinat::{
    enumerate_directed, enumerate_pairings, signed_absorption_identity, DirectedPairing, Pairing,
};
pub use continuous::{
    expected_time_continuous, f_tilde, ContinuousEstimate, FTildeValue, SeriesControl, SeriesMode,
};
pub use error::Error;
pub use finite::{expected_time_finite, finite_expression_terms, write_terms_csv, TermRecord};
pub use mc::{pairing_expectation_mc, McExpectation};
pub use walk::{absorption_prob, absorption_prob_rational, g, h, pair_survival};

pub type Result<T> = std::result::Result<T, Error>;
