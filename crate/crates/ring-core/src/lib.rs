//! Ring configurations for Herman's self-stabilizing token-ring protocol.
//!
//! A ring of `n` processors (n odd, numbered 1..=n clockwise) where each
//! processor holds one bit. Processor `i` has a *token* iff its bit equals
//! the bit of its counterclockwise neighbor `i-1` (processor 1's neighbor
//! is processor `n`). For odd `n` the token count is always odd, so the
//! ring can stabilize to exactly one token but never to zero.
//!
//! This crate only represents configurations and their geometry (token
//! positions, inter-token gaps, named generator families). Protocol
//! execution lives in `dynamics`, closed forms in `exact-analysis` and
//! `pairing-formulas`.

mod config;
mod error;
mod params;

pub use config::{
    gen_equilateral, gen_flip_m, gen_flip_m_at, gen_full, gen_legitimate, gen_random_bits,
    GapVector, RingConfig,
};
pub use error::Error;
pub use params::{Direction, ProtocolParams};

pub type Result<T> = std::result::Result<T, Error>;
