use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ring size must be odd and at least 3, got {0}")]
    RingSize(usize),
    #[error("bit vector has length {got}, ring size is {n}")]
    BitLength { n: usize, got: usize },
    #[error("bit at position {position} is {value}, expected 0 or 1")]
    BitValue { position: usize, value: u8 },
    #[error("token count must be odd, got {0}")]
    TokenParity(usize),
    #[error("token positions must be strictly increasing within 1..={n}: {detail}")]
    TokenPositions { n: usize, detail: String },
    #[error("flip-{m} configuration needs ring size >= {}, got {n}", 2 * m + 1)]
    FlipCount { n: usize, m: usize },
    #[error("flip position {0} given more than once")]
    DuplicateFlip(usize),
    #[error("pass probability must lie strictly between 0 and 1, got {0}")]
    PassProbability(f64),
    #[error("pass rate must be positive and finite, got {0}")]
    PassRate(f64),
    #[error("cannot parse config literal: {0}")]
    Literal(String),
}
