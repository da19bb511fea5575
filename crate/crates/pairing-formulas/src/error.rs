use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The alternating sum would need too many summand evaluations.
    #[error("expression needs about {terms} summand evaluations, budget allows {budget}")]
    TermBudget { terms: u128, budget: u128 },

    /// The series cannot be truncated tightly enough within the cap.
    #[error("series tail bound {achieved:.3e} cannot reach tolerance {tolerance:.3e} within the truncation cap")]
    Truncation { achieved: f64, tolerance: f64 },

    /// Rejection sampling would almost never accept.
    #[error("rejection sampling starves: a required absorption side has probability {prob:.3e}")]
    Starvation { prob: f64 },

    #[error(transparent)]
    Ring(#[from] ring_core::Error),
}
