use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Reachable state space exceeded the caller-supplied budget.  The count
    /// is the number of states discovered before the walk gave up, so the
    /// message tells the caller how far over budget the request was.
    #[error("state space needs at least {states} states, budget allows {budget}")]
    StateBudget { states: usize, budget: usize },

    /// The dense solve matrix would not fit in the allocator cap even though
    /// the state count itself was under budget.
    #[error("dense system of {transients} unknowns exceeds the memory guard")]
    MemoryGuard { transients: usize },

    /// One synchronous step fans out into 2^M successor candidates; past
    /// M = 20 the enumeration of a single row is already intractable.
    #[error(
        "synchronous kernel enumerates 2^M moves per state; M = {tokens} is past the supported 20"
    )]
    MoveFanout { tokens: usize },

    #[error("solver failed: {0}")]
    Solve(String),

    #[error(transparent)]
    Ring(#[from] ring_core::Error),
}
