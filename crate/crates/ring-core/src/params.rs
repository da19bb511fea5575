use crate::{Error, Result};

/// Protocol variant plus its single tuning parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolParams {
    /// Lock-step rounds; every token-holder flips (= passes) with probability `r`.
    Synchronous { r: f64 },
    /// Continuous time; every token is passed clockwise at rate `lambda`.
    Asynchronous { lambda: f64 },
}

impl ProtocolParams {
    pub fn sync(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::PassProbability(r));
        }
        Ok(ProtocolParams::Synchronous { r })
    }

    pub fn asynchronous(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::PassRate(lambda));
        }
        Ok(ProtocolParams::Asynchronous { lambda })
    }

    /// Diffusion constant D: r(1-r) for the synchronous variant, lambda for
    /// the asynchronous one. The pair distance between two tokens moves by
    /// one with probability (resp. rate) D per direction, which is why both
    /// variants share every D-scaled formula.
    pub fn diffusion(&self) -> f64 {
        match *self {
            ProtocolParams::Synchronous { r } => r * (1.0 - r),
            ProtocolParams::Asynchronous { lambda } => lambda,
        }
    }

    pub fn is_sync(&self) -> bool {
        matches!(self, ProtocolParams::Synchronous { .. })
    }
}

/// Collision direction of an ordered token pair (u, v), u < v.
///
/// `Down` means u catches up with v clockwise, closing the clockwise
/// distance z_uv to zero; `Up` means v catches u, growing it to n. The
/// directed distance below is the corresponding gambler's-ruin start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    /// z for Down, n - z for Up. Single home for this encoding so the
    /// formula crates cannot drift apart.
    pub fn directed_distance(self, z: usize, n: usize) -> usize {
        debug_assert!(z >= 1 && z < n);
        match self {
            Direction::Down => z,
            Direction::Up => n - z,
        }
    }
}
