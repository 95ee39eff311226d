use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid hole: {0}")]
    InvalidHole(String),

    #[error("preimage sequence of length {len} exhausted; build a longer sequence")]
    SequenceExhausted { len: usize },

    #[error("base index would exceed the cap of {cap}")]
    BaseIndexCap { cap: usize },

    #[error("no Markov cylinder inside the hole up to depth {depth_max}")]
    CylinderNotFound { depth_max: usize },

    #[error("image {value} of a sample from cell {cell} left the interval ({lo}, {hi}]")]
    ImageOutside {
        cell: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no grid cell lies inside the hole; refine the grid")]
    GridTooCoarse,

    #[error("iteration did not converge within {iterations} steps")]
    NonConvergence { iterations: u64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive value {value} at n = {n}")]
    NonPositiveValue { n: f64, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
