use thiserror::Error;

/// Errors returned by the placement structure and its supporting modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("level {level} out of range (scheme has {levels} levels plus overflow)")]
    LevelOutOfRange { level: u32, levels: u32 },

    #[error("epsilon must lie in (0, 1), got {0}")]
    EpsilonDomain(f64),

    #[error("capacity must be at least 1")]
    ZeroCapacity,

    #[error("balancing parameter must exceed 1, got {0}")]
    BalanceDomain(f64),

    #[error("invalid level count {0}")]
    InvalidLevels(u32),

    #[error("invalid mixed tabulation parameters c={c}, d={d}")]
    InvalidTabulation { c: u32, d: u32 },

    #[error("system needs at least one bin")]
    NoBins,

    #[error("ball {0:#x} is already present")]
    DuplicateBall(u64),

    #[error("ball {0:#x} is not present")]
    MissingBall(u64),

    #[error("bin {0:#x} is already present")]
    DuplicateBin(u64),

    #[error("bin {0:#x} is not present")]
    MissingBin(u64),

    #[error("cannot delete the last bin")]
    LastBin,

    #[error("total capacity {capacity} cannot hold {balls} balls")]
    CapacityExhausted { balls: u64, capacity: u64 },

    #[error("oracle requires C*m >= n (C={capacity}, m={bins}, n={balls})")]
    OracleInfeasible {
        balls: u64,
        bins: u64,
        capacity: u64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
