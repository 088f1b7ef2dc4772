use alloc::string::String;

/// Errors raised by the simulation engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A computation produced NaN or infinity.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The degree sequence cannot be realized by a simple graph.
    #[error("degree sequence is not graphical: {0}")]
    NotGraphical(String),
    /// Burn-in hit its season budget without reaching the stationarity test.
    #[error(
        "burn-in did not converge within {max_seasons} seasons \
         (last coverage delta {coverage_delta:.4}, attack-rate delta {attack_delta:.4})"
    )]
    BurnInExceeded {
        max_seasons: usize,
        coverage_delta: f64,
        attack_delta: f64,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        // Bound first so NaN comparisons fail the check.
        {
            let ok: bool = $cond;
            if !ok {
                return Err($crate::error::contract!($($arg)*));
            }
        }
    };
}

pub(crate) use contract;
pub(crate) use ensure;
