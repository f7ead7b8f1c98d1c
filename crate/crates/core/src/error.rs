use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not unitary (|U^dagger U - I|_F = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} ns outside [0, {tau}] ns")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("auxiliary trajectory is invalid: {0}")]
    InvalidTrajectory(String),

    #[error("non-finite value encountered while {0}")]
    NonFinite(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error(
        "requested coupling exceeds the J1 maximum: ratio {ratio:.6} at t = {t_ns} ns on transmon {transmon} (limit {limit:.6})"
    )]
    UnattainableDrive {
        transmon: char,
        t_ns: f64,
        ratio: f64,
        limit: f64,
    },

    #[error("integrator failure: {0}")]
    Integrator(String),
}
