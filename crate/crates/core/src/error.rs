use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("split probability p = {0} must lie strictly between 0 and 1")]
    InvalidProbability(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("interval level k = {k} exceeds the cap of {cap}")]
    LevelTooDeep { k: u32, cap: u32 },
    #[error("recursion depth {depth} exhausted before reaching the base threshold (x = {x})")]
    DepthExhausted { depth: u32, x: f64 },
    #[error("quadrature did not converge on panel [{lo}, {hi}] (estimated error {error:e})")]
    QuadratureDiverged { lo: f64, hi: f64, error: f64 },
    #[error("sum of 1/pi overflowed the double range at step {step}")]
    Overflow { step: u64 },
    #[error("scripted coin flips exhausted at round {round}")]
    ScriptExhausted { round: usize },
    #[error("scripted round {round} has {got} flips, expected {candidates} (candidates) or {stations} (stations)")]
    ScriptLength {
        round: usize,
        got: usize,
        candidates: usize,
        stations: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
