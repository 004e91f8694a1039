use thiserror::Error;

/// Errors raised by the solvers, the simulator and the CLI plumbing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AltqError {
    #[error("rate `{name}` must be strictly positive and finite, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },

    #[error("parameter `{name}` must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("fee `{name}` must be nonnegative, got {value}")]
    NegativeFee { name: &'static str, value: f64 },

    #[error("waiting cost rate C must be strictly positive, got {0}")]
    NonPositiveCost(f64),

    #[error("R = {reward} does not exceed f_e + f_s + C/mu = {bound}: nobody joins an empty system")]
    TrivialSystem { reward: f64, bound: f64 },

    #[error("refund r = {refund} exceeds the entrance fee f_e = {entrance_fee}")]
    InstantReneger { refund: f64, entrance_fee: f64 },

    #[error("reneging threshold {value} exceeds the cap {cap}")]
    ThresholdCapExceeded { value: f64, cap: u64 },

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("generating-function solver needs lambda*q > 0")]
    DegenerateQ,

    #[error("generating-function solver needs n_s > n_e (got n_e = {n_e}, n_s = {n_s})")]
    EmptyBand { n_e: u32, n_s: u32 },

    #[error("boundary system has coinciding roots {0} and {1}")]
    RepeatedRoots(String, String),

    #[error("boundary system is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("no sign change of the net benefit on [0, 1]: U(0) = {at_zero}, U(1) = {at_one}")]
    NoSignChange { at_zero: f64, at_one: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl AltqError {
    /// True for errors caused by the inputs rather than by numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            AltqError::NonPositiveRate { .. }
                | AltqError::NonFinite { .. }
                | AltqError::NegativeFee { .. }
                | AltqError::NonPositiveCost(_)
                | AltqError::TrivialSystem { .. }
                | AltqError::InstantReneger { .. }
                | AltqError::ThresholdCapExceeded { .. }
                | AltqError::InvalidStrategy(_)
                | AltqError::InvalidSweep(_)
                | AltqError::InvalidSimConfig(_)
                | AltqError::Config(_)
        )
    }
}

impl From<std::io::Error> for AltqError {
    fn from(e: std::io::Error) -> Self {
        AltqError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AltqError>;
