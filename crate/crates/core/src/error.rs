use alloc::string::String;
use core::fmt;

/// Everything that can go wrong inside the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input contained NaN or infinity.
    NonFinite,
    /// Too few samples to estimate a covariance.
    DegenerateInput { samples: usize },
    /// Matrix is not symmetric positive definite.
    NotSpd,
    /// Matrix is not symmetric.
    NotSymmetric,
    DimMismatch { expected: usize, found: usize },
    /// Fixed-point iteration exhausted its budget.
    NoConvergence { iterations: usize, residual: f64 },
    /// Electrode placed at the origin cannot be projected to the sphere.
    ZeroPosition { channel: String },
    DipoleOutsideSphere { radius: f64, sphere: f64 },
    TooFewChannels { needed: usize, found: usize },
    SingularSystem,
    SourceSpaceMismatch,
    ChannelOrderMismatch,
    UnknownChannel(String),
    /// A channel of the union is never observed in the fitting data.
    UncoveredChannel(String),
    EmptyIntersection,
    InvalidBand { low: f64, high: f64, nyquist: f64 },
    UpsamplingUnsupported { from: f64, to: f64 },
    SingleClass,
    InvalidSpec(String),
    TooFewPairs { nonzero: usize },
    TooFewEpochs { needed: usize, found: usize },
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite => write!(f, "input contains non-finite values"),
            Error::DegenerateInput { samples } => {
                write!(f, "need at least 2 samples, got {samples}")
            }
            Error::NotSpd => write!(f, "matrix is not symmetric positive definite"),
            Error::NotSymmetric => write!(f, "matrix is not symmetric"),
            Error::DimMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NoConvergence { iterations, residual } => write!(
                f,
                "no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::ZeroPosition { channel } => {
                write!(f, "channel {channel} is located at the origin")
            }
            Error::DipoleOutsideSphere { radius, sphere } => write!(
                f,
                "dipole at radius {radius} m is not inside the {sphere} m sphere"
            ),
            Error::TooFewChannels { needed, found } => {
                write!(f, "need at least {needed} channels, got {found}")
            }
            Error::SingularSystem => write!(f, "linear system is singular"),
            Error::SourceSpaceMismatch => {
                write!(f, "leadfields were built from different source spaces")
            }
            Error::ChannelOrderMismatch => {
                write!(f, "channel order does not match the operator")
            }
            Error::UnknownChannel(name) => write!(f, "unknown channel {name}"),
            Error::UncoveredChannel(name) => {
                write!(f, "channel {name} is never observed in the training data")
            }
            Error::EmptyIntersection => write!(f, "montages share no channel"),
            Error::InvalidBand { low, high, nyquist } => write!(
                f,
                "invalid band {low}-{high} Hz (must satisfy 0 < low < high < {nyquist})"
            ),
            Error::UpsamplingUnsupported { from, to } => {
                write!(f, "cannot resample from {from} Hz up to {to} Hz")
            }
            Error::SingleClass => write!(f, "training labels contain a single class"),
            Error::InvalidSpec(msg) => write!(f, "invalid simulation spec: {msg}"),
            Error::TooFewPairs { nonzero } => {
                write!(f, "need at least 5 non-zero paired differences, got {nonzero}")
            }
            Error::TooFewEpochs { needed, found } => {
                write!(f, "need at least {needed} epochs per class, got {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for Error {}
