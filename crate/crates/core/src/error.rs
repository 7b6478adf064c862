use core::fmt;

/// Errors raised by precondition checks across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid construction rejected the requested shape.
    InvalidGrid(&'static str),
    /// A field value or parameter was NaN or infinite.
    NonFinite(&'static str),
    /// Field length or grid does not match its grid spec.
    ShapeMismatch,
    /// Two fields that must share a grid do not.
    GridMismatch,
    /// A strictly positive quantity was zero or negative.
    NonPositive(&'static str),
    /// Tabulated potential evaluated outside its box.
    OutsideTabulatedBox,
    /// Nehari projection of the zero state.
    ZeroState,
    /// Quartic form F(u,v) ≤ 0, so no Nehari scale exists.
    NonPositiveQuartic,
    /// A cross integral that must be positive vanished (disjoint supports).
    VanishingCrossIntegral(&'static str),
    /// A node mask required to be nonempty was empty.
    EmptyMask(&'static str),
    /// Dirichlet masks with empty intersection.
    DisjointMasks,
    /// Too few converged records for a fit.
    TooFewRecords { needed: usize, got: usize },
    /// Catch-all for invalid solver/experiment parameters.
    InvalidParameter(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::ShapeMismatch => write!(f, "field length does not match grid"),
            Error::GridMismatch => write!(f, "fields live on different grids"),
            Error::NonPositive(what) => write!(f, "{what} must be positive"),
            Error::OutsideTabulatedBox => write!(f, "tabulated potential evaluated outside its box"),
            Error::ZeroState => write!(f, "state is identically zero"),
            Error::NonPositiveQuartic => write!(f, "quartic form is not positive; no Nehari scale"),
            Error::VanishingCrossIntegral(what) => {
                write!(f, "vanishing cross integral ({what}): supports are disjoint")
            }
            Error::EmptyMask(what) => write!(f, "empty mask: {what}"),
            Error::DisjointMasks => write!(f, "mask intersection is empty"),
            Error::TooFewRecords { needed, got } => {
                write!(f, "need at least {needed} converged records, got {got}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
