use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("precision insufficient: {0}")]
    PrecisionInsufficient(String),
    #[error("division by an element only known to be O(pi^{0})")]
    DivisionByZeroMarker(i64),
    #[error("ramified extensions of Q_{0} are wild and not supported")]
    WildRamification(u64),
    #[error("residue polynomial is reducible mod {0}")]
    ReducibleResiduePolynomial(u64),
    #[error("enumeration of {needed} items exceeds cap {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("element is not compact: {0}")]
    NotCompact(String),
    #[error("element is not regular")]
    NotRegular,
    #[error("horizon {horizon} too small: layer {layer} still contributes")]
    HorizonTooSmall { horizon: u32, layer: u32 },
    #[error("epsilon {eps} is not below the summability threshold {threshold}")]
    AboveThreshold { eps: String, threshold: String },
    #[error("elements live in different fields")]
    FieldMismatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Errors that signal missing precision or an exhausted enumeration
    /// budget, as opposed to malformed input.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::PrecisionInsufficient(_)
                | Error::DivisionByZeroMarker(_)
                | Error::CapExceeded { .. }
                | Error::HorizonTooSmall { .. }
        )
    }
}

pub(crate) fn precision<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::PrecisionInsufficient(msg.into()))
}
