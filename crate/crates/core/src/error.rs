use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outside domain: {0}")]
    OutsideDomain(String),
    #[error("half-integer strain on bond {bond}")]
    HalfIntegerBond { bond: usize },
    #[error("unbalanced cores: {positive} positive, {negative} negative")]
    UnbalancedCores { positive: usize, negative: usize },
    #[error("far field not relaxed: max |alpha| = {max} on the outer annulus")]
    FarField { max: f64 },
    #[error("not a dual geodesic: {0}")]
    NotGeodesic(String),
    #[error("no positive core")]
    NoPositiveCore,
    #[error("energy not preserved: {0}")]
    EnergyMismatch(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
