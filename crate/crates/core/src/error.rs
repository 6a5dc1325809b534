use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fiber mismatch: {0}")]
    Composability(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("scale mismatch: symbol sampled at eps={symbol}, field uses eps={field}")]
    ScaleMismatch { symbol: f64, field: f64 },
    #[error("point {0:?} lies outside the sampled potential box")]
    OutOfDomain(Vec<f64>),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("operator not invertible (condition number {0:.3e})")]
    NotInvertible(f64),
    #[error("weight inversion failed (condition number {0:.3e})")]
    SingularWeight(f64),
    #[error("principal symbol rejected: defect {defect:.3e} exceeds {bound:.3e}")]
    BadPrincipalSymbol { defect: f64, bound: f64 },
    #[error("no test region: {0}")]
    NoTestRegion(String),
    #[error("contour error: {0}")]
    Contour(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("cover error: {0}")]
    Cover(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("container error: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
