use alloc::string::String;
use core::fmt;

/// Errors surfaced by the simulation and certification pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model or law parameter is outside its valid range.
    InvalidParameter(String),
    /// The model is not subcritical (spectral radius >= 1 up to tolerance).
    NotSubcritical { rho: f64 },
    /// No matrix power within the budget has operator norm below 1.
    NotFoundWithinBudget { budget: u64 },
    /// Total population exceeded the explosion guard (2^48 individuals).
    ExplosionGuard { total: u128 },
    /// An adaptive series could not certify the requested tolerance
    /// within its term budget.
    TruncationBudgetExceeded,
    /// No computable truncation criterion for the stationary sampler
    /// (e.g. the immigration alpha-moment is infinite for the given hint).
    TruncationUnbounded,
    /// A mean that must be finite is infinite.
    InfiniteOffspringMean { parent_type: usize, component: usize },
    /// Immigration mean is infinite where a finite mean is required.
    InfiniteImmigrationMean,
    /// E||B||^alpha is infinite, so the alpha < 1 certificate cannot exist.
    InfiniteImmigrationAlphaMoment,
    /// Exact PMF computation would exceed the per-component support cap.
    SupportCapExceeded { cap: u64 },
    /// Exact PMF computation requires finite-support laws.
    UnsupportedLaw(String),
    /// The decay fit needs at least four strictly positive points.
    InsufficientPositivePoints { available: usize },
    /// The top order statistics are all equal; the Hill estimate is undefined.
    DegenerateSample,
    /// The c1 lattice is too large to enumerate.
    CombinatorialBudgetExceeded { k0: u64, lattice_size: u64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NotSubcritical { rho } => {
                write!(f, "model is not subcritical: estimated spectral radius {rho}")
            }
            Error::NotFoundWithinBudget { budget } => {
                write!(f, "no contraction power r <= {budget} with ||M^r|| < 1")
            }
            Error::ExplosionGuard { total } => {
                write!(f, "population exploded past the 2^48 guard (total {total})")
            }
            Error::TruncationBudgetExceeded => {
                write!(f, "adaptive summation could not certify the tail tolerance within budget")
            }
            Error::TruncationUnbounded => {
                write!(f, "no computable truncation criterion for stationary sampling")
            }
            Error::InfiniteOffspringMean { parent_type, component } => write!(
                f,
                "offspring mean is infinite for parent type {parent_type}, component {component}"
            ),
            Error::InfiniteImmigrationMean => write!(f, "immigration mean is infinite"),
            Error::InfiniteImmigrationAlphaMoment => {
                write!(f, "E||B||^alpha is infinite; no alpha < 1 certificate")
            }
            Error::SupportCapExceeded { cap } => {
                write!(f, "probability mass escaped the support cap {cap}")
            }
            Error::UnsupportedLaw(msg) => write!(f, "unsupported law for exact PMF: {msg}"),
            Error::InsufficientPositivePoints { available } => write!(
                f,
                "decay fit needs >= 4 strictly positive points, got {available}"
            ),
            Error::DegenerateSample => write!(f, "degenerate sample: top order statistics equal"),
            Error::CombinatorialBudgetExceeded { k0, lattice_size } => write!(
                f,
                "c1 lattice with k0 = {k0} has {lattice_size} points, over budget; try a larger mu_bar"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
