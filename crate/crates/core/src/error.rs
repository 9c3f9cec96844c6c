use thiserror::Error;

/// A violated model invariant, as reported by [`crate::validate_model`].
///
/// Fields hold 0-based indices; messages count classes and servers from 1,
/// as config files do.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("model has no classes")]
    NoClasses,
    #[error("length of `{field}` is {found}, expected {expected}")]
    LengthMismatch { field: &'static str, expected: usize, found: usize },
    #[error("server {} lists unknown class {}", .server + 1, .class + 1)]
    UnknownClass { server: usize, class: usize },
    #[error("class {} is served by more than one server", .class + 1)]
    ServedTwice { class: usize },
    #[error("class {} is not served by any server", .class + 1)]
    Unserved { class: usize },
    #[error("class {} routes to nonexistent class {}", .class + 1, .target + 1)]
    RouteOutOfRange { class: usize, target: usize },
    #[error("cyclic routing reachable from class {}", .class + 1)]
    CyclicRouting { class: usize },
    #[error("arrival rate of class {} must be nonnegative and finite", .class + 1)]
    NegativeArrivalRate { class: usize },
    #[error("service rate must be positive (class {})", .class + 1)]
    NonPositiveServiceRate { class: usize },
    #[error("risk parameter c must be positive")]
    NonPositiveRisk,
}

impl Violation {
    /// Config key holding the offending entry.
    pub fn key(&self) -> &'static str {
        match self {
            Self::NoClasses => "J",
            Self::LengthMismatch { field, .. } => field,
            Self::UnknownClass { .. } | Self::ServedTwice { .. } | Self::Unserved { .. } => "serves",
            Self::RouteOutOfRange { .. } | Self::CyclicRouting { .. } => "route",
            Self::NegativeArrivalRate { .. } => "lambda",
            Self::NonPositiveServiceRate { .. } => "mu",
            Self::NonPositiveRisk => "c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("domain parameter {index} must be positive and finite")]
    NonPositive { index: usize },
    #[error("cap level h must be positive and finite")]
    NonPositiveCap,
    #[error("weighted cap requires positive arrival rate at every class (class {} has none)", .class + 1)]
    CapNeedsArrivals { class: usize },
    #[error("coordinate {index} is negative")]
    NegativeCoordinate { index: usize },
    #[error("starting point is not in the domain")]
    StartOutside,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path needs at least one grid point")]
    Empty,
    #[error("grid times must be strictly increasing (at index {index})")]
    NonIncreasing { index: usize },
    #[error("value at grid index {index} has wrong dimension or is not finite")]
    BadValue { index: usize },
    #[error("initial value has negative coordinate {index}")]
    NegativeStart { index: usize },
    #[error("grids of the compared paths do not match")]
    GridMismatch,
    #[error("step size and horizon must be positive")]
    NonPositiveStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("closed-form value requires a single server whose classes all exit after service")]
    NotCompetingQueues,
    #[error("closed-form value requires positive arrival rates at every class")]
    MissingArrivals,
    #[error("closed-form value requires a rectangular domain")]
    NotRectangle,
    #[error("rate grid must have at least two points and a positive bound")]
    EmptyGrid,
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DpeError {
    #[error("value iteration did not converge within {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("W vanishes at lattice state {index}; V would be infinite")]
    ZeroW { index: usize },
    #[error("field length {found} does not match lattice size {expected}")]
    FieldLength { expected: usize, found: usize },
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("trial count must be positive")]
    NoTrials,
    #[error("horizon cap must be positive")]
    BadHorizon,
    #[error("starting state is not a lattice point of the domain")]
    StartOffLattice,
    #[error("policy list is empty")]
    NoPolicies,
}
