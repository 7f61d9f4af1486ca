use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is disconnected ({components} connected components)")]
    DisconnectedGraph { components: usize },

    #[error("vertex measure must be positive, got mu[{vertex}] = {value}")]
    NonpositiveMeasure { vertex: usize, value: f64 },

    #[error("edge weight must be nonnegative, got w({i},{j}) = {weight}")]
    NegativeWeight { i: usize, j: usize, weight: f64 },

    #[error("edge ({i},{j}) listed more than once")]
    DuplicateEdge { i: usize, j: usize },

    #[error("self-loop at vertex {vertex}")]
    SelfLoop { vertex: usize },

    #[error("duplicate vertex identifier {0:?}")]
    DuplicateVertex(String),

    #[error("edge endpoint {index} out of range for {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("graph must have at least one vertex")]
    EmptyGraph,

    #[error("vertex function has {got} values, graph has {expected} vertices")]
    DomainMismatch { expected: usize, got: usize },

    #[error("invalid norm exponent p = {0} (need 1 <= p <= inf)")]
    InvalidExponent(f64),

    #[error("max u = {max_u} exceeds the overflow guard")]
    OverflowRisk { max_u: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("lower function is not a sub-solution (worst slack {worst_slack:e} at vertex {vertex})")]
    NotSubSolution { vertex: usize, worst_slack: f64 },

    #[error("upper function is not a super-solution (worst slack {worst_slack:e} at vertex {vertex})")]
    NotSuperSolution { vertex: usize, worst_slack: f64 },

    #[error("sub-solution exceeds super-solution at vertex {vertex}")]
    OrderingViolated { vertex: usize },

    #[error("no super-solution found; tried: {}", attempts.join("; "))]
    NoSupersolutionFound { attempts: Vec<String> },

    #[error("family classification needs at least 3 members, got {0}")]
    TooFewSamples(usize),

    #[error("class-A bound must be positive, got {0}")]
    NonpositiveA(f64),

    #[error("prescribed function vanishes nowhere; nothing to eliminate")]
    NoZeroVertices,

    #[error("prescribed function vanishes everywhere; nothing to keep")]
    AllZeroVertices,

    #[error("reduction requires unit vertex measure")]
    NonUnitMeasure,

    #[error("eliminated block is not positive definite")]
    SingularBlock,

    #[error("waypoint {waypoint} violates the class-A conditions: {}", violations.join(", "))]
    ClassViolation { waypoint: usize, violations: Vec<String> },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("shifted operator (Laplacian + c) is singular")]
    SingularShift,

    #[error("problem file error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NoSupersolutionFound { .. }
                | Error::OverflowRisk { .. }
                | Error::SingularShift
        )
    }
}
