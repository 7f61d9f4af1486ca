//! Numerical tolerances shared across the crate.
//!
//! All arithmetic is f64. Solver-facing values can be overridden through
//! [`crate::solve::SolveOptions`]; the rest are fixed.

/// Sup-norm residual accepted as a root.
pub const RESIDUAL: f64 = 1e-10;

/// |det DF| relative to the product of Jacobian row norms below this is a
/// degenerate root.
pub const DEGENERACY: f64 = 1e-8;

/// Band around zero for the smallest eigenvalue of the stability form.
pub const STABILITY: f64 = 1e-8;

/// Largest vertex value allowed before exponentials are evaluated.
pub const OVERFLOW_U: f64 = 700.0;

/// Eigenvalues of the symmetric Laplacian below `KERNEL * max diag` count as zero.
pub const KERNEL: f64 = 1e-10;

/// Relative band used when deciding that an integral or a rhs vanishes.
pub const ZERO_REL: f64 = 1e-12;

/// Exact linear-programming elliptic constant is used up to this many vertices.
pub const ELLIPTIC_EXACT_MAX_VERTICES: usize = 50;
