//! Kazdan-Warner equations `-Delta u = h e^u - c` on weighted connected
//! finite graphs: operators, Newton and variational solvers, numeric and
//! predicted Brouwer degree, and continuation in the negative regime.

pub mod continuation;
pub mod degree;
pub mod elliptic;
pub mod error;
pub mod family;
pub mod function;
pub mod graph;
pub mod io;
pub mod model;
pub mod operators;
pub mod solve;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
pub use function::VertexFunction;
pub use graph::{GraphSpec, WeightedGraph};
pub use model::{KwProblem, Normalization, Rhs, Solution, Stability};
pub use operators::Norm;
pub use solve::SolveOptions;
