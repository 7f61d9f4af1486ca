//! JSON input files.
//!
//! Every file embeds a graph (`vertices`, `mu`, `edges`) next to its data:
//!
//! ```json
//! {"vertices": ["a", "b"], "mu": [1, 1], "edges": [[0, 1, 1.0]],
//!  "h": [1, -2], "c": 0}
//! ```
//!
//! A problem carries `h` and exactly one of `c` (scalar) or `f` (per vertex).

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::graph::{GraphSpec, WeightedGraph};
use crate::model::{KwProblem, Rhs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemData {
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

impl ProblemData {
    pub fn into_problem(self, graph: WeightedGraph) -> Result<KwProblem> {
        let rhs = match (self.c, self.f) {
            (Some(c), None) => Rhs::Constant(c),
            (None, Some(f)) => Rhs::Function(VertexFunction::new(f)),
            (Some(_), Some(_)) => return Err(Error::Parse("give either \"c\" or \"f\", not both".into())),
            (None, None) => return Err(Error::Parse("missing \"c\" or \"f\"".into())),
        };
        KwProblem::new(graph, VertexFunction::new(self.h), rhs)
    }

    pub fn from_problem(p: &KwProblem) -> Self {
        let (c, f) = match p.rhs() {
            Rhs::Constant(c) => (Some(*c), None),
            Rhs::Function(f) => (None, Some(f.values().to_vec())),
        };
        Self { h: p.h().values().to_vec(), c, f }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub graph: GraphSpec,
    #[serde(flatten)]
    pub data: ProblemData,
}

impl ProblemFile {
    pub fn from_problem(p: &KwProblem) -> Self {
        Self { graph: p.graph().to_spec(), data: ProblemData::from_problem(p) }
    }

    pub fn into_problem(self) -> Result<KwProblem> {
        let g = self.graph.build()?;
        self.data.into_problem(g)
    }
}

/// A degree sweep between two endpoint problems on one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    #[serde(flatten)]
    pub graph: GraphSpec,
    pub start: ProblemData,
    pub end: ProblemData,
    #[serde(default)]
    pub class_a: Option<f64>,
    #[serde(default)]
    pub waypoints: Option<usize>,
}

/// A graph with one prescribed function `h` (for `c` families).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    #[serde(flatten)]
    pub graph: GraphSpec,
    pub h: Vec<f64>,
}

/// The family `-Delta u = (K + lambda) e^u - kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFile {
    #[serde(flatten)]
    pub graph: GraphSpec,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_problem(text: &str) -> Result<KwProblem> {
    from_json::<ProblemFile>(text)?.into_problem()
}
