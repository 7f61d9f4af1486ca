//! Brouwer degree of the residual map: the exact value predicted from the
//! data, the Morse sum over enumerated roots, the Schur-complement reduction
//! that removes vertices where `h` vanishes, and sweeps along parameter paths.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::graph::{GraphSpec, WeightedGraph};
use crate::model::{ClassACondition, KwProblem, RegimeTag, Rhs, Solution};
use crate::solve::{enumerate_escalating, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeValue {
    Value(i32),
    /// Some root is degenerate, so the Morse sum does not apply.
    Undefined,
    /// The data fall outside the regimes where the degree is known.
    NotApplicable,
}

impl DegreeValue {
    pub fn value(self) -> Option<i32> {
        match self {
            DegreeValue::Value(d) => Some(d),
            _ => None,
        }
    }
}

impl Serialize for DegreeValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DegreeValue::Value(d) => s.serialize_i32(*d),
            DegreeValue::Undefined => s.serialize_str("Undefined"),
            DegreeValue::NotApplicable => s.serialize_str("NotApplicable"),
        }
    }
}

/// `-1` when `c >= 0`, `1` when `c < 0` and `h <= 0`, `0` when `c < 0` and
/// `h` is positive somewhere. A function rhs is judged through its shifted
/// scalar form.
pub fn degree_theoretical(p: &KwProblem) -> Result<DegreeValue> {
    let regime = p.regime()?;
    if !regime.admissible() {
        return Ok(DegreeValue::NotApplicable);
    }
    Ok(DegreeValue::Value(match regime.tag {
        RegimeTag::Positive | RegimeTag::Flat => -1,
        RegimeTag::Negative if p.h().max() <= 0.0 => 1,
        RegimeTag::Negative => 0,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub solutions: Vec<Solution>,
    pub numeric_degree: DegreeValue,
    pub theoretical_degree: DegreeValue,
    pub nondegenerate: bool,
    pub radius_used: f64,
    /// Whether radius doubling reproduced the root set.
    pub stabilized: bool,
    #[serde(rename = "match")]
    pub matches: bool,
}

/// Morse sum of `sgn det DF` over the roots found by escalating enumeration.
pub fn degree_numeric(p: &KwProblem, opts: &SolveOptions) -> Result<DegreeReport> {
    let e = enumerate_escalating(p, opts, &[])?;
    let nondegenerate = e.solutions.iter().all(|s| s.jac_det_sign != 0);
    let numeric_degree = if nondegenerate {
        DegreeValue::Value(e.solutions.iter().map(|s| s.jac_det_sign as i32).sum())
    } else {
        DegreeValue::Undefined
    };
    let theoretical_degree = degree_theoretical(p)?;
    let matches = matches!((numeric_degree, theoretical_degree), (DegreeValue::Value(a), DegreeValue::Value(b)) if a == b);
    Ok(DegreeReport {
        solutions: e.solutions,
        numeric_degree,
        theoretical_degree,
        nondegenerate,
        radius_used: e.radius_used,
        stabilized: e.stabilized,
        matches,
    })
}

/// Elimination of the vertices where `h = 0`.
///
/// With `L = [[P, Q^T], [Q, R]]` (kept vertices first) the reduced operator
/// is `P - Q^T R^-1 Q` and the reduced rhs is `f_kept - Q^T R^-1 f_elim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurReduction {
    pub reduced_graph: WeightedGraph,
    pub reduced_h: VertexFunction,
    pub reduced_f: VertexFunction,
    pub r_matrix_logdet: f64,
    pub kept_vertices: Vec<usize>,
    pub eliminated_vertices: Vec<usize>,
    #[serde(skip)]
    pub reduced_laplacian: DMatrix<f64>,
    #[serde(skip)]
    r_inv_q: DMatrix<f64>,
    #[serde(skip)]
    r_inv_f: Vec<f64>,
}

impl SchurReduction {
    /// The full-graph function determined by values on the kept vertices:
    /// eliminated values solve the linear equations there.
    pub fn lift(&self, kept: &VertexFunction) -> VertexFunction {
        let n = self.kept_vertices.len() + self.eliminated_vertices.len();
        let mut u = VertexFunction::zeros(n);
        for (i, &x) in self.kept_vertices.iter().enumerate() {
            u[x] = kept[i];
        }
        for (a, &z) in self.eliminated_vertices.iter().enumerate() {
            let s: f64 = (0..kept.len()).map(|i| self.r_inv_q[(a, i)] * kept[i]).sum();
            u[z] = -s - self.r_inv_f[a];
        }
        u
    }

    /// Restriction of a full-graph function to the kept vertices.
    pub fn restrict(&self, u: &VertexFunction) -> VertexFunction {
        VertexFunction::new(self.kept_vertices.iter().map(|&x| u[x]).collect())
    }
}

pub fn schur_reduce(p: &KwProblem) -> Result<(SchurReduction, KwProblem)> {
    let g = p.graph();
    if !g.is_unit_measure() {
        return Err(Error::NonUnitMeasure);
    }
    let h = p.h();
    let kept: Vec<usize> = (0..g.len()).filter(|&x| h[x] != 0.0).collect();
    let elim: Vec<usize> = (0..g.len()).filter(|&x| h[x] == 0.0).collect();
    if elim.is_empty() {
        return Err(Error::NoZeroVertices);
    }
    if kept.is_empty() {
        return Err(Error::AllZeroVertices);
    }
    let l = g.symmetric_laplacian();
    let block = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])]);
    let pm = block(&kept, &kept);
    let q = block(&elim, &kept);
    let r = block(&elim, &elim);
    let chol = r.cholesky().ok_or(Error::SingularBlock)?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let r_inv_q = chol.solve(&q);
    let f = p.rhs_values();
    let f_elim = nalgebra::DVector::from_iterator(elim.len(), elim.iter().map(|&z| f[z]));
    let r_inv_f = chol.solve(&f_elim);
    let reduced = &pm - q.transpose() * &r_inv_q;
    let qt_rf = q.transpose() * &r_inv_f;
    let reduced_f = VertexFunction::from_fn(kept.len(), |i| f[kept[i]] - qt_rf[i]);
    let reduced_h = VertexFunction::new(kept.iter().map(|&x| h[x]).collect());

    let scale = reduced.amax();
    let mut edges = Vec::new();
    for i in 0..kept.len() {
        for j in (i + 1)..kept.len() {
            let w = -reduced[(i, j)];
            if w > 1e-14 * scale {
                edges.push((i, j, w));
            }
        }
    }
    let reduced_graph = GraphSpec {
        vertices: kept.iter().map(|&x| g.names()[x].clone()).collect(),
        mu: vec![1.0; kept.len()],
        edges,
    }
    .build()?;
    let problem = KwProblem::new(reduced_graph.clone(), reduced_h.clone(), Rhs::Function(reduced_f.clone()))?;
    Ok((
        SchurReduction {
            reduced_graph,
            reduced_h,
            reduced_f,
            r_matrix_logdet: logdet,
            kept_vertices: kept,
            eliminated_vertices: elim,
            reduced_laplacian: reduced,
            r_inv_q,
            r_inv_f: r_inv_f.iter().copied().collect(),
        },
        problem,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionConsistency {
    pub original: DegreeValue,
    pub reduced: DegreeValue,
    pub consistent: bool,
}

/// Compares the numeric degrees of a problem and of its Schur reduction.
pub fn degree_reduction_consistency(p: &KwProblem, opts: &SolveOptions) -> Result<ReductionConsistency> {
    let (_, reduced) = schur_reduce(p)?;
    let original = degree_numeric(p, opts)?.numeric_degree;
    let reduced = degree_numeric(&reduced, opts)?.numeric_degree;
    let consistent = matches!((original, reduced), (DegreeValue::Value(a), DegreeValue::Value(b)) if a == b);
    Ok(ReductionConsistency { original, reduced, consistent })
}

/// `count` problems linearly interpolating `(h, rhs)` from `start` to `end`
/// (endpoints included) on the graph of `start`.
pub fn interpolate_path(start: &KwProblem, end: &KwProblem, count: usize) -> Result<Vec<KwProblem>> {
    if start.graph() != end.graph() {
        return Err(Error::PreconditionViolated("path endpoints live on different graphs".into()));
    }
    if count < 2 {
        return Err(Error::InvalidOptions("a path needs at least two waypoints".into()));
    }
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            let lerp = |a: f64, b: f64| if k == count - 1 { b } else { a + t * (b - a) };
            let h = start.h().zip_map(end.h(), lerp);
            let rhs = match (start.rhs(), end.rhs()) {
                (Rhs::Constant(a), Rhs::Constant(b)) => Rhs::Constant(lerp(*a, *b)),
                _ => Rhs::Function(start.rhs_values().zip_map(&end.rhs_values(), lerp)),
            };
            KwProblem::new(start.graph().clone(), h, rhs)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChangeKind {
    /// The predicted degree changes too (the path left a regime).
    RegimeChange,
    /// The predicted degree is constant; points at a missed root.
    Unexplained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub c: Option<f64>,
    pub regime: RegimeTag,
    pub root_count: usize,
    pub numeric_degree: DegreeValue,
    pub theoretical_degree: DegreeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeChange {
    pub from_index: usize,
    pub to_index: usize,
    pub from: DegreeValue,
    pub to: DegreeValue,
    pub kind: ChangeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub class_a: Option<f64>,
    pub waypoints: Vec<SweepPoint>,
    pub changes: Vec<DegreeChange>,
    /// No unexplained degree changes.
    pub consistent: bool,
}

/// Numeric degree at every waypoint of `path`. With `class_a = Some(A)`
/// every waypoint must pass the class-A check for that `A`.
pub fn degree_invariance_sweep(path: &[KwProblem], class_a: Option<f64>, opts: &SolveOptions) -> Result<SweepReport> {
    opts.validate()?;
    if let Some(a) = class_a {
        for (k, p) in path.iter().enumerate() {
            let report = p.class_a_check(a)?;
            if !report.holds() {
                return Err(Error::ClassViolation {
                    waypoint: k,
                    violations: report.violations.iter().map(ClassACondition::to_string).collect(),
                });
            }
        }
    }
    let waypoints = path
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let report = degree_numeric(p, opts)?;
            Ok(SweepPoint {
                index,
                c: p.scalar_c(),
                regime: p.regime()?.tag,
                root_count: report.solutions.len(),
                numeric_degree: report.numeric_degree,
                theoretical_degree: report.theoretical_degree,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let changes: Vec<DegreeChange> = waypoints
        .windows(2)
        .filter(|w| w[0].numeric_degree != w[1].numeric_degree)
        .map(|w| DegreeChange {
            from_index: w[0].index,
            to_index: w[1].index,
            from: w[0].numeric_degree,
            to: w[1].numeric_degree,
            kind: if w[0].theoretical_degree != w[1].theoretical_degree {
                ChangeKind::RegimeChange
            } else {
                ChangeKind::Unexplained
            },
        })
        .collect();
    let consistent = changes.iter().all(|c| c.kind == ChangeKind::RegimeChange);
    Ok(SweepReport { class_a, waypoints, changes, consistent })
}
