//! The Kazdan-Warner problem `-Delta u = h e^u - f` on a weighted graph.
//!
//! The residual map is `F(u) = -Delta u + f - h e^u`; its zeros are the
//! critical points of
//!
//! ```text
//! J(u) = int ( |grad u|^2 / 2 + f u - h e^u ) dmu.
//! ```
//!
//! A scalar right-hand side `c` is the constant function `f = c`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::graph::WeightedGraph;
use crate::tol;

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Constant(f64),
    Function(VertexFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KwProblem {
    graph: WeightedGraph,
    h: VertexFunction,
    rhs: Rhs,
}

/// The scalar-rhs problem obtained by subtracting the Poisson potential `phi`
/// of `f`: if `u` solves the original problem then `u - phi` solves this one.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedProblem {
    pub problem: KwProblem,
    pub phi: VertexFunction,
}

/// Normalisation for [`WeightedGraph::solve_poisson`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `int phi dmu = 0`.
    MeanZero,
    /// `min phi = 0`.
    MinZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stability {
    Unstable,
    Stable,
    StrictlyStable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Unstable => "Unstable",
            Stability::Stable => "Stable",
            Stability::StrictlyStable => "StrictlyStable",
        })
    }
}

/// A root of the residual map with its local data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub u: VertexFunction,
    pub residual_linf: f64,
    /// Sign of `det DF(u)`; zero when the root is degenerate.
    pub jac_det_sign: i8,
    /// `|det DF(u)|` divided by the product of the Jacobian row norms.
    pub det_ratio: f64,
    pub stability: Stability,
    /// Smallest eigenvalue of `diag(mu) DF(u)`, the matrix of the second variation.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    Positive,
    Flat,
    Negative,
}

/// Sign regime of the right-hand side with the necessary-condition predicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime {
    pub tag: RegimeTag,
    pub rhs_integral: f64,
    pub max_h_pos: bool,
    pub min_h_neg: bool,
    pub h_changes_sign: bool,
    pub int_h_neg: bool,
    /// `int h e^phi dmu < 0` with `phi` the min-zero Poisson potential of `f`
    /// (`phi = 0` for a scalar rhs).
    pub int_he_phi_neg: bool,
}

impl Regime {
    /// Whether the problem meets the conditions under which solutions are
    /// a priori bounded and the degree is defined.
    pub fn admissible(&self) -> bool {
        match self.tag {
            RegimeTag::Positive => self.max_h_pos,
            RegimeTag::Flat => self.int_he_phi_neg && self.max_h_pos,
            RegimeTag::Negative => self.min_h_neg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassACondition {
    /// `max |h| + |c| <= A`
    Bound,
    /// `h(x) > 0` implies `h(x) >= 1/A`
    PositiveFloor,
    /// `c > 0` implies `c >= 1/A`
    PositiveRhs,
    /// `c = 0` implies `int h dmu <= -1/A`
    FlatIntegral,
    /// `c < 0` implies `c <= -1/A` and `min h <= -1/A`
    NegativeRhs,
}

impl fmt::Display for ClassACondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassACondition::Bound => "(1) max|h| + |c| <= A",
            ClassACondition::PositiveFloor => "(2) h > 0 => h >= 1/A",
            ClassACondition::PositiveRhs => "(3) c > 0 => c >= 1/A",
            ClassACondition::FlatIntegral => "(4) c = 0 => int h <= -1/A",
            ClassACondition::NegativeRhs => "(5) c < 0 => c <= -1/A, min h <= -1/A",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAReport {
    pub a: f64,
    pub violations: Vec<ClassACondition>,
}

impl ClassAReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

impl KwProblem {
    pub fn new(graph: WeightedGraph, h: VertexFunction, rhs: Rhs) -> Result<Self> {
        h.check_domain(&graph)?;
        let finite = |f: &VertexFunction| f.iter().all(|x| x.is_finite());
        if !finite(&h) {
            return Err(Error::PreconditionViolated("h must be finite".into()));
        }
        match &rhs {
            Rhs::Constant(c) if !c.is_finite() => {
                return Err(Error::PreconditionViolated("c must be finite".into()))
            }
            Rhs::Function(f) => {
                f.check_domain(&graph)?;
                if !finite(f) {
                    return Err(Error::PreconditionViolated("f must be finite".into()));
                }
            }
            _ => {}
        }
        Ok(Self { graph, h, rhs })
    }

    pub fn with_constant(graph: WeightedGraph, h: impl Into<VertexFunction>, c: f64) -> Result<Self> {
        Self::new(graph, h.into(), Rhs::Constant(c))
    }

    pub fn with_function(
        graph: WeightedGraph,
        h: impl Into<VertexFunction>,
        f: impl Into<VertexFunction>,
    ) -> Result<Self> {
        Self::new(graph, h.into(), Rhs::Function(f.into()))
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn h(&self) -> &VertexFunction {
        &self.h
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn scalar_c(&self) -> Option<f64> {
        match self.rhs {
            Rhs::Constant(c) => Some(c),
            Rhs::Function(_) => None,
        }
    }

    /// The right-hand side as a vertex function.
    pub fn rhs_values(&self) -> VertexFunction {
        match &self.rhs {
            Rhs::Constant(c) => VertexFunction::constant(self.len(), *c),
            Rhs::Function(f) => f.clone(),
        }
    }

    pub fn rhs_integral(&self) -> f64 {
        match &self.rhs {
            Rhs::Constant(c) => c * self.graph.total_measure(),
            Rhs::Function(f) => f.iter().zip(self.graph.mu()).map(|(v, m)| v * m).sum(),
        }
    }

    /// Typical magnitude of the data, `max(|f|, |h|, 1)`.
    pub fn natural_scale(&self) -> f64 {
        self.rhs_values().sup_norm().max(self.h.sup_norm()).max(1.0)
    }

    fn exp_u(&self, u: &VertexFunction) -> Result<VertexFunction> {
        u.check_domain(&self.graph)?;
        let max_u = u.max();
        if max_u > tol::OVERFLOW_U || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::OverflowRisk { max_u });
        }
        Ok(u.map(f64::exp))
    }

    /// `F(u) = -Delta u + f - h e^u`.
    pub fn residual(&self, u: &VertexFunction) -> Result<VertexFunction> {
        let e = self.exp_u(u)?;
        let lap = self.graph.laplacian(u)?;
        let f = self.rhs_values();
        Ok(VertexFunction::from_fn(self.len(), |x| -lap[x] + f[x] - self.h[x] * e[x]))
    }

    /// `DF(u) = L - diag(h e^u)` with `L` the (row-scaled) matrix of `-Delta`.
    pub fn jacobian(&self, u: &VertexFunction) -> Result<DMatrix<f64>> {
        let e = self.exp_u(u)?;
        let mut j = self.graph.laplacian_matrix();
        for x in 0..self.len() {
            j[(x, x)] -= self.h[x] * e[x];
        }
        Ok(j)
    }

    /// `diag(mu) DF(u) = (D - W) - diag(mu h e^u)`, symmetric; its quadratic
    /// form is `int (|grad xi|^2 - h e^u xi^2) dmu`.
    pub fn stability_matrix(&self, u: &VertexFunction) -> Result<DMatrix<f64>> {
        let e = self.exp_u(u)?;
        let mut m = self.graph.symmetric_laplacian();
        for x in 0..self.len() {
            m[(x, x)] -= self.graph.mu()[x] * self.h[x] * e[x];
        }
        Ok(m)
    }

    pub fn energy(&self, u: &VertexFunction) -> Result<f64> {
        let e = self.exp_u(u)?;
        let f = self.rhs_values();
        let potential: f64 = (0..self.len())
            .map(|x| self.graph.mu()[x] * (f[x] * u[x] - self.h[x] * e[x]))
            .sum();
        Ok(0.5 * self.graph.dirichlet_energy(u)? + potential)
    }

    /// Classification by the smallest eigenvalue of the second variation,
    /// with a band of [`tol::STABILITY`] around zero.
    pub fn stability(&self, u: &VertexFunction) -> Result<(Stability, f64)> {
        let m = self.stability_matrix(u)?;
        let lambda = SymmetricEigen::new(m).eigenvalues.min();
        let class = if lambda > tol::STABILITY {
            Stability::StrictlyStable
        } else if lambda >= -tol::STABILITY {
            Stability::Stable
        } else {
            Stability::Unstable
        };
        Ok((class, lambda))
    }

    /// Builds a [`Solution`] record at `u` (no convergence check).
    pub fn assess(&self, u: VertexFunction) -> Result<Solution> {
        let residual_linf = self.residual(&u)?.sup_norm();
        let j = self.jacobian(&u)?;
        let (jac_det_sign, det_ratio) = det_sign(&j);
        let (stability, min_eigenvalue) = self.stability(&u)?;
        Ok(Solution { u, residual_linf, jac_det_sign, det_ratio, stability, min_eigenvalue })
    }

    pub fn regime(&self) -> Result<Regime> {
        let h = &self.h;
        let integral = self.rhs_integral();
        let (tag, phi) = match &self.rhs {
            Rhs::Constant(c) => (sign_tag(*c, 0.0), None),
            Rhs::Function(f) => {
                let scale: f64 = f.iter().zip(self.graph.mu()).map(|(v, m)| v.abs() * m).sum();
                let phi = self.graph.solve_poisson(f, Normalization::MinZero)?;
                (sign_tag(integral, tol::ZERO_REL * scale), Some(phi))
            }
        };
        let int_h = self.graph.integrate(h)?;
        let int_he_phi = match &phi {
            None => int_h,
            Some(phi) => self.graph.integrate(&h.zip_map(phi, |a, p| a * p.exp()))?,
        };
        Ok(Regime {
            tag,
            rhs_integral: integral,
            max_h_pos: h.max() > 0.0,
            min_h_neg: h.min() < 0.0,
            h_changes_sign: h.max() > 0.0 && h.min() < 0.0,
            int_h_neg: int_h < 0.0,
            int_he_phi_neg: int_he_phi < 0.0,
        })
    }

    /// The equivalent scalar-rhs problem `(h e^phi, mean f)`.
    pub fn shifted(&self) -> Result<ShiftedProblem> {
        match &self.rhs {
            Rhs::Constant(_) => Ok(ShiftedProblem {
                problem: self.clone(),
                phi: VertexFunction::zeros(self.len()),
            }),
            Rhs::Function(f) => {
                let phi = self.graph.solve_poisson(f, Normalization::MinZero)?;
                let h = self.h.zip_map(&phi, |a, p| a * p.exp());
                let c = self.graph.mean(f)?;
                Ok(ShiftedProblem {
                    problem: KwProblem::new(self.graph.clone(), h, Rhs::Constant(c))?,
                    phi,
                })
            }
        }
    }

    /// Checks the uniform class-A conditions on `(h, c)`; a function rhs is
    /// checked through its shifted scalar form.
    pub fn class_a_check(&self, a: f64) -> Result<ClassAReport> {
        if !(a > 0.0) {
            return Err(Error::NonpositiveA(a));
        }
        let shifted;
        let (h, c) = match &self.rhs {
            Rhs::Constant(c) => (&self.h, *c),
            Rhs::Function(_) => {
                shifted = self.shifted()?.problem;
                (&shifted.h, shifted.scalar_c().expect("shifted rhs is scalar"))
            }
        };
        let inv = 1.0 / a;
        let mut violations = Vec::new();
        if h.sup_norm() + c.abs() > a {
            violations.push(ClassACondition::Bound);
        }
        if h.iter().any(|&v| v > 0.0 && v < inv) {
            violations.push(ClassACondition::PositiveFloor);
        }
        if c > 0.0 && c < inv {
            violations.push(ClassACondition::PositiveRhs);
        }
        if c == 0.0 && self.graph.integrate(h)? > -inv {
            violations.push(ClassACondition::FlatIntegral);
        }
        if c < 0.0 && (c > -inv || h.min() > -inv) {
            violations.push(ClassACondition::NegativeRhs);
        }
        Ok(ClassAReport { a, violations })
    }

    /// Relabels vertices: new vertex `i` is old vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let rhs = match &self.rhs {
            Rhs::Constant(c) => Rhs::Constant(*c),
            Rhs::Function(f) => Rhs::Function(f.permuted(perm)),
        };
        Self::new(self.graph.permuted(perm)?, self.h.permuted(perm), rhs)
    }
}

fn sign_tag(value: f64, band: f64) -> RegimeTag {
    if value > band {
        RegimeTag::Positive
    } else if value < -band {
        RegimeTag::Negative
    } else {
        RegimeTag::Flat
    }
}

/// Sign of the determinant and the Hadamard ratio `|det| / prod ||row||`;
/// the sign is reported as zero when the ratio is below [`tol::DEGENERACY`].
pub fn det_sign(j: &DMatrix<f64>) -> (i8, f64) {
    let det = j.clone().lu().determinant();
    let rows: f64 = j.row_iter().map(|r| r.norm()).product();
    let ratio = if rows > 0.0 { det.abs() / rows } else { 0.0 };
    let sign = if ratio < tol::DEGENERACY || det == 0.0 {
        0
    } else if det > 0.0 {
        1
    } else {
        -1
    };
    (sign, ratio)
}

impl WeightedGraph {
    /// Solves `-Delta phi = mean(f) - f` under the chosen normalisation.
    pub fn solve_poisson(&self, f: &VertexFunction, norm: Normalization) -> Result<VertexFunction> {
        f.check_domain(self)?;
        let mean = self.mean(f)?;
        let mu = self.mu();
        // (D - W) phi = diag(mu) (mean - f), made definite by adding mu mu^T,
        // which also enforces int phi dmu = 0.
        let mut a = self.symmetric_laplacian();
        for i in 0..self.len() {
            for j in 0..self.len() {
                a[(i, j)] += mu[i] * mu[j];
            }
        }
        let b = nalgebra::DVector::from_fn(self.len(), |x, _| mu[x] * (mean - f[x]));
        let chol = a.cholesky().ok_or(Error::DisconnectedGraph { components: 0 })?;
        let mut phi = VertexFunction::from_dvector(&chol.solve(&b));
        if norm == Normalization::MinZero {
            let m = phi.min();
            phi = phi.map(|p| p - m);
        }
        Ok(phi)
    }
}
