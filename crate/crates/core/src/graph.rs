//! Weighted finite graphs with a vertex measure.
//!
//! Vertices carry opaque string identifiers and are mapped to dense indices
//! `0..n` at build time; every numeric routine works on the dense indices.
//! Edges are undirected with weight `w > 0`; a listed edge of weight zero is
//! accepted and treated as absent.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// On-disk / wire description of a graph.
///
/// `edges` holds `[i, j, w]` triples with zero-based indices into `vertices`;
/// each undirected edge is listed once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    pub mu: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphSpec {
    /// Checks everything except connectivity.
    fn validate_structure(&self) -> Result<()> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::with_capacity(n);
        for v in &self.vertices {
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVertex(v.clone()));
            }
        }
        if self.mu.len() != n {
            return Err(Error::DomainMismatch { expected: n, got: self.mu.len() });
        }
        for (vertex, &value) in self.mu.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonpositiveMeasure { vertex, value });
            }
        }
        let mut pairs = HashSet::with_capacity(self.edges.len());
        for &(i, j, weight) in &self.edges {
            for index in [i, j] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, len: n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop { vertex: i });
            }
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(Error::NegativeWeight { i, j, weight });
            }
            if !pairs.insert((i.min(j), i.max(j))) {
                return Err(Error::DuplicateEdge { i, j });
            }
        }
        Ok(())
    }

    /// Dimension of the kernel of the graph Laplacian, read off the spectrum
    /// of the symmetric form. Equals the number of connected components.
    /// Connectivity is not required.
    pub fn kernel_dimension(&self) -> Result<usize> {
        self.validate_structure()?;
        let ls = symmetric_laplacian(self.vertices.len(), &self.edges);
        Ok(count_kernel(&ls))
    }

    pub fn build(&self) -> Result<WeightedGraph> {
        self.validate_structure()?;
        let n = self.vertices.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for &(i, j, w) in &self.edges {
            if w > 0.0 {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
                edges.push((i.min(j), i.max(j), w));
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|&(j, _)| j);
        }
        let components = count_components(&adjacency);
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(WeightedGraph {
            names: self.vertices.clone(),
            mu: self.mu.clone(),
            adjacency,
            edges,
        })
    }
}

/// A validated connected weighted graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    names: Vec<String>,
    mu: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Graph on `n` vertices named `"0".."n-1"` with unit measure.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Self::with_measure(vec![1.0; n], edges)
    }

    pub fn with_measure(mu: Vec<f64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        GraphSpec {
            vertices: (0..mu.len()).map(|i| i.to_string()).collect(),
            mu,
            edges: edges.to_vec(),
        }
        .build()
    }

    /// The single edge graph with unit weight and measure.
    pub fn k2() -> Self {
        Self::from_edges(2, &[(0, 1, 1.0)]).expect("K2 is valid")
    }

    /// The path on three vertices with unit weights and measure.
    pub fn p3() -> Self {
        Self::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).expect("P3 is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn total_measure(&self) -> f64 {
        self.mu.iter().sum()
    }

    pub fn is_unit_measure(&self) -> bool {
        self.mu.iter().all(|&m| m == 1.0)
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// Edges with positive weight as `(i, j, w)`, `i < j`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.adjacency[x]
            .binary_search_by_key(&y, |&(j, _)| j)
            .map(|k| self.adjacency[x][k].1)
            .unwrap_or(0.0)
    }

    /// Weighted degree `sum_y w_xy`.
    pub fn degree(&self, x: usize) -> f64 {
        self.adjacency[x].iter().map(|&(_, w)| w).sum()
    }

    /// `D - W`: the matrix of `-Delta` scaled by the measure, i.e. `diag(mu) L`.
    /// Symmetric positive semi-definite with kernel spanned by constants.
    pub fn symmetric_laplacian(&self) -> DMatrix<f64> {
        symmetric_laplacian(self.len(), &self.edges)
    }

    /// The matrix `L` of `-Delta` acting on vertex-indexed vectors: row `x`
    /// of `D - W` divided by `mu_x`. Symmetric only for constant measure.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let mut l = self.symmetric_laplacian();
        for (x, &m) in self.mu.iter().enumerate() {
            l.row_mut(x).scale_mut(1.0 / m);
        }
        l
    }

    pub fn kernel_dimension(&self) -> usize {
        count_kernel(&self.symmetric_laplacian())
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.names.clone(),
            mu: self.mu.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Relabels vertices: new vertex `i` is old vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        GraphSpec {
            vertices: perm.iter().map(|&p| self.names[p].clone()).collect(),
            mu: perm.iter().map(|&p| self.mu[p]).collect(),
            edges: self.edges.iter().map(|&(i, j, w)| (inverse[i], inverse[j], w)).collect(),
        }
        .build()
    }

    /// Same graph with weights and measure multiplied by `t > 0`; the
    /// Laplacian is unchanged.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        GraphSpec {
            vertices: self.names.clone(),
            mu: self.mu.iter().map(|m| m * t).collect(),
            edges: self.edges.iter().map(|&(i, j, w)| (i, j, w * t)).collect(),
        }
        .build()
    }
}

impl Serialize for WeightedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

fn symmetric_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, w) in edges {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    l
}

fn count_kernel(ls: &DMatrix<f64>) -> usize {
    let n = ls.nrows();
    let scale = (0..n).map(|i| ls[(i, i)]).fold(0.0, f64::max).max(1.0);
    let eig = SymmetricEigen::new(ls.clone());
    eig.eigenvalues.iter().filter(|&&v| v.abs() <= tol::KERNEL * scale * n as f64).count()
}

fn count_components(adjacency: &[Vec<(usize, f64)>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, edges: &[(usize, usize, f64)]) -> GraphSpec {
        GraphSpec {
            vertices: (1..=n).map(|i| i.to_string()).collect(),
            mu: vec![1.0; n],
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn builds_fixtures() {
        let k2 = spec(2, &[(0, 1, 1.0)]).build().unwrap();
        assert_eq!(k2.len(), 2);
        assert_eq!(k2.weight(0, 1), 1.0);
        let p3 = spec(3, &[(0, 1, 1.0), (1, 2, 1.0)]).build().unwrap();
        assert_eq!(p3.degree(1), 2.0);
        assert_eq!(p3.weight(0, 2), 0.0);
    }

    #[test]
    fn rejects_isolated_vertex() {
        let err = spec(3, &[(0, 1, 1.0)]).build().unwrap_err();
        assert_eq!(err, Error::DisconnectedGraph { components: 2 });
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = spec(2, &[(0, 1, 1.0)]);
        s.mu[1] = 0.0;
        assert!(matches!(s.build(), Err(Error::NonpositiveMeasure { vertex: 1, .. })));

        let s = spec(2, &[(0, 1, -1.0)]);
        assert!(matches!(s.build(), Err(Error::NegativeWeight { .. })));

        let s = spec(2, &[(0, 1, 1.0), (1, 0, 2.0)]);
        assert!(matches!(s.build(), Err(Error::DuplicateEdge { .. })));

        let s = spec(2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        assert!(matches!(s.build(), Err(Error::SelfLoop { vertex: 0 })));

        let mut s = spec(2, &[(0, 1, 1.0)]);
        s.vertices[1] = "1".into();
        assert!(matches!(s.build(), Err(Error::DuplicateVertex(_))));

        let s = spec(2, &[(0, 5, 1.0)]);
        assert!(matches!(s.build(), Err(Error::IndexOutOfRange { index: 5, len: 2 })));
    }

    #[test]
    fn zero_weight_edge_does_not_connect() {
        let err = spec(2, &[(0, 1, 0.0)]).build().unwrap_err();
        assert_eq!(err, Error::DisconnectedGraph { components: 2 });
    }

    #[test]
    fn laplacian_matrices_of_fixtures() {
        let k2 = WeightedGraph::k2();
        assert_eq!(k2.laplacian_matrix(), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let p3 = WeightedGraph::p3();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(p3.laplacian_matrix(), expected);
        let eig = SymmetricEigen::new(k2.symmetric_laplacian());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn general_measure_scales_rows() {
        let g = WeightedGraph::with_measure(vec![2.0, 0.5], &[(0, 1, 1.0)]).unwrap();
        let l = g.laplacian_matrix();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -2.0, 2.0]));
        let row_sums = l.column_sum();
        assert!(row_sums.iter().all(|s| s.abs() < 1e-15));
        let m = g.symmetric_laplacian();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn kernel_dimension_counts_components() {
        assert_eq!(spec(2, &[(0, 1, 1.0)]).kernel_dimension().unwrap(), 1);
        assert_eq!(spec(4, &[(0, 1, 1.0), (2, 3, 1.0)]).kernel_dimension().unwrap(), 2);
        assert_eq!(spec(3, &[(0, 1, 1.0), (1, 2, 1.0)]).kernel_dimension().unwrap(), 1);
        assert_eq!(spec(3, &[]).kernel_dimension().unwrap(), 3);
    }

    #[test]
    fn permutation_round_trips() {
        let g = WeightedGraph::with_measure(vec![1.0, 2.0, 3.0], &[(0, 1, 1.5), (1, 2, 0.5)])
            .unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.mu(), &[3.0, 1.0, 2.0]);
        assert_eq!(p.weight(1, 2), 1.5);
        assert_eq!(p.weight(0, 2), 0.5);
    }
}
