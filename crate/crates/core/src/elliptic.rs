//! Best constant in the elliptic estimate `max u - min u <= C max |Delta u|`.
//!
//! For a vertex pair `(x, y)` the quantity `sup { u(x) - u(y) : |Delta u| <= 1 }`
//! is a linear program over `g = Delta u` in the polytope
//! `{ |g_i| <= 1, sum_i mu_i g_i = 0 }`. Writing `u = -L^+ diag(mu) g` with
//! `L = D - W`, the objective is `-w^T diag(mu) g` for `w = L^+ (e_x - e_y)`,
//! and the LP dual collapses to a one-dimensional problem:
//!
//! ```text
//! min_t sum_i mu_i |w_i - t|
//! ```
//!
//! attained at a mu-weighted median of `w`. Maximising over pairs gives `C`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::graph::WeightedGraph;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticConstant {
    pub value: f64,
    /// `false` when `value` is only an upper bound (large graphs).
    pub sharp: bool,
}

impl WeightedGraph {
    pub fn elliptic_constant(&self) -> EllipticConstant {
        let green = self.green_matrix();
        if self.len() <= tol::ELLIPTIC_EXACT_MAX_VERTICES {
            EllipticConstant { value: exact_constant(&green, self.mu()), sharp: true }
        } else {
            EllipticConstant { value: row_norm_bound(&green, self.mu()), sharp: false }
        }
    }

    /// Moore-Penrose pseudo-inverse of `D - W` for a connected graph.
    pub fn green_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let shifted = self.symmetric_laplacian().add_scalar(1.0);
        let inv = shifted
            .cholesky()
            .expect("D - W + 11^T is positive definite on a connected graph")
            .inverse();
        inv.add_scalar(-1.0 / (n * n) as f64)
    }
}

fn exact_constant(green: &DMatrix<f64>, mu: &[f64]) -> f64 {
    let n = mu.len();
    let mut best = 0.0f64;
    let mut w = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    for x in 0..n {
        for y in (x + 1)..n {
            for i in 0..n {
                w[i] = green[(i, x)] - green[(i, y)];
            }
            best = best.max(weighted_median_deviation(&w, mu, &mut order));
        }
    }
    best
}

/// `min_t sum_i mu_i |w_i - t|`.
fn weighted_median_deviation(w: &[f64], mu: &[f64], order: &mut [usize]) -> f64 {
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]));
    let half = mu.iter().sum::<f64>() / 2.0;
    let mut acc = 0.0;
    let mut t = w[order[order.len() - 1]];
    for &i in order.iter() {
        acc += mu[i];
        if acc >= half {
            t = w[i];
            break;
        }
    }
    w.iter().zip(mu).map(|(wi, m)| m * (wi - t).abs()).sum()
}

fn row_norm_bound(green: &DMatrix<f64>, mu: &[f64]) -> f64 {
    let n = mu.len();
    let max_row = (0..n)
        .map(|x| (0..n).map(|i| mu[i] * green[(x, i)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    2.0 * max_row
}
