//! Discrete differential operators on a weighted graph.
//!
//! With vertex measure `mu` and weights `w`:
//!
//! ```text
//! Delta u(x)   = (1/mu_x) sum_y w_xy (u(y) - u(x))
//! Gamma(u,v)(x) = (1/(2 mu_x)) sum_y w_xy (u(y) - u(x)) (v(y) - v(x))
//! int f dmu    = sum_x f(x) mu_x
//! ```
//!
//! Green's formula `int Delta u * v dmu = -int Gamma(u,v) dmu` ties them
//! together and is exposed as [`WeightedGraph::green_defect`].

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::graph::WeightedGraph;

/// Norm selector for [`WeightedGraph::norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    /// `(int |f|^p dmu)^(1/p)`; `p = inf` is the sup norm.
    Lp(f64),
    Linf,
    /// `||f||_Lp + || |grad f| ||_Lp`.
    W1p(f64),
}

impl WeightedGraph {
    pub fn laplacian(&self, u: &VertexFunction) -> Result<VertexFunction> {
        u.check_domain(self)?;
        Ok(VertexFunction::from_fn(self.len(), |x| {
            let s: f64 = self.neighbors(x).iter().map(|&(y, w)| w * (u[y] - u[x])).sum();
            s / self.mu()[x]
        }))
    }

    pub fn gradient_form(&self, u: &VertexFunction, v: &VertexFunction) -> Result<VertexFunction> {
        u.check_domain(self)?;
        v.check_domain(self)?;
        Ok(VertexFunction::from_fn(self.len(), |x| {
            let s: f64 = self
                .neighbors(x)
                .iter()
                .map(|&(y, w)| w * (u[y] - u[x]) * (v[y] - v[x]))
                .sum();
            s / (2.0 * self.mu()[x])
        }))
    }

    /// `|grad u|(x) = sqrt(Gamma(u,u)(x))`.
    pub fn gradient_norm(&self, u: &VertexFunction) -> Result<VertexFunction> {
        Ok(self.gradient_form(u, u)?.map(|g| g.max(0.0).sqrt()))
    }

    pub fn integrate(&self, f: &VertexFunction) -> Result<f64> {
        f.check_domain(self)?;
        Ok(f.iter().zip(self.mu()).map(|(v, m)| v * m).sum())
    }

    /// `int f dmu / int 1 dmu`.
    pub fn mean(&self, f: &VertexFunction) -> Result<f64> {
        Ok(self.integrate(f)? / self.total_measure())
    }

    pub fn norm(&self, f: &VertexFunction, kind: Norm) -> Result<f64> {
        f.check_domain(self)?;
        match kind {
            Norm::Linf => Ok(f.sup_norm()),
            Norm::Lp(p) => self.lp_norm(f, p),
            Norm::W1p(p) => {
                let grad = self.gradient_norm(f)?;
                Ok(self.lp_norm(f, p)? + self.lp_norm(&grad, p)?)
            }
        }
    }

    fn lp_norm(&self, f: &VertexFunction, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        if p.is_infinite() {
            return Ok(f.sup_norm());
        }
        let s: f64 = f.iter().zip(self.mu()).map(|(v, m)| v.abs().powf(p) * m).sum();
        Ok(s.powf(1.0 / p))
    }

    /// A vertex `x1` with `u(x1) = max u` and `Delta u(x1) < 0`, or `None`
    /// when `u` is constant (strong maximum principle).
    pub fn max_principle_witness(&self, u: &VertexFunction) -> Result<Option<usize>> {
        let lap = self.laplacian(u)?;
        if u.is_constant() {
            return Ok(None);
        }
        let top = u.max();
        Ok((0..self.len()).find(|&x| u[x] == top && lap[x] < 0.0))
    }

    /// `Delta u^+ - chi_{u>0} Delta u`, nonnegative by Kato's inequality.
    pub fn kato_defect(&self, u: &VertexFunction) -> Result<VertexFunction> {
        let lap_plus = self.laplacian(&u.positive_part())?;
        let lap = self.laplacian(u)?;
        Ok(VertexFunction::from_fn(self.len(), |x| {
            let chi = if u[x] > 0.0 { 1.0 } else { 0.0 };
            lap_plus[x] - chi * lap[x]
        }))
    }

    /// `|int Delta u * v dmu + int Gamma(u,v) dmu|`, zero up to roundoff.
    pub fn green_defect(&self, u: &VertexFunction, v: &VertexFunction) -> Result<f64> {
        let lap = self.laplacian(u)?;
        let gamma = self.gradient_form(u, v)?;
        let lhs = self.integrate(&lap.zip_map(v, |a, b| a * b))?;
        Ok((lhs + self.integrate(&gamma)?).abs())
    }

    /// `int |grad u|^2 dmu = u^T (D - W) u`.
    pub fn dirichlet_energy(&self, u: &VertexFunction) -> Result<f64> {
        u.check_domain(self)?;
        Ok(self.edges().iter().map(|&(i, j, w)| w * (u[i] - u[j]).powi(2)).sum())
    }
}
