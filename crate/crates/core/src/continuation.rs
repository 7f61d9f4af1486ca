//! Parameter continuation in the negative regime.
//!
//! For `h` with `int h dmu < 0 < max h` the set of solvable `c < 0` is an
//! interval `(c_h, 0)`; for the shifted family `h = K + lambda` the set of
//! solvable `lambda` is bounded above by `lambda* < -min K`. Both thresholds
//! are bracketed by bisection, where "solvable" means that escalating
//! enumeration found at least one root. That is a semi-decision: an empty
//! enumeration does not prove nonexistence.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::graph::WeightedGraph;
use crate::model::{KwProblem, Rhs, Solution, Stability};
use crate::solve::{affine_supersolutions, check_sub_super, enumerate_escalating, log_grid, SolveOptions, SubSuperClass};

/// Maximum number of outward doublings when looking for an unsolvable parameter.
const MAX_EXPANSIONS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointEvidence {
    pub parameter: f64,
    pub root_count: usize,
    pub radius_used: f64,
    pub stabilized: bool,
    /// Minimum margin of the xi certificate over the roots, when computed.
    pub xi_margin: Option<f64>,
    /// Independent reason the parameter is unsolvable, when one applies.
    pub certificate: Option<String>,
    /// Same count with a different seed and doubled radius.
    pub rechecked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketResult {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    pub converged: bool,
    pub lower_evidence: EndpointEvidence,
    pub upper_evidence: EndpointEvidence,
    /// `-C ||Delta h|| / max h^+` with `C` the elliptic constant; heuristic.
    pub heuristic_lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub parameter: f64,
    pub count: usize,
    pub stabilities: Vec<Stability>,
    pub min_residual: Option<f64>,
    pub max_abs_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchTable {
    pub rows: Vec<BranchRow>,
    /// `max |u|` over every solution in the table (0 when there are none).
    pub envelope: f64,
}

impl BranchTable {
    fn from_rows(rows: Vec<BranchRow>) -> Self {
        let envelope = rows.iter().filter_map(|r| r.max_abs_u).fold(0.0, f64::max);
        Self { rows, envelope }
    }

    /// `parameter,count,stabilities,min_residual` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,count,stabilities,min_residual\n");
        for r in &self.rows {
            let stab: Vec<String> = r.stabilities.iter().map(Stability::to_string).collect();
            let res = r.min_residual.map(fmt_float).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", fmt_float(r.parameter), r.count, stab.join(";"), res);
        }
        out
    }
}

/// Round-trip float formatting with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Probe {
    solutions: Vec<Solution>,
    radius_used: f64,
    stabilized: bool,
}

fn probe(p: &KwProblem, opts: &SolveOptions, hints: &[VertexFunction]) -> Result<Probe> {
    let e = enumerate_escalating(p, opts, hints)?;
    Ok(Probe { solutions: e.solutions, radius_used: e.radius_used, stabilized: e.stabilized })
}

fn recheck(p: &KwProblem, opts: &SolveOptions, count: usize, hints: &[VertexFunction]) -> Result<bool> {
    let radius = opts.radius_for(p) * 2.0;
    let other = SolveOptions { rng_seed: opts.rng_seed.wrapping_add(1), start_box_radius: Some(radius), ..opts.clone() };
    Ok(probe(p, &other, hints)?.solutions.len() == count)
}

fn hints_of(solutions: &[Solution]) -> Vec<VertexFunction> {
    solutions.iter().map(|s| s.u.clone()).collect()
}

/// Result of [`xi_certificate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiCertificate {
    pub xi: VertexFunction,
    /// `min (xi - e^{-u})`; reported as exactly zero for constant `u`.
    pub margin: f64,
    pub holds: bool,
    pub constant_solution: bool,
}

/// Solves `(Delta + c) xi = h` and compares `xi` with `e^{-u}` for a
/// solution `u` at `c < 0`. For nonconstant `u` the strict inequality
/// `xi > e^{-u}` is expected; a constant `u` sits on the boundary and is
/// reported with margin zero.
pub fn xi_certificate(g: &WeightedGraph, h: &VertexFunction, c: f64, u: &VertexFunction) -> Result<XiCertificate> {
    if !(c < 0.0) {
        return Err(Error::PreconditionViolated("xi certificate needs c < 0".into()));
    }
    h.check_domain(g)?;
    u.check_domain(g)?;
    let mu = g.mu();
    // (D - W - c diag(mu)) xi = -diag(mu) h
    let mut a = g.symmetric_laplacian();
    for x in 0..g.len() {
        a[(x, x)] -= c * mu[x];
    }
    let b = nalgebra::DVector::from_fn(g.len(), |x, _| -mu[x] * h[x]);
    let xi = VertexFunction::from_dvector(&a.cholesky().ok_or(Error::SingularShift)?.solve(&b));
    let constant_solution = u.oscillation() <= 1e-12 * u.sup_norm().max(1.0);
    let margin = if constant_solution {
        0.0
    } else {
        (0..g.len()).map(|x| xi[x] - (-u[x]).exp()).fold(f64::INFINITY, f64::min)
    };
    Ok(XiCertificate { xi, margin, holds: constant_solution || margin > 0.0, constant_solution })
}

/// The best affine super-solution `a v + b` over 32 log-spaced `a` in
/// `[1e-4, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallCSupersolution {
    pub u: VertexFunction,
    pub a: f64,
    pub b: f64,
    /// `u` is a super-solution for every `c >= c_range`.
    pub c_range: f64,
}

pub fn build_supersolution_small_c(g: &WeightedGraph, h: &VertexFunction) -> Result<SmallCSupersolution> {
    let p = KwProblem::with_constant(g.clone(), h.clone(), -1.0)?;
    let cands = affine_supersolutions(&p, &log_grid(1e-4, 1.0, 32))?;
    let mut attempts = Vec::new();
    let mut best: Option<SmallCSupersolution> = None;
    for s in cands {
        if !(s.c_bound < 0.0) {
            attempts.push(format!("a={} b={}: bound {} not negative", s.a, s.b, s.c_bound));
            continue;
        }
        let at = KwProblem::with_constant(g.clone(), h.clone(), s.c_bound)?;
        let check = check_sub_super(&at, &s.u)?;
        if !matches!(check.class, SubSuperClass::Super | SubSuperClass::Solution) {
            attempts.push(format!("a={} b={}: check failed", s.a, s.b));
            continue;
        }
        if best.as_ref().is_none_or(|b| s.c_bound < b.c_range) {
            best = Some(SmallCSupersolution { u: s.u, a: s.a, b: s.b, c_range: s.c_bound });
        }
    }
    best.ok_or(Error::NoSupersolutionFound { attempts })
}

/// Brackets `c_h` for `h` with `int h dmu < 0 < max h`: `lower` is an
/// unsolvable `c`, `upper` a solvable one.
pub fn estimate_c_h(g: &WeightedGraph, h: &VertexFunction, opts: &SolveOptions, bracket_tol: f64) -> Result<BracketResult> {
    h.check_domain(g)?;
    if !(g.integrate(h)? < 0.0 && h.max() > 0.0) {
        return Err(Error::PreconditionViolated("c_h needs int h dmu < 0 < max h".into()));
    }
    check_bracket_tol(bracket_tol)?;
    let problem = |c: f64| KwProblem::with_constant(g.clone(), h.clone(), c);

    let mut hi = build_supersolution_small_c(g, h).map(|s| s.c_range).unwrap_or(-1e-3).min(-1e-12);
    let mut hi_probe = probe(&problem(hi)?, opts, &[])?;
    let mut tries = 0;
    while hi_probe.solutions.is_empty() {
        tries += 1;
        if tries > MAX_EXPANSIONS {
            return Err(Error::NoConvergence { iterations: tries, residual: f64::NAN });
        }
        hi /= 2.0;
        hi_probe = probe(&problem(hi)?, opts, &[])?;
    }

    let mut lo = 2.0 * hi;
    let mut lo_probe;
    let mut expansions = 0;
    loop {
        lo_probe = probe(&problem(lo)?, opts, &hints_of(&hi_probe.solutions))?;
        if lo_probe.solutions.is_empty() {
            break;
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::NoConvergence { iterations: expansions, residual: f64::NAN });
        }
        hi = lo;
        hi_probe = lo_probe;
        lo *= 2.0;
    }

    while hi - lo > bracket_tol {
        let mid = 0.5 * (lo + hi);
        let pr = probe(&problem(mid)?, opts, &hints_of(&hi_probe.solutions))?;
        if pr.solutions.is_empty() {
            lo = mid;
            lo_probe = pr;
        } else {
            hi = mid;
            hi_probe = pr;
        }
    }

    let hi_hints = hints_of(&hi_probe.solutions);
    let xi_margin = hi_probe
        .solutions
        .iter()
        .map(|s| xi_certificate(g, h, hi, &s.u).map(|x| x.margin))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(f64::min);
    let upper_evidence = EndpointEvidence {
        parameter: hi,
        root_count: hi_probe.solutions.len(),
        radius_used: hi_probe.radius_used,
        stabilized: hi_probe.stabilized,
        xi_margin,
        certificate: None,
        rechecked: recheck(&problem(hi)?, opts, hi_probe.solutions.len(), &hi_hints)?,
    };
    let lower_evidence = EndpointEvidence {
        parameter: lo,
        root_count: 0,
        radius_used: lo_probe.radius_used,
        stabilized: lo_probe.stabilized,
        xi_margin: None,
        certificate: None,
        rechecked: recheck(&problem(lo)?, opts, 0, &hi_hints)?,
    };
    let lap_h = g.laplacian(h)?.sup_norm();
    let heuristic = -g.elliptic_constant().value * lap_h / h.positive_part().max();
    Ok(BracketResult {
        lower: lo,
        upper: hi,
        width: hi - lo,
        converged: hi - lo <= bracket_tol,
        lower_evidence,
        upper_evidence,
        heuristic_lower_bound: Some(heuristic),
    })
}

fn check_bracket_tol(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidOptions("bracket tolerance must be positive".into()))
    }
}

/// The problem `-Delta u = (K + lambda) e^u - kappa`.
pub fn lambda_problem(g: &WeightedGraph, k: &VertexFunction, kappa: &VertexFunction, lambda: f64) -> Result<KwProblem> {
    KwProblem::new(g.clone(), k.map(|x| x + lambda), Rhs::Function(kappa.clone()))
}

/// Brackets `lambda*` for `K` with `min K < max K = 0` and
/// `int kappa dmu < 0`: `lower` is solvable, `upper` is not. The table
/// samples the family on both sides of the bracket.
pub fn estimate_lambda_star(
    g: &WeightedGraph,
    k: &VertexFunction,
    kappa: &VertexFunction,
    opts: &SolveOptions,
    bracket_tol: f64,
) -> Result<(BracketResult, BranchTable)> {
    k.check_domain(g)?;
    kappa.check_domain(g)?;
    if !(k.max() == 0.0 && k.min() < 0.0) {
        return Err(Error::PreconditionViolated("lambda* needs min K < max K = 0".into()));
    }
    if !(g.integrate(kappa)? < 0.0) {
        return Err(Error::PreconditionViolated("lambda* needs int kappa dmu < 0".into()));
    }
    check_bracket_tol(bracket_tol)?;
    let m = -k.min();
    let problem = |l: f64| lambda_problem(g, k, kappa, l);

    let mut lo = 0.0;
    let mut lo_probe = probe(&problem(lo)?, opts, &[])?;
    if lo_probe.solutions.is_empty() {
        return Err(Error::NoConvergence { iterations: 0, residual: f64::NAN });
    }
    // at lambda = -min K the shifted weight is >= 0 while int kappa < 0
    let mut hi = m;
    let mut hi_probe = probe(&problem(hi)?, opts, &hints_of(&lo_probe.solutions))?;
    while hi - lo > bracket_tol {
        let mid = 0.5 * (lo + hi);
        let pr = probe(&problem(mid)?, opts, &hints_of(&lo_probe.solutions))?;
        if pr.solutions.is_empty() {
            hi = mid;
            hi_probe = pr;
        } else {
            lo = mid;
            lo_probe = pr;
        }
    }
    let lo_hints = hints_of(&lo_probe.solutions);
    let certificate = |l: f64| (l >= m).then(|| "K + lambda >= 0 while int kappa dmu < 0".to_string());
    let lower_evidence = EndpointEvidence {
        parameter: lo,
        root_count: lo_probe.solutions.len(),
        radius_used: lo_probe.radius_used,
        stabilized: lo_probe.stabilized,
        xi_margin: None,
        certificate: None,
        rechecked: recheck(&problem(lo)?, opts, lo_probe.solutions.len(), &lo_hints)?,
    };
    let upper_evidence = EndpointEvidence {
        parameter: hi,
        root_count: hi_probe.solutions.len(),
        radius_used: hi_probe.radius_used,
        stabilized: hi_probe.stabilized,
        xi_margin: None,
        certificate: certificate(hi),
        rechecked: recheck(&problem(hi)?, opts, 0, &lo_hints)?,
    };
    let bracket = BracketResult {
        lower: lo,
        upper: hi,
        width: hi - lo,
        converged: hi - lo <= bracket_tol,
        lower_evidence,
        upper_evidence,
        heuristic_lower_bound: None,
    };

    let mut grid = vec![-0.5 * m, 0.0, 0.25 * lo, 0.5 * lo, 0.9 * lo, lo, hi, 0.5 * (hi + m), m, 2.0 * m];
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let table = branch_scan_family(&grid, problem, opts, &lo_hints)?;
    Ok((bracket, table))
}

/// One row per grid value of `c` for the family `-Delta u = h e^u - c`.
pub fn branch_scan(g: &WeightedGraph, h: &VertexFunction, c_grid: &[f64], opts: &SolveOptions) -> Result<BranchTable> {
    h.check_domain(g)?;
    branch_scan_family(c_grid, |c| KwProblem::with_constant(g.clone(), h.clone(), c), opts, &[])
}

/// Scan of an arbitrary one-parameter family over a sorted grid.
pub fn branch_scan_family<F>(grid: &[f64], family: F, opts: &SolveOptions, hints: &[VertexFunction]) -> Result<BranchTable>
where
    F: Fn(f64) -> Result<KwProblem> + Sync,
{
    if grid.windows(2).any(|w| !(w[0] <= w[1])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidOptions("grid must be finite and sorted ascending".into()));
    }
    let rows = grid
        .par_iter()
        .map(|&t| {
            let pr = probe(&family(t)?, opts, hints)?;
            Ok(BranchRow {
                parameter: t,
                count: pr.solutions.len(),
                stabilities: pr.solutions.iter().map(|s| s.stability).collect(),
                min_residual: pr.solutions.iter().map(|s| s.residual_linf).reduce(f64::min),
                max_abs_u: pr.solutions.iter().map(|s| s.u.sup_norm()).reduce(f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchTable::from_rows(rows))
}
