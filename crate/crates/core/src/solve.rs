//! Damped Newton, seeded multistart enumeration and the box-constrained
//! variational method between a sub- and a super-solution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::VertexFunction;
use crate::model::{KwProblem, Normalization, Solution};
use crate::tol;

/// Largest sup-norm Newton step before scaling.
const MAX_STEP: f64 = 10.0;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const POLISH_STEPS: usize = 2;
/// A converged root must also be small relative to the equation's terms.
const RELATIVE_RESIDUAL: f64 = 1e-6;
const PROJECTED_GRADIENT_ITERS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    /// Multistart box radius; `None` picks a default from the data scale.
    pub start_box_radius: Option<f64>,
    pub n_starts: usize,
    pub rng_seed: u64,
    pub dedupe_distance: f64,
    /// Maximum number of radius doublings during escalation.
    pub escalate: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: tol::RESIDUAL,
            max_iters: 100,
            damping: 0.5,
            start_box_radius: None,
            n_starts: 128,
            rng_seed: 0,
            dedupe_distance: 1e-6,
            escalate: 3,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidOptions(m.into()));
        if !(self.tol_residual > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return bad("damping must lie in (0, 1)");
        }
        if self.n_starts < 1 {
            return bad("n_starts must be at least 1");
        }
        if !(self.dedupe_distance > 0.0) {
            return bad("dedupe distance must be positive");
        }
        if let Some(r) = self.start_box_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("start box radius must be positive");
            }
        }
        Ok(())
    }

    /// The configured radius, or `2 + |ln max(|f|, |h|, 1)|`.
    pub fn radius_for(&self, p: &KwProblem) -> f64 {
        self.start_box_radius.unwrap_or_else(|| 2.0 + p.natural_scale().ln().abs())
    }
}

/// A Newton run with its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonRun {
    pub solution: Solution,
    pub iterations: usize,
    /// Set when a singular Jacobian forced a pseudo-inverse step.
    pub used_pseudo_inverse: bool,
}

struct RawRoot {
    u: VertexFunction,
    residual: f64,
    iterations: usize,
    pinv: bool,
}

pub fn newton_solve(p: &KwProblem, u0: &VertexFunction, opts: &SolveOptions) -> Result<Solution> {
    Ok(newton_solve_detailed(p, u0, opts)?.solution)
}

pub fn newton_solve_detailed(p: &KwProblem, u0: &VertexFunction, opts: &SolveOptions) -> Result<NewtonRun> {
    opts.validate()?;
    u0.check_domain(p.graph())?;
    let raw = newton_core(p, u0, opts)?;
    Ok(NewtonRun {
        solution: p.assess(raw.u)?,
        iterations: raw.iterations,
        used_pseudo_inverse: raw.pinv,
    })
}

/// `max |Delta u| + max |f| + max |h e^u|`.
fn term_scale(p: &KwProblem, u: &VertexFunction) -> Result<f64> {
    let lap = p.graph().laplacian(u)?;
    let he = VertexFunction::from_fn(u.len(), |x| p.h()[x] * u[x].exp());
    Ok(lap.sup_norm() + p.rhs_values().sup_norm() + he.sup_norm())
}

fn merit(p: &KwProblem, f: &VertexFunction) -> f64 {
    0.5 * f.iter().zip(p.graph().mu()).map(|(v, m)| m * v * v).sum::<f64>()
}

fn newton_direction(j: &DMatrix<f64>, f: &VertexFunction) -> (DVector<f64>, bool) {
    let rhs = -f.to_dvector();
    if let Some(s) = j.clone().lu().solve(&rhs) {
        if s.iter().all(|x| x.is_finite()) {
            return (s, false);
        }
    }
    let svd = j.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let s = svd.solve(&rhs, eps).unwrap_or_else(|_| DVector::zeros(f.len()));
    (s, true)
}

fn newton_core(p: &KwProblem, u0: &VertexFunction, opts: &SolveOptions) -> Result<RawRoot> {
    let mu = DVector::from_column_slice(p.graph().mu());
    let mut u = u0.clone();
    let mut f = p.residual(&u)?;
    let mut m = merit(p, &f);
    let mut pinv = false;
    for it in 0..opts.max_iters {
        let res = f.sup_norm();
        let j = p.jacobian(&u)?;
        let (mut s, used_pinv) = newton_direction(&j, &f);
        pinv |= used_pinv;
        let step = s.amax();
        if res <= opts.tol_residual && step <= 1e-6 * u.sup_norm().max(1.0) {
            let root = polish(p, u, f, res, it, pinv);
            // Where f = 0 the residual also decays as u -> -inf; such points
            // have a residual comparable to every term of the equation.
            if root.residual > RELATIVE_RESIDUAL * term_scale(p, &root.u)? {
                return Err(Error::NoConvergence { iterations: it + 1, residual: root.residual });
            }
            return Ok(root);
        }
        if step > MAX_STEP {
            s *= MAX_STEP / step;
        }
        let js = &j * &s;
        let slope: f64 = (0..f.len()).map(|x| mu[x] * f[x] * js[x]).sum();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = VertexFunction::from_fn(u.len(), |x| u[x] + t * s[x]);
            if trial.max() <= tol::OVERFLOW_U {
                let ft = p.residual(&trial)?;
                let mt = merit(p, &ft);
                if mt <= m + ARMIJO * t * slope.min(0.0) {
                    u = trial;
                    f = ft;
                    m = mt;
                    accepted = true;
                    break;
                }
            }
            t *= opts.damping;
        }
        if !accepted || u.min() < -tol::OVERFLOW_U {
            return Err(Error::NoConvergence { iterations: it + 1, residual: f.sup_norm() });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iters, residual: f.sup_norm() })
}

/// A few extra full Newton steps, each kept only if it does not increase
/// the residual.
fn polish(p: &KwProblem, mut u: VertexFunction, mut f: VertexFunction, mut res: f64, it: usize, mut pinv: bool) -> RawRoot {
    for _ in 0..POLISH_STEPS {
        let Ok(j) = p.jacobian(&u) else { break };
        let (s, used) = newton_direction(&j, &f);
        let trial = VertexFunction::from_fn(u.len(), |x| u[x] + s[x]);
        match p.residual(&trial) {
            Ok(ft) if ft.sup_norm() <= res => {
                res = ft.sup_norm();
                u = trial;
                f = ft;
                pinv |= used;
            }
            _ => break,
        }
        if res == 0.0 {
            break;
        }
    }
    RawRoot { u, residual: res, iterations: it, pinv }
}

/// Low-discrepancy start points in `[-r, r]^n`: a Halton sequence with a
/// seeded Cranley-Patterson rotation.
pub fn start_points(n: usize, count: usize, r: f64, seed: u64) -> Vec<VertexFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let bases = primes(n);
    (0..count)
        .map(|k| {
            VertexFunction::from_fn(n, |d| {
                let x = (radical_inverse(k as u64 + 1, bases[d]) + shift[d]).fract();
                -r + 2.0 * r * x
            })
        })
        .collect()
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut x = 0.0;
    while k > 0 {
        x += (k % base) as f64 * scale;
        k /= base;
        scale *= inv;
    }
    x
}

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| !c.is_multiple_of(p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn lex_cmp(a: &VertexFunction, b: &VertexFunction) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn run_starts(p: &KwProblem, starts: &[VertexFunction], opts: &SolveOptions) -> Vec<VertexFunction> {
    starts
        .par_iter()
        .map(|u0| newton_core(p, u0, opts).ok())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .filter(|r| r.residual <= opts.tol_residual)
        .map(|r| r.u)
        .collect()
}

fn dedupe_into(kept: &mut Vec<VertexFunction>, roots: Vec<VertexFunction>, d: f64) {
    for u in roots {
        if kept.iter().all(|k| k.sup_distance(&u) > d) {
            kept.push(u);
        }
    }
}

fn finalize(p: &KwProblem, mut roots: Vec<VertexFunction>) -> Result<Vec<Solution>> {
    roots.sort_by(lex_cmp);
    roots.into_iter().map(|u| p.assess(u)).collect()
}

/// Multistart Newton from a seeded start grid of radius `R`; roots are
/// deduplicated and sorted lexicographically. Roots found outside the start
/// box are kept.
pub fn enumerate_solutions(p: &KwProblem, opts: &SolveOptions) -> Result<Vec<Solution>> {
    opts.validate()?;
    let r = opts.radius_for(p);
    let starts = start_points(p.len(), opts.n_starts, r, opts.rng_seed);
    let mut kept = Vec::new();
    dedupe_into(&mut kept, run_starts(p, &starts, opts), opts.dedupe_distance);
    finalize(p, kept)
}

/// Result of [`enumerate_escalating`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumeration {
    pub solutions: Vec<Solution>,
    pub radius_used: f64,
    /// Whether two consecutive radii produced the same root set.
    pub stabilized: bool,
}

/// Enumeration with radius doubling until the root sets at `R` and `2R`
/// agree (at most `opts.escalate` doublings). Optional `hints` (for
/// instance solutions at a nearby parameter) are used as extra starts,
/// together with small perturbations along their softest direction.
pub fn enumerate_escalating(p: &KwProblem, opts: &SolveOptions, hints: &[VertexFunction]) -> Result<Enumeration> {
    opts.validate()?;
    let hint_starts = hint_starts(p, hints)?;
    let mut r = opts.radius_for(p);
    let mut all: Vec<VertexFunction> = Vec::new();
    let mut prev: Option<Vec<VertexFunction>> = None;
    let mut stabilized = false;
    for round in 0..=opts.escalate {
        let mut starts = hint_starts.clone();
        starts.extend(start_points(p.len(), opts.n_starts, r, opts.rng_seed.wrapping_add(round as u64)));
        let mut found = Vec::new();
        dedupe_into(&mut found, run_starts(p, &starts, opts), opts.dedupe_distance);
        found.sort_by(lex_cmp);
        dedupe_into(&mut all, found.clone(), opts.dedupe_distance);
        if let Some(prev) = &prev {
            if same_roots(prev, &found, 10.0 * opts.dedupe_distance) {
                stabilized = true;
                break;
            }
        }
        prev = Some(found);
        if round < opts.escalate {
            r *= 2.0;
        }
    }
    Ok(Enumeration { solutions: finalize(p, all)?, radius_used: r, stabilized })
}

fn same_roots(a: &[VertexFunction], b: &[VertexFunction], d: f64) -> bool {
    a.len() == b.len() && a.iter().all(|u| b.iter().any(|v| u.sup_distance(v) <= d))
}

fn hint_starts(p: &KwProblem, hints: &[VertexFunction]) -> Result<Vec<VertexFunction>> {
    let mut out = Vec::new();
    for h in hints {
        h.check_domain(p.graph())?;
        if h.max() > tol::OVERFLOW_U || h.iter().any(|x| !x.is_finite()) {
            continue;
        }
        out.push(h.clone());
        let m = p.stability_matrix(h)?;
        let eig = SymmetricEigen::new(m);
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k);
        for delta in [0.05, 0.2, 0.5] {
            for sign in [1.0, -1.0] {
                out.push(VertexFunction::from_fn(h.len(), |x| h[x] + sign * delta * v[x] / v.amax()));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubSuperClass {
    Sub,
    Super,
    Solution,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSuperCheck {
    pub class: SubSuperClass,
    /// `Delta w + h e^w - f`.
    pub slack: VertexFunction,
}

/// Pointwise sign test of `Delta w + h e^w - f`, with a band of
/// [`tol::RESIDUAL`] around zero.
pub fn check_sub_super(p: &KwProblem, w: &VertexFunction) -> Result<SubSuperCheck> {
    let slack = p.residual(w)?.map(|r| -r);
    let band = tol::RESIDUAL;
    let class = if slack.sup_norm() <= band {
        SubSuperClass::Solution
    } else if slack.min() >= -band {
        SubSuperClass::Sub
    } else if slack.max() <= band {
        SubSuperClass::Super
    } else {
        SubSuperClass::Neither
    };
    Ok(SubSuperCheck { class, slack })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSuperPair {
    pub phi: VertexFunction,
    pub psi: VertexFunction,
}

/// Minimises the energy over `{phi <= u <= psi}` by projected gradient with
/// Barzilai-Borwein steps, then polishes with Newton inside the box.
pub fn constrained_minimize(p: &KwProblem, pair: &SubSuperPair, opts: &SolveOptions) -> Result<Solution> {
    opts.validate()?;
    let (lo, hi) = (&pair.phi, &pair.psi);
    lo.check_domain(p.graph())?;
    hi.check_domain(p.graph())?;
    if let Some(x) = (0..lo.len()).find(|&x| lo[x] > hi[x]) {
        return Err(Error::OrderingViolated { vertex: x });
    }
    let sub = check_sub_super(p, lo)?;
    if !matches!(sub.class, SubSuperClass::Sub | SubSuperClass::Solution) {
        let x = sub.slack.values().iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        return Err(Error::NotSubSolution { vertex: x, worst_slack: sub.slack[x] });
    }
    let sup = check_sub_super(p, hi)?;
    if !matches!(sup.class, SubSuperClass::Super | SubSuperClass::Solution) {
        let x = sup.slack.argmax();
        return Err(Error::NotSuperSolution { vertex: x, worst_slack: sup.slack[x] });
    }

    let clamp = |v: &VertexFunction| VertexFunction::from_fn(v.len(), |x| v[x].clamp(lo[x], hi[x]));
    let mu = p.graph().mu().to_vec();
    let dot = |a: &VertexFunction, b: &VertexFunction| -> f64 { (0..a.len()).map(|x| mu[x] * a[x] * b[x]).sum() };

    let mut u = hi.clone();
    let mut g = p.residual(&u)?;
    let mut e = p.energy(&u)?;
    let mut alpha = 1.0;
    let pg_tol = opts.tol_residual;
    for _ in 0..PROJECTED_GRADIENT_ITERS {
        let pg = clamp(&u.zip_map(&g, |a, b| a - b)).zip_map(&u, |a, b| a - b);
        if pg.sup_norm() <= pg_tol {
            break;
        }
        let mut t = alpha;
        let mut next = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = clamp(&u.zip_map(&g, |a, b| a - t * b));
            let d = trial.zip_map(&u, |a, b| a - b);
            let et = p.energy(&trial)?;
            if et <= e + ARMIJO * dot(&g, &d) {
                next = Some((trial, d, et));
                break;
            }
            t *= opts.damping;
        }
        let Some((trial, s, et)) = next else { break };
        let gt = p.residual(&trial)?;
        let y = gt.zip_map(&g, |a, b| a - b);
        let sy = dot(&s, &y);
        alpha = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-8, 1e8) } else { 1.0 };
        u = trial;
        g = gt;
        e = et;
    }

    let candidate = match newton_core(p, &u, opts) {
        Ok(raw) if raw.u.iter().enumerate().all(|(x, &v)| v >= lo[x] - 1e-12 && v <= hi[x] + 1e-12) => {
            clamp(&raw.u)
        }
        _ => u,
    };
    let residual = p.residual(&candidate)?.sup_norm();
    if residual > opts.tol_residual {
        return Err(Error::NoConvergence { iterations: PROJECTED_GRADIENT_ITERS, residual });
    }
    p.assess(candidate)
}

/// A super-solution of the form `a v + b` with `-Delta v = h - mean(h)`,
/// valid for every `c >= c_bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineSupersolution {
    pub a: f64,
    pub b: f64,
    pub u: VertexFunction,
    /// `max (Delta u + h e^u)`; `u` is a super-solution exactly for `c >= c_bound`.
    pub c_bound: f64,
}

/// Log-spaced grid of `count` points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| if count == 1 { lo } else { (l + (h - l) * k as f64 / (count - 1) as f64).exp() })
        .collect()
}

/// For each `a` in the grid, the best `b` (both the choice `b = ln a` and
/// the `b` minimising `c_bound`) is tried; candidates are returned in grid
/// order. Requires `int h dmu < 0`.
pub fn affine_supersolutions(p: &KwProblem, a_grid: &[f64]) -> Result<Vec<AffineSupersolution>> {
    let g = p.graph();
    let h = p.h();
    let mean_h = g.mean(h)?;
    if !(mean_h < 0.0) {
        return Err(Error::PreconditionViolated("int h dmu must be negative".into()));
    }
    // -Delta v = h - mean(h)
    let v = g.solve_poisson(h, Normalization::MeanZero)?.map(|x| -x);
    let n = g.len();
    let mut out = Vec::new();
    for &a in a_grid {
        // Delta(av + b) + h e^{av+b} = alpha_x + gamma_x e^b
        let alpha: Vec<f64> = (0..n).map(|x| a * (mean_h - h[x])).collect();
        let gamma: Vec<f64> = (0..n).map(|x| h[x] * (a * v[x]).exp()).collect();
        let bound = |beta: f64| (0..n).map(|x| alpha[x] + gamma[x] * beta).fold(f64::NEG_INFINITY, f64::max);
        let mut betas = vec![a];
        for i in 0..n {
            for j in (i + 1)..n {
                if gamma[i] != gamma[j] {
                    let beta = (alpha[j] - alpha[i]) / (gamma[i] - gamma[j]);
                    if beta > 0.0 && beta.is_finite() {
                        betas.push(beta);
                    }
                }
            }
        }
        let best = betas.iter().copied().min_by(|x, y| bound(*x).total_cmp(&bound(*y))).unwrap();
        for beta in [a, best] {
            let b = beta.ln();
            let u = v.map(|vx| a * vx + b);
            if u.max() > tol::OVERFLOW_U || !u.iter().all(|x| x.is_finite()) {
                continue;
            }
            // recompute from the function itself so the bound matches check_sub_super
            let lap = g.laplacian(&u)?;
            let c_bound = (0..n).map(|x| lap[x] + h[x] * u[x].exp()).fold(f64::NEG_INFINITY, f64::max);
            out.push(AffineSupersolution { a, b, u, c_bound });
        }
    }
    Ok(out)
}

/// Solves a negative-`c` problem by the sub/super-solution method: the
/// constant `-A` for large `A` is a sub-solution, and a super-solution is
/// sought among constants (when `h < 0`), affine functions `a v + b`, and
/// the supplied `hints` (solutions at a parameter `c' <= c` are
/// super-solutions at `c`).
pub fn solve_negative_via_supersolution(
    p: &KwProblem,
    opts: &SolveOptions,
    hints: &[VertexFunction],
) -> Result<Solution> {
    let c = match p.scalar_c() {
        Some(c) if c < 0.0 => c,
        _ => return Err(Error::PreconditionViolated("requires a scalar c < 0".into())),
    };
    let h = p.h();
    let mut attempts = Vec::new();
    let mut supers: Vec<(String, VertexFunction)> = Vec::new();

    if h.max() < 0.0 {
        let b = h.iter().map(|&hx| (c / hx).ln()).fold(f64::NEG_INFINITY, f64::max);
        supers.push((format!("constant {b}"), VertexFunction::constant(h.len(), b)));
    } else {
        attempts.push("constant: h is not negative everywhere".to_string());
    }
    match affine_supersolutions(p, &log_grid(1e-4, 1e4, 64)) {
        Ok(cands) => {
            let mut good: Vec<_> = cands.into_iter().filter(|s| s.c_bound <= c).collect();
            good.sort_by(|x, y| x.c_bound.total_cmp(&y.c_bound));
            match good.into_iter().next() {
                Some(s) => supers.push((format!("affine a={} b={}", s.a, s.b), s.u)),
                None => attempts.push(format!("affine a v + b: no grid point valid at c = {c}")),
            }
        }
        Err(e) => attempts.push(format!("affine a v + b: {e}")),
    }
    for (k, w) in hints.iter().enumerate() {
        supers.push((format!("hint {k}"), w.clone()));
    }

    for (label, psi) in supers {
        let check = check_sub_super(p, &psi)?;
        if !matches!(check.class, SubSuperClass::Super | SubSuperClass::Solution) {
            attempts.push(format!("{label}: not a super-solution (max slack {})", check.slack.max()));
            continue;
        }
        let scale = (h.sup_norm() / -c).max(1.0).ln();
        let a = (scale + 20.0).max(-psi.min() + 1.0);
        let pair = SubSuperPair { phi: VertexFunction::constant(h.len(), -a), psi };
        match constrained_minimize(p, &pair, opts) {
            Ok(s) => return Ok(s),
            Err(e) => attempts.push(format!("{label}: {e}")),
        }
    }
    Err(Error::NoSupersolutionFound { attempts })
}
