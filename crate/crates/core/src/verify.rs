//! Seeded randomized verification suites.
//!
//! * `degree`: random connected graphs with data in each sign regime; the
//!   Morse-sum degree must equal the predicted degree.
//! * `identities`: operator identities and derivative checks on random graphs.
//! * `schur`: the determinant identity and degree consistency of the
//!   Schur reduction on the path with a zero of `h` in the middle.
//!
//! Reports contain no timing data, so a fixed seed reproduces them exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::degree::{degree_numeric, degree_reduction_consistency, schur_reduce, DegreeValue};
use crate::error::Result;
use crate::function::VertexFunction;
use crate::graph::WeightedGraph;
use crate::model::{KwProblem, RegimeTag};
use crate::solve::SolveOptions;

pub const GREEN_REL: f64 = 1e-12;
pub const LAPLACIAN_INTEGRAL_REL: f64 = 1e-12;
pub const KATO_FLOOR: f64 = -1e-12;
pub const JACOBIAN_REL: f64 = 1e-6;
pub const ENERGY_REL: f64 = 1e-6;
pub const ELLIPTIC_SLACK: f64 = 1e-10;
pub const SCHUR_DET_REL: f64 = 1e-10;
pub const SCHUR_SUM_ABS: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub degree_instances: usize,
    pub identity_cases: usize,
    pub schur_cases: usize,
    pub schur_degree_cases: usize,
    pub solve: SolveOptions,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            degree_instances: 200,
            identity_cases: 1000,
            schur_cases: 100,
            schur_degree_cases: 20,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub regime: RegimeTag,
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub h: VertexFunction,
    pub c: f64,
    pub roots: usize,
    pub numeric_degree: DegreeValue,
    pub theoretical_degree: DegreeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCounts {
    pub regime: RegimeTag,
    pub instances: usize,
    pub matched: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSuite {
    pub instances: usize,
    pub matched: usize,
    pub degenerate: usize,
    pub failed: usize,
    pub by_regime: Vec<RegimeCounts>,
    pub failures: Vec<InstanceRecord>,
    pub degenerate_cases: Vec<InstanceRecord>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySuite {
    pub cases: usize,
    /// Worst relative Green defect.
    pub green: f64,
    /// Worst relative `|int Delta u dmu|`.
    pub laplacian_integral: f64,
    /// Smallest Kato defect entry.
    pub kato_min: f64,
    /// Worst relative Jacobian error against central differences.
    pub jacobian: f64,
    /// Worst relative error of the energy's directional derivative.
    pub energy: f64,
    /// Largest `osc(u) - C ||Delta u||`.
    pub elliptic_excess: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchurSuite {
    pub cases: usize,
    /// Worst relative error of the determinant identity.
    pub determinant: f64,
    /// Worst `|sum f~ - sum f|`.
    pub rhs_sum: f64,
    pub min_reduced_weight: f64,
    pub max_row_sum: f64,
    pub degree_cases: usize,
    pub degree_consistent: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub degree: DegreeSuite,
    pub identities: IdentitySuite,
    pub schur: SchurSuite,
    pub all_passed: bool,
}

pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let degree = degree_suite(cfg)?;
    let identities = identity_suite(cfg.seed, cfg.identity_cases)?;
    let schur = schur_suite(cfg)?;
    let all_passed = degree.passed && identities.passed && schur.passed;
    Ok(VerifyReport { seed: cfg.seed, degree, identities, schur, all_passed })
}

/// Spanning tree plus extra edges with probability 0.3, weights in
/// `[w_lo, w_hi]`.
pub fn random_connected_graph(rng: &mut impl Rng, n: usize, w_lo: f64, w_hi: f64, mu: Option<(f64, f64)>) -> WeightedGraph {
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        edges.push((j, i, rng.random_range(w_lo..=w_hi)));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !edges.iter().any(|&(a, b, _)| (a, b) == (i, j)) && rng.random_bool(0.3) {
                edges.push((i, j, rng.random_range(w_lo..=w_hi)));
            }
        }
    }
    let mu = match mu {
        Some((lo, hi)) => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
        None => vec![1.0; n],
    };
    WeightedGraph::with_measure(mu, &edges).expect("spanning tree keeps the graph connected")
}

fn magnitude(rng: &mut impl Rng) -> f64 {
    rng.random_range(0.2..=2.0)
}

/// Data `(h, c)` in the requested regime satisfying the solvability
/// preconditions there. `kind` picks the sub-case of the negative regime.
pub fn random_data(rng: &mut impl Rng, n: usize, regime: RegimeTag, kind: usize) -> (VertexFunction, f64) {
    loop {
        let mut h = VertexFunction::from_fn(n, |_| {
            let r: f64 = rng.random();
            if r < 0.1 {
                0.0
            } else if r < 0.55 {
                magnitude(rng)
            } else {
                -magnitude(rng)
            }
        });
        let c = match regime {
            RegimeTag::Positive => rng.random_range(0.1..=2.0),
            RegimeTag::Flat => 0.0,
            RegimeTag::Negative if kind.is_multiple_of(2) => {
                h = h.map(|x| -x.abs());
                -rng.random_range(0.1..=2.0)
            }
            RegimeTag::Negative => -(10f64).powf(rng.random_range(-3.0..=0.0)),
        };
        let sum: f64 = h.iter().sum();
        let ok = match regime {
            RegimeTag::Positive => h.max() > 0.0,
            RegimeTag::Flat => h.max() > 0.0 && sum <= -0.2,
            RegimeTag::Negative if kind.is_multiple_of(2) => h.min() < 0.0,
            RegimeTag::Negative => h.max() > 0.0 && h.min() < 0.0,
        };
        if ok {
            return (h, c);
        }
    }
}

const REGIMES: [RegimeTag; 3] = [RegimeTag::Positive, RegimeTag::Flat, RegimeTag::Negative];

pub fn degree_suite(cfg: &VerifyConfig) -> Result<DegreeSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let instances: Vec<(RegimeTag, KwProblem)> = (0..cfg.degree_instances)
        .map(|k| {
            let n = rng.random_range(2..=6);
            let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
            let regime = REGIMES[k % 3];
            let (h, c) = random_data(&mut rng, n, regime, k / 3);
            (regime, KwProblem::with_constant(g, h, c).expect("generated data match the graph"))
        })
        .collect();
    let records = instances
        .par_iter()
        .enumerate()
        .map(|(index, (regime, p))| {
            let r = degree_numeric(p, &cfg.solve)?;
            Ok(InstanceRecord {
                index,
                regime: *regime,
                vertices: p.len(),
                edges: p.graph().edges().to_vec(),
                h: p.h().clone(),
                c: p.scalar_c().unwrap_or(f64::NAN),
                roots: r.solutions.len(),
                numeric_degree: r.numeric_degree,
                theoretical_degree: r.theoretical_degree,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let is_match = |r: &InstanceRecord| r.numeric_degree != DegreeValue::Undefined && r.numeric_degree == r.theoretical_degree;
    let is_degenerate = |r: &InstanceRecord| r.numeric_degree == DegreeValue::Undefined;
    let by_regime = REGIMES
        .iter()
        .map(|&regime| {
            let of: Vec<&InstanceRecord> = records.iter().filter(|r| r.regime == regime).collect();
            RegimeCounts {
                regime,
                instances: of.len(),
                matched: of.iter().filter(|r| is_match(r)).count(),
                degenerate: of.iter().filter(|r| is_degenerate(r)).count(),
            }
        })
        .collect();
    let failures: Vec<InstanceRecord> = records.iter().filter(|r| !is_match(r) && !is_degenerate(r)).cloned().collect();
    let degenerate_cases: Vec<InstanceRecord> = records.iter().filter(|r| is_degenerate(r)).cloned().collect();
    Ok(DegreeSuite {
        instances: records.len(),
        matched: records.iter().filter(|r| is_match(r)).count(),
        degenerate: degenerate_cases.len(),
        failed: failures.len(),
        by_regime,
        passed: failures.is_empty(),
        failures,
        degenerate_cases,
    })
}

struct IdentityCase {
    green: f64,
    lap_integral: f64,
    kato_min: f64,
    jacobian: f64,
    energy: f64,
    elliptic_excess: f64,
}

fn random_function(rng: &mut impl Rng, n: usize, r: f64) -> VertexFunction {
    VertexFunction::from_fn(n, |_| rng.random_range(-r..=r))
}

fn identity_case(seed: u64) -> Result<IdentityCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let g = random_connected_graph(&mut rng, n, 0.5, 2.0, Some((0.5, 2.0)));
    let u = random_function(&mut rng, n, 2.0);
    let v = random_function(&mut rng, n, 2.0);
    let mu = g.mu();

    let lap = g.laplacian(&u)?;
    let gamma = g.gradient_form(&u, &v)?;
    let green_scale: f64 = (0..n).map(|x| mu[x] * (lap[x] * v[x]).abs() + mu[x] * gamma[x].abs()).sum();
    let green = g.green_defect(&u, &v)? / green_scale.max(f64::MIN_POSITIVE);
    let lap_scale: f64 = (0..n).map(|x| mu[x] * lap[x].abs()).sum();
    let lap_integral = g.integrate(&lap)?.abs() / lap_scale.max(f64::MIN_POSITIVE);
    let kato_min = g.kato_defect(&u)?.min();

    let h = random_function(&mut rng, n, 2.0);
    let f = random_function(&mut rng, n, 2.0);
    let p = KwProblem::with_function(g.clone(), h, f)?;
    let j = p.jacobian(&u)?;
    let mut fd = nalgebra::DMatrix::zeros(n, n);
    for k in 0..n {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[k] += FD_STEP;
        dn[k] -= FD_STEP;
        let (fp, fm) = (p.residual(&up)?, p.residual(&dn)?);
        for x in 0..n {
            fd[(x, k)] = (fp[x] - fm[x]) / (2.0 * FD_STEP);
        }
    }
    let jacobian = (&j - &fd).amax() / j.amax().max(f64::MIN_POSITIVE);

    let eta = random_function(&mut rng, n, 1.0);
    let shift = |t: f64| u.zip_map(&eta, |a, b| a + t * b);
    let numeric = (p.energy(&shift(FD_STEP))? - p.energy(&shift(-FD_STEP))?) / (2.0 * FD_STEP);
    let res = p.residual(&u)?;
    let exact: f64 = (0..n).map(|x| mu[x] * res[x] * eta[x]).sum();
    let scale: f64 = (0..n).map(|x| mu[x] * (res[x] * eta[x]).abs()).sum();
    let energy = (numeric - exact).abs() / scale.max(f64::MIN_POSITIVE);

    let c = g.elliptic_constant().value;
    let elliptic_excess = u.oscillation() - c * lap.sup_norm();
    Ok(IdentityCase { green, lap_integral, kato_min, jacobian, energy, elliptic_excess })
}

pub fn identity_suite(seed: u64, cases: usize) -> Result<IdentitySuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d);
    let seeds: Vec<u64> = (0..cases).map(|_| rng.random()).collect();
    let results = seeds.par_iter().map(|&s| identity_case(s)).collect::<Result<Vec<_>>>()?;
    let worst = |f: fn(&IdentityCase) -> f64| results.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let green = worst(|c| c.green);
    let laplacian_integral = worst(|c| c.lap_integral);
    let kato_min = results.iter().map(|c| c.kato_min).fold(f64::INFINITY, f64::min);
    let jacobian = worst(|c| c.jacobian);
    let energy = worst(|c| c.energy);
    let elliptic_excess = worst(|c| c.elliptic_excess);
    let passed = green <= GREEN_REL
        && laplacian_integral <= LAPLACIAN_INTEGRAL_REL
        && kato_min >= KATO_FLOOR
        && jacobian <= JACOBIAN_REL
        && energy <= ENERGY_REL
        && elliptic_excess <= ELLIPTIC_SLACK;
    Ok(IdentitySuite { cases, green, laplacian_integral, kato_min, jacobian, energy, elliptic_excess, passed })
}

/// `(det(L - diag(h e^u)), det R * det(L~ - diag(h e^u)|kept))`.
pub fn schur_determinants(p: &KwProblem, u: &VertexFunction) -> Result<(f64, f64)> {
    let (s, _) = schur_reduce(p)?;
    let full = p.jacobian(u)?.determinant();
    let mut reduced = s.reduced_laplacian.clone();
    for (i, &x) in s.kept_vertices.iter().enumerate() {
        reduced[(i, i)] -= p.h()[x] * u[x].exp();
    }
    Ok((full, s.r_matrix_logdet.exp() * reduced.determinant()))
}

fn random_p3_data(rng: &mut impl Rng) -> (VertexFunction, f64) {
    let regime = REGIMES[rng.random_range(0..3)];
    loop {
        let kind = rng.random_range(0..2);
        let (h, c) = random_data(rng, 3, regime, kind);
        let h = VertexFunction::from([h[0], 0.0, h[2]]);
        let p = KwProblem::with_constant(WeightedGraph::p3(), h.clone(), c).expect("data on P3");
        if h[0] != 0.0 && h[2] != 0.0 && p.regime().is_ok_and(|r| r.admissible()) {
            return (h, c);
        }
    }
}

pub fn schur_suite(cfg: &VerifyConfig) -> Result<SchurSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5c);
    let g = WeightedGraph::p3();
    let mut determinant: f64 = 0.0;
    let mut rhs_sum: f64 = 0.0;
    let mut min_reduced_weight = f64::INFINITY;
    let mut max_row_sum: f64 = 0.0;
    for _ in 0..cfg.schur_cases {
        let h = VertexFunction::from([magnitude(&mut rng), 0.0, -magnitude(&mut rng)]);
        let f = random_function(&mut rng, 3, 2.0);
        let p = KwProblem::with_function(g.clone(), h, f.clone())?;
        let u = random_function(&mut rng, 3, 2.0);
        let (a, b) = schur_determinants(&p, &u)?;
        determinant = determinant.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
        let (s, _) = schur_reduce(&p)?;
        rhs_sum = rhs_sum.max((s.reduced_f.iter().sum::<f64>() - f.iter().sum::<f64>()).abs());
        let l = &s.reduced_laplacian;
        for i in 0..l.nrows() {
            max_row_sum = max_row_sum.max(l.row(i).sum().abs());
            for j in 0..l.ncols() {
                if i != j {
                    min_reduced_weight = min_reduced_weight.min(-l[(i, j)]);
                }
            }
        }
    }
    let problems: Vec<KwProblem> = (0..cfg.schur_degree_cases)
        .map(|_| {
            let (h, c) = random_p3_data(&mut rng);
            KwProblem::with_constant(g.clone(), h, c)
        })
        .collect::<Result<_>>()?;
    let consistent = problems
        .par_iter()
        .map(|p| degree_reduction_consistency(p, &cfg.solve).map(|r| r.consistent))
        .collect::<Result<Vec<_>>>()?;
    let degree_consistent = consistent.iter().filter(|&&c| c).count();
    let passed = determinant <= SCHUR_DET_REL
        && rhs_sum <= SCHUR_SUM_ABS
        && (cfg.schur_cases == 0 || min_reduced_weight >= 0.0)
        && max_row_sum <= 1e-12
        && degree_consistent == cfg.schur_degree_cases;
    Ok(SchurSuite {
        cases: cfg.schur_cases,
        determinant,
        rhs_sum,
        min_reduced_weight,
        max_row_sum,
        degree_cases: cfg.schur_degree_cases,
        degree_consistent,
        passed,
    })
}
