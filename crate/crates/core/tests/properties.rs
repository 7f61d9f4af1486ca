use kwgraph::model::RegimeTag;
use kwgraph::solve::{constrained_minimize, enumerate_solutions, newton_solve, SubSuperPair};
use kwgraph::degree::{degree_numeric, degree_theoretical, schur_reduce};
use kwgraph::verify::{random_connected_graph, random_data, schur_determinants};
use kwgraph::{KwProblem, SolveOptions, Stability, VertexFunction, WeightedGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64, n: usize, weighted_mu: bool) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_connected_graph(&mut rng, n, 0.5, 2.0, weighted_mu.then_some((0.5, 2.0)))
}

fn function(seed: u64, n: usize, scale: f64) -> VertexFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    VertexFunction::from_fn(n, |_| rng.random_range(-scale..=scale))
}

/// Dense `(1/mu_x) sum_y w_xy (u_y - u_x)` straight from the edge list.
fn laplacian_oracle(g: &WeightedGraph, u: &VertexFunction) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for &(x, y, w) in g.edges() {
        out[x] += w * (u[y] - u[x]);
        out[y] += w * (u[x] - u[y]);
    }
    out.iter().zip(g.mu()).map(|(v, m)| v / m).collect()
}

fn quick() -> SolveOptions {
    SolveOptions { n_starts: 32, escalate: 1, ..SolveOptions::default() }
}

fn negative_problem(seed: u64, n: usize) -> KwProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
    let (h, c) = random_data(&mut rng, n, RegimeTag::Negative, 0);
    KwProblem::with_constant(g, h, c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_matches_edge_sum(seed in any::<u64>(), n in 2usize..8) {
        let g = graph(seed, n, true);
        let u = function(seed, n, 3.0);
        let lap = g.laplacian(&u).unwrap();
        let oracle = laplacian_oracle(&g, &u);
        for x in 0..n {
            prop_assert!((lap[x] - oracle[x]).abs() <= 1e-12 * (1.0 + oracle[x].abs()));
        }
        let integral = g.integrate(&lap).unwrap();
        prop_assert!(integral.abs() <= 1e-12 * (1.0 + u.sup_norm()) * g.total_measure() * 4.0);
    }

    #[test]
    fn green_formula_against_edges(seed in any::<u64>(), n in 2usize..8) {
        let g = graph(seed, n, true);
        let u = function(seed, n, 2.0);
        let v = function(seed.wrapping_add(1), n, 2.0);
        let lhs = g.integrate(&g.laplacian(&u).unwrap().zip_map(&v, |a, b| a * b)).unwrap();
        let edge_sum: f64 = g.edges().iter().map(|&(x, y, w)| w * (u[y] - u[x]) * (v[y] - v[x])).sum();
        prop_assert!((lhs + edge_sum).abs() <= 1e-12 * (1.0 + edge_sum.abs()) * 10.0);
        let gamma = g.integrate(&g.gradient_form(&u, &v).unwrap()).unwrap();
        prop_assert!((gamma - edge_sum).abs() <= 1e-12 * (1.0 + edge_sum.abs()) * 10.0);
    }

    #[test]
    fn jacobian_matches_central_differences(seed in any::<u64>(), n in 2usize..7) {
        let g = graph(seed, n, true);
        let h = function(seed.wrapping_add(2), n, 2.0);
        let p = KwProblem::with_constant(g, h, 0.3).unwrap();
        let u = function(seed.wrapping_add(3), n, 1.5);
        let j = p.jacobian(&u).unwrap();
        let step = 1e-6;
        for k in 0..n {
            let mut plus = u.clone().into_values();
            let mut minus = plus.clone();
            plus[k] += step;
            minus[k] -= step;
            let fp = p.residual(&VertexFunction::new(plus)).unwrap();
            let fm = p.residual(&VertexFunction::new(minus)).unwrap();
            for x in 0..n {
                let fd = (fp[x] - fm[x]) / (2.0 * step);
                prop_assert!((fd - j[(x, k)]).abs() <= 1e-6 * (1.0 + j[(x, k)].abs()));
            }
        }
    }

    #[test]
    fn energy_derivative_is_weak_residual(seed in any::<u64>(), n in 2usize..7) {
        let g = graph(seed, n, true);
        let h = function(seed.wrapping_add(4), n, 2.0);
        let f = function(seed.wrapping_add(5), n, 1.0);
        let p = KwProblem::with_function(g.clone(), h, f).unwrap();
        let u = function(seed.wrapping_add(6), n, 1.0);
        let eta = function(seed.wrapping_add(7), n, 1.0);
        let t = 1e-5;
        let shift = |s: f64| u.zip_map(&eta, |a, b| a + s * b);
        let fd = (p.energy(&shift(t)).unwrap() - p.energy(&shift(-t)).unwrap()) / (2.0 * t);
        let weak = g.integrate(&p.residual(&u).unwrap().zip_map(&eta, |a, b| a * b)).unwrap();
        prop_assert!((fd - weak).abs() <= 1e-6 * (1.0 + weak.abs()));
    }

    #[test]
    fn relabeling_keeps_regime_and_degree(seed in any::<u64>(), n in 2usize..7, which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
        let tag = [RegimeTag::Positive, RegimeTag::Flat, RegimeTag::Negative][which];
        let (h, c) = random_data(&mut rng, n, tag, seed as usize);
        let p = KwProblem::with_constant(g, h, c).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1);
        let q = p.permuted(&perm).unwrap();
        prop_assert_eq!(p.regime().unwrap(), q.regime().unwrap());
        prop_assert_eq!(degree_theoretical(&p).unwrap(), degree_theoretical(&q).unwrap());
    }

    #[test]
    fn schur_identity_on_random_graphs(seed in any::<u64>(), n in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
        let (mut h, c) = random_data(&mut rng, n, RegimeTag::Positive, 0);
        let mut values = h.clone().into_values();
        values[n - 1] = 0.0;
        if values.iter().all(|&v| v <= 0.0) {
            values[0] = 1.0;
        }
        h = VertexFunction::new(values);
        let p = KwProblem::with_constant(g, h, c).unwrap();
        let u = function(seed, n, 1.0);
        let (full, reduced) = schur_determinants(&p, &u).unwrap();
        prop_assert!((full - reduced).abs() <= 1e-10 * full.abs().max(1e-300));
        let (s, _) = schur_reduce(&p).unwrap();
        let total: f64 = s.reduced_f.iter().sum();
        prop_assert!((total - c * n as f64).abs() <= 1e-12 * (1.0 + total.abs()) * 10.0);
        prop_assert_eq!(s.restrict(&s.lift(&s.restrict(&u))), s.restrict(&u));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn nonpositive_h_gives_only_stable_roots(seed in any::<u64>(), n in 2usize..6) {
        let p = negative_problem(seed, n);
        let roots = enumerate_solutions(&p, &quick()).unwrap();
        prop_assert_eq!(roots.len(), 1);
        for r in &roots {
            prop_assert!(matches!(r.stability, Stability::Stable | Stability::StrictlyStable));
        }
    }

    #[test]
    fn roots_satisfy_the_integral_identity(seed in any::<u64>(), n in 2usize..6, which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.5, 2.0, Some((0.5, 2.0)));
        let tag = [RegimeTag::Positive, RegimeTag::Flat, RegimeTag::Negative][which];
        let (h, c) = random_data(&mut rng, n, tag, seed as usize);
        let p = KwProblem::with_constant(g.clone(), h.clone(), c).unwrap();
        for r in enumerate_solutions(&p, &quick()).unwrap() {
            let heu = g.integrate(&h.zip_map(&r.u, |a, b| a * b.exp())).unwrap();
            let fc = c * g.total_measure();
            prop_assert!((heu - fc).abs() <= 1e-8 * (1.0 + fc.abs() + heu.abs()));
        }
    }

    #[test]
    fn enumeration_is_deterministic_and_deduplicated(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
        let (h, c) = random_data(&mut rng, n, RegimeTag::Flat, 0);
        let p = KwProblem::with_constant(g, h, c).unwrap();
        let opts = SolveOptions { rng_seed: seed, ..quick() };
        let a = enumerate_solutions(&p, &opts).unwrap();
        let b = enumerate_solutions(&p, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                prop_assert!(a[i].u.sup_distance(&a[j].u) > opts.dedupe_distance);
            }
        }
    }

    #[test]
    fn constrained_minimizer_stays_in_the_box(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(&mut rng, n, 0.5, 2.0, None);
        let h = VertexFunction::from_fn(n, |_| -rng.random_range(0.2..=2.0));
        let c = -rng.random_range(0.1..=2.0);
        let p = KwProblem::with_constant(g, h.clone(), c).unwrap();
        let ratios = h.map(|hx| c / hx);
        let pair = SubSuperPair {
            phi: VertexFunction::constant(n, ratios.min().ln() - 1.0),
            psi: VertexFunction::constant(n, ratios.max().ln() + 1.0),
        };
        let s = constrained_minimize(&p, &pair, &SolveOptions::default()).unwrap();
        for x in 0..n {
            prop_assert!(pair.phi[x] <= s.u[x] && s.u[x] <= pair.psi[x]);
        }
        prop_assert!(s.residual_linf <= 1e-10);
        let newton = newton_solve(&p, &VertexFunction::zeros(n), &SolveOptions::default()).unwrap();
        prop_assert!(newton.u.sup_distance(&s.u) <= 1e-8);
    }
}

#[test]
fn numeric_degree_is_label_independent() {
    for seed in 0..6 {
        let p = negative_problem(seed, 4);
        let q = p.permuted(&[2, 0, 3, 1]).unwrap();
        let a = degree_numeric(&p, &quick()).unwrap();
        let b = degree_numeric(&q, &quick()).unwrap();
        assert_eq!(a.numeric_degree, b.numeric_degree);
        assert_eq!(a.solutions.len(), b.solutions.len());
    }
}
