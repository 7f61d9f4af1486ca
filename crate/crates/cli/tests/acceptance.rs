//! Exit gate. Each test prints one `ACCEPTANCE` line with its verdict.

use std::process::Command;
use std::time::Instant;

use kwgraph::continuation::{branch_scan_family, estimate_c_h, estimate_lambda_star};
use kwgraph::degree::{degree_numeric, DegreeValue};
use kwgraph::solve::{enumerate_escalating, enumerate_solutions, newton_solve};
use kwgraph::verify::{degree_suite, identity_suite, schur_suite, VerifyConfig};
use kwgraph::{KwProblem, SolveOptions, Stability, VertexFunction, WeightedGraph};

fn report(id: &str, ok: bool, detail: String) {
    println!("ACCEPTANCE {id}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn k2(h: [f64; 2], c: f64) -> KwProblem {
    KwProblem::with_constant(WeightedGraph::k2(), h, c).unwrap()
}

/// Smallest `c` with a K2 root for `h = (1, -2)`. With `s = e^{u_1}` the
/// system reduces to `s e^{c - s} + c - s/2 = 0`, increasing in `c`.
fn c_h_oracle() -> f64 {
    let c_of = |s: f64| {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s * (mid - s).exp() + mid - s / 2.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    golden_min(c_of, 1e-6, 20.0)
}

/// Largest `lambda` with a K2 root for `K = (0, -1)`, `kappa = -1`: roots
/// are zeros of `lambda s + (lambda - 1) s e^{-lambda s - 1} + 2` in `s > 0`.
fn lambda_star_oracle() -> f64 {
    let min_f = |l: f64| golden_min(|s| l * s + (l - 1.0) * s * (-l * s - 1.0).exp() + 2.0, 1e-6, 200.0);
    let (mut lo, mut hi) = (1e-6, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Grid search then golden section on the best cell.
fn golden_min(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 4000;
    let xs: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    let k = (0..=n).min_by(|&i, &j| f(xs[i]).total_cmp(&f(xs[j]))).unwrap();
    let (mut lo, mut hi) = (xs[k.saturating_sub(1)], xs[(k + 1).min(n)]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = hi - r * (hi - lo);
        let x2 = lo + r * (hi - lo);
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    f(0.5 * (lo + hi))
}

#[test]
fn criterion_1_degree_theorem() {
    let start = Instant::now();
    let cfg = VerifyConfig::default();
    let s = degree_suite(&cfg).unwrap();
    let nondegenerate = s.instances - s.degenerate;
    let ok = s.instances >= 200 && s.failed == 0 && s.matched == nondegenerate;
    report(
        "1 degree theorem",
        ok,
        format!(
            "{}/{} nondegenerate matched, {} degenerate, {:.1}s",
            s.matched,
            nondegenerate,
            s.degenerate,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_closed_form_fixtures() {
    let opts = SolveOptions::default();
    let mut worst_log = 0.0f64;
    let mut single = true;
    for eps in [1e-2, 1e-4] {
        let roots = enumerate_solutions(&k2([1.0, 1.0], eps), &opts).unwrap();
        single &= roots.len() == 1;
        for r in &roots {
            worst_log = worst_log.max(r.u.sup_distance(&VertexFunction::constant(2, f64::ln(eps))));
        }
    }
    let zero = newton_solve(&k2([-1.0, -1.0], -1.0), &VertexFunction::constant(2, 1.0), &opts).unwrap();
    let zero_err = zero.u.sup_norm();

    let flat = k2([1.0, -2.0], 0.0);
    let d = degree_numeric(&flat, &opts).unwrap();
    let l2 = 2f64.ln();
    let exact = VertexFunction::from([l2.ln(), (l2 / 2.0).ln()]);
    let flat_err = d.solutions.iter().map(|s| s.u.sup_distance(&exact)).fold(0.0, f64::max);

    let ok = single
        && worst_log <= 1e-10
        && zero_err <= 1e-12
        && d.solutions.len() == 1
        && flat_err <= 1e-10
        && d.numeric_degree == DegreeValue::Value(-1);
    report(
        "2 closed-form fixtures",
        ok,
        format!("ln eps err {worst_log:.2e}, zero err {zero_err:.2e}, flat err {flat_err:.2e}, degree {:?}", d.numeric_degree),
    );
}

#[test]
fn criterion_3_schur_reduction() {
    let s = schur_suite(&VerifyConfig::default()).unwrap();
    let ok = s.cases >= 100
        && s.determinant <= 1e-10
        && s.rhs_sum <= 1e-12
        && s.degree_cases >= 20
        && s.degree_consistent == s.degree_cases;
    report(
        "3 schur reduction",
        ok,
        format!(
            "{} cases, det rel err {:.2e}, sum err {:.2e}, {}/{} consistent",
            s.cases, s.determinant, s.rhs_sum, s.degree_consistent, s.degree_cases
        ),
    );
}

#[test]
fn criterion_4a_unique_stable_root() {
    let start = Instant::now();
    let p = KwProblem::with_constant(WeightedGraph::p3(), [-1.0, 0.0, -2.0], -1.0).unwrap();
    let mut first: Option<VertexFunction> = None;
    let mut ok = true;
    for seed in 0..50 {
        let opts = SolveOptions { rng_seed: seed, ..SolveOptions::default() };
        let roots = enumerate_solutions(&p, &opts).unwrap();
        ok &= roots.len() == 1;
        if let Some(r) = roots.first() {
            ok &= matches!(r.stability, Stability::Stable | Stability::StrictlyStable);
            let u0 = first.get_or_insert_with(|| r.u.clone());
            ok &= u0.sup_distance(&r.u) <= 1e-8;
        }
    }
    report("4a unique stable root", ok, format!("50 seeds, {:.1}s", start.elapsed().as_secs_f64()));
}

#[test]
fn criterion_4b_c_h_bracket() {
    let start = Instant::now();
    let g = WeightedGraph::k2();
    let h = VertexFunction::from([1.0, -2.0]);
    let opts = SolveOptions::default();
    let b = estimate_c_h(&g, &h, &opts, 1e-3).unwrap();
    let oracle = c_h_oracle();
    let frozen = -0.059468366;
    let at = |c: f64| enumerate_escalating(&KwProblem::with_constant(g.clone(), h.clone(), c).unwrap(), &opts, &[]);
    let upper_roots = at(b.upper).unwrap().solutions.len();
    let lower_roots = at(b.lower).unwrap().solutions.len();
    let ok = b.width <= 1e-3
        && upper_roots >= 2
        && lower_roots == 0
        && (oracle - frozen).abs() <= 1e-8
        && b.lower <= oracle
        && oracle <= b.upper;
    report(
        "4b c_h bracket",
        ok,
        format!(
            "[{:.6}, {:.6}] width {:.1e}, roots {upper_roots}/{lower_roots}, oracle {oracle:.9}, {:.1}s",
            b.lower,
            b.upper,
            b.width,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_4c_lambda_star() {
    let start = Instant::now();
    let g = WeightedGraph::k2();
    let k = VertexFunction::from([0.0, -1.0]);
    let kappa = VertexFunction::constant(2, -1.0);
    let opts = SolveOptions::default();
    let (b, table) = estimate_lambda_star(&g, &k, &kappa, &opts, 1e-3).unwrap();
    let oracle = lambda_star_oracle();
    let frozen = 0.04526029;
    let count_at = |l: f64| table.rows.iter().find(|r| r.parameter == l).map(|r| r.count);
    let inside: Vec<usize> = table.rows.iter().filter(|r| 0.0 < r.parameter && r.parameter < b.lower).map(|r| r.count).collect();
    let ok = 0.0 < b.lower
        && b.upper < 1.0
        && count_at(-0.5) == Some(1)
        && count_at(2.0) == Some(0)
        && !inside.is_empty()
        && inside.iter().all(|&n| n >= 2)
        && (oracle - frozen).abs() <= 1e-7
        && b.lower <= oracle
        && oracle <= b.upper;
    report(
        "4c lambda star",
        ok,
        format!(
            "[{:.6}, {:.6}], counts inside {inside:?}, oracle {oracle:.8}, {:.1}s",
            b.lower,
            b.upper,
            start.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_5_operator_identities() {
    let s = identity_suite(0, 1000).unwrap();
    let ok = s.cases >= 1000
        && s.green <= 1e-12
        && s.laplacian_integral <= 1e-12
        && s.kato_min >= -1e-12
        && s.jacobian <= 1e-6
        && s.energy <= 1e-6
        && s.elliptic_excess <= 1e-10;
    report(
        "5 operator identities",
        ok,
        format!(
            "green {:.1e}, integral {:.1e}, kato {:.1e}, jacobian {:.1e}, energy {:.1e}, elliptic {:.1e}",
            s.green, s.laplacian_integral, s.kato_min, s.jacobian, s.energy, s.elliptic_excess
        ),
    );
}

#[test]
fn criterion_6_envelope_stability() {
    let family = |t: f64| KwProblem::with_constant(WeightedGraph::k2(), [1.0 + 0.5 * t, -2.0 + 0.5 * t], 0.0);
    let grid = |n: usize| -> Vec<f64> { (0..n).map(|k| -0.5 + k as f64 / (n - 1) as f64).collect() };
    let coarse = grid(20);
    let fine = grid(39);
    let class_a = fine.iter().all(|&t| family(t).unwrap().class_a_check(4.0).unwrap().holds());

    let base = SolveOptions::default();
    let radius = base.radius_for(&family(0.0).unwrap());
    let wide = SolveOptions { start_box_radius: Some(2.0 * radius), ..base.clone() };
    let a = branch_scan_family(&coarse, family, &base, &[]).unwrap();
    let b = branch_scan_family(&fine, family, &wide, &[]).unwrap();
    let change = (b.envelope - a.envelope).abs() / a.envelope;
    let all_solved = a.rows.iter().chain(&b.rows).all(|r| r.count == 1);
    report(
        "6 envelope stability",
        class_a && all_solved && change < 0.01,
        format!("envelope {:.6} -> {:.6}, change {:.2e}, class A {class_a}", a.envelope, b.envelope, change),
    );
}

#[test]
fn criterion_7_verify_is_deterministic() {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_kwgraph"))
            .args(["verify", "--seed", "7"])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let ok = a.status.code() == Some(0) && b.status.code() == Some(0) && !a.stdout.is_empty() && a.stdout == b.stdout;
    report("7 determinism", ok, format!("{} bytes, exit {:?}", a.stdout.len(), a.status.code()));
}
