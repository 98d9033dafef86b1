//! Acceptance gate. Each test prints one `PASS` / `FAIL` line; run with
//! `cargo test -p pgglmc --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.
//!
//! Oracles here are coded independently of the library: Gamma functions by a
//! local Lanczos series, quadrature by a local Simpson rule, bound formulas by
//! scalar arithmetic, assignment optima by enumeration.

use std::process::Command;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use pgglmc::harness::report::Check;
use pgglmc::harness::suites::{self, Scale};
use pgglmc::lmc::{run_chain, theorem1_bound, w2_init_upper_estimate, GradientMode, LmcConfig};
use pgglmc::pgg::{p_norm_pow, PggSpec};
use pgglmc::potential::{
    perturbation_scale, smoothness_constant, Huber, L1Norm, Potential, PowerNorm, Quadratic, RegularizedPotential, Zero,
};
use pgglmc::rng::{stream, Domain};
use pgglmc::smoothing::{
    grad_estimate_from_draws, lemma1_gap_envelope, lemma2_bias_bound, lemma2_variance_bound, SmoothingConfig,
};
use pgglmc::transport::{optimal_assignment, w2_exact_assignment, SampleSet};

const SEED: u64 = 20_240_601;

fn report(title: &str, ok: bool, detail: &str) {
    println!("{} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn gate(title: &str, checks: &[Check]) {
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed && !c.informational)
        .map(|c| format!("{} (measured {:e}, limit {:e}, {})", c.name, c.measured, c.limit, c.tolerance))
        .collect();
    let gating = checks.iter().filter(|c| !c.informational).count();
    report(title, failures.is_empty(), &format!("{} of {gating} checks pass", gating - failures.len()));
    assert!(failures.is_empty(), "{title}: {failures:#?}");
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Lanczos approximation (g = 7, 9 terms), relative error near 1e-15.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn moment_oracle(p: f64, d: usize, n: f64) -> f64 {
    let d = d as f64;
    p.powf(n / p) * (ln_gamma((d + n) / p) - ln_gamma(d / p)).exp()
}

/// Composite Simpson on `[0, b]` with `m` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, b: f64, m: usize) -> f64 {
    let h = b / m as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..m {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `int_0^inf exp(-x^p / p) dx` after `x = t^2`, which removes the kink at 0.
fn half_line_mass(p: f64) -> f64 {
    simpson(|t| 2.0 * t * (-t.powf(2.0 * p) / p).exp(), 40f64.sqrt(), 20_000)
}

#[test]
fn generalized_gaussian_moments() {
    let draws = 1_000_000;
    let mut grid = Vec::new();
    for p in [1.0, 1.5, 2.0] {
        for d in [1usize, 3, 5] {
            for n in [1.0, 2.0, 4.0] {
                grid.push((p, d, n));
            }
        }
    }
    let rows: Vec<(String, f64, f64, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(p, d, n))| {
            let spec = PggSpec::new(p, d).unwrap();
            let mut rng = stream(SEED, Domain::Verify, i as u64);
            let mut x = vec![0.0; d];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..draws {
                spec.sample_into(&mut rng, &mut x);
                let v = p_norm_pow(&x, p).powf(n / p);
                s += v;
                s2 += v * v;
            }
            let mean = s / draws as f64;
            let se = ((s2 / draws as f64 - mean * mean) / (draws - 1) as f64).sqrt();
            let oracle = moment_oracle(p, d, n);
            let library = spec.norm_moment(n).unwrap();
            (format!("p={p} d={d} n={n}"), (mean - oracle).abs() / se, rel(library, oracle), oracle)
        })
        .collect();
    let worst_z = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_formula = rows.iter().map(|r| r.2).fold(0.0, f64::max);

    let mut worst_spot = 0.0f64;
    for d in [1usize, 3, 5] {
        let df = d as f64;
        worst_spot = worst_spot.max(rel(PggSpec::new(2.0, d).unwrap().norm_moment(2.0).unwrap(), df));
        worst_spot = worst_spot.max(rel(PggSpec::new(1.0, d).unwrap().norm_moment(1.0).unwrap(), df));
    }
    let ok = worst_z <= 4.0 && worst_formula <= 1e-12 && worst_spot <= 1e-12;
    report(
        "moments",
        ok,
        &format!(
            "27 grid points x {draws} draws, max |MC - exact| = {worst_z:.2} SE (limit 4); \
             formula vs local Gamma {worst_formula:.1e}; spot values {worst_spot:.1e}"
        ),
    );
    assert!(ok, "{rows:#?}");
}

#[test]
fn normalizer_matches_quadrature() {
    let mut worst = 0.0f64;
    for p in [1.0, 1.5, 2.0] {
        let one = 2.0 * half_line_mass(p);
        worst = worst.max(rel(PggSpec::new(p, 1).unwrap().kappa(), one));
        // nested 2-D rule on the quadrant, not the product of 1-D values
        let f = |t: f64| 2.0 * t * (-t.powf(2.0 * p) / p).exp();
        let b = 40f64.sqrt();
        let inner = |s: f64| simpson(|t| f(t) * f(s), b, 2_000);
        let two = 4.0 * simpson(inner, b, 2_000);
        worst = worst.max(rel(PggSpec::new(p, 2).unwrap().kappa(), two));
    }
    let ok = worst <= 1e-6;
    report("normalizer", ok, &format!("max relative error {worst:.2e} vs 1-D and 2-D quadrature (limit 1e-6)"));
    assert!(ok);
}

fn corpus(d: usize) -> Vec<Arc<dyn Potential>> {
    vec![
        Arc::new(Quadratic::new(d)),
        Arc::new(L1Norm::new(d)),
        Arc::new(Huber::new(d, 0.5).unwrap()),
        Arc::new(PowerNorm::new(d, 0.0).unwrap()),
        Arc::new(PowerNorm::new(d, 0.5).unwrap()),
    ]
}

fn smoothness_oracle(l: f64, alpha: f64, d: f64, mu: f64, p: f64) -> f64 {
    l * d.powf((1.0 - alpha) / p) / (mu.powf(1.0 - alpha) * (1.0 + alpha).powf(1.0 - alpha))
}

#[test]
fn smoothing_gap_and_gradient_lipschitz() {
    let d = 3;
    let mut worst = 0.0f64;
    for base in corpus(d) {
        let h = base.holder();
        for p in [1.0, 1.5, 2.0] {
            for mu in [0.5f64, 0.1] {
                let df = d as f64;
                let envelope =
                    h.lipschitz * mu.powf(1.0 + h.alpha) * (2.0 * df * (df + p) / p).powf((1.0 + h.alpha) / (2.0 * p))
                        / (1.0 + h.alpha);
                worst = worst.max(rel(lemma1_gap_envelope(base.as_ref(), mu, p).unwrap(), envelope));
                let m = smoothness_oracle(h.lipschitz, h.alpha, df, mu, p);
                worst = worst.max(rel(smoothness_constant(h, d, mu, p).unwrap(), m));
            }
        }
    }
    assert!(worst <= 1e-12, "bound formulas differ from scalar recomputation: {worst:e}");
    gate("smoothing gap and gradient Lipschitz", &suites::lemma1(Scale::Acceptance, SEED).unwrap());
}

#[test]
fn estimator_bias_and_variance() {
    let (d, p, mu, lambda) = (4usize, 2.0f64, 0.1f64, 1.0f64);
    let df = d as f64;
    let mut worst = 0.0f64;
    for (m, grad, n) in [(1.0f64, 2.5f64, 1usize), (3.7, 0.0, 10), (0.2, 1.1, 100)] {
        let bias = (m + lambda) * (m + lambda) * mu * mu * df.powf(2.0 / p);
        worst = worst.max(rel(lemma2_bias_bound(m, lambda, mu, d, p), bias));
        let term = 0.5 * (m + lambda) * mu * (df + 3.0).powf(3.0 / p) + 2f64.sqrt() * (df + 2.0).powf(2.0 / p) * grad;
        worst = worst.max(rel(lemma2_variance_bound(m, lambda, mu, d, p, n, grad), term * term / n as f64));
    }
    assert!(worst <= 1e-12, "bound formulas differ from scalar recomputation: {worst:e}");
    gate("estimator bias and variance", &suites::lemma2(Scale::Acceptance, SEED).unwrap());
}

#[test]
fn gaussian_reduction_is_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    let cases = 1000;
    for _ in 0..cases {
        let d = rng.random_range(1..=8usize);
        let n = rng.random_range(1..=32usize);
        let mu = rng.random_range(1e-3..2.0);
        let lambda = rng.random_range(0.01..3.0);
        let base = corpus(d).swap_remove(rng.random_range(0..5usize));
        let pot = RegularizedPotential::new(base.clone(), lambda).unwrap();
        let cfg = SmoothingConfig::new(mu, n, PggSpec::new(2.0, d).unwrap()).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
        let u: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let library = grad_estimate_from_draws(&pot, &cfg, &x, &u).unwrap().value;

        let ubar = |y: &[f64]| base.value(y) + 0.5 * lambda * y.iter().map(|v| v * v).sum::<f64>();
        let f0 = ubar(&x);
        let mut g = vec![0.0; d];
        for row in u.chunks(d) {
            let y: Vec<f64> = x.iter().zip(row).map(|(a, b)| a + mu * b).collect();
            let w = (ubar(&y) - f0) / mu;
            for j in 0..d {
                g[j] += w * row[j];
            }
        }
        for v in &mut g {
            *v /= n as f64;
        }
        if library.iter().zip(&g).any(|(a, b)| a.to_bits() != b.to_bits()) {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0;
    report("p = 2 reduction", ok, &format!("{mismatches} of {cases} cases differ bitwise"));
    assert!(ok);
}

#[test]
fn stationary_variance_of_gaussian_target() {
    let (lambda, eta, steps, chains) = (1.0, 0.01, 10_000, 1_000);
    let oracle = 1.0 / (lambda * (1.0 - eta * lambda / 2.0));
    let pot = RegularizedPotential::new(Arc::new(Zero::new(1)), lambda).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, (mode, p, n)) in
        [(GradientMode::Exact, 2.0, 1), (GradientMode::Estimated, 1.0, 50), (GradientMode::Estimated, 2.0, 50)]
            .into_iter()
            .enumerate()
    {
        let scfg = SmoothingConfig::new(0.01, n, PggSpec::new(p, 1).unwrap()).unwrap();
        let lcfg = LmcConfig::new(&pot, &scfg, eta, steps, chains, SEED + i as u64)
            .unwrap()
            .with_gradient(mode)
            .with_trajectory(Some(10));
        let res = run_chain(&pot, &scfg, &lcfg).unwrap();
        let traj = res.trajectory.unwrap();
        // time average of x^2 per chain after 1000 burn-in steps
        let per_chain: Vec<f64> = (0..chains)
            .map(|c| {
                let kept: Vec<f64> = traj
                    .steps
                    .iter()
                    .zip(&traj.states)
                    .filter(|(k, _)| **k > 1_000)
                    .map(|(_, s)| s[c] * s[c])
                    .collect();
                kept.iter().sum::<f64>() / kept.len() as f64
            })
            .collect();
        let mean = per_chain.iter().sum::<f64>() / chains as f64;
        let var = per_chain.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (chains - 1) as f64;
        let se = (var / chains as f64).sqrt();
        let pass = match mode {
            GradientMode::Exact => (mean - oracle).abs() <= 4.0 * se,
            GradientMode::Estimated => (mean / oracle - 1.0).abs() <= 0.05,
        };
        ok &= pass;
        lines.push(format!("{mode:?} p={p}: {mean:.5} (SE {se:.5})"));
    }
    report("stationary variance", ok, &format!("oracle {oracle:.5}; {}", lines.join("; ")));
    assert!(ok);
}

#[test]
fn measured_w2_never_exceeds_mixing_bound() {
    let d = 2;
    let mut worst = 0.0f64;
    for case in suites::dominance_cases(d) {
        let pot = RegularizedPotential::new(case.base.clone(), case.lambda).unwrap();
        let scfg = SmoothingConfig::new(case.mu, case.batch, PggSpec::new(case.p, d).unwrap()).unwrap();
        let (eta, steps) = suites::dominance_schedule(&pot, case.mu, case.p).unwrap();
        let lcfg = LmcConfig::new(&pot, &scfg, eta, steps, 1, 0).unwrap();
        let w2_init = w2_init_upper_estimate(&lcfg.init, d, case.lambda, 0.0).unwrap();
        let lib = theorem1_bound(&pot, &scfg, &lcfg, w2_init, 0.0, 0.0).unwrap();

        let h = case.base.holder();
        let (lambda, mu, p, n, df) = (case.lambda, case.mu, case.p, case.batch as f64, d as f64);
        let m = smoothness_oracle(h.lipschitz, h.alpha, df, mu, p);
        let a = h.lipschitz * mu.powf(1.0 + h.alpha) * df.powf((1.0 + h.alpha) / p) / (1.0 + h.alpha)
            + 0.5 * lambda * mu * mu * (df + 1.0).powf(2.0 / p);
        let shift =
            if a <= 0.1 { 3.0 * (df * a / lambda).sqrt() } else { (4.0 * df / lambda * (a + a.exp() - 1.0)).sqrt() };
        let expected = [
            (1.0 - 0.5 * lambda * eta).powf(steps as f64 / 2.0) * (df / lambda).sqrt(),
            1.9 * (m + lambda) / lambda * (eta * df).sqrt(),
            2.0 * (m + lambda) / lambda * mu * df.powf(1.0 / p),
            shift,
            (1.0 / lambda.sqrt()) * (1.0 / n.sqrt()) * eta.sqrt() * (m + lambda) * mu * (df + 3.0).powf(3.0 / p),
            ((m + lambda).sqrt() / lambda.sqrt())
                * (1.0 / n.sqrt())
                * eta.sqrt()
                * df.sqrt()
                * (df + 2.0).powf(1.0 / p),
            0.0,
        ];
        assert_eq!(lib.terms.len(), expected.len());
        for (term, e) in lib.terms.iter().zip(expected) {
            worst = worst.max(rel(term.value, e));
        }
        worst = worst.max(rel(lib.w2_mixing, expected.iter().sum()));
        worst = worst.max(rel(perturbation_scale(h, d, lambda, mu, p).unwrap(), a));
    }
    let formulas_ok = worst <= 1e-12;
    report("bound terms recomputed", formulas_ok, &format!("max relative difference {worst:.1e} (limit 1e-12)"));
    assert!(formulas_ok);
    gate("W2 below mixing bound", &suites::bound_dominance(Scale::Acceptance, SEED).unwrap());
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> SampleSet {
    SampleSet::new((0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect(), d).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for perm in permutations(n - 1) {
        for slot in 0..n {
            let mut p = perm.clone();
            p.insert(slot, n - 1);
            out.push(p);
        }
    }
    out
}

#[test]
fn transport_solver_matches_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut plan_mismatch = 0;
    let mut cost_rel = 0.0f64;
    for i in 0..100 {
        let n = 1 + i % 8;
        let d = 1 + i % 3;
        let a = random_set(&mut rng, n, d);
        let b = random_set(&mut rng, n, d);
        let sq = |i: usize, j: usize| -> f64 { (0..d).map(|k| (a.point(i)[k] - b.point(j)[k]).powi(2)).sum() };
        let (best, cost) = permutations(n)
            .into_iter()
            .map(|perm| {
                let c: f64 = perm.iter().enumerate().map(|(i, &j)| sq(i, j)).sum();
                (perm, c)
            })
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        let plan = optimal_assignment(&a, &b).unwrap();
        if plan.plan != best {
            plan_mismatch += 1;
        }
        cost_rel = cost_rel.max(rel(plan.mean_cost, cost / n as f64));
    }

    let mut one_d = 0.0f64;
    for n in [2usize, 10, 100, 500] {
        let a = random_set(&mut rng, n, 1);
        let b = random_set(&mut rng, n, 1);
        let mut x = a.points().to_vec();
        let mut y = b.points().to_vec();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        let sorted = (x.iter().zip(&y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n as f64).sqrt();
        one_d = one_d.max(rel(w2_exact_assignment(&a, &b).unwrap(), sorted));
    }

    let (mut sym, mut tri, mut scale, mut shift) = (0.0f64, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for i in 0..30 {
        let n = 2 + (i * 5) % 63;
        let d = 1 + i % 3;
        let (a, b, c) = (random_set(&mut rng, n, d), random_set(&mut rng, n, d), random_set(&mut rng, n, d));
        let ab = w2_exact_assignment(&a, &b).unwrap();
        sym = sym.max((ab - w2_exact_assignment(&b, &a).unwrap()).abs());
        tri = tri.max(w2_exact_assignment(&a, &c).unwrap() - ab - w2_exact_assignment(&c, &b).unwrap());
        let k = -2.5;
        scale = scale.max((w2_exact_assignment(&a.scaled(k), &b.scaled(k)).unwrap() - k.abs() * ab).abs());
        let v: Vec<f64> = (0..d).map(|j| 3.0 - j as f64).collect();
        shift = shift.max((w2_exact_assignment(&a.translated(&v), &b.translated(&v)).unwrap() - ab).abs());
    }
    let ok = plan_mismatch == 0
        && cost_rel <= 1e-12
        && one_d <= 1e-12
        && sym <= 1e-9
        && tri <= 1e-9
        && scale <= 1e-9
        && shift <= 1e-9;
    report(
        "transport",
        ok,
        &format!(
            "{plan_mismatch} of 100 plans differ from enumeration (cost {cost_rel:.1e}); 1-D {one_d:.1e}; \
             symmetry {sym:.1e}, triangle excess {tri:.1e}, scaling {scale:.1e}, translation {shift:.1e}"
        ),
    );
    assert!(ok);
}

#[test]
fn pipeline_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "potential": { "name": "huber", "dim": 3, "delta": 0.5, "lambda": 0.5 },
            "smoothing": { "mu": 0.05, "n": 8, "p": 1.5 },
            "lmc": { "eta": "auto", "steps": 400, "chains": 96, "seed": 42 },
            "report": { "resamples": 2 }
        }"#,
    )
    .unwrap();
    let run = |out: &str, threads: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_pgglmc"))
            .args(["sample", "--quiet", "--threads", threads, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out).join("samples.csv")).unwrap()
    };
    let first = run("a", "4");
    let second = run("b", "4");
    let single = run("c", "1");
    let ok = first == second && first == single && first.len() > 100;
    report("determinism", ok, &format!("{} CSV bytes; repeat and 1 vs 4 threads identical: {ok}", first.len()));
    assert!(ok);
}
