//! Exit criteria. Each test prints one `criterion N ... PASS|FAIL` line.

use std::process::Command;
use std::sync::OnceLock;

use payoff_nash::estimators::{
    escape_probability_probe, unbiasedness_probe, variance_probe, EstimatorKind, RngKey,
};
use payoff_nash::games::{make_canonical_quadratic, make_cournot, Game};
use payoff_nash::geometry::{ConvexSet, ProductSet};
use payoff_nash::harness::{fit_rate, run_experiment, ExperimentConfig, GameSpec, RateEstimate, TailWindow};
use payoff_nash::learner::{make_schedule, run_observed, RunOptions, ScheduleMode, ScheduleSpec};
use payoff_nash::linalg;
use payoff_nash::solvers::{fixed_point_residual, solve_ne, solve_regularized_ne};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, passed: bool, detail: String) {
    println!(
        "criterion {n:>2} {name:<28} {} {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {n} ({name}) failed: {detail}");
}

fn rate(kind: EstimatorKind, mode: ScheduleMode, runs: u64) -> RateEstimate {
    let mut cfg = ExperimentConfig::new(GameSpec::CanonicalQuadratic, kind, 100_000, runs);
    cfg.schedule = match mode {
        ScheduleMode::Theorem2 => ScheduleSpec {
            mode: Some(mode),
            r: Some(1.0),
            s: Some(2.0),
            b: Some(1.0),
            c: Some(0.5),
            ..Default::default()
        },
        ScheduleMode::Theorem1 => ScheduleSpec {
            mode: Some(mode),
            a: Some(1.0),
            epsilon: Some(0.05),
            ..Default::default()
        },
    };
    let out = run_experiment(&cfg).expect("experiment runs");
    assert_eq!(out.metadata.schedule.nu, 1.0);
    fit_rate(&out.rows, TailWindow::Decades(1.0)).expect("fit")
}

fn two_point_rate() -> &'static RateEstimate {
    static R: OnceLock<RateEstimate> = OnceLock::new();
    R.get_or_init(|| rate(EstimatorKind::TwoPoint, ScheduleMode::Theorem2, 100))
}

fn one_point_rate() -> &'static RateEstimate {
    static R: OnceLock<RateEstimate> = OnceLock::new();
    R.get_or_init(|| rate(EstimatorKind::OnePoint, ScheduleMode::Theorem1, 200))
}

#[test]
fn criterion_01_two_point_rate() {
    let r = two_point_rate();
    report(
        1,
        "two-point rate O(1/t)",
        (-1.3..=-0.7).contains(&r.slope),
        format!("slope {:.4} +- {:.4} over t in {:?}", r.slope, r.stderr_slope, r.window),
    );
}

#[test]
fn criterion_02_one_point_rate() {
    let r = one_point_rate();
    report(
        2,
        "one-point rate O(t^-0.45)",
        (-0.75..=-0.25).contains(&r.slope),
        format!("slope {:.4} +- {:.4} over t in {:?}", r.slope, r.stderr_slope, r.window),
    );
}

#[test]
fn criterion_03_rate_ordering() {
    let (two, one) = (two_point_rate(), one_point_rate());
    report(
        3,
        "two-point faster than one",
        two.slope < one.slope,
        format!("two-point {:.4} vs one-point {:.4}", two.slope, one.slope),
    );
}

#[test]
fn criterion_04_unbiasedness() {
    let g = make_canonical_quadratic();
    let mu = [0.5, 0.5];
    let mut zs = Vec::new();
    for (i, kind) in [EstimatorKind::OnePoint, EstimatorKind::TwoPoint].into_iter().enumerate() {
        let rep = unbiasedness_probe(&g, &mu, 0.1, kind, 1_000_000, RngKey::new(2024, 4, i as u64)).unwrap();
        assert_eq!(rep.reference, g.pseudo_gradient(&mu));
        zs.push(rep.max_abs_z);
    }
    report(
        4,
        "estimator unbiasedness",
        zs.iter().all(|z| *z <= 4.0),
        format!("max |z| one-point {:.3}, two-point {:.3} (limit 4)", zs[0], zs[1]),
    );
}

#[test]
fn criterion_05_variance_scaling() {
    // At (1, 1) both costs equal 1, so the 1/sigma^2 term of the one-point
    // second moment is visible at sigma = 0.2.
    let g = make_canonical_quadratic();
    let mu = [1.0, 1.0];
    let n = 1_000_000;
    let probe = |kind, sigma, it| variance_probe(&g, &mu, sigma, kind, n, RngKey::new(5, 5, it)).unwrap();
    let one = [probe(EstimatorKind::OnePoint, 0.2, 0), probe(EstimatorKind::OnePoint, 0.1, 1)];
    let two = [probe(EstimatorKind::TwoPoint, 0.2, 2), probe(EstimatorKind::TwoPoint, 0.1, 3)];
    let r1: Vec<f64> = (0..2).map(|i| one[1][i] / one[0][i]).collect();
    let r2: Vec<f64> = (0..2).map(|i| two[1][i] / two[0][i]).collect();
    report(
        5,
        "variance scaling",
        r1.iter().all(|r| (2.5..=6.0).contains(r)) && r2.iter().all(|r| (0.5..=2.0).contains(r)),
        format!("one-point ratios {r1:.3?} in [2.5,6]; two-point ratios {r2:.3?} in [0.5,2]"),
    );
}

#[test]
fn criterion_06_escape_probability() {
    let g = make_canonical_quadratic();
    let sets = g.action_sets();
    let sigma = 0.02;
    let clearance = sets.anchor_clearance();
    let fraction = |ratio: f64, it: u64| {
        let rho = ratio * sigma / clearance;
        // lower corner of the shrunk box: the point closest to the boundary
        let corner = sets.shrink(rho).unwrap().project(&[-10.0, -10.0]).unwrap();
        escape_probability_probe(sets, &corner, sigma, rho, 100_000, RngKey::new(6, 6, it)).unwrap()
    };
    let f2 = fraction(2.0, 0);
    let f5 = fraction(5.0, 1);
    report(
        6,
        "escape probability",
        f5 <= 1e-4 && f5 < f2,
        format!("fraction at rho/sigma=2: {f2:.3e}, at 5: {f5:.3e} (limit 1e-4)"),
    );
}

/// Brute-force VI solve for affine maps on a box: try every assignment of
/// coordinates to {lower, upper, free} and keep the one satisfying KKT.
fn kkt_enumerate(b: [[f64; 2]; 2], c: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    let m = |x: [f64; 2]| [b[0][0] * x[0] + b[0][1] * x[1] + c[0], b[1][0] * x[0] + b[1][1] * x[1] + c[1]];
    for s0 in 0..3 {
        for s1 in 0..3 {
            let state = [s0, s1];
            let mut x = [0.0; 2];
            let free: Vec<usize> = (0..2).filter(|&k| state[k] == 2).collect();
            for k in 0..2 {
                if state[k] == 0 {
                    x[k] = lo[k];
                } else if state[k] == 1 {
                    x[k] = hi[k];
                }
            }
            match free.len() {
                1 => {
                    let k = free[0];
                    let o = 1 - k;
                    x[k] = -(b[k][o] * x[o] + c[k]) / b[k][k];
                }
                2 => {
                    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
                    x[0] = (-c[0] * b[1][1] + c[1] * b[0][1]) / det;
                    x[1] = (-c[1] * b[0][0] + c[0] * b[1][0]) / det;
                }
                _ => {}
            }
            let g = m(x);
            let ok = (0..2).all(|k| match state[k] {
                0 => g[k] >= -1e-14,
                1 => g[k] <= 1e-14,
                _ => x[k] >= lo[k] - 1e-14 && x[k] <= hi[k] + 1e-14,
            });
            if ok {
                return x;
            }
        }
    }
    panic!("no KKT point");
}

#[test]
fn criterion_07_vi_solver() {
    let mut errs = Vec::new();
    let canonical = make_canonical_quadratic();
    let r = solve_ne(&canonical, 1e-13).unwrap();
    errs.push(linalg::dist(&r.point, &[1.0 / 3.0, 1.0 / 3.0]));
    let recomputed = fixed_point_residual(
        &|x: &[f64], o: &mut [f64]| canonical.pseudo_gradient_into(x, o),
        canonical.action_sets(),
        r.theta,
        &r.point,
    );
    let residual_gap = (recomputed - r.residual).abs();

    let cournot = make_cournot(2, 3.0, 1.0, &[1.0, 1.0], 2.0).unwrap();
    let rc = solve_ne(&cournot, 1e-13).unwrap();
    errs.push(linalg::dist(&rc.point, &[2.0 / 3.0, 2.0 / 3.0]));

    // Canonical costs on [0.5, 1]^2: the equilibrium sits on the boundary.
    let spec = payoff_nash::games::AffineGameSpec::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[-1.0, -1.0]).unwrap();
    let sets = ProductSet::replicate(ConvexSet::boxed(vec![0.5], vec![1.0]).unwrap(), 2).unwrap();
    let boundary = payoff_nash::games::make_affine_game(spec, sets).unwrap();
    let rb = solve_ne(&boundary, 1e-13).unwrap();
    let oracle = kkt_enumerate([[2.0, 1.0], [1.0, 2.0]], [-1.0, -1.0], [0.5, 0.5], [1.0, 1.0]);
    errs.push(linalg::dist(&rb.point, &oracle));

    // Shrunk canonical box [0.1, 0.9]^2 against the same oracle.
    let ry = solve_regularized_ne(&canonical, 0.2, None, 1e-13, 0).unwrap();
    let oracle = kkt_enumerate([[2.0, 1.0], [1.0, 2.0]], [-1.0, -1.0], [0.1, 0.1], [0.9, 0.9]);
    errs.push(linalg::dist(&ry.point, &oracle));

    report(
        7,
        "VI solver correctness",
        errs.iter().all(|e| *e <= 1e-8) && residual_gap <= 1e-12,
        format!("errors {errs:?} (limit 1e-8), residual recompute gap {residual_gap:.1e}"),
    );
}

#[test]
fn criterion_08_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0, 2.0).unwrap();
    let sets = [
        ConvexSet::boxed(vec![0.0, -1.0, 2.0], vec![1.0, 3.0, 2.5]).unwrap(),
        ConvexSet::ball(vec![0.5, -0.5, 1.0], 1.3).unwrap().with_anchor(vec![0.2, -0.1, 1.2]).unwrap(),
    ];
    let (mut idem, mut nonexp, mut nest, mut lips) = (true, true, true, true);
    for set in &sets {
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
            let px = set.project(&x).unwrap();
            let py = set.project(&y).unwrap();
            idem &= set.project(&px).unwrap() == px;
            nonexp &= linalg::dist(&px, &py) <= linalg::dist(&x, &y) + 1e-12;

            let u: f64 = rand_distr::Uniform::new(0.0, 0.5).unwrap().sample(&mut rng);
            let v: f64 = rand_distr::Uniform::new(0.0, 0.5).unwrap().sample(&mut rng);
            let (lo, hi) = (u.min(v), u.max(v));
            let inner = set.shrink(hi).unwrap();
            nest &= set.shrink(lo).unwrap().contains(&inner.project(&x).unwrap(), 1e-12);

            let c = set.diameter() + set.distance(&x);
            let a = set.shrink(u).unwrap().project(&x).unwrap();
            let b = set.shrink(v).unwrap().project(&x).unwrap();
            lips &= linalg::dist(&a, &b) <= c * (u - v).abs() + 1e-12;
        }
    }
    report(
        8,
        "geometry suite",
        idem && nonexp && nest && lips,
        format!("idempotent {idem}, non-expansive {nonexp}, nested {nest}, shrink-Lipschitz {lips}"),
    );
}

#[test]
fn criterion_09_feasibility() {
    let g = make_canonical_quadratic();
    let sets = g.action_sets();
    let reference = [1.0 / 3.0, 1.0 / 3.0];
    let mut violations = 0usize;
    let mut steps = 0usize;
    for (kind, mode) in [
        (EstimatorKind::OnePoint, ScheduleMode::Theorem1),
        (EstimatorKind::TwoPoint, ScheduleMode::Theorem2),
    ] {
        let s = make_schedule(&ScheduleSpec { mode: Some(mode), ..Default::default() }, g.nu()).unwrap();
        run_observed(&g, &s, kind, 10_000, &reference, 9, 0, &RunOptions::default(), |st| {
            steps += 1;
            let shrunk = sets.shrink(s.rho(st.t - 1)).unwrap();
            if !sets.contains(&st.last_action, 0.0) || !shrunk.contains(&st.mu, 0.0) {
                violations += 1;
            }
        })
        .unwrap();
    }
    report(
        9,
        "feasibility invariant",
        violations == 0 && steps == 20_000,
        format!("{violations} violations over {steps} steps"),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"game":"canonical_quadratic","estimator":"one_point","horizon":3000,"runs":12,"seed":42}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_payoff-nash");
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "4");
    report(
        10,
        "reproducible CSV",
        a == b && a == c && !a.is_empty(),
        format!("{} bytes; repeat identical {}, 1 vs 4 workers identical {}", a.len(), a == b, a == c),
    );
}
