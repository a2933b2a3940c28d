//! Acceptance criteria. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion; exits non-zero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::time::Instant;

use afshape::af::{
    bin_range, build_doppler_diag, build_shift, eval_objective, AfKernel, CodeSequence, RegionSpec,
};
use afshape::cli::{read_code_csv, run_and_export, ExportOptions};
use afshape::linalg::{frobenius_norm, min_eigenvalue, quad_form, CMatrix, CVector, C64};
use afshape::metrics::compare;
use afshape::reformulation::{split_kernel, LoadedSet, ZetaPolicy, DEFAULT_DELTA};
use afshape::solver::{pmli, run, PmliOptions, SolveOutcome, SolverConfig, StopReason};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn reference_region() -> RegionSpec {
    RegionSpec::new(31, [5, 6, 7], [-15, -14, -13, 11, 12, 13, 14]).unwrap()
}

fn reference_config() -> SolverConfig {
    let mut cfg = SolverConfig::new(reference_region());
    cfg.gamma1 = 1000;
    cfg.gamma2 = 500;
    cfg.epsilon = 1e-6;
    cfg.seed = 0;
    cfg
}

fn random_code(rng: &mut ChaCha8Rng, n: usize) -> CodeSequence {
    CodeSequence::from_phases((0..n).map(|_| rng.random::<f64>() * TAU).collect()).unwrap()
}

// Explicit double sum with the cyclic delta [m == n - k], 1-based.
fn brute_af(x: &[C64], k: i64, p: i64) -> C64 {
    let n = x.len() as i64;
    let mut acc = C64::new(0.0, 0.0);
    for a in 1..=n {
        for b in 1..=n {
            if b == (a - k - 1).rem_euclid(n) + 1 {
                let w = C64::from_polar(1.0, -2.0 * PI * (b * p) as f64 / n as f64);
                acc += x[(a - 1) as usize] * x[(b - 1) as usize].conj() * w;
            }
        }
    }
    acc
}

fn c1_oracle_equivalence() -> Verdict {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    for n in [4usize, 8, 16, 32] {
        let (lo, hi) = bin_range(n);
        let kernels: Vec<(i64, i64, CMatrix)> = (1 - n as i64..n as i64)
            .flat_map(|k| (lo..=hi).map(move |p| (k, p)))
            .map(|(k, p)| {
                (
                    k,
                    p,
                    build_doppler_diag(p, n).unwrap() * build_shift(k, n).unwrap(),
                )
            })
            .collect();
        for _ in 0..50 {
            let x = random_code(&mut rng, n);
            let v = x.to_vector();
            let entries = x.entries();
            for (k, p, a) in &kernels {
                let matrix = quad_form(&v, a);
                worst = worst.max((matrix - brute_af(&entries, *k, *p)).norm());
                cells += 1;
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-10 && secs < 10.0,
        format!("200 codes, {cells} cells, max |diff| = {worst:.2e} (tol 1e-10), {secs:.2} s (limit 10 s)"),
    )
}

fn c2_decomposition_identity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = [4usize, 8, 16][rng.random_range(0..3)];
        let k = rng.random_range(1 - n as i64..n as i64);
        let (lo, hi) = bin_range(n);
        let p = rng.random_range(lo..=hi);
        let kernel = AfKernel::new(k, p, n).unwrap();
        let split = split_kernel(&kernel);
        let z = CVector::from_fn(n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let lhs = quad_form(&z, &kernel.matrix).norm_sqr();
        let rhs = quad_form(&z, &split.ar).norm_sqr() + quad_form(&z, &split.ai_j).norm_sqr();
        worst = worst.max((lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE));
    }
    verdict(
        worst <= 1e-10,
        format!("1000 pairs, max rel err = {worst:.2e} (tol 1e-10)"),
    )
}

fn c3_quartic_chain() -> Verdict {
    let region = reference_region();
    let loaded = LoadedSet::build(&region, ZetaPolicy::Exact, DEFAULT_DELTA).unwrap();
    let zn = loaded.zeta * 31.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = random_code(&mut rng, 31);
        let v = x.to_vector();
        let chain: f64 = loaded
            .pairs
            .iter()
            .map(|p| {
                (quad_form(&v, &p.ar_t).re - zn).powi(2) + (quad_form(&v, &p.ai_t).re - zn).powi(2)
            })
            .sum();
        let direct = eval_objective(&x, &region).unwrap();
        worst = worst.max((chain - direct).abs() / direct);
    }
    verdict(
        worst <= 1e-8,
        format!(
            "20 codes, zeta = {:.6}, max rel err = {worst:.2e} (tol 1e-8)",
            loaded.zeta
        ),
    )
}

fn c4_pd_loading() -> Verdict {
    let loaded = LoadedSet::build(&reference_region(), ZetaPolicy::Exact, DEFAULT_DELTA).unwrap();
    let mut min_eig = f64::INFINITY;
    let mut worst_rec = 0.0f64;
    for pair in &loaded.pairs {
        for (m, root) in [(&pair.ar_t, &pair.ar_sqrt), (&pair.ai_t, &pair.ai_sqrt)] {
            min_eig = min_eig.min(min_eigenvalue(m));
            worst_rec = worst_rec.max(frobenius_norm(&(root * root - m)) / frobenius_norm(m));
        }
    }
    verdict(
        min_eig > 0.0 && worst_rec <= 1e-9,
        format!(
            "{} matrices, min eigenvalue = {min_eig:.3e} (> 0), max root rel err = {worst_rec:.2e} (tol 1e-9)",
            2 * loaded.pairs.len()
        ),
    )
}

fn c5_monotonicity(out: &SolveOutcome, secs: f64) -> Verdict {
    let mut inner_worst = 0.0f64;
    for seq in &out.trace.inner {
        for w in seq.windows(2) {
            inner_worst = inner_worst.max((w[0] - w[1]) / w[0].abs());
        }
    }
    let mut outer_worst = 0.0f64;
    for w in out.trace.rows.windows(2) {
        outer_worst =
            outer_worst.max((w[1].m2_objective - w[0].m2_objective) / w[0].m2_objective.abs());
    }
    let complete = out.trace.inner.len() == out.trace.outer_iterations()
        && out.trace.inner.iter().all(|s| s.len() == 501);
    verdict(
        complete && inner_worst <= 1e-9 && outer_worst <= 1e-9 && secs < 300.0,
        format!(
            "{} outer iterations, worst inner decrease = {inner_worst:.2e}, worst M2 increase = {outer_worst:.2e} \
             (slack 1e-9 rel), {secs:.1} s (limit 300 s)",
            out.trace.outer_iterations()
        ),
    )
}

fn c6_suppression(out: &SolveOutcome) -> Verdict {
    let cmp = compare(&out.initial, &out.code, &reference_region()).unwrap();
    let c0 = out.trace.initial_c();
    let c1 = out.trace.final_c();
    let stopped = matches!(
        out.trace.stop,
        StopReason::Tolerance | StopReason::MaxIterations
    );
    verdict(
        cmp.suppression_db >= 10.0 && c1 < 0.1 * c0 && stopped,
        format!(
            "region avg {:.2} dB -> {:.2} dB, suppression {:.2} dB (>= 10), C {c0:.4} -> {c1:.4} \
             (ratio {:.4} < 0.1), stop {:?}",
            cmp.before.region_avg_db,
            cmp.after.region_avg_db,
            cmp.suppression_db,
            c1 / c0,
            out.trace.stop
        ),
    )
}

fn c7_exhaustive_small() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let levels: Vec<f64> = (0..16).map(|i| TAU * i as f64 / 16.0).collect();
    let mut worst = 0.0f64;
    let instances = 20;
    for _ in 0..instances {
        let g = CMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let d = &g * g.adjoint();
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for a in &levels {
            for b in &levels {
                for c in &levels {
                    let xbar = CVector::from_vec(vec![
                        C64::from_polar(1.0, *a),
                        C64::from_polar(1.0, *b),
                        C64::from_polar(1.0, *c),
                        C64::new(1.0, 0.0),
                    ]);
                    let value = quad_form(&xbar, &d).re;
                    if value > best.0 {
                        best = (value, [*a, *b, *c]);
                    }
                }
            }
        }
        let start = CodeSequence::from_phases(best.1.to_vec()).unwrap();
        let out = pmli(
            &d,
            &start,
            &PmliOptions {
                iterations: 100,
                inner_epsilon: None,
                record: true,
            },
        );
        for v in &out.objectives {
            worst = worst.max((best.0 - v) / best.0.abs());
        }
    }
    verdict(
        worst <= 1e-9,
        format!(
            "{instances} instances x 4096 grid points, worst decrease below optimum = {worst:.2e}"
        ),
    )
}

fn c8_c9_export(dir: &Path) -> (Verdict, Verdict) {
    let cfg = reference_config();
    let a = dir.join("a");
    let b = dir.join("b");
    run_and_export(&cfg, &a, ExportOptions::default()).unwrap();
    run_and_export(&cfg, &b, ExportOptions::default()).unwrap();
    let same = |name: &str| fs::read(a.join(name)).unwrap() == fs::read(b.join(name)).unwrap();
    let c8 = verdict(
        same("code.csv") && same("trace.csv"),
        format!(
            "code.csv identical: {}, trace.csv identical: {}",
            same("code.csv"),
            same("trace.csv")
        ),
    );

    let rows = read_code_csv(&a.join("code.csv")).unwrap();
    let mut worst = 0.0f64;
    let mut phase_worst = 0.0f64;
    for row in &rows {
        worst = worst.max((row.re.hypot(row.im) - 1.0).abs());
        let z = C64::from_polar(1.0, row.phase_rad);
        phase_worst = phase_worst.max((z - C64::new(row.re, row.im)).norm());
    }
    let c9 = verdict(
        rows.len() == 31 && worst <= 1e-12 && phase_worst <= 1e-12,
        format!("{} entries, max ||x_n| - 1| = {worst:.2e}, phase/entry mismatch = {phase_worst:.2e} (tol 1e-12)", rows.len()),
    );
    (c8, c9)
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "oracle equivalence", c1_oracle_equivalence()),
        (2, "decomposition identity", c2_decomposition_identity()),
        (3, "quartic/quadratic chain", c3_quartic_chain()),
        (4, "positive-definite loading", c4_pd_loading()),
    ];

    let mut cfg = reference_config();
    cfg.record_inner = true;
    let clock = Instant::now();
    let out = run(&cfg).expect("reference run");
    let secs = clock.elapsed().as_secs_f64();
    results.push((5, "monotonicity", c5_monotonicity(&out, secs)));
    results.push((6, "suppression", c6_suppression(&out)));
    results.push((7, "small-instance exhaustive check", c7_exhaustive_small()));

    let dir = tempfile::tempdir().unwrap();
    let (c8, c9) = c8_c9_export(dir.path());
    results.push((8, "determinism", c8));
    results.push((9, "unimodularity after round-trip", c9));

    let mut failed = 0;
    for (id, name, v) in &results {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {name}: {}", v.detail);
        failed += usize::from(!v.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
