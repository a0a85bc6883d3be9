// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance criteria at desk scale.
//!
//! Prints one PASS/FAIL line per criterion and a summary. The process exits
//! non-zero on failure only when `TCPD_ACCEPTANCE_STRICT` is set. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 7 8 9`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcpd_core::confidence::{ci_with_law, ArgmaxLaw};
use tcpd_core::detector::{find_intervals, locate, prune_sfd};
use tcpd_core::harness::{cp_tolerance, scenario};
use tcpd_core::mosum::{mosum_naive, population_mosum};
use tcpd_core::ridge::population_ratio_series;
use tcpd_core::screening::screening_norm;
use tcpd_core::simgen::{derive_seed, gen_custom, NoiseModel};
use tcpd_core::{
    analyze, derive_params, detect, mosum_field, run_experiment, DetectionMode, DetectorConfig, Execution,
    GridSpec, IntervalStatus, ParamOverrides, RunReport, Shape, SimDesign, SimSpec, TensorSeq,
};

const MASTER_SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn table_row(name: &str, reps: usize) -> RunReport {
    let s = scenario(name).unwrap_or_else(|| panic!("unknown scenario {name}"));
    run_experiment(&s.design, &s.config, reps, MASTER_SEED, Execution::Parallel).expect("experiment runs")
}

fn describe(r: &RunReport) -> String {
    format!(
        "reps {} failures {} mean {:.3} mse {:.3} cp {:.3} exact {:.2} dist {:?}",
        r.reps,
        r.failures,
        r.mean_khat,
        r.mse,
        r.cp,
        r.exact_fraction(),
        r.differences
    )
}

fn c1() -> Outcome {
    let r = table_row("dense-p50-s0.4", 50);
    let pass = r.failures == 0 && (7.7..=8.4).contains(&r.mean_khat) && r.mse <= 0.6 && r.cp >= 0.95;
    outcome(pass, describe(&r))
}

fn c2() -> Outcome {
    let r = table_row("dense-p2000-s0.4", 20);
    outcome(r.failures == 0 && r.exact_fraction() >= 0.95 && r.cp == 1.0, describe(&r))
}

fn c3() -> Outcome {
    let r = table_row("dense-p2000-s0.2", 20);
    outcome(r.failures == 0 && r.cp >= 0.9, describe(&r))
}

fn c4() -> Outcome {
    let r = table_row("sym-p50-sfd", 20);
    outcome(r.failures == 0 && r.exact_fraction() >= 0.95, describe(&r))
}

fn c5() -> Outcome {
    let r = table_row("asym-p12-msfd", 30);
    outcome(
        r.failures == 0 && r.cp >= 0.8 && (7.3..=8.6).contains(&r.mean_khat),
        describe(&r),
    )
}

fn null_spec(p: usize) -> SimSpec {
    SimSpec {
        n: 1800,
        shape: Shape::vector(p).unwrap(),
        changepoints: vec![],
        means: vec![vec![1.0; p]],
        noise: NoiseModel::Iid { sigma: 1.0 },
        seed: 0,
    }
}

fn c6() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for p in [50, 2000] {
        let design = SimDesign::Custom { spec: null_spec(p) };
        let r = run_experiment(&design, &DetectorConfig::sfd(), 50, MASTER_SEED, Execution::Parallel)
            .expect("experiment runs");
        let zero = r.records.iter().filter(|x| x.k_hat == Some(0)).count();
        let frac = zero as f64 / 50.0;
        pass &= frac >= 0.95;
        let max = r.records.iter().filter_map(|x| x.k_hat).max().unwrap_or(0);
        detail.push(format!("p={p}: K=0 in {zero}/50 (max K {max})"));
    }
    outcome(pass, detail.join("; "))
}

fn step_spec(shape: Shape, z: &[usize], jump: f64) -> SimSpec {
    let p = shape.len();
    let means = (0..=z.len())
        .map(|k| (0..p).map(|j| if k % 2 == 1 { jump * (1.0 + (j % 3) as f64) } else { 0.0 }).collect())
        .collect();
    SimSpec {
        n: 1800,
        shape,
        changepoints: z.to_vec(),
        means,
        noise: NoiseModel::Iid { sigma: 0.0 },
        seed: 0,
    }
}

fn c7() -> Outcome {
    let start = Instant::now();
    let cases = [
        (Shape::vector(1).unwrap(), vec![900]),
        (Shape::vector(10).unwrap(), vec![600]),
        (Shape::vector(50).unwrap(), vec![400, 900, 1400]),
        (Shape::new(vec![3, 4]).unwrap(), vec![500, 1200]),
        (Shape::new(vec![2, 2, 2]).unwrap(), vec![350, 700, 1050, 1400]),
    ];
    let mut failures = Vec::new();
    let mut checked = 0;
    for (shape, z) in cases {
        let dims = shape.dims().to_vec();
        let seq = gen_custom(&step_spec(shape, &z, 20.0)).unwrap();
        let a = analyze(&seq, &DetectorConfig::sfd()).unwrap();
        let alpha = a.series.alpha;
        let t = |i: usize| a.series.at(i);
        let near = |i: usize| z.iter().any(|&zk| i + 3 * alpha >= zk && i <= zk);
        for i in 1..=a.series.len() {
            if !near(i) && (t(i) - 1.0).abs() > 1e-9 {
                failures.push(format!("{dims:?}: T({i}) = {}", t(i)));
                break;
            }
        }
        if a.detection.k_hat != z.len() {
            failures.push(format!("{dims:?}: K = {} for {} changes", a.detection.k_hat, z.len()));
            continue;
        }
        for (&zk, &est) in z.iter().zip(&a.detection.locations) {
            checked += 1;
            let dip = ((zk - 3 * alpha)..=(zk - alpha)).any(|i| t(i) < a.tau);
            let spike = ((zk - 2 * alpha + 2)..=(zk - alpha)).any(|i| t(i) > 10.0);
            if !dip || !spike || est.abs_diff(zk) > 1 {
                failures.push(format!("{dims:?} z={zk}: dip {dip} spike {spike} estimate {est}"));
            }
        }
    }
    let detail = format!(
        "{checked} changes over 5 noiseless layouts in {:.2?}{}",
        start.elapsed(),
        if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
    );
    outcome(failures.is_empty(), detail)
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut max_err = 0.0f64;
    let mut norm_mismatch = 0;
    let mut rows = 0;
    for _ in 0..200 {
        let alpha = rng.random_range(1..=25);
        let n = 3 * alpha + rng.random_range(0..120);
        let dims: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=4)).collect();
        let shape = Shape::new(dims).unwrap();
        let scale = 10f64.powi(rng.random_range(-2..=2));
        let data: Vec<f64> = (0..n * shape.len()).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
        let seq = TensorSeq::new(shape, data).unwrap();
        let field = mosum_field(&seq, alpha).unwrap();
        let l = rng.random::<f64>() * scale * scale * 0.3;
        for i in field.range() {
            let naive = mosum_naive(&seq, alpha, i).unwrap();
            for (a, b) in field.row(i).iter().zip(&naive) {
                max_err = max_err.max((a - b).abs());
            }
            let (mut sum, mut count) = (0.0f64, 0usize);
            for v in field.row(i) {
                if v * v > l {
                    sum += v * v;
                    count += 1;
                }
            }
            let direct = sum / (count as f64 + 1.0 / n as f64);
            rows += 1;
            if screening_norm(field.row(i), l, n) != direct {
                norm_mismatch += 1;
            }
        }
    }
    outcome(
        max_err <= 1e-12 && norm_mismatch == 0,
        format!("200 configurations, {rows} rows: max MOSUM error {max_err:.2e}, screening mismatches {norm_mismatch}"),
    )
}

fn c9() -> Outcome {
    let n = 1800;
    let params = derive_params(n, DetectionMode::Sfd, &ParamOverrides::default()).unwrap();
    let alpha = params.alpha;
    let mut ok = 0;
    let mut notes = Vec::new();
    for inst in 0..20usize {
        let f = inst * (alpha / 2) / 19;
        let p = 1 + 7 * (inst % 5);
        let jump = 0.3 + 0.05 * inst as f64;
        let first = 300 + 13 * inst;
        let z = vec![first, first + 2 * alpha + f, 1500];
        let spec = step_spec(Shape::vector(p).unwrap(), &z, jump);
        let field = population_mosum(&spec.means, &spec.changepoints, n, alpha).unwrap();
        let series = population_ratio_series(&field, &params).unwrap();
        let raw = find_intervals(&series, 0.8).unwrap();
        let pruned = prune_sfd(&raw, &series, alpha);
        let det = locate(&pruned, &series, alpha);
        let spurious = raw.len() == z.len() + 1;
        let removed = pruned.iter().filter(|c| c.status == IntervalStatus::PrunedSpacingProbe).count() == 1;
        let located = det.k_hat == z.len() && det.locations.iter().zip(&z).all(|(e, t)| e.abs_diff(*t) <= 1);
        if spurious && removed && located {
            ok += 1;
        } else {
            notes.push(format!("f={f}: raw {} pruned {removed} found {:?}", raw.len(), det.locations));
        }
    }
    outcome(
        ok == 20,
        format!(
            "{ok}/20 instances with spacing 2a+f (f < a/2) show the extra crossing and recover K{}",
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    )
}

/// `P(argmax_r {W(r) - |r|/2} <= x)` in closed form.
fn argmax_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - argmax_cdf(-x);
    }
    let phi_neg = |y: f64| 0.5 * libm::erfc(y / std::f64::consts::SQRT_2);
    let s = x.sqrt();
    1.0 + (x / (2.0 * std::f64::consts::PI)).sqrt() * (-x / 8.0).exp() - 0.5 * (x + 5.0) * phi_neg(s / 2.0)
        + 1.5 * x.exp() * phi_neg(1.5 * s)
}

/// Exact quantile of the closed-form law by bisection.
fn argmax_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-200.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if argmax_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Covered true changes, total true changes and those without a usable interval.
fn coverage(p: usize, law: &ArgmaxLaw) -> (usize, usize, usize) {
    let (mut covered, mut total, mut unavailable) = (0, 0, 0);
    for r in 0..50 {
        let (seq, spec) = SimDesign::Dense { p, signal: 0.4 }
            .generate(derive_seed(MASTER_SEED ^ 0xc1, r))
            .unwrap();
        let det = detect(&seq, &DetectorConfig::sfd()).unwrap();
        let threshold = det.settings.as_ref().unwrap().params.threshold().sqrt();
        let tol = cp_tolerance(spec.n);
        for &z in &spec.changepoints {
            total += 1;
            let k = det
                .locations
                .iter()
                .enumerate()
                .filter(|(_, e)| e.abs_diff(z) <= tol)
                .min_by_key(|(_, e)| e.abs_diff(z))
                .map(|(k, _)| k + 1);
            match k.map(|k| ci_with_law(&seq, &det, k, 0.95, law, threshold)) {
                Some(Ok(ci)) if ci.contains(z) => covered += 1,
                Some(Ok(_)) => {}
                _ => unavailable += 1,
            }
        }
    }
    (covered, total, unavailable)
}

fn c10() -> Outcome {
    let law = ArgmaxLaw::simulate(200_000, GridSpec::default(), MASTER_SEED, Execution::Parallel).unwrap();
    let (covered, total, unavailable) = coverage(50, &law);
    let rate = covered as f64 / total as f64;
    let conditional = covered as f64 / (total - unavailable).max(1) as f64;
    let (ref_covered, ref_total, _) = coverage(2000, &law);

    let half = ArgmaxLaw::simulate(500_000, GridSpec::default(), MASTER_SEED + 1, Execution::Parallel).unwrap();
    let full = ArgmaxLaw::simulate(1_000_000, GridSpec::default(), MASTER_SEED + 1, Execution::Parallel).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let (lo_h, hi_h) = half.quantiles(0.95).unwrap();
    let (lo_f, hi_f) = full.quantiles(0.95).unwrap();
    let drift = rel(lo_h, lo_f).max(rel(hi_h, hi_f));
    let median = full.quantile(0.5);
    let oracle_gap = [0.9, 0.95, 0.975, 0.99]
        .iter()
        .map(|&p| rel(full.quantile(p), argmax_quantile(p)))
        .fold(0.0, f64::max);

    let pass = rate >= 0.90 && drift < 0.01 && median.abs() <= full.grid.step && oracle_gap <= 0.02;
    outcome(
        pass,
        format!(
            "coverage {covered}/{total} = {rate:.3} ({unavailable} without a usable interval, {conditional:.3} of the rest; \
             p=2000 for reference {ref_covered}/{ref_total}); 95% quantiles ({lo_f:.2}, {hi_f:.2}) vs closed form {:.3}, \
             drift {:.2}% under doubling, median {median}, largest tail gap to closed form {:.2}%",
            argmax_quantile(0.975),
            100.0 * drift,
            100.0 * oracle_gap
        ),
    )
}

type Criterion = (u8, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "dense p=50 signal 0.4 SFD, 50 reps", c1),
        (2, "dense p=2000 signal 0.4 SFD, 20 reps", c2),
        (3, "dense p=2000 signal 0.2 SFD, 20 reps", c3),
        (4, "symmetric 50x50 SFD, 20 reps", c4),
        (5, "asymmetric 12x192 MSFD, 30 reps", c5),
        (6, "no-change designs p=50 and p=2000, 50 runs each", c6),
        (7, "noiseless curve structure", c7),
        (8, "sliding MOSUM and screening norm against direct formulas", c8),
        (9, "pruning of closely spaced changes", c9),
        (10, "confidence interval coverage and argmax quantiles", c10),
    ];
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let strict = std::env::var_os("TCPD_ACCEPTANCE_STRICT").is_some();
    let (mut run, mut passed) = (0, 0);
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        run += 1;
        passed += o.pass as usize;
        println!(
            "criterion {id:>2} {}: {name} [{:.1?}]\n    {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed(),
            o.detail
        );
    }
    println!("acceptance: {passed}/{run} criteria passed");
    if strict && passed < run {
        std::process::exit(1);
    }
}
