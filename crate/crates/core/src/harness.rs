// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo replication driver and evaluation metrics.
//!
//! A replication draws one dataset from a [`SimDesign`] with seed
//! `derive_seed(master, rep)`, runs the detector and records `K̂`, the
//! locations and the number of correctly located changes. A true change is
//! correct when an estimate lies within `⌊√n / 2⌋`; estimates are matched
//! one-to-one, nearest first, ties to the left. CP is the fraction of
//! replications with at least four correct changes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::screening::DetectionMode;
use crate::simgen::{derive_seed, MatrixDesign, SimDesign};

pub const DESK_REPS: usize = 50;
pub const PAPER_REPS: usize = 200;
pub const CP_MIN_CORRECT: usize = 4;
pub const REPORT_SCHEMA: u32 = 1;
/// Labels of the `K̂ - K` histogram bins.
pub const BIN_LABELS: [&str; 7] = ["<=-3", "-2", "-1", "0", "1", "2", ">=3"];

/// `⌊√n / 2⌋`.
pub fn cp_tolerance(n: usize) -> usize {
    ((n as f64).sqrt() / 2.0).floor() as usize
}

/// Number of true change points matched by an estimate within `⌊√n / 2⌋`.
pub fn cp_correct(estimates: &[usize], truth: &[usize], n: usize) -> usize {
    let tol = cp_tolerance(n);
    let mut used = vec![false; estimates.len()];
    let mut correct = 0;
    for &z in truth {
        let best = estimates
            .iter()
            .enumerate()
            .filter(|&(j, &e)| !used[j] && e.abs_diff(z) <= tol)
            .min_by_key(|&(_, &e)| (e.abs_diff(z), e));
        if let Some((j, _)) = best {
            used[j] = true;
            correct += 1;
        }
    }
    correct
}

/// Fraction of replications with at least four correct changes.
pub fn cp_metric(correct_per_rep: &[usize]) -> f64 {
    if correct_per_rep.is_empty() {
        return 0.0;
    }
    let hits = correct_per_rep.iter().filter(|&&c| c >= CP_MIN_CORRECT).count();
    hits as f64 / correct_per_rep.len() as f64
}

/// Histogram bin of a `K̂ - K` difference.
pub fn bin_of(diff: i64) -> usize {
    (diff.clamp(-3, 3) + 3) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub k_true: usize,
    pub k_hat: Option<usize>,
    pub locations: Vec<usize>,
    pub correct: usize,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub micros: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub label: String,
    pub procedure: String,
    pub master_seed: u64,
    /// Successful replications.
    pub reps: usize,
    pub failures: usize,
    pub k_true: usize,
    pub mean_khat: f64,
    pub mse: f64,
    pub cp: f64,
    pub histogram: [usize; 7],
    /// Exact distribution of `K̂ - K`.
    pub differences: BTreeMap<i64, usize>,
    pub records: Vec<RepRecord>,
}

impl RunReport {
    fn from_records(label: String, procedure: String, master_seed: u64, k_true: usize, records: Vec<RepRecord>) -> Self {
        let mut histogram = [0usize; 7];
        let mut differences = BTreeMap::new();
        let (mut sum, mut sum_sq, mut ok) = (0i64, 0i64, 0usize);
        let mut correct = Vec::new();
        for r in &records {
            if let Some(k) = r.k_hat {
                let d = k as i64 - r.k_true as i64;
                histogram[bin_of(d)] += 1;
                *differences.entry(d).or_insert(0) += 1;
                sum += k as i64;
                sum_sq += d * d;
                ok += 1;
                correct.push(r.correct);
            }
        }
        let denom = ok.max(1) as f64;
        Self {
            schema: REPORT_SCHEMA,
            label,
            procedure,
            master_seed,
            reps: ok,
            failures: records.len() - ok,
            k_true,
            mean_khat: sum as f64 / denom,
            mse: sum_sq as f64 / denom,
            cp: cp_metric(&correct),
            histogram,
            differences,
            records,
        }
    }

    /// Fraction of successful replications with `K̂ = K`.
    pub fn exact_fraction(&self) -> f64 {
        self.histogram[3] as f64 / self.reps.max(1) as f64
    }

    /// MSE recomputed from the stored `K̂ - K` distribution.
    pub fn mse_from_differences(&self) -> f64 {
        let sq: i64 = self.differences.iter().map(|(d, c)| d * d * *c as i64).sum();
        sq as f64 / self.reps.max(1) as f64
    }

    /// Copy with per-replication timings removed.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.records.iter_mut().for_each(|rec| rec.micros = None);
        r
    }

    /// Summary line followed by one line per replication.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: &'static str,
            schema: u32,
            label: &'a str,
            procedure: &'a str,
            master_seed: u64,
            reps: usize,
            failures: usize,
            k_true: usize,
            mean_khat: f64,
            mse: f64,
            cp: f64,
            histogram: &'a [usize; 7],
        }
        #[derive(Serialize)]
        struct Line<'a> {
            kind: &'static str,
            #[serde(flatten)]
            rec: &'a RepRecord,
        }
        let mut out = serde_json::to_string(&Summary {
            kind: "summary",
            schema: self.schema,
            label: &self.label,
            procedure: &self.procedure,
            master_seed: self.master_seed,
            reps: self.reps,
            failures: self.failures,
            k_true: self.k_true,
            mean_khat: self.mean_khat,
            mse: self.mse,
            cp: self.cp,
            histogram: &self.histogram,
        })
        .expect("summary serializes");
        out.push('\n');
        for rec in &self.records {
            out.push_str(&serde_json::to_string(&Line { kind: "rep", rec }).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Aligned text table in the layout of the paper's tables.
pub fn format_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let label_w = reports.iter().map(|r| r.label.len()).max().unwrap_or(8).max(8);
    let _ = write!(out, "{:<label_w$}  {:<9} {:>7} {:>7} {:>6}", "Scenario", "Procedure", "Mean", "MSE", "CP");
    for b in BIN_LABELS {
        let _ = write!(out, " {b:>5}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{:<label_w$}  {:<9} {:>7.3} {:>7.3} {:>6.3}",
            r.label, r.procedure, r.mean_khat, r.mse, r.cp
        );
        for c in r.histogram {
            let _ = write!(out, " {c:>5}");
        }
        if r.failures > 0 {
            let _ = write!(out, "  ({} failed)", r.failures);
        }
        out.push('\n');
    }
    out
}

/// Runs `reps` seeded replications of `design` through the detector.
///
/// Replication `r` uses `derive_seed(master_seed, r)`, so the report (minus
/// timings) does not depend on `exec`.
pub fn run_experiment(
    design: &SimDesign,
    config: &DetectorConfig,
    reps: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<RunReport> {
    if reps == 0 {
        return Err(Error::argument("need at least one replication"));
    }
    let records = exec.map(reps, |rep| {
        let seed = derive_seed(master_seed, rep as u64);
        let start = Instant::now();
        let outcome = design
            .generate(seed)
            .and_then(|(seq, spec)| detect(&seq, config).map(|d| (d, spec)));
        let micros = Some(start.elapsed().as_micros() as u64);
        match outcome {
            Ok((d, spec)) => RepRecord {
                rep,
                seed,
                k_true: spec.k(),
                k_hat: Some(d.k_hat),
                correct: cp_correct(&d.locations, &spec.changepoints, spec.n),
                locations: d.locations,
                error: None,
                micros,
            },
            Err(e) => RepRecord {
                rep,
                seed,
                k_true: design.k_true(),
                k_hat: None,
                locations: Vec::new(),
                correct: 0,
                error: Some(e.to_string()),
                micros,
            },
        }
    });
    let procedure = match config.mode {
        DetectionMode::Sfd => "SFD",
        DetectionMode::Msfd => "MSFD",
    };
    Ok(RunReport::from_records(
        design.label(),
        procedure.to_string(),
        master_seed,
        design.k_true(),
        records,
    ))
}

/// A named table row: design, detector and the published summary.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub design: SimDesign,
    pub config: DetectorConfig,
    pub published_mean: f64,
    pub published_mse: f64,
    pub published_cp: f64,
}

/// The dense order-1 and row-correlated order-2 rows reported for the two statistics.
pub fn paper_scenarios() -> Vec<Scenario> {
    let sfd = DetectorConfig::sfd;
    let msfd = || DetectorConfig::msfd(None);
    let dense = |p, signal| SimDesign::Dense { p, signal };
    let order2 = |p1, layout| SimDesign::Order2 {
        p1,
        p2: match layout {
            MatrixDesign::Symmetric => p1,
            MatrixDesign::Asymmetric => 16 * p1,
        },
        layout,
        correlated_rows: true,
    };
    let row = |name, design, config, m, e, c| Scenario {
        name,
        design,
        config,
        published_mean: m,
        published_mse: e,
        published_cp: c,
    };
    use MatrixDesign::*;
    vec![
        row("dense-p50-s0.4", dense(50, 0.4), sfd(), 8.075, 0.175, 1.0),
        row("dense-p100-s0.4", dense(100, 0.4), sfd(), 8.075, 0.075, 1.0),
        row("dense-p2000-s0.4", dense(2000, 0.4), sfd(), 8.0, 0.0, 1.0),
        row("dense-p50-s0.2", dense(50, 0.2), sfd(), 7.1, 1.8, 0.925),
        row("dense-p100-s0.2", dense(100, 0.2), sfd(), 7.95, 0.4, 0.975),
        row("dense-p2000-s0.2", dense(2000, 0.2), sfd(), 7.875, 0.125, 1.0),
        row("sym-p10-msfd", order2(10, Symmetric), msfd(), 3.205, 24.805, 0.23),
        row("sym-p10-sfd", order2(10, Symmetric), sfd(), 8.0, 0.43, 1.0),
        row("sym-p30-msfd", order2(30, Symmetric), msfd(), 8.02, 0.38, 1.0),
        row("sym-p30-sfd", order2(30, Symmetric), sfd(), 8.005, 0.005, 1.0),
        row("sym-p50-msfd", order2(50, Symmetric), msfd(), 8.295, 0.515, 1.0),
        row("sym-p50-sfd", order2(50, Symmetric), sfd(), 8.0, 0.0, 1.0),
        row("asym-p10-msfd", order2(10, Asymmetric), msfd(), 7.365, 1.825, 0.765),
        row("asym-p10-sfd", order2(10, Asymmetric), sfd(), 5.595, 7.485, 0.92),
        row("asym-p12-msfd", order2(12, Asymmetric), msfd(), 7.96, 0.9, 0.925),
        row("asym-p12-sfd", order2(12, Asymmetric), sfd(), 7.01, 1.93, 0.995),
    ]
}

pub fn scenario(name: &str) -> Option<Scenario> {
    paper_scenarios().into_iter().find(|s| s.name == name)
}
