// SPDX-License-Identifier: MIT OR Apache-2.0

//! `tcpd`: detect, simulate, benchmark and plot change points in tensor sequences.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tcpd_core::confidence::{ci_all, CiOptions};
use tcpd_core::harness::{format_table, paper_scenarios, run_experiment, scenario, DESK_REPS, PAPER_REPS};
use tcpd_core::io::{read_seq, resolve_config_path, write_seq, ConfigFile};
use tcpd_core::plot::{render_svg, PlotOptions};
use tcpd_core::screening::RidgeScale;
use tcpd_core::simgen::{MatrixDesign, SimDesign, SimSpec};
use tcpd_core::{analyze, DetectionMode, DetectorConfig, Error, Execution, IntervalStatus};

const OUTPUT_SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "tcpd", version, about = "Multiple change-point detection in tensor sequences")]
struct Cli {
    /// Cap on worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every kernel sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the number and locations of change points in a sequence file.
    Detect(DetectArgs),
    /// Draw a synthetic sequence and write it with a JSON sidecar of the truth.
    Simulate(SimulateArgs),
    /// Run seeded replications and print a summary table.
    Bench(BenchArgs),
    /// Render the ratio curve and detections as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Clone, Default)]
struct Tuning {
    /// key = value config file; falls back to $TCPD_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Statistic: sfd (all elements) or msfd (slice-wise minimum).
    #[arg(long)]
    mode: Option<DetectionMode>,
    /// Structural mode for msfd (1-based; default last).
    #[arg(long)]
    structural_mode: Option<usize>,
    /// Window length; "auto" uses floor(2 n^(3/4) / 9).
    #[arg(long)]
    alpha: Option<String>,
    /// Detection threshold on the ratio (default 0.8 sfd, 0.4 msfd).
    #[arg(long)]
    tau: Option<f64>,
    /// Uniform noise rate of the moving sums.
    #[arg(long)]
    eps: Option<f64>,
    /// Ridge growth exponent (must exceed 1/2).
    #[arg(long)]
    nu: Option<f64>,
    /// Screening threshold multiplier.
    #[arg(long)]
    s: Option<f64>,
    /// Ridge multiplier.
    #[arg(long)]
    s1: Option<f64>,
    /// Ridge growth: log ((log n)^nu) or power (n^nu).
    #[arg(long)]
    ridge_scale: Option<RidgeScale>,
}

impl Tuning {
    fn resolve(&self) -> Result<ConfigFile, Error> {
        let mut cfg = match resolve_config_path(self.config.as_deref()) {
            Some(path) => ConfigFile::load(&path).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read config {}: {io}", path.display())),
                other => other,
            })?,
            None => ConfigFile::default(),
        };
        let d = &mut cfg.detector;
        if let Some(m) = self.mode {
            d.mode = m;
        }
        if let Some(m) = self.structural_mode {
            d.structural_mode = Some(m);
        }
        match self.alpha.as_deref() {
            None => {}
            Some(a) if a.eq_ignore_ascii_case("auto") => d.overrides.alpha = None,
            Some(a) => {
                d.overrides.alpha = Some(a.parse().map_err(|_| Error::Config(format!("invalid alpha '{a}'")))?)
            }
        }
        let o = &mut d.overrides;
        o.eps = self.eps.or(o.eps);
        o.nu = self.nu.or(o.nu);
        o.s = self.s.or(o.s);
        o.s1 = self.s1.or(o.s1);
        o.ridge_scale = self.ridge_scale.or(o.ridge_scale);
        d.tau = self.tau.or(d.tau);
        Ok(cfg)
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Sequence file (.tcpd binary or .csv).
    input: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Also compute confidence intervals.
    #[arg(long)]
    ci: bool,
    /// Confidence level of the intervals (default 0.95).
    #[arg(long)]
    ci_level: Option<f64>,
    /// Brownian paths for the interval quantiles.
    #[arg(long)]
    ci_paths: Option<usize>,
    /// Seed for the interval simulation.
    #[arg(long)]
    seed: Option<u64>,
    /// Sampling rate; locations are also reported as time (index / rate).
    #[arg(long)]
    rate: Option<f64>,
    /// Machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    Dense,
    Sparse,
    Order2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Symmetric,
    Asymmetric,
}

#[derive(Args)]
struct DesignArgs {
    /// JSON file holding a design or a full SimSpec.
    #[arg(long, conflicts_with = "design")]
    spec: Option<PathBuf>,
    /// Built-in design family.
    #[arg(long, value_enum)]
    design: Option<DesignKind>,
    /// Dimension of vector designs.
    #[arg(long, default_value_t = 50)]
    p: usize,
    /// Mean shift per changed coordinate.
    #[arg(long, default_value_t = 0.4)]
    signal: f64,
    /// Fraction of changed coordinates (sparse design).
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Row count of matrix designs.
    #[arg(long, default_value_t = 10)]
    p1: usize,
    /// Matrix shape: p1 x p1 or p1 x 16 p1.
    #[arg(long, value_enum, default_value_t = Layout::Symmetric)]
    layout: Layout,
    /// Independent rows instead of AR(1)-correlated rows (order-2 designs).
    #[arg(long)]
    independent_rows: bool,
}

impl DesignArgs {
    fn design(&self) -> Result<Option<SimDesign>, Error> {
        if let Some(path) = &self.spec {
            return load_design(path).map(Some);
        }
        Ok(self.design.map(|kind| match kind {
            DesignKind::Dense => SimDesign::Dense { p: self.p, signal: self.signal },
            DesignKind::Sparse => SimDesign::Sparse {
                p: self.p,
                signal: self.signal,
                fraction: self.fraction,
            },
            DesignKind::Order2 => {
                let layout = match self.layout {
                    Layout::Symmetric => MatrixDesign::Symmetric,
                    Layout::Asymmetric => MatrixDesign::Asymmetric,
                };
                let p2 = match layout {
                    MatrixDesign::Symmetric => self.p1,
                    MatrixDesign::Asymmetric => 16 * self.p1,
                };
                SimDesign::Order2 {
                    p1: self.p1,
                    p2,
                    layout,
                    correlated_rows: !self.independent_rows,
                }
            }
        }))
    }
}

fn load_design(path: &Path) -> Result<SimDesign, Error> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(spec) = serde_json::from_str::<SimSpec>(&text) {
        return Ok(SimDesign::Custom { spec });
    }
    serde_json::from_str::<SimDesign>(&text)
        .map_err(|e| Error::Config(format!("{}: neither a design nor a SimSpec ({e})", path.display())))
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Seed of the noise draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output sequence file (.tcpd or .csv); the truth goes to <out>.spec.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Named scenario (repeatable); see --list.
    #[arg(long)]
    scenario: Vec<String>,
    /// Every named scenario.
    #[arg(long)]
    all: bool,
    /// Print the scenario names and exit.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    tuning: Tuning,
    /// Replications per scenario (default 50).
    #[arg(long)]
    reps: Option<usize>,
    /// Use the published replication count (200).
    #[arg(long)]
    paper: bool,
    /// Master seed; replication seeds derive from it.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Write the per-replication record stream here.
    #[arg(long)]
    jsonl: Option<PathBuf>,
    /// Print the record stream on stdout instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Sequence file (.tcpd binary or .csv).
    input: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Upper limit of the ratio axis.
    #[arg(long, default_value_t = 3.0)]
    cap: f64,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes to stdout, treating a closed pipe as normal termination.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = tcpd_core::exec::set_threads(t) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = match &cli.command {
        Command::Detect(a) => cmd_detect(a, exec),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a, exec),
        Command::Plot(a) => cmd_plot(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

#[derive(Serialize)]
struct CiLine {
    k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    interval: Option<tcpd_core::CIResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct DetectOutput<'a> {
    schema: u32,
    input: String,
    n: usize,
    dims: &'a [usize],
    tau: f64,
    detection: &'a tcpd_core::Detection,
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    intervals_ci: Vec<CiLine>,
}

fn status_text(s: IntervalStatus) -> &'static str {
    match s {
        IntervalStatus::Kept => "kept",
        IntervalStatus::PrunedSpacingProbe => "pruned: next anchor within 3a/2 and T(M - a/2) >= 1",
        IntervalStatus::PrunedSpacing => "pruned: next anchor within 3a/2",
        IntervalStatus::EmptyRange => "dropped: empty search range",
        IntervalStatus::DuplicateLocation => "dropped: location not after previous",
    }
}

fn cmd_detect(args: &DetectArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = args.tuning.resolve()?;
    let seq = read_seq(&args.input)?;
    let mut detector: DetectorConfig = cfg.detector.clone();
    detector.execution = exec;
    let analysis = analyze(&seq, &detector)?;
    let det = &analysis.detection;
    if let Some(rate) = args.rate {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Failure::Invalid(format!("rate must be positive, got {rate}")));
        }
    }
    let times = args.rate.map(|r| det.locations.iter().map(|&z| z as f64 / r).collect::<Vec<_>>());
    let mut cis = Vec::new();
    if args.ci {
        let defaults = CiOptions::default();
        let options = CiOptions {
            level: args.ci_level.or(cfg.ci_level).unwrap_or(defaults.level),
            paths: args.ci_paths.or(cfg.ci_paths).unwrap_or(defaults.paths),
            seed: args.seed.or(cfg.seed).unwrap_or(defaults.seed),
            execution: exec,
            ..defaults
        };
        for (i, r) in ci_all(&seq, det, &options)?.into_iter().enumerate() {
            cis.push(match r {
                Ok(ci) => CiLine { k: i + 1, interval: Some(ci), error: None },
                Err(e) => CiLine { k: i + 1, interval: None, error: Some(e.to_string()) },
            });
        }
    }
    if args.json {
        let out = DetectOutput {
            schema: OUTPUT_SCHEMA,
            input: args.input.display().to_string(),
            n: seq.n(),
            dims: seq.shape().dims(),
            tau: analysis.tau,
            detection: det,
            times,
            intervals_ci: cis,
        };
        emit(&(serde_json::to_string_pretty(&out).expect("output serializes") + "\n"));
        return Ok(());
    }
    let mut text = String::new();
    let _ = writeln!(
        text,
        "n = {}, dims = {:?}, mode = {}, alpha = {}, tau = {}",
        seq.n(),
        seq.shape().dims(),
        detector.mode,
        det.alpha,
        analysis.tau
    );
    let _ = writeln!(text, "estimated changes: {}", det.k_hat);
    for (i, z) in det.locations.iter().enumerate() {
        let _ = write!(text, "  {:>3}  {:>8}", i + 1, z);
        if let Some(t) = &times {
            let _ = write!(text, "  t = {:.4}", t[i]);
        }
        if let Some(line) = cis.get(i) {
            match (&line.interval, &line.error) {
                (Some(ci), _) => {
                    let _ = write!(text, "  {:.0}% CI [{}, {}]", ci.level * 100.0, ci.lower, ci.upper);
                }
                (None, Some(e)) => {
                    let _ = write!(text, "  CI unavailable ({e})");
                }
                _ => {}
            }
        }
        text.push('\n');
    }
    if !det.intervals.is_empty() {
        let _ = writeln!(text, "candidate intervals:");
        for c in &det.intervals {
            let _ = write!(text, "  ({:>6}, {:>6})  {}", c.start, c.anchor, status_text(c.status));
            if c.edge {
                text.push_str(" [edge]");
            }
            text.push('\n');
        }
    }
    if det.overlapping_intervals > 0 {
        let _ = writeln!(text, "note: {} overlapping candidate pairs", det.overlapping_intervals);
    }
    emit(&text);
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".spec.json");
    PathBuf::from(s)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let design = args
        .design
        .design()?
        .ok_or_else(|| Failure::Invalid("give --design or --spec".into()))?;
    let (seq, spec) = design.generate(args.seed)?;
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    write_seq(&args.out, &seq).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", args.out.display())))?;
    let sidecar = sidecar_path(&args.out);
    write_output(&sidecar, &serde_json::to_string_pretty(&spec).expect("spec serializes"))?;
    println!(
        "wrote {} (n = {}, dims = {:?}, K = {}) and {}",
        args.out.display(),
        seq.n(),
        seq.shape().dims(),
        spec.k(),
        sidecar.display()
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs, exec: Execution) -> Result<(), Failure> {
    if args.list {
        let list: String = paper_scenarios()
            .iter()
            .map(|s| format!("{:<18} {}\n", s.name, s.design.label()))
            .collect();
        emit(&list);
        return Ok(());
    }
    let reps = match (args.reps, args.paper) {
        (Some(r), _) => r,
        (None, true) => PAPER_REPS,
        (None, false) => DESK_REPS,
    };
    let tuning_given = resolve_config_path(args.tuning.config.as_deref()).is_some() || args.tuning.mode.is_some();
    let mut jobs: Vec<(SimDesign, DetectorConfig)> = Vec::new();
    if args.all {
        jobs.extend(paper_scenarios().into_iter().map(|s| (s.design, s.config)));
    }
    for name in &args.scenario {
        let s = scenario(name).ok_or_else(|| Failure::Invalid(format!("unknown scenario '{name}' (see --list)")))?;
        jobs.push((s.design, s.config));
    }
    if let Some(design) = args.design.design()? {
        jobs.push((design, DetectorConfig::sfd()));
    }
    if jobs.is_empty() {
        return Err(Failure::Invalid("nothing to run: give --scenario, --all, --design or --spec".into()));
    }
    let cfg = args.tuning.resolve()?;
    let mut reports = Vec::new();
    for (design, mut config) in jobs {
        if tuning_given {
            config = cfg.detector.clone();
        } else {
            let mode = config.mode;
            config = DetectorConfig { mode, ..cfg.detector.clone() };
        }
        config.execution = Execution::Sequential;
        reports.push(run_experiment(&design, &config, reps, args.seed, exec)?);
    }
    let stream: String = reports.iter().map(|r| r.to_jsonl()).collect();
    if let Some(path) = &args.jsonl {
        write_output(path, &stream)?;
    }
    if args.json {
        emit(&stream);
    } else {
        emit(&format_table(&reports));
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs, exec: Execution) -> Result<(), Failure> {
    let cfg = args.tuning.resolve()?;
    let seq = read_seq(&args.input)?;
    let mut detector = cfg.detector;
    detector.execution = exec;
    let analysis = analyze(&seq, &detector)?;
    let svg = render_svg(
        &analysis,
        &PlotOptions {
            t_cap: args.cap,
            ..PlotOptions::default()
        },
    );
    write_output(&args.out, &svg)?;
    println!(
        "wrote {} ({} changes, {} candidate intervals)",
        args.out.display(),
        analysis.detection.k_hat,
        analysis.detection.intervals.len()
    );
    Ok(())
}
