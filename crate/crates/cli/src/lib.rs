//! Command-line front end for `edgestab`.
//!
//! Exit codes: 0 robustly stable, 1 unstable, 2 degenerate, 3 inconclusive,
//! 64 bad input or usage, 65 internal failure. `oracle` exits 0 when every
//! sample is stable and 1 otherwise.

pub mod report;
pub mod schema;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgestab::edges::{CellChoice, ConfigEnumerator};
use edgestab::family::{FamilyMode, Severity};
use edgestab::oracle::{sample_family, SampleScheme};
use edgestab::stab::{analyze_family_with, analyze_interval_with, DriverOptions, Tolerances};
use edgestab::{MatrixFamily, Region};
use thiserror::Error;

use crate::report::{to_json, AnalysisInput, AnalysisReport, OracleReport};
use crate::schema::{FamilyFile, SchemaError};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_INTERNAL: i32 = 65;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] edgestab::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use edgestab::Error as E;
        match self {
            CliError::Io { .. } | CliError::Schema(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(
                E::ValidationFailure(_)
                | E::RegionNotHurwitz
                | E::InvalidRegion(_)
                | E::TooLarge { .. }
                | E::CountOverflow
                | E::InvalidTolerances(_)
                | E::DimensionMismatch { .. }
                | E::BoundOrderViolation { .. }
                | E::EmptyCoefficients
                | E::NonFiniteCoefficient,
            ) => EXIT_USAGE,
            CliError::Core(_) | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "edgestab", version, about = "Robust D-stability of polynomial matrix families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide robust stability through the edge configurations
    Analyze(AnalyzeArgs),
    /// Sample the full family and report the worst member
    Oracle(OracleArgs),
    /// Count, and optionally list, the edge configurations
    Enumerate(EnumerateArgs),
    /// Check a family file without analyzing it
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    file: PathBuf,
    /// hurwitz, shifted:SIGMA or disk:RE,IM,R (overrides the file)
    #[arg(long)]
    region: Option<String>,
    /// Initial boundary sample count
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    refine_depth: Option<u32>,
    #[arg(long)]
    box_depth: Option<u32>,
    #[arg(long)]
    zero_margin: Option<f64>,
    #[arg(long)]
    degree_eps: Option<f64>,
    /// Worker threads (default: all cores); never changes the report
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    report: Option<PathBuf>,
    /// Skip repeated vertices and edges within an entry
    #[arg(long)]
    dedup: bool,
    /// Record wall time in the report (makes reports differ between runs)
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Random,
    Grid,
}

#[derive(Args, Debug)]
struct OracleArgs {
    file: PathBuf,
    #[arg(long)]
    region: Option<String>,
    #[arg(long, value_enum, default_value = "grid")]
    scheme: SchemeArg,
    /// Lattice resolution for the grid scheme; 1 gives every vertex matrix
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    file: PathBuf,
    /// Print only the number of configurations
    #[arg(long)]
    count_only: bool,
    /// List at most this many configurations
    #[arg(long)]
    limit: Option<u64>,
    #[arg(long)]
    dedup: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    file: PathBuf,
}

/// Runs the tool and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli.command, out, err)));
    match outcome {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Analyze(a) => analyze(a, out, err),
        Command::Oracle(a) => oracle(a, out, err),
        Command::Enumerate(a) => enumerate(a, out),
        Command::Validate(a) => validate(a, out, err),
    }
}

fn load(path: &Path, region: Option<&str>) -> Result<FamilyFile, CliError> {
    let mut file = schema::read_family(path)?;
    if let Some(r) = region {
        let r = schema::parse_region_flag(r).map_err(CliError::Usage)?;
        file.family = file.family.with_region(r);
    }
    Ok(file)
}

fn io(e: std::io::Error) -> CliError {
    CliError::Internal(format!("write failed: {e}"))
}

fn emit(text: &str, dest: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match dest {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io { path: p.display().to_string(), source: e }),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

/// File block over defaults, flags over both.
fn resolve_tolerances(file: Option<Tolerances>, a: &AnalyzeArgs) -> Result<Tolerances, CliError> {
    let mut t = file.unwrap_or_default();
    if let Some(v) = a.grid {
        t.boundary_grid = v;
    }
    if let Some(v) = a.refine_depth {
        t.refine_depth = v;
    }
    if let Some(v) = a.box_depth {
        t.box_depth = v;
    }
    if let Some(v) = a.zero_margin {
        t.zero_margin = v;
    }
    if let Some(v) = a.degree_eps {
        t.degree_eps = v;
    }
    t.validate()?;
    Ok(t)
}

fn check_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    match jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        _ => Ok(()),
    }
}

/// Runs the driver matching the family's mode and assembles the report.
pub fn analysis_report(
    family: &MatrixFamily,
    digest: &str,
    tolerances: Tolerances,
    dedup: bool,
    jobs: Option<usize>,
) -> Result<AnalysisReport, CliError> {
    let opts = DriverOptions { tol: tolerances, jobs, dedup };
    let analysis = match family.mode() {
        FamilyMode::Polytope => analyze_family_with(family, &opts)?,
        FamilyMode::Interval => analyze_interval_with(family, &opts)?,
        FamilyMode::Mixed => {
            return Err(CliError::Usage("entries mix polytope and interval cells".into()));
        }
    };
    let en = ConfigEnumerator::with_dedup(family, dedup)?;
    let input = AnalysisInput { family, digest, tolerances, dedup };
    Ok(AnalysisReport::build(&input, analysis, |i| en.get(i)))
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    check_jobs(a.jobs)?;
    let start = Instant::now();
    let file = load(&a.file, a.region.as_deref())?;
    let tol = resolve_tolerances(file.tolerances, &a)?;
    let mut rep = analysis_report(&file.family, &file.digest, tol, a.dedup, a.jobs)?;
    if a.timing {
        rep.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    emit(&to_json(&rep), a.report.as_deref(), out)?;
    if a.report.is_some() {
        writeln!(err, "{}: {}", a.file.display(), rep.verdict.status).map_err(io)?;
    }
    Ok(rep.exit_code())
}

fn oracle(a: OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    check_jobs(a.jobs)?;
    let start = Instant::now();
    let file = load(&a.file, a.region.as_deref())?;
    let scheme = match a.scheme {
        SchemeArg::Random => SampleScheme::Random,
        SchemeArg::Grid if a.level == 0 => return Err(CliError::Usage("--level must be at least 1".into())),
        SchemeArg::Grid => SampleScheme::Grid { level: a.level },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let sample = pool.install(|| sample_family(&file.family, scheme, a.budget, a.seed))?;
    let mut rep = OracleReport::build(&file.family, &file.digest, scheme, a.budget, a.seed, sample);
    if a.timing {
        rep.wall_time_ms = Some(start.elapsed().as_millis() as u64);
    }
    emit(&to_json(&rep), a.report.as_deref(), out)?;
    if a.report.is_some() {
        writeln!(err, "{}: {:?}", a.file.display(), rep.verdict).map_err(io)?;
    }
    Ok(rep.exit_code())
}

fn choice_label(c: &CellChoice) -> String {
    match c {
        CellChoice::Vertex { index, .. } => format!("v{}", index + 1),
        CellChoice::Edge { segment, .. } if segment.is_degenerate() => format!("v{}", segment.ends.0 + 1),
        CellChoice::Edge { segment, .. } => format!("e{}-{}", segment.ends.0 + 1, segment.ends.1 + 1),
    }
}

fn enumerate(a: EnumerateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = schema::read_family(&a.file)?;
    let en = ConfigEnumerator::with_dedup(&file.family, a.dedup)?;
    writeln!(out, "{}", en.len()).map_err(io)?;
    if a.count_only {
        return Ok(0);
    }
    let end = a.limit.map_or(en.len(), |l| l.min(en.len()));
    for cfg in en.range(0, end) {
        let line = serde_json::json!({
            "index": cfg.index,
            "sigma": cfg.sigma_one_line(),
            "cells": cfg.cells().iter().map(choice_label).collect::<Vec<_>>(),
        });
        writeln!(out, "{line}").map_err(io)?;
    }
    Ok(0)
}

fn validate(a: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let bytes = std::fs::read(&a.file).map_err(|e| CliError::Io { path: a.file.display().to_string(), source: e })?;
    let (fam, _) = schema::parse_document(&bytes)?;
    let diags = fam.validate();
    for d in &diags {
        let tag = match d.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        writeln!(err, "{tag}: {d}").map_err(io)?;
    }
    if diags.iter().any(|d| d.severity() == Severity::Error) {
        return Ok(EXIT_USAGE);
    }
    let count = match ConfigEnumerator::new(&fam) {
        Ok(en) => en.len().to_string(),
        Err(e) => format!("unavailable ({e})"),
    };
    writeln!(
        out,
        "ok: n={} mode={} region={} configurations={}",
        fam.n(),
        fam.mode(),
        region_label(&fam.region()),
        count
    )
    .map_err(io)?;
    Ok(0)
}

fn region_label(r: &Region) -> String {
    match r {
        Region::HurwitzHalfPlane => "hurwitz".into(),
        Region::ShiftedHalfPlane { sigma } => format!("shifted:{sigma}"),
        Region::Disk { center, radius } => format!("disk:{},{},{}", center.re, center.im, radius),
    }
}
