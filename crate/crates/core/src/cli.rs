//! Command drivers behind the `kmono` binary.
//!
//! Exit codes: 0 certified optimal, 1 input error, 2 not converged or not
//! optimal (the result document is still written).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::geometry::{certify, log_likelihood, Certificate, ConditionReport};
use crate::kernel::{Atom, KMonotoneModel, MixingMeasure, Sample};
use crate::solver::{solve_mle, SolveResult, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_OPTIMAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: line {line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{path}: duplicate value {value} on lines {first} and {second} (pass --allow-ties to accept ties)")]
    Tie { path: PathBuf, value: f64, first: usize, second: usize },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
}

#[derive(Debug, Parser)]
#[command(name = "kmono", version, about = "Maximum likelihood estimation of k-monotone densities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the MLE to a data file and write a JSON result document.
    Fit(FitRequest),
    /// Draw a sample from a mixture and write it one value per line.
    Simulate(SimulateRequest),
    /// Certify a candidate mixing measure against a data file.
    Certify(CertifyRequest),
}

#[derive(Debug, Clone, Args)]
pub struct FitRequest {
    /// Data file: one value per line, or CSV with --column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub k: u32,
    #[arg(long, default_value_t = SolverConfig::default().tol_gradient)]
    pub tol_gradient: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_outer_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Emit the fitted density on LO:HI:COUNT.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub allow_ties: bool,
    /// CSV column, by header name or 0-based index.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateRequest {
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub k: u32,
    /// Mixing measure as "Y1:w1,Y2:w2,...".
    #[arg(long)]
    pub atoms: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyRequest {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON file with an "atoms" list (a fit result works) or a bare list of atoms.
    #[arg(long)]
    pub candidate: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
    pub k: u32,
    #[arg(long, default_value_t = SolverConfig::default().tol_gradient)]
    pub tol: f64,
    #[arg(long)]
    pub allow_ties: bool,
    #[arg(long)]
    pub column: Option<String>,
    /// Write the document here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.lo + step * i as f64).collect()
    }
}

pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(format!("expected LO:HI:COUNT, got '{s}'"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad grid start '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad grid end '{hi}'"))?;
    let count: usize = count.trim().parse().map_err(|_| format!("bad grid count '{count}'"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("grid range must satisfy LO < HI, got {lo}:{hi}"));
    }
    if count < 2 {
        return Err(format!("grid needs at least 2 points, got {count}"));
    }
    Ok(GridSpec { lo, hi, count })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub optimal: bool,
    pub tol: f64,
    pub p_min: f64,
    pub p_argmin: f64,
    pub gradient_sup: f64,
    pub gradient_argmax: f64,
    pub atom_p_values: Vec<f64>,
    /// `null` for samples with ties.
    pub conditions: Option<ConditionReport>,
}

impl From<&Certificate> for CertificateDoc {
    fn from(c: &Certificate) -> Self {
        Self {
            optimal: c.optimal,
            tol: c.tol,
            p_min: c.p_min,
            p_argmin: c.p_argmin,
            gradient_sup: c.gradient_sup,
            gradient_argmax: c.gradient_argmax,
            atom_p_values: c.atom_p_values.clone(),
            conditions: c.report.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub k: u32,
    pub sample: SampleSummary,
    pub atoms: Vec<Atom>,
    /// `null` when the likelihood is zero.
    pub log_likelihood: Option<f64>,
    /// `null` when the candidate cannot be certified (some fitted value is zero).
    pub certificate: Option<CertificateDoc>,
    /// `null` for documents produced by `certify`.
    pub solver: Option<SolverSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_grid: Option<Vec<GridPoint>>,
}

impl ResultDocument {
    pub fn is_certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.optimal)
            && self.solver.as_ref().is_none_or(|s| s.converged)
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn summary(sample: &Sample) -> SampleSummary {
    SampleSummary {
        n: sample.len(),
        min: sample.min(),
        max: sample.max(),
    }
}

fn density_grid(model: &KMonotoneModel, grid: Option<GridSpec>) -> Option<Vec<GridPoint>> {
    grid.map(|g| {
        g.points()
            .into_iter()
            .map(|x| GridPoint { x, f: model.density(x) })
            .collect()
    })
}

/// Builds the document for a finished solve.
pub fn fit_document(result: &SolveResult, sample: &Sample, grid: Option<GridSpec>) -> ResultDocument {
    ResultDocument {
        k: result.model.k(),
        sample: summary(sample),
        atoms: result.model.mixing().atoms().to_vec(),
        log_likelihood: finite(result.log_likelihood),
        certificate: Some(CertificateDoc::from(&result.certificate)),
        solver: Some(SolverSummary {
            iterations: result.outer_iterations,
            converged: result.converged,
        }),
        density_grid: density_grid(&result.model, grid),
    }
}

/// Writes every float with 17 significant digits so values survive a round trip.
struct RoundTripFormatter(PrettyFormatter<'static>);

impl Formatter for RoundTripFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }
    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }
    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, RoundTripFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn from_json(text: &str) -> serde_json::Result<ResultDocument> {
    serde_json::from_str(text)
}

/// Reads observations from a plain file (one per line; blank lines and `#`
/// comments are skipped) or from a CSV column.
pub fn read_sample(path: &Path, column: Option<&str>, allow_ties: bool) -> Result<Sample, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let rows = match column {
        None => plain_rows(path, &text)?,
        Some(c) => csv_rows(path, &text, c)?,
    };
    if rows.is_empty() {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            message: "no observations".into(),
        });
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let tie = sorted.windows(2).find(|w| w[0].1 == w[1].1);
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    match tie {
        Some(w) if !allow_ties => {
            let (first, second) = (w[0].0.min(w[1].0), w[0].0.max(w[1].0));
            Err(CliError::Tie {
                path: path.to_path_buf(),
                value: w[0].1,
                first,
                second,
            })
        }
        Some(_) => Ok(Sample::with_ties(values)?),
        None => Ok(Sample::new(values)?),
    }
}

fn parse_value(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    let err = |message: String| CliError::Line {
        path: path.to_path_buf(),
        line,
        message,
    };
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| err(format!("not a number: '{}'", field.trim())))?;
    if !v.is_finite() {
        return Err(err(format!("value is not finite: {v}")));
    }
    if v <= 0.0 {
        return Err(err(format!("value must be positive, got {v}")));
    }
    Ok(v)
}

fn plain_rows(path: &Path, text: &str) -> Result<Vec<(usize, f64)>, CliError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push((i + 1, parse_value(path, i + 1, t)?));
    }
    Ok(rows)
}

fn csv_rows(path: &Path, text: &str, column: &str) -> Result<Vec<(usize, f64)>, CliError> {
    let format_err = |message: String| CliError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| format_err(e.to_string()))?.clone();
    let index = match headers.iter().position(|h| h.trim() == column) {
        Some(i) => i,
        None => column
            .parse::<usize>()
            .map_err(|_| format_err(format!("no column named '{column}'")))?,
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = record.get(index).ok_or_else(|| CliError::Line {
            path: path.to_path_buf(),
            line,
            message: format!("missing column {index}"),
        })?;
        rows.push((line, parse_value(path, line, field)?));
    }
    Ok(rows)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Fits, writes the document and returns it.
pub fn cmd_fit(req: &FitRequest) -> Result<ResultDocument, CliError> {
    let sample = read_sample(&req.input, req.column.as_deref(), req.allow_ties)?;
    let config = SolverConfig {
        tol_gradient: req.tol_gradient,
        max_outer_iters: req.max_iters,
        seed: req.seed,
        ..SolverConfig::default()
    };
    info!("fitting k = {} to n = {} observations", req.k, sample.len());
    let result = solve_mle(&sample, req.k, &config)?;
    info!(
        "{} atoms after {} iterations, converged = {}",
        result.model.mixing().len(),
        result.outer_iterations,
        result.converged
    );
    let doc = fit_document(&result, &sample, req.grid);
    write_file(&req.output, &to_json(&doc))?;
    Ok(doc)
}

/// Parses `"Y1:w1,Y2:w2"`.
pub fn parse_atoms(spec: &str) -> Result<MixingMeasure, CliError> {
    let mut atoms = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (y, w) = part
            .split_once(':')
            .ok_or_else(|| CliError::Invalid(format!("atom '{part}' is not LOCATION:WEIGHT")))?;
        let y: f64 = y.trim().parse().map_err(|_| CliError::Invalid(format!("bad location in '{part}'")))?;
        let w: f64 = w.trim().parse().map_err(|_| CliError::Invalid(format!("bad weight in '{part}'")))?;
        atoms.push(Atom::new(y, w));
    }
    if atoms.is_empty() {
        return Err(CliError::Invalid("no atoms given".into()));
    }
    Ok(MixingMeasure::new(atoms)?)
}

pub fn cmd_simulate(req: &SimulateRequest) -> Result<Sample, CliError> {
    let model = KMonotoneModel::new(req.k, parse_atoms(&req.atoms)?)?;
    if req.n == 0 {
        return Err(CliError::Invalid("n must be at least 1".into()));
    }
    let sample = model.sample(req.n, req.seed)?;
    let mut text = String::with_capacity(req.n * 20);
    for v in sample.values() {
        text.push_str(&format!("{v}\n"));
    }
    write_file(&req.output, &text)?;
    Ok(sample)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CandidateFile {
    Document { atoms: Vec<Atom> },
    List(Vec<Atom>),
}

pub fn read_candidate(path: &Path) -> Result<MixingMeasure, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed: CandidateFile = serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: format!("expected an object with \"atoms\" or a list of atoms ({e})"),
    })?;
    let atoms = match parsed {
        CandidateFile::Document { atoms } | CandidateFile::List(atoms) => atoms,
    };
    MixingMeasure::new(atoms).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Certifies a candidate without solving. A candidate whose density vanishes
/// at some observation yields a document with a `null` certificate.
pub fn cmd_certify(req: &CertifyRequest) -> Result<ResultDocument, CliError> {
    let sample = read_sample(&req.input, req.column.as_deref(), req.allow_ties)?;
    let mixing = read_candidate(&req.candidate)?;
    if !(req.tol > 0.0 && req.tol.is_finite()) {
        return Err(CliError::Invalid(format!("tolerance must be positive, got {}", req.tol)));
    }
    let model = KMonotoneModel::new(req.k, mixing)?;
    let certificate = match certify(&model, &sample, req.tol) {
        Ok(c) => Some(CertificateDoc::from(&c)),
        Err(crate::Error::NotCertifiable { index }) => {
            log::warn!("candidate density vanishes at observation {index}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let doc = ResultDocument {
        k: req.k,
        sample: summary(&sample),
        atoms: model.mixing().atoms().to_vec(),
        log_likelihood: finite(log_likelihood(&model, &sample)),
        certificate,
        solver: None,
        density_grid: None,
    };
    let json = to_json(&doc);
    match &req.output {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    Ok(doc)
}

/// Runs a parsed command and maps the outcome to an exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Fit(req) => cmd_fit(req).map(|d| d.is_certified()),
        Command::Simulate(req) => cmd_simulate(req).map(|_| true),
        Command::Certify(req) => cmd_certify(req).map(|d| d.is_certified()),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("kmono: result is not certified optimal");
            EXIT_NOT_OPTIMAL
        }
        Err(e) => {
            eprintln!("kmono: {e}");
            EXIT_INPUT
        }
    }
}
