//! Command-line front end: dataset parsing, command dispatch and output files.
//!
//! All numbers are written with 17 significant digits so repeated runs
//! produce byte-identical files. Frequencies are radians per sample.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::NapesError;
use crate::gapped::{cyclic_optimize, GappedConfig, InitStep, ReconstructionResult, SegmentedSignal};
use crate::linalg::{CMatrix, HermitianSolveConfig, SingularPolicy, C64};
use crate::snapshot::{ComplexSignal, FrequencyGrid, SnapshotPlan, SnapshotPlan2D};
use crate::spectral1d::{spectrum, NoiseReference, Spectrum1D};
use crate::spectral2d::{spectrum2d, NoiseReference2D, Spectrum2D};
use crate::testkit::{gen_signal, NoiseModel, SinusoidSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A failure that maps to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<NapesError> for CliError {
    fn from(e: NapesError) -> Self {
        match e {
            NapesError::SingularMatrix
            | NapesError::SingularSystem
            | NapesError::DegenerateDenominator => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn data_err(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "napes", version, about = "APES / NAPES spectral estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// 1-D amplitude spectrum of a fully known record.
    Spectrum(SpectrumArgs),
    /// 2-D amplitude spectrum of a dense array.
    Spectrum2d(Spectrum2dArgs),
    /// Spectrum and missing samples of a gapped record.
    Reconstruct(ReconstructArgs),
    /// Synthetic record of sinusoids modulated by a reference.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Constant,
    RandomPhase,
    LinearPhase,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Number of uniform grid points 2πk/K.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Relative diagonal loading used when a covariance is singular.
    #[arg(long, default_value_t = 1e-8)]
    pub loading: f64,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Dataset CSV (index,y_re,y_im,x_re,x_im,known).
    pub input: PathBuf,
    /// Filter length M; defaults to N/2.
    #[arg(long)]
    pub filter_length: Option<usize>,
    /// Ignore the reference column (plain APES).
    #[arg(long)]
    pub apes: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct Spectrum2dArgs {
    /// Dataset CSV (row,col,y_re,y_im,x_re,x_im).
    pub input: PathBuf,
    /// Filter length along rows; defaults to half the row count.
    #[arg(long)]
    pub filter_length: Option<usize>,
    /// Filter length along columns; defaults to half the column count.
    #[arg(long)]
    pub filter_length2: Option<usize>,
    /// Grid size along the second axis; defaults to --grid.
    #[arg(long)]
    pub grid2: Option<usize>,
    /// Ignore the reference columns (plain APES).
    #[arg(long)]
    pub apes: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Dataset CSV; rows with known=0 are missing.
    pub input: PathBuf,
    /// Initial filter length; defaults to N/2.
    #[arg(long)]
    pub m0: Option<usize>,
    /// Filter length for the cycles; defaults to the initial one.
    #[arg(long)]
    pub filter_length: Option<usize>,
    /// Stop once no missing sample or amplitude changes by more than this.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    /// Maximum number of cycles.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solve: SolveArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Sinusoid as a_re,a_im,omega; repeatable.
    #[arg(long = "sinusoid", value_parser = parse_sinusoid, allow_hyphen_values = true)]
    pub sinusoids: Vec<SinusoidSpec>,
    /// Record length.
    #[arg(long)]
    pub n: usize,
    /// Residual SNR in dB; no residual when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Reference sequence x.
    #[arg(long, value_enum, default_value_t = NoiseKind::RandomPhase)]
    pub noise: NoiseKind,
    /// Missing run as start,len; repeatable.
    #[arg(long = "gap", value_parser = parse_gap)]
    pub gaps: Vec<(usize, usize)>,
    /// Seed for the reference and the residual.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the complete record, gaps included.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

fn parse_sinusoid(s: &str) -> std::result::Result<SinusoidSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected a_re,a_im,omega, got '{s}'"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.iter().any(|z| !z.is_finite()) {
        return Err(format!("non-finite value in '{s}'"));
    }
    Ok(SinusoidSpec::new(C64::new(v[0], v[1]), v[2]))
}

fn parse_gap(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected start,len, got '{s}'"))?;
    let start = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
    let len = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
    Ok((start, len))
}

/// Parsed 1-D dataset. Missing samples have `y = None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset1D {
    pub y: Vec<Option<C64>>,
    pub x: Vec<C64>,
}

impl Dataset1D {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn fully_known(&self) -> bool {
        self.y.iter().all(Option::is_some)
    }

    pub fn signal(&self) -> ComplexSignal {
        ComplexSignal::new(self.y.iter().map(|v| v.unwrap_or_default()).collect())
    }

    pub fn reference(&self) -> NoiseReference {
        NoiseReference::new(self.x.clone())
    }

    pub fn segmented(&self) -> CliResult<SegmentedSignal> {
        let mask: Vec<bool> = self.y.iter().map(Option::is_some).collect();
        Ok(SegmentedSignal::from_mask(&self.signal(), &mask, self.reference())?)
    }
}

/// Parsed 2-D dataset, `y[(t, t')]` with `t` the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset2D {
    pub y: CMatrix,
    pub x: CMatrix,
}

const HEADER_1D: [&str; 6] = ["index", "y_re", "y_im", "x_re", "x_im", "known"];
const HEADER_2D: [&str; 6] = ["row", "col", "y_re", "y_im", "x_re", "x_im"];

fn csv_reader<R: Read>(input: R, header: &[&str]) -> CliResult<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| data_err(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(data_err(format!(
            "header must be '{}', found '{}'",
            header.join(","),
            found.join(",")
        )));
    }
    Ok(rdr)
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: u64) -> CliResult<&'a str> {
    rec.get(i)
        .ok_or_else(|| data_err(format!("line {line}: missing column {i}")))
}

fn parse_f64(s: &str, name: &str, line: u64) -> CliResult<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| data_err(format!("line {line}: {name} '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(data_err(format!("line {line}: {name} is not finite")));
    }
    Ok(v)
}

fn parse_index(s: &str, name: &str, line: u64) -> CliResult<usize> {
    s.parse()
        .map_err(|_| data_err(format!("line {line}: {name} '{s}' is not a nonnegative integer")))
}

fn parse_complex(rec: &csv::StringRecord, re: usize, im: usize, name: &str, line: u64) -> CliResult<C64> {
    Ok(C64::new(
        parse_f64(field(rec, re, line)?, &format!("{name}_re"), line)?,
        parse_f64(field(rec, im, line)?, &format!("{name}_im"), line)?,
    ))
}

pub fn parse_dataset_1d<R: Read>(input: R) -> CliResult<Dataset1D> {
    let mut rdr = csv_reader(input, &HEADER_1D)?;
    let mut rows: BTreeMap<usize, (Option<C64>, C64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let index = parse_index(field(&rec, 0, line)?, "index", line)?;
        let x = parse_complex(&rec, 3, 4, "x", line)?;
        let y = match field(&rec, 5, line)? {
            "1" => Some(parse_complex(&rec, 1, 2, "y", line)?),
            "0" => None,
            other => return Err(data_err(format!("line {line}: known must be 0 or 1, got '{other}'"))),
        };
        if rows.insert(index, (y, x)).is_some() {
            return Err(data_err(format!("line {line}: duplicate index {index}")));
        }
    }
    if rows.is_empty() {
        return Err(data_err("dataset has no rows"));
    }
    let n = rows.len();
    if *rows.keys().next_back().unwrap() != n - 1 {
        return Err(data_err(format!("indices must cover 0..{} without holes", n - 1)));
    }
    let (y, x) = rows.into_values().unzip();
    Ok(Dataset1D { y, x })
}

pub fn parse_dataset_2d<R: Read>(input: R) -> CliResult<Dataset2D> {
    let mut rdr = csv_reader(input, &HEADER_2D)?;
    let mut cells: BTreeMap<(usize, usize), (C64, C64)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let r = parse_index(field(&rec, 0, line)?, "row", line)?;
        let c = parse_index(field(&rec, 1, line)?, "col", line)?;
        let y = parse_complex(&rec, 2, 3, "y", line)?;
        let x = parse_complex(&rec, 4, 5, "x", line)?;
        if cells.insert((r, c), (y, x)).is_some() {
            return Err(data_err(format!("line {line}: duplicate cell ({r},{c})")));
        }
    }
    if cells.is_empty() {
        return Err(data_err("dataset has no rows"));
    }
    let rows = cells.keys().map(|k| k.0).max().unwrap() + 1;
    let cols = cells.keys().map(|k| k.1).max().unwrap() + 1;
    if cells.len() != rows * cols {
        return Err(data_err(format!(
            "{} cells do not cover the dense {rows}x{cols} grid",
            cells.len()
        )));
    }
    let y = CMatrix::from_fn(rows, cols, |r, c| cells[&(r, c)].0);
    let x = CMatrix::from_fn(rows, cols, |r, c| cells[&(r, c)].1);
    Ok(Dataset2D { y, x })
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render_dataset_1d(y: &[Option<C64>], x: &[C64]) -> String {
    let mut out = HEADER_1D.join(",");
    out.push('\n');
    for (i, (y, x)) in y.iter().zip(x).enumerate() {
        let (yr, yi, known) = match y {
            Some(v) => (fmt_f64(v.re), fmt_f64(v.im), 1),
            None => (String::new(), String::new(), 0),
        };
        let _ = writeln!(out, "{i},{yr},{yi},{},{},{known}", fmt_f64(x.re), fmt_f64(x.im));
    }
    out
}

pub fn render_dataset_2d(y: &CMatrix, x: &CMatrix) -> String {
    let mut out = HEADER_2D.join(",");
    out.push('\n');
    for r in 0..y.rows() {
        for c in 0..y.cols() {
            let (a, b) = (y[(r, c)], x[(r, c)]);
            let _ = writeln!(
                out,
                "{r},{c},{},{},{},{}",
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(b.re),
                fmt_f64(b.im)
            );
        }
    }
    out
}

/// One spectrum row; `alpha` is `None` for a failed grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub omegas: Vec<f64>,
    pub alpha: Option<C64>,
}

impl From<&Spectrum1D> for Vec<SpectrumRow> {
    fn from(s: &Spectrum1D) -> Self {
        s.grid
            .omegas()
            .iter()
            .zip(&s.estimates)
            .map(|(&w, e)| SpectrumRow {
                omegas: vec![w],
                alpha: e.as_ref().ok().map(|e| e.alpha),
            })
            .collect()
    }
}

impl From<&Spectrum2D> for Vec<SpectrumRow> {
    fn from(s: &Spectrum2D) -> Self {
        let mut rows = Vec::with_capacity(s.estimates.len());
        for (i, &w) in s.grid.omegas().iter().enumerate() {
            for (j, &wp) in s.grid_p.omegas().iter().enumerate() {
                rows.push(SpectrumRow {
                    omegas: vec![w, wp],
                    alpha: s.get(i, j).as_ref().ok().map(|e| e.alpha),
                });
            }
        }
        rows
    }
}

const OMEGA_NAMES: [&str; 2] = ["omega", "omega_p"];

pub fn render_spectrum(rows: &[SpectrumRow], format: Format) -> String {
    let dims = rows.first().map_or(1, |r| r.omegas.len());
    match format {
        Format::Csv => {
            let mut out = String::new();
            for name in &OMEGA_NAMES[..dims] {
                out.push_str(name);
                out.push(',');
            }
            out.push_str("alpha_re,alpha_im,alpha_abs,status\n");
            for row in rows {
                for w in &row.omegas {
                    out.push_str(&fmt_f64(*w));
                    out.push(',');
                }
                match row.alpha {
                    Some(a) => {
                        let _ = writeln!(out, "{},{},{},ok", fmt_f64(a.re), fmt_f64(a.im), fmt_f64(a.norm()));
                    }
                    None => out.push_str(",,,failed\n"),
                }
            }
            out
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (name, w) in OMEGA_NAMES.iter().zip(&row.omegas) {
                        obj.insert(name.to_string(), json!(w));
                    }
                    let (re, im, abs, status) = match row.alpha {
                        Some(a) => (json!(a.re), json!(a.im), json!(a.norm()), "ok"),
                        None => (Value::Null, Value::Null, Value::Null, "failed"),
                    };
                    obj.insert("alpha_re".into(), re);
                    obj.insert("alpha_im".into(), im);
                    obj.insert("alpha_abs".into(), abs);
                    obj.insert("status".into(), json!(status));
                    Value::Object(obj)
                })
                .collect();
            pretty(&items)
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn render_reconstruction(res: &ReconstructionResult, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("index,yu_re,yu_im\n");
            for (i, v) in res.missing_indices.iter().zip(res.y_u.iter()) {
                let _ = writeln!(out, "{i},{},{}", fmt_f64(v.re), fmt_f64(v.im));
            }
            out
        }
        Format::Json => pretty(
            &res.missing_indices
                .iter()
                .zip(res.y_u.iter())
                .map(|(i, v)| json!({"index": i, "yu_re": v.re, "yu_im": v.im}))
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn render_trace(trace: &[f64], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("cycle,objective\n");
            for (c, j) in trace.iter().enumerate() {
                let _ = writeln!(out, "{},{}", c + 1, fmt_f64(*j));
            }
            out
        }
        Format::Json => pretty(
            &trace
                .iter()
                .enumerate()
                .map(|(c, j)| json!({"cycle": c + 1, "objective": j}))
                .collect::<Vec<_>>(),
        ),
    }
}

pub fn render_summary(res: &ReconstructionResult) -> String {
    let init = match res.init {
        InitStep::KnownSegments => "known_segments",
        InitStep::ZeroFilled => "zero_filled",
    };
    pretty(&json!({
        "converged": res.converged,
        "iterations": res.iterations,
        "init": init,
        "filter_length": res.filter_length,
        "missing": res.missing_indices.len(),
        "failed_points": res.spectrum.failed_count(),
        "final_objective": res.objective_trace.last(),
    }))
}

fn solve_config(args: &SolveArgs) -> CliResult<HermitianSolveConfig> {
    let policy = if args.loading > 0.0 {
        SingularPolicy::Load
    } else {
        SingularPolicy::Error
    };
    Ok(HermitianSolveConfig::new(args.loading, policy)?)
}

fn grid(k: usize) -> CliResult<FrequencyGrid> {
    Ok(FrequencyGrid::uniform(k)?)
}

fn default_filter_length(n: usize) -> usize {
    (n / 2).min(n.saturating_sub(1)).max(1)
}

fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| data_err(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn all_failed(rows: &[SpectrumRow]) -> bool {
    rows.iter().all(|r| r.alpha.is_none())
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> CliResult<String> {
    let data = parse_dataset_1d(read_file(&args.input)?.as_slice())?;
    if !data.fully_known() {
        return Err(data_err("spectrum needs every row known; use reconstruct for gapped data"));
    }
    let n = data.len();
    let m = args.filter_length.unwrap_or_else(|| default_filter_length(n));
    let plan = SnapshotPlan::for_length(n, m)?;
    let x = data.reference();
    let spec = spectrum(
        &data.signal(),
        (!args.apes).then_some(&x),
        &plan,
        &grid(args.solve.grid)?,
        &solve_config(&args.solve)?,
    )?;
    let rows: Vec<SpectrumRow> = (&spec).into();
    if all_failed(&rows) {
        return Err(CliError::Numerical("every grid point failed".into()));
    }
    Ok(render_spectrum(&rows, args.solve.format))
}

pub fn cmd_spectrum2d(args: &Spectrum2dArgs) -> CliResult<String> {
    let data = parse_dataset_2d(read_file(&args.input)?.as_slice())?;
    let (n, np) = (data.y.rows(), data.y.cols());
    let m = args.filter_length.unwrap_or_else(|| default_filter_length(n));
    let mp = args.filter_length2.unwrap_or_else(|| default_filter_length(np));
    let plan = SnapshotPlan2D::for_shape(n, np, m, mp)?;
    let x = NoiseReference2D::new(data.x.clone());
    let spec = spectrum2d(
        &data.y,
        (!args.apes).then_some(&x),
        &plan,
        &grid(args.solve.grid)?,
        &grid(args.grid2.unwrap_or(args.solve.grid))?,
        &solve_config(&args.solve)?,
    )?;
    let rows: Vec<SpectrumRow> = (&spec).into();
    if all_failed(&rows) {
        return Err(CliError::Numerical("every grid point failed".into()));
    }
    Ok(render_spectrum(&rows, args.solve.format))
}

pub fn run_reconstruct(args: &ReconstructArgs) -> CliResult<ReconstructionResult> {
    let data = parse_dataset_1d(read_file(&args.input)?.as_slice())?;
    let segments = data.segmented()?;
    let mut config = GappedConfig::new(grid(args.solve.grid)?);
    config.m0 = args.m0;
    config.m = args.filter_length;
    config.delta = args.delta;
    config.max_iter = args.max_iter;
    config.solve = solve_config(&args.solve)?;
    Ok(cyclic_optimize(&segments, &config)?)
}

pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    let res = run_reconstruct(args)?;
    let rows: Vec<SpectrumRow> = (&res.spectrum).into();
    if all_failed(&rows) {
        return Err(CliError::Numerical("every grid point failed".into()));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| data_err(format!("{}: {e}", args.out.display())))?;
    let ext = args.solve.format.extension();
    let files = [
        (format!("spectrum.{ext}"), render_spectrum(&rows, args.solve.format)),
        (format!("reconstruction.{ext}"), render_reconstruction(&res, args.solve.format)),
        (format!("trace.{ext}"), render_trace(&res.objective_trace, args.solve.format)),
        ("summary.json".to_string(), render_summary(&res)),
    ];
    for (name, content) in files {
        write_output(Some(&args.out.join(name)), &content)?;
    }
    Ok(())
}

/// Returns the dataset with gaps hidden and the complete dataset.
pub fn cmd_synth(args: &SynthArgs) -> CliResult<(String, String)> {
    if args.n == 0 {
        return Err(data_err("--n must be positive"));
    }
    if let Some(s) = args.sinusoids.iter().find(|s| !(0.0..std::f64::consts::TAU).contains(&s.omega)) {
        return Err(data_err(format!("sinusoid frequency {} outside [0, 2π)", s.omega)));
    }
    if args.snr_db.is_some_and(|s| !s.is_finite()) {
        return Err(data_err("--snr-db must be finite"));
    }
    let model = match args.noise {
        NoiseKind::Constant => NoiseModel::Constant,
        NoiseKind::RandomPhase => NoiseModel::UnitModulusRandomPhase { seed: args.seed },
        NoiseKind::LinearPhase => NoiseModel::LinearPhase { seed: args.seed },
    };
    let (y, x) = gen_signal(&args.sinusoids, &model, args.n, args.snr_db, args.seed)?;
    let mut known = vec![true; args.n];
    for &(start, len) in &args.gaps {
        if len == 0 || start.checked_add(len).is_none_or(|end| end > args.n) {
            return Err(data_err(format!("gap {start},{len} is empty or exceeds --n {}", args.n)));
        }
        for k in &mut known[start..start + len] {
            if !*k {
                return Err(data_err(format!("gap {start},{len} overlaps another gap")));
            }
            *k = false;
        }
    }
    let full: Vec<Option<C64>> = y.as_slice().iter().copied().map(Some).collect();
    let hidden: Vec<Option<C64>> = full.iter().zip(&known).map(|(v, &k)| v.filter(|_| k)).collect();
    Ok((
        render_dataset_1d(&hidden, x.as_slice()),
        render_dataset_1d(&full, x.as_slice()),
    ))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Spectrum(a) => write_output(a.out.as_deref(), &cmd_spectrum(a)?),
        Command::Spectrum2d(a) => write_output(a.out.as_deref(), &cmd_spectrum2d(a)?),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Synth(a) => {
            let (data, truth) = cmd_synth(a)?;
            if let Some(p) = &a.truth_out {
                write_output(Some(p), &truth)?;
            }
            write_output(a.out.as_deref(), &data)
        }
    }
}

/// Thread count from `NAPES_THREADS`; `None` keeps the default pool.
fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var("NAPES_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(data_err(format!("NAPES_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DATA } else { EXIT_OK };
        }
    };
    let outcome = thread_count().and_then(|threads| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| data_err(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli))
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("napes: {e}");
            e.exit_code()
        }
    }
}
