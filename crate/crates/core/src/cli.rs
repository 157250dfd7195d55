//! Command-line front end. Every stage reads and writes files, so stages can
//! be chained or swapped out.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{load_field_config, ConfigError, RunConfig, Scenario};
use crate::correlator::{default_half_width, integrate_peaks, normalize_center, CorrelationRequest, PeakReport};
use crate::emitter::{self, CascadeSource, ChannelMap, DetectorModel, DetectorSet, SimError};
use crate::field::{self, DiodeGeometry, FieldError, TrapFieldModel};
use crate::fit::{
    self, fit_coherence, fit_fringe, fit_lifetime_bi, fit_lifetime_mono, transform_limit, CoherenceFit,
    CoherencePoint, FitError, Irf, IrfMode, LifetimeOptions, StarkParams, StarkPoint, VisibilityRecord,
};
use crate::interferometer::{self, michelson_scan, InterferometerError};
use crate::measured::Measured;
use crate::report::{self, CsvTable, Manifest};
use crate::reproduce::{self, ReproduceError, ReproduceOptions};
use crate::timetag::{self, read_tags, select_channel, write_tags, CoincidenceHistogram, TagError, WriteMode};
use crate::units::{kv_per_cm_to_v_per_nm, v_per_nm_to_kv_per_cm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANALYSIS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "qdcascade", version, about = "Cascade photon simulation and analysis pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (simulate) or file (other commands; stdout if absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the configured scenario into tag files and a manifest.
    Simulate {
        /// Overrides the configured number of pulses.
        #[arg(long)]
        pulses: Option<u64>,
    },
    /// Coincidence histogram of two tag files (delay = b − a).
    Correlate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Keep only this channel of file a.
        #[arg(long)]
        channel_a: Option<u16>,
        #[arg(long)]
        channel_b: Option<u16>,
        #[arg(long, default_value_t = 25)]
        bin_width: u64,
        /// Largest |delay| in ps.
        #[arg(long, default_value_t = 75_000)]
        window: u64,
    },
    /// Lifetime fit of a sync-referenced decay histogram.
    FitLifetime {
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long, value_enum, default_value_t = LifetimeModel::Mono)]
        model: LifetimeModel,
        /// Gaussian IRF FWHM in ps.
        #[arg(long, conflicts_with = "irf")]
        irf_fwhm: Option<f64>,
        /// Measured IRF histogram (CSV).
        #[arg(long)]
        irf: Option<PathBuf>,
        /// Fit the IRF width instead of holding it.
        #[arg(long)]
        floating_irf: bool,
        /// Fit range "lo:hi" in ps.
        #[arg(long, value_parser = parse_range)]
        range: Option<(i64, i64)>,
        /// Bi model: hold τ_XX at this value (ps).
        #[arg(long)]
        tau_xx: Option<f64>,
        /// Also write per-bin residuals to this CSV.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Quadratic Stark fit of (voltage, energy, sigma[, line]) CSV data.
    FitStark {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = fit::stark::DEFAULT_VB)]
        vb: f64,
        /// Intrinsic thickness in nm.
        #[arg(long, default_value_t = fit::stark::DEFAULT_D_NM)]
        d: f64,
        /// Also write per-point residuals to this CSV.
        #[arg(long)]
        residuals: Option<PathBuf>,
    },
    /// Fringe visibilities and coherence envelope from a Michelson scan index.
    FitMichelson {
        /// `fringes.json` written by `simulate`.
        #[arg(long)]
        index: PathBuf,
        /// X lifetime in ps, for Γ/Γ₀.
        #[arg(long)]
        tau_x: Option<f64>,
        /// XX lifetime in ps; with --tau-x gives the XX transform limit.
        #[arg(long, requires = "tau_x")]
        tau_xx: Option<f64>,
    },
    /// HOM visibility from co- and cross-polarized histograms.
    AnalyzeHom {
        #[arg(long)]
        co: PathBuf,
        #[arg(long)]
        cross: PathBuf,
        #[arg(long, default_value_t = 12_500)]
        period: u64,
        #[arg(long, default_value_t = 0.0)]
        g2: f64,
        #[arg(long, default_value_t = 0.0)]
        g2_err: f64,
        /// Classical visibility ν.
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
    },
    /// g²(0) from an HBT histogram.
    AnalyzeG2 {
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long, default_value_t = 12_500)]
        period: u64,
        #[arg(long)]
        half_width: Option<u64>,
    },
    /// Tabulate the replica field, hole position and onset voltage.
    FieldModel {
        #[arg(long, default_value_t = -2.04, allow_hyphen_values = true)]
        v_min: f64,
        #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
        v_max: f64,
        #[arg(long, default_value_t = 0.02)]
        v_step: f64,
        #[arg(long, default_value_t = 3)]
        n_max: u32,
        /// Barrier band gap, eV.
        #[arg(long, default_value_t = 1.73)]
        eg: f64,
        /// Photon energy, eV.
        #[arg(long, default_value_t = 1.59)]
        eph: f64,
    },
    /// Run a named end-to-end scenario and report pass/fail.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(reproduce::SCENARIOS))]
        scenario: String,
        /// Pulses per Monte Carlo run.
        #[arg(long, default_value_t = 10_000_000)]
        pulses: u64,
    },
    /// Plot-ready CSV from a histogram or a fit report.
    Plotdata {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LifetimeModel {
    Mono,
    Bi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Histogram,
    Stark,
    Coherence,
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: i64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: i64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if hi <= lo {
        return Err("hi must exceed lo".into());
    }
    Ok((lo, hi))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Interferometer(#[from] InterferometerError),
    #[error(transparent)]
    Correlator(#[from] crate::correlator::CorrelatorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Reproduce(#[from] ReproduceError),
    #[error("scenario {0} failed")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Fit(_) | CliError::Correlator(_) | CliError::Failed(_) => EXIT_ANALYSIS,
            CliError::Reproduce(ReproduceError::Fit(_) | ReproduceError::Pipeline(_)) => EXIT_ANALYSIS,
            _ => EXIT_USAGE,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(format!("cannot read {}", path.display())))
}

fn read_histogram(path: &Path) -> Result<CoincidenceHistogram, CliError> {
    Ok(CoincidenceHistogram::read_csv(&read_text(path)?)?)
}

/// Writes `text` to `--out` or stdout.
fn emit(global: &Global, text: &str) -> Result<(), CliError> {
    match &global.out {
        Some(p) => std::fs::write(p, text).map_err(io_err(format!("cannot write {}", p.display()))),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // a closed pipe (`| head`) is not an error
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(io_err("stdout")),
        },
    }
}

fn emit_report<T: Serialize>(global: &Global, value: &T, csv: impl FnOnce(&T) -> CsvTable) -> Result<(), CliError> {
    match global.format {
        Format::Json => emit(global, &(report::to_json_string(value) + "\n")),
        Format::Csv => emit(global, &csv(value).render()),
    }
}

fn measured_rows(rows: &[(&str, Measured)]) -> CsvTable {
    let mut t = CsvTable::new(&["index", "value", "error"]);
    for (i, (name, m)) in rows.iter().enumerate() {
        t.comments.push(format!("{i}: {name}"));
        t.push(vec![i as f64, m.value, m.error]);
    }
    t
}

/// Parses arguments and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Simulate { pulses } => simulate(g, *pulses),
        Command::Correlate { a, b, channel_a, channel_b, bin_width, window } => {
            correlate(g, a, b, *channel_a, *channel_b, *bin_width, *window)
        }
        Command::FitLifetime { histogram, model, irf_fwhm, irf, floating_irf, range, tau_xx, residuals } => {
            let irf = match (irf_fwhm, irf) {
                (_, Some(p)) => Irf::Histogram(read_histogram(p)?),
                (Some(f), None) => Irf::Gaussian { fwhm: *f },
                (None, None) => return Err(CliError::Usage("give --irf-fwhm or --irf".into())),
            };
            let mut opts = LifetimeOptions::new(irf);
            opts.irf_mode = if *floating_irf { IrfMode::Floating } else { IrfMode::Fixed };
            opts.range = *range;
            opts.tau_xx = tau_xx.map(Measured::exact);
            fit_lifetime(g, histogram, *model, &opts, residuals.as_deref())
        }
        Command::FitStark { data, vb, d, residuals } => fit_stark_cmd(g, data, *vb, *d, residuals.as_deref()),
        Command::FitMichelson { index, tau_x, tau_xx } => fit_michelson(g, index, *tau_x, *tau_xx),
        Command::AnalyzeHom { co, cross, period, g2, g2_err, nu } => {
            analyze_hom(g, co, cross, *period, Measured::new(*g2, *g2_err), *nu)
        }
        Command::AnalyzeG2 { histogram, period, half_width } => analyze_g2(g, histogram, *period, *half_width),
        Command::FieldModel { v_min, v_max, v_step, n_max, eg, eph } => {
            field_model(g, *v_min, *v_max, *v_step, *n_max, *eg, *eph)
        }
        Command::Reproduce { scenario, pulses } => {
            let opts = ReproduceOptions { pulses: *pulses, seed: g.seed.unwrap_or(1) };
            let rep = reproduce::run_scenario(scenario, &opts)?;
            emit_report(g, &rep, |r| {
                let mut t = CsvTable::new(&["measured", "expected", "tolerance", "passed"])
                    .comment(format!("scenario: {}", r.scenario));
                for c in &r.checks {
                    t.comments.push(format!("row {}: {}", t.rows.len(), c.name));
                    t.push(vec![c.measured, c.expected, c.tolerance, c.passed as u8 as f64]);
                }
                t
            })?;
            Ok(if rep.passed { EXIT_OK } else { EXIT_ANALYSIS })
        }
        Command::Plotdata { input, kind } => plotdata(g, input, *kind),
    }
}

/// Entry of `fringes.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FringeIndexEntry {
    pub file: String,
    pub coarse_mm: f64,
    pub delay_ps: f64,
    pub true_visibility: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FringeIndex {
    pub wavelength_nm: f64,
    pub scans: Vec<FringeIndexEntry>,
}

fn simulate(g: &Global, pulses: Option<u64>) -> Result<i32, CliError> {
    let path = g.config.as_ref().ok_or_else(|| CliError::Usage("simulate needs --config".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
        if let Some(m) = cfg.michelson.as_mut() {
            m.scan.seed = s;
        }
    }
    if let Some(p) = pulses {
        cfg.pulses = p.max(1);
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    let dir = cfg.out.clone();
    std::fs::create_dir_all(&dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
    let mut manifest = Manifest::new("simulate", cfg.seed, &cfg);
    let put = |name: &str, tags: &[timetag::TimeTag], m: &mut Manifest| -> Result<(), CliError> {
        let n = write_tags(tags, dir.join(name), WriteMode::Strict)?;
        m.add_file(&dir, name, Some(n)).map_err(io_err(format!("cannot hash {name}")))
    };
    let channels = ChannelMap::default();
    match cfg.scenario {
        Scenario::Cascade => {
            // the sync is a laser reference: it shares the timing jitter but never misses a pulse
            let sync = DetectorModel { efficiency: 1.0, dead_time: 0.0, ..cfg.detector };
            let det = DetectorSet { sync, ..DetectorSet::uniform(cfg.detector) };
            let s = emitter::simulate_cascade(&cfg.emitter, &cfg.clock, &det, channels, cfg.pulses, cfg.seed)?;
            put("sync.ctag", &s.sync, &mut manifest)?;
            put("xx.ctag", &s.xx, &mut manifest)?;
            put("x.ctag", &s.x, &mut manifest)?;
        }
        Scenario::Hom => {
            let src = CascadeSource::new(cfg.emitter, cfg.clock, cfg.seed)?;
            let ports = interferometer::simulate_hom(&src, cfg.line, &cfg.bench, [cfg.detector; 2], [1, 2], cfg.pulses, cfg.seed)?;
            put("out1.ctag", &ports.out1, &mut manifest)?;
            put("out2.ctag", &ports.out2, &mut manifest)?;
        }
        Scenario::Coherent => {
            let tags = emitter::simulate_coherent(cfg.mean_photons, cfg.emitter.tau_x, &cfg.clock, &cfg.detector, 1, cfg.pulses, cfg.seed)?;
            put("signal.ctag", &tags, &mut manifest)?;
        }
        Scenario::Delta => {
            let sync_det = DetectorModel { efficiency: 1.0, dead_time: 0.0, ..cfg.detector };
            let (sync, sig) = emitter::simulate_delta_emitter(&cfg.clock, &sync_det, &cfg.detector, channels, cfg.pulses, cfg.seed)?;
            put("sync.ctag", &sync, &mut manifest)?;
            put("signal.ctag", &sig, &mut manifest)?;
        }
        Scenario::Michelson => {
            let m = cfg.michelson.as_ref().expect("parsed with the michelson scenario");
            let sets = michelson_scan(&m.line, &m.scan)?;
            let mut index = FringeIndex { wavelength_nm: m.line.wavelength_nm(), scans: Vec::new() };
            for (i, s) in sets.iter().enumerate() {
                let name = format!("fringe_{i:03}.csv");
                let mut buf = Vec::new();
                s.write_csv(&mut buf).map_err(io_err("fringe csv"))?;
                std::fs::write(dir.join(&name), buf).map_err(io_err(format!("cannot write {name}")))?;
                manifest.add_file(&dir, &name, Some(s.samples.len() as u64)).map_err(io_err("hash"))?;
                index.scans.push(FringeIndexEntry {
                    file: name,
                    coarse_mm: s.coarse_mm,
                    delay_ps: s.delay_ps,
                    true_visibility: s.true_visibility,
                });
            }
            report::write_json(&dir.join("fringes.json"), &index).map_err(io_err("fringes.json"))?;
            manifest.add_file(&dir, "fringes.json", None).map_err(io_err("hash"))?;
        }
    }
    let mpath = manifest.write(&dir).map_err(io_err("manifest"))?;
    let summary = serde_json::json!({
        "manifest": mpath,
        "files": manifest.files.iter().map(|f| (f.name.clone(), f.records)).collect::<Vec<_>>(),
    });
    match g.format {
        Format::Json => println!("{}", report::to_json_string(&summary)),
        Format::Csv => {
            println!("file,records");
            for f in &manifest.files {
                println!("{},{}", f.name, f.records.unwrap_or(0));
            }
        }
    }
    Ok(EXIT_OK)
}

fn load_stream(path: &Path, channel: Option<u16>) -> Result<Vec<timetag::TimeTag>, CliError> {
    let tags = read_tags(path)?;
    Ok(match channel {
        Some(c) => select_channel(&tags, c),
        None => tags,
    })
}

fn correlate(
    g: &Global,
    a: &Path,
    b: &Path,
    ca: Option<u16>,
    cb: Option<u16>,
    bin_width: u64,
    window: u64,
) -> Result<i32, CliError> {
    let ta = load_stream(a, ca)?;
    let tb = load_stream(b, cb)?;
    let req = CorrelationRequest::new(bin_width, window)?;
    let h = crate::correlator::correlate(&ta, &tb, &req)?;
    match g.format {
        Format::Csv => {
            let mut buf = Vec::new();
            h.write_csv(&mut buf).map_err(io_err("histogram"))?;
            emit(g, std::str::from_utf8(&buf).expect("ascii"))?;
        }
        Format::Json => emit(g, &(report::to_json_string(&h) + "\n"))?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct LifetimeReport<'a> {
    kind: &'static str,
    model: &'a str,
    fit: &'a fit::LifetimeFit,
    ratio: Option<Measured>,
    residuals: Option<String>,
}

/// Model value of a lifetime fit at delay `t`.
pub fn lifetime_model_value(f: &fit::LifetimeFit, t: f64) -> f64 {
    let sigma = f.irf_fwhm.value / crate::units::FWHM_PER_SIGMA;
    match f.tau_x {
        Some(tx) => fit::bi_curve(t, f.amplitude.value, f.tau_xx.value, tx.value, f.t0.value, sigma, f.offset.value),
        None => fit::mono_curve(t, f.amplitude.value, f.tau_xx.value, f.t0.value, sigma, f.offset.value),
    }
}

fn write_residuals(path: &Path, table: &CsvTable) -> Result<String, CliError> {
    std::fs::write(path, table.render()).map_err(io_err(format!("cannot write {}", path.display())))?;
    Ok(path.display().to_string())
}

fn fit_lifetime(
    g: &Global,
    histogram: &Path,
    model: LifetimeModel,
    opts: &LifetimeOptions,
    residuals: Option<&Path>,
) -> Result<i32, CliError> {
    let h = read_histogram(histogram)?;
    let (name, fit) = match model {
        LifetimeModel::Mono => ("mono", fit_lifetime_mono(&h, opts)?),
        LifetimeModel::Bi => ("bi", fit_lifetime_bi(&h, opts)?),
    };
    let residuals = match residuals {
        Some(p) => {
            let (lo, hi) = opts.range.unwrap_or((i64::MIN, i64::MAX));
            let mut t = CsvTable::new(&["delay_ps", "counts", "model", "residual"]).comment("residual = (counts - model) / sqrt(max(counts, 1))");
            for (i, &c) in h.counts.iter().enumerate() {
                let x = h.bin_center(i);
                if x < lo || x > hi {
                    continue;
                }
                let m = lifetime_model_value(&fit, x as f64);
                t.push(vec![x as f64, c as f64, m, (c as f64 - m) / (c as f64).max(1.0).sqrt()]);
            }
            Some(write_residuals(p, &t)?)
        }
        None => None,
    };
    let rep = LifetimeReport { kind: "lifetime-fit", model: name, ratio: fit.ratio(), fit: &fit, residuals };
    emit_report(g, &rep, |r| {
        let mut rows = vec![("tau_xx", r.fit.tau_xx)];
        if let Some(tx) = r.fit.tau_x {
            rows.push(("tau_x", tx));
        }
        rows.extend([("amplitude", r.fit.amplitude), ("offset", r.fit.offset), ("t0", r.fit.t0), ("irf_fwhm", r.fit.irf_fwhm)]);
        if let Some(q) = r.ratio {
            rows.push(("r", q));
        }
        measured_rows(&rows).comment(format!("chi2_red: {}", r.fit.chi2_red))
    })?;
    Ok(EXIT_OK)
}

/// One row of the Stark data CSV.
#[derive(Debug, Deserialize)]
struct StarkRow {
    voltage: f64,
    energy: f64,
    sigma: f64,
    #[serde(default)]
    line: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarkLineReport {
    pub line: String,
    pub params: StarkParams,
    /// (voltage, energy, sigma).
    pub points: Vec<StarkPoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarkReport {
    pub kind: String,
    pub vb: f64,
    pub d_nm: f64,
    pub lines: Vec<StarkLineReport>,
    /// |XX⟩ state when both xx and x lines are present.
    pub state: Option<StarkParams>,
    #[serde(default)]
    pub residuals: Option<String>,
}

fn fit_stark_cmd(g: &Global, data: &Path, vb: f64, d: f64, residuals: Option<&Path>) -> Result<i32, CliError> {
    let text = read_text(data)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut groups: Vec<(String, Vec<StarkPoint>)> = Vec::new();
    for (i, row) in rdr.deserialize::<StarkRow>().enumerate() {
        let row = row.map_err(|e| CliError::Usage(format!("{}: row {}: {e}", data.display(), i + 1)))?;
        let line = row.line.unwrap_or_else(|| "line".into()).to_lowercase();
        let p = StarkPoint { x: row.voltage, energy: row.energy, sigma: row.sigma };
        match groups.iter_mut().find(|(l, _)| *l == line) {
            Some((_, v)) => v.push(p),
            None => groups.push((line, vec![p])),
        }
    }
    if groups.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", data.display())));
    }
    let mut lines = Vec::new();
    for (line, points) in groups {
        let params = fit::fit_stark(&points, vb, d)?;
        lines.push(StarkLineReport { line, params, points });
    }
    let find = |n: &str| lines.iter().find(|l| l.line == n).map(|l| &l.params);
    let state = match (find("xx"), find("x")) {
        (Some(a), Some(b)) => Some(fit::state_params(a, b)),
        _ => None,
    };
    let geom = DiodeGeometry { vb, d_nm: d };
    let residuals = match residuals {
        Some(p) => {
            let mut t = CsvTable::new(&["voltage", "line_index", "energy", "model", "residual_uev"]);
            for (i, l) in lines.iter().enumerate() {
                t.comments.push(format!("line {i}: {}", l.line));
                for pt in &l.points {
                    let m = l.params.energy(field::capacitor_field(pt.x, &geom));
                    t.push(vec![pt.x, i as f64, pt.energy, m, (pt.energy - m) * 1e6]);
                }
            }
            Some(write_residuals(p, &t)?)
        }
        None => None,
    };
    let rep = StarkReport { kind: "stark-fit".into(), vb, d_nm: d, lines, state, residuals };
    emit_report(g, &rep, |r| {
        let mut t = CsvTable::new(&["e0_ev", "e0_err", "alpha", "alpha_err", "beta", "beta_err", "q"])
            .comment("alpha in eV nm/V, beta in eV nm^2/V^2");
        let add = |name: &str, p: &StarkParams, t: &mut CsvTable| {
            t.comments.push(format!("row {}: {name}", t.rows.len()));
            t.push(vec![p.e0.value, p.e0.error, p.alpha.value, p.alpha.error, p.beta.value, p.beta.error, p.q as f64]);
        };
        for l in &r.lines {
            add(&l.line, &l.params, &mut t);
        }
        if let Some(s) = &r.state {
            add("state", s, &mut t);
        }
        t
    })?;
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub kind: String,
    pub wavelength_nm: f64,
    pub points: Vec<CoherencePoint>,
    pub fit: CoherenceFit,
    /// Γ₀ of the XX line, when both lifetimes are given.
    pub gamma0_xx: Option<f64>,
}

fn read_fringe(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    rdr.deserialize::<(f64, f64)>()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), i + 1))))
        .collect()
}

fn fit_michelson(g: &Global, index: &Path, tau_x: Option<f64>, tau_xx: Option<f64>) -> Result<i32, CliError> {
    let idx: FringeIndex = serde_json::from_str(&read_text(index)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", index.display())))?;
    let base = index.parent().unwrap_or(Path::new("."));
    let mut points = Vec::with_capacity(idx.scans.len());
    for s in &idx.scans {
        let f = fit_fringe(&read_fringe(&base.join(&s.file))?, idx.wavelength_nm)?;
        points.push(CoherencePoint { delay_ps: s.delay_ps, visibility: f.visibility.value, sigma: f.visibility.error });
    }
    let (gamma0, gamma0_xx) = match tau_x {
        Some(tx) => {
            let (a, b) = transform_limit(tx, tau_xx)?;
            (Some(a), b)
        }
        None => (None, None),
    };
    // zero-noise scans have zero errors; fall back to unweighted
    if points.iter().any(|p| !(p.sigma > 0.0)) {
        points.iter_mut().for_each(|p| p.sigma = 0.0);
    }
    let fit = fit_coherence(&points, gamma0)?;
    let rep = CoherenceReport { kind: "coherence-fit".into(), wavelength_nm: idx.wavelength_nm, points, fit, gamma0_xx };
    emit_report(g, &rep, |r| {
        let mut rows = vec![("f_l_uev", r.fit.f_l), ("f_g_uev", r.fit.f_g), ("gamma_uev", r.fit.gamma)];
        if let Some(q) = r.fit.ratio {
            rows.push(("gamma_over_gamma0", q));
        }
        measured_rows(&rows)
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct HomReport {
    kind: &'static str,
    co: PeakReport,
    cross: PeakReport,
    visibility: VisibilityRecord,
}

fn analyze_hom(g: &Global, co: &Path, cross: &Path, period: u64, g2: Measured, nu: f64) -> Result<i32, CliError> {
    let hw = default_half_width(period);
    let pc = integrate_peaks(&read_histogram(co)?, period, hw)?;
    let px = integrate_peaks(&read_histogram(cross)?, period, hw)?;
    let a_co = normalize_center(&pc, 2)?;
    let a_cross = normalize_center(&px, 2)?;
    let visibility = VisibilityRecord::new(a_co, a_cross, g2, nu)?;
    let rep = HomReport { kind: "hom-analysis", co: PeakReport::new(&pc), cross: PeakReport::new(&px), visibility };
    emit_report(g, &rep, |r| {
        let v = &r.visibility;
        measured_rows(&[("a_co", v.a_co), ("a_cross", v.a_cross), ("v_raw", v.v_raw), ("v_corr", v.v_corr)])
    })?;
    Ok(EXIT_OK)
}

fn analyze_g2(g: &Global, histogram: &Path, period: u64, half_width: Option<u64>) -> Result<i32, CliError> {
    let peaks = integrate_peaks(&read_histogram(histogram)?, period, half_width.unwrap_or(default_half_width(period)))?;
    let g2 = crate::correlator::g2_from_peaks(&peaks)?;
    let mut rep = PeakReport::new(&peaks);
    rep.g2 = Some(g2);
    emit_report(g, &rep, |r| {
        let mut t = CsvTable::new(&["k", "delay_ps", "area", "error"]).comment(format!("g2: {g2}"));
        for p in &r.peaks {
            t.push(vec![p.k as f64, p.delay_ps as f64, p.area, p.error]);
        }
        t
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FieldRow {
    voltage: f64,
    n: u32,
    f_v_kv_cm: f64,
    f_c_kv_cm: f64,
    f_m_kv_cm: f64,
    f_total_kv_cm: f64,
    delta_nm: f64,
    e1_mev: f64,
}

#[derive(Serialize)]
struct FieldReport {
    kind: &'static str,
    diode: DiodeGeometry,
    trap: TrapFieldModel,
    onset_voltage: f64,
    onset_field_kv_cm: f64,
    rows: Vec<FieldRow>,
}

fn field_model(g: &Global, v_min: f64, v_max: f64, v_step: f64, n_max: u32, eg: f64, eph: f64) -> Result<i32, CliError> {
    if !(v_step > 0.0) || !(v_max >= v_min) {
        return Err(CliError::Usage("need v_step > 0 and v_max >= v_min".into()));
    }
    let (diode, trap) = match &g.config {
        Some(p) => load_field_config(p)?,
        None => (DiodeGeometry::default(), TrapFieldModel::default()),
    };
    let onset = field::franz_keldysh_onset(eg, eph, &diode, &trap)?;
    let n_steps = ((v_max - v_min) / v_step + 1e-9).floor() as usize;
    let mut rows = Vec::new();
    for i in 0..=n_steps {
        let v = v_min + i as f64 * v_step;
        for n in 0..=n_max {
            // holes need a confining field
            let Ok(r) = field::replica_field(v, n, &diode, &trap) else { continue };
            let e1 = if r.f_v > 0.0 { field::triangular_well(r.f_v, trap.m_hh)?.e1_mev } else { f64::NAN };
            rows.push(FieldRow {
                voltage: v,
                n,
                f_v_kv_cm: v_per_nm_to_kv_per_cm(r.f_v),
                f_c_kv_cm: v_per_nm_to_kv_per_cm(r.f_c),
                f_m_kv_cm: v_per_nm_to_kv_per_cm(r.f_m),
                f_total_kv_cm: v_per_nm_to_kv_per_cm(r.total()),
                delta_nm: if n > 0 { r.delta } else { f64::NAN },
                e1_mev: e1,
            });
        }
    }
    let onset_field = v_per_nm_to_kv_per_cm(field::capacitor_field(onset, &diode));
    let rep = FieldReport { kind: "field-model", diode, trap, onset_voltage: onset, onset_field_kv_cm: onset_field, rows };
    emit_report(g, &rep, |r| {
        let mut t = CsvTable::new(&["voltage", "n", "f_v_kv_cm", "f_c_kv_cm", "f_m_kv_cm", "f_total_kv_cm", "delta_nm", "e1_mev"])
            .comment(format!("onset_voltage: {:.4} V", r.onset_voltage))
            .comment(format!("onset_field: {:.3} kV/cm", r.onset_field_kv_cm))
            .comment(format!("epsilon_r: {}, m_hh: {}, image: {:?}", r.trap.epsilon_r, r.trap.m_hh, r.trap.image));
        for x in &r.rows {
            t.push(vec![x.voltage, x.n as f64, x.f_v_kv_cm, x.f_c_kv_cm, x.f_m_kv_cm, x.f_total_kv_cm, x.delta_nm, x.e1_mev]);
        }
        t
    })?;
    // keep the unit helper pair in one place
    debug_assert!((kv_per_cm_to_v_per_nm(onset_field) - field::capacitor_field(onset, &diode)).abs() < 1e-12);
    Ok(EXIT_OK)
}

fn report_kind(text: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    v.get("kind")?.as_str().map(str::to_string)
}

fn plotdata(g: &Global, input: &Path, kind: PlotKind) -> Result<i32, CliError> {
    let text = read_text(input)?;
    let found = report_kind(&text);
    let mismatch = |want: &str| {
        CliError::Usage(format!(
            "{} is not a {want} (found {})",
            input.display(),
            found.clone().unwrap_or_else(|| "a non-report file".into())
        ))
    };
    let table = match kind {
        PlotKind::Histogram => {
            if found.is_some() {
                return Err(mismatch("histogram CSV"));
            }
            let h = CoincidenceHistogram::read_csv(&text)?;
            let mut t = CsvTable::new(&["delay_ns", "counts"])
                .comment("kind: histogram")
                .comment(format!("bin_width_ps: {}", h.bin_width));
            for (i, c) in h.counts.iter().enumerate() {
                t.push(vec![h.bin_center(i) as f64 * 1e-3, *c as f64]);
            }
            t.render()
        }
        PlotKind::Stark => {
            if found.as_deref() != Some("stark-fit") {
                return Err(mismatch("stark-fit report"));
            }
            let r: StarkReport = serde_json::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut out = String::new();
            // one gnuplot data block per line, separated by two blank lines
            for (i, l) in r.lines.iter().enumerate() {
                if i > 0 {
                    out.push_str("\n\n");
                }
                let mut t = CsvTable::new(&["voltage", "e_data", "e_fit"]).comment(format!("kind: stark, line: {}", l.line));
                for p in &l.points {
                    t.push(vec![p.x, p.energy, l.params.energy(field::capacitor_field(p.x, &DiodeGeometry { vb: r.vb, d_nm: r.d_nm }))]);
                }
                out.push_str(&t.render());
            }
            out
        }
        PlotKind::Coherence => {
            if found.as_deref() != Some("coherence-fit") {
                return Err(mismatch("coherence-fit report"));
            }
            let r: CoherenceReport = serde_json::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut t = CsvTable::new(&["delay_ps", "v_data", "v_fit"]).comment("kind: coherence");
            for p in &r.points {
                t.push(vec![p.delay_ps, p.visibility, interferometer::coherence_envelope(r.fit.f_l.value, r.fit.f_g.value, p.delay_ps)]);
            }
            t.render()
        }
    };
    emit(g, &table)?;
    Ok(EXIT_OK)
}
