//! Subcommands: `ingest`, `analyze`, `report`, `identities`, `generate`, `serve`.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use capgrowth_core::analysis::synthetic_panel;
use capgrowth_core::identities::DEFAULT_TOLERANCE;
use capgrowth_core::ingest::{read_weight_overrides, IngestConfig};
use capgrowth_core::report::table_file_name;
use capgrowth_core::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::api;
use crate::error::CliError;

pub const PORT_ENV: &str = "CAPGROWTH_PORT";

#[derive(Debug, Parser)]
#[command(name = "capgrowth", version, about = "Thrift-index analysis of national-accounts panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a WID long-format file into a panel CSV.
    Ingest(IngestArgs),
    /// Derive all statistics and write a snapshot.
    Analyze(AnalyzeArgs),
    /// Render a table or figure from a snapshot.
    Report(ReportArgs),
    /// Check the human-capital output identity on a ledger.
    Identities(IdentityArgs),
    /// Write a synthetic thrift or free-growth panel.
    Generate(GenerateArgs),
    /// Serve a snapshot over a read-only JSON API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// WID long-format file or panel CSV (detected from the header).
    #[arg(long)]
    pub input: PathBuf,
    /// Field delimiter for WID files; guessed from the header when omitted.
    #[arg(long)]
    pub delimiter: Option<char>,
    /// TOML file with variable codes, percentile filter and delimiter.
    #[arg(long)]
    pub ingest_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Destination panel CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Fail when any row is malformed instead of reporting and skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightArg {
    Gdp,
    Unweighted,
}

impl From<WeightArg> for Weighting {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Gdp => Weighting::Gdp,
            WeightArg::Unweighted => Weighting::Unweighted,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    BeginOfPeriod,
    EndOfPeriod,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MissingGdpArg {
    Exclude,
    UnitWeight,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    PointwiseMean,
    RatioOfMeans,
}

fn parse_screen(raw: &str) -> Result<f64, String> {
    match raw.parse::<f64>() {
        Ok(s) if s.is_finite() && s >= 0.0 => Ok(s),
        _ => Err(format!("`{raw}` is not a finite nonnegative number")),
    }
}

fn parse_years(raw: &str) -> Result<(i32, i32), String> {
    let (a, b) = raw.split_once(':').ok_or("expected START:END")?;
    let start = a.trim().parse().map_err(|_| format!("bad start year `{a}`"))?;
    let end = b.trim().parse().map_err(|_| format!("bad end year `{b}`"))?;
    if start > end {
        return Err(format!("{start}:{end} is an empty range"));
    }
    Ok((start, end))
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Destination snapshot JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML analysis config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Headline screen on |g| (levels) and |Δg| (differences).
    #[arg(long, value_parser = parse_screen, allow_negative_numbers = true)]
    pub screen: Option<f64>,
    #[arg(long, value_enum)]
    pub weight: Option<WeightArg>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionArg>,
    #[arg(long, value_enum)]
    pub missing_gdp: Option<MissingGdpArg>,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
    /// Year range as START:END.
    #[arg(long, value_parser = parse_years)]
    pub years: Option<(i32, i32)>,
    /// `country,year,weight` CSV replacing GDP weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableArg {
    Headline,
    Ladder,
    PerCountry,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuantityArg {
    Ratio,
    Theta,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Ratio => Quantity::Ratio,
            QuantityArg::Theta => Quantity::Theta,
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("what").required(true).args(["table", "figure"]))]
pub struct ReportArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, value_enum)]
    pub table: Option<TableArg>,
    /// SVG figure of the yearly series.
    #[arg(long, value_enum)]
    pub figure: Option<QuantityArg>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Defaults to the snapshot's headline screen.
    #[arg(long, value_parser = parse_screen, allow_negative_numbers = true)]
    pub screen: Option<f64>,
    /// Figure year range as START:END.
    #[arg(long, value_parser = parse_years)]
    pub years: Option<(i32, i32)>,
    /// Leave the LOESS curve out of figures.
    #[arg(long)]
    pub no_loess: bool,
    /// File or existing directory; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    /// TOML ledger: either the five flows or all eight entries.
    #[arg(long, conflicts_with_all = ["d_k", "c_s", "c_p", "w_s", "depreciation"])]
    pub ledger: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, requires_all = ["c_s", "c_p", "w_s", "depreciation"])]
    pub d_k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c_p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w_s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub depreciation: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WorldArg {
    Thrift,
    FreeGrowth,
}

impl From<WorldArg> for WorldKind {
    fn from(w: WorldArg) -> Self {
        match w {
            WorldArg::Thrift => WorldKind::Thrift,
            WorldArg::FreeGrowth => WorldKind::FreeGrowth,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PanelFormatArg {
    Panel,
    Wid,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub world: WorldArg,
    /// Number of random countries (ignored with --path).
    #[arg(long, default_value_t = 50)]
    pub countries: usize,
    /// One explicit country: comma-separated s* (thrift) or g (free growth) per year.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub path: Option<Vec<f64>>,
    #[arg(long, default_value = "ZZ")]
    pub country: String,
    #[arg(long, default_value_t = 2000)]
    pub start_year: i32,
    #[arg(long, default_value_t = 100.0)]
    pub k0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "panel")]
    pub format: PanelFormatArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long, env = PORT_ENV, default_value_t = 8080, value_parser = clap::value_parser!(u16).range(1..))]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| CliError::data("WriteFailed", format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::read(path, e))
}

fn guess_delimiter(header: &str) -> char {
    [';', '\t', ','].into_iter().find(|&d| header.contains(d)).unwrap_or(',')
}

/// Load either a panel CSV or a WID long-format file.
fn load_panel(args: &InputArgs) -> Result<Panel, CliError> {
    let text = read_text(&args.input)?;
    let header = text.lines().next().unwrap_or_default();
    let columns: Vec<&str> = header.split(guess_delimiter(header)).map(str::trim).collect();
    if columns.contains(&"s_net") && columns.contains(&"k") {
        return Ok(Panel::from_csv(text.as_bytes())?);
    }
    let mut config = match &args.ingest_config {
        Some(path) => IngestConfig::from_toml_str(&read_text(path)?)?,
        None => IngestConfig { delimiter: guess_delimiter(header), ..IngestConfig::default() },
    };
    if let Some(d) = args.delimiter {
        if !d.is_ascii() {
            return Err(CliError::usage("InvalidDelimiter", "delimiter must be a single ASCII character"));
        }
        config.delimiter = d;
    }
    let parsed = parse_records(text.as_bytes(), config.delimiter_byte(), &Header::Auto)?;
    for e in &parsed.row_errors {
        eprintln!("warning: {}: {e}", args.input.display());
    }
    let panel = assemble_panel(&parsed.records, &config.roles)?;
    Ok(panel)
}

fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let text = read_text(&args.input.input)?;
    if args.strict {
        let header = text.lines().next().unwrap_or_default();
        let delimiter = args.input.delimiter.unwrap_or_else(|| guess_delimiter(header));
        let parsed = parse_records(text.as_bytes(), delimiter as u8, &Header::Auto)?;
        if let Some(first) = parsed.row_errors.first() {
            return Err(CliError::data(
                "MalformedRows",
                format!("{} malformed rows, first at {first}", parsed.row_errors.len()),
            ));
        }
    }
    let panel = load_panel(&args.input)?;
    for w in &panel.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&args.out, panel.to_csv().as_bytes())?;
    println!(
        "{} countries, {} observations -> {}",
        panel.countries.len(),
        panel.observation_count(),
        args.out.display()
    );
    Ok(())
}

fn analysis_config(args: &AnalyzeArgs) -> Result<AnalysisConfig, CliError> {
    let mut config: AnalysisConfig = match &args.config {
        Some(path) => toml::from_str(&read_text(path)?)
            .map_err(|e| CliError::usage("InvalidConfig", format!("{}: {}", path.display(), e.message())))?,
        None => AnalysisConfig::default(),
    };
    if let Some(s) = args.screen {
        config.screen = s;
    }
    if let Some(w) = args.weight {
        config.weighting = w.into();
    }
    if let Some(c) = args.convention {
        config.convention = match c {
            ConventionArg::BeginOfPeriod => Convention::BeginOfPeriod,
            ConventionArg::EndOfPeriod => Convention::EndOfPeriod,
        };
    }
    if let Some(m) = args.missing_gdp {
        config.missing_gdp_policy = match m {
            MissingGdpArg::Exclude => MissingGdpPolicy::Exclude,
            MissingGdpArg::UnitWeight => MissingGdpPolicy::UnitWeight,
        };
    }
    if let Some(a) = args.aggregation {
        config.aggregation = match a {
            AggregationArg::PointwiseMean => Aggregation::PointwiseMean,
            AggregationArg::RatioOfMeans => Aggregation::RatioOfMeans,
        };
    }
    if let Some(y) = args.years {
        config.year_range = y;
    }
    config.validate()?;
    Ok(config)
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let config = analysis_config(args)?;
    let mut panel = load_panel(&args.input)?;
    if let Some(path) = &args.weights {
        let file = fs::File::open(path).map_err(|e| CliError::read(path, e))?;
        panel.apply_weight_overrides(&read_weight_overrides(file)?);
    }
    let snapshot = AnalysisSnapshot::build(&panel, &config)?;
    for w in &snapshot.warnings {
        eprintln!("warning: {w}");
    }
    write_atomic(&args.out, snapshot.to_json().as_bytes())?;
    let headline = match &snapshot.headline {
        Some(h) => format!(
            "mean ratio {}, mean theta {}",
            h.mean_ratio.map_or("n/a".into(), report::format_sig),
            h.mean_theta.map_or("n/a".into(), report::format_sig)
        ),
        None => "no data at the headline screen".into(),
    };
    println!(
        "{} countries, screen {}, {}: {headline} -> {}",
        snapshot.countries.len(),
        config.screen,
        weighting_name(config.weighting),
        args.out.display()
    );
    Ok(())
}

fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::Gdp => "gdp",
        Weighting::Unweighted => "unweighted",
    }
}

pub fn load_snapshot(path: &Path) -> Result<AnalysisSnapshot, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            CliError::data("SnapshotMissing", format!("{}: {e}", path.display()))
        } else {
            CliError::read(path, e)
        }
    })?;
    let snapshot = AnalysisSnapshot::from_json(&text)
        .map_err(|e| CliError::data("SnapshotInvalid", format!("{}: {e}", path.display())))?;
    if snapshot.schema_version != SCHEMA_VERSION {
        return Err(CliError::data(
            "SnapshotInvalid",
            format!("schema {} is not {SCHEMA_VERSION}", snapshot.schema_version),
        ));
    }
    Ok(snapshot)
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let snapshot = load_snapshot(&args.snapshot)?;
    let screen = args.screen.unwrap_or(snapshot.config.screen);
    let (name, bytes) = match (args.table, args.figure) {
        (Some(table), _) => {
            let spec = TableSpec {
                kind: match table {
                    TableArg::Headline => TableKind::Headline,
                    TableArg::Ladder => TableKind::Ladder,
                    TableArg::PerCountry => TableKind::PerCountry,
                },
                screen,
                format: match args.format {
                    FormatArg::Csv => TableFormat::Csv,
                    FormatArg::Json => TableFormat::Json,
                    FormatArg::Text => TableFormat::Text,
                },
            };
            (table_file_name(&spec, snapshot.config.weighting), render_table(&snapshot, &spec)?)
        }
        (None, Some(quantity)) => {
            let mut spec = FigureSpec::new(quantity.into(), screen);
            spec.year_range = args.years;
            spec.include_loess = !args.no_loess;
            (spec.file_name(snapshot.config.weighting), render_figure(&snapshot, &spec)?)
        }
        (None, None) => return Err(CliError::usage("MissingArgument", "give --table or --figure")),
    };
    match &args.out {
        Some(out) => {
            let path = if out.is_dir() { out.join(name) } else { out.clone() };
            write_atomic(&path, &bytes)?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::internal("WriteFailed", e.to_string()))?,
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Flows {
    d_k: f64,
    c_s: f64,
    c_p: f64,
    w_s: f64,
    depreciation: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LedgerFile {
    Full(IdentityLedger),
    Flows(Flows),
}

fn identities(args: &IdentityArgs) -> Result<(), CliError> {
    let ledger = match (&args.ledger, args.d_k) {
        (Some(path), _) => match toml::from_str::<LedgerFile>(&read_text(path)?) {
            Ok(LedgerFile::Full(l)) => l,
            Ok(LedgerFile::Flows(f)) => IdentityLedger::from_flows(f.d_k, f.c_s, f.c_p, f.w_s, f.depreciation),
            Err(_) => {
                return Err(CliError::usage(
                    "InvalidLedger",
                    format!(
                        "{}: expected d_k, c_s, c_p, w_s, depreciation (and optionally c, d_h, y)",
                        path.display()
                    ),
                ))
            }
        },
        (None, Some(d_k)) => {
            let get = |v: Option<f64>| v.expect("clap enforces the flow flags together");
            IdentityLedger::from_flows(d_k, get(args.c_s), get(args.c_p), get(args.w_s), get(args.depreciation))
        }
        (None, None) => return Err(CliError::usage("MissingArgument", "give --ledger or the five flow flags")),
    };
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::usage("InvalidTolerance", "tolerance must be finite and nonnegative"));
    }
    let report = check_b4(&ledger, args.tol)?;
    if args.json {
        let body = serde_json::json!({ "ledger": ledger, "report": report });
        println!("{}", serde_json::to_string_pretty(&body).expect("report serializes"));
    } else {
        println!("Y (dK + dH + C_p)      = {}", report.y_extended);
        println!("Y (dK + C + W_s - D_H) = {}", report.y_substituted);
        println!("residual               = {:e}", report.residual);
        println!("tolerance              = {:e}", report.tolerance);
        println!("{}", if report.pass { "PASS" } else { "FAIL" });
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::data(
            "IdentityFailed",
            format!("residual {:e} exceeds tolerance {:e}", report.residual, report.tolerance),
        ))
    }
}

fn wid_long(panel: &Panel) -> String {
    let mut out = String::from("country;variable;percentile;year;value\n");
    for (country, obs) in &panel.countries {
        for o in obs {
            out.push_str(&format!("{country};msavin999i;p0p100;{};{}\n", o.year, o.s_net));
            out.push_str(&format!("{country};mnweal999i;p0p100;{};{}\n", o.year, o.k));
            if let Some(gdp) = o.gdp {
                out.push_str(&format!("{country};mgdpro999i;p0p100;{};{gdp}\n", o.year));
            }
        }
    }
    out
}

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    if !(args.noise_sd.is_finite() && args.noise_sd >= 0.0) {
        return Err(CliError::usage("InvalidNoise", "noise sd must be finite and nonnegative"));
    }
    let panel = match &args.path {
        Some(path) => Panel::from_observations(generate_world(&WorldSpec {
            kind: args.world.into(),
            country: args.country.clone(),
            start_year: args.start_year,
            k0: args.k0,
            path: path.clone(),
            noise_sd: args.noise_sd,
            seed: args.seed,
        })?),
        None => {
            if args.countries == 0 {
                return Err(CliError::usage("InvalidCount", "need at least one country"));
            }
            synthetic_panel(args.world.into(), args.countries, args.noise_sd, args.seed)?
        }
    };
    let text = match args.format {
        PanelFormatArg::Panel => panel.to_csv(),
        PanelFormatArg::Wid => wid_long(&panel),
    };
    write_atomic(&args.out, text.as_bytes())?;
    println!(
        "{} countries, {} observations -> {}",
        panel.countries.len(),
        panel.observation_count(),
        args.out.display()
    );
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let snapshot = Arc::new(load_snapshot(&args.snapshot)?);
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal("Runtime", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            if e.kind() == io::ErrorKind::AddrInUse {
                CliError::data("PortInUse", format!("{addr}: {e}"))
            } else {
                CliError::internal("BindFailed", format!("{addr}: {e}"))
            }
        })?;
        eprintln!("serving {} on http://{addr}", args.snapshot.display());
        axum::serve(listener, api::router(snapshot))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::internal("ServeFailed", e.to_string()))
    })
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Identities(a) => identities(a),
        Command::Generate(a) => generate(a),
        Command::Serve(a) => serve(a),
    }
}
