//! Tables and SVG figures rendered from an [`AnalysisSnapshot`].
//!
//! Rendering is a pure function of the snapshot and the spec: the same inputs
//! always produce the same bytes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AggregateSummary, AnalysisError, AnalysisSnapshot, Quantity, Weighting, YearlySeries};
use crate::stats::RegressionResult;

pub const SIGNIFICANT_DIGITS: usize = 4;
const PERFECT_FIT: &str = "undefined (perfect fit)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("snapshot has no summary at screen {0}")]
    UnknownScreenLevel(f64),
    #[error("no yearly data for {0} in the requested range")]
    EmptySeries(&'static str),
    #[error("year range {0}..={1} lies outside the snapshot range")]
    RangeOutsideSnapshot(i32, i32),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Headline,
    Ladder,
    PerCountry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
            TableFormat::Text => "txt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub kind: TableKind,
    pub screen: f64,
    pub format: TableFormat,
}

/// Round to [`SIGNIFICANT_DIGITS`] and print; fixed notation for magnitudes
/// in `[1e-4, 1e4)`, scientific otherwise.
pub fn format_sig(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, value);
    let exponent: i32 = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("scientific format has an exponent");
    if (-4..4).contains(&exponent) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
        format!("{value:.decimals$}")
    } else {
        sci
    }
}

fn rounded(value: f64) -> f64 {
    format_sig(value).parse().expect("format_sig output parses")
}

#[derive(Debug, Clone)]
enum Cell {
    Text(String),
    Num(Option<f64>),
    Count(usize),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(Some(v)) => format_sig(*v),
            Cell::Num(None) => String::new(),
            Cell::Count(n) => n.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Text(s) => s.clone().into(),
            Cell::Num(Some(v)) => serde_json::Number::from_f64(rounded(*v)).map_or(serde_json::Value::Null, Into::into),
            Cell::Num(None) => serde_json::Value::Null,
            Cell::Count(n) => (*n).into(),
        }
    }
}

struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, format: TableFormat) -> Vec<u8> {
        match format {
            TableFormat::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::text).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out.into_bytes()
            }
            TableFormat::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let map: serde_json::Map<String, serde_json::Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(k, c)| (k.to_string(), c.json()))
                            .collect();
                        serde_json::Value::Object(map)
                    })
                    .collect();
                let mut text = serde_json::to_string_pretty(&rows).expect("table serializes");
                text.push('\n');
                text.into_bytes()
            }
            TableFormat::Text => {
                let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
                let widths: Vec<usize> = self
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(i, c)| body.iter().map(|r| r[i].chars().count()).chain([c.len()]).max().unwrap_or(0))
                    .collect();
                let line = |cells: Vec<String>| {
                    let padded: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect();
                    padded.join("  ").trim_end().to_string() + "\n"
                };
                let mut out = line(self.columns.iter().map(|c| c.to_string()).collect());
                out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect()));
                for row in body {
                    out.push_str(&line(row));
                }
                out.into_bytes()
            }
        }
    }
}

fn weighting_label(w: Weighting) -> &'static str {
    match w {
        Weighting::Gdp => "gdp",
        Weighting::Unweighted => "unweighted",
    }
}

fn t_cell(reg: Option<&RegressionResult>) -> Cell {
    match reg {
        Some(r) if r.perfect_fit => Cell::Text(PERFECT_FIT.into()),
        Some(r) => Cell::Num(r.t_vs_one),
        None => Cell::Num(None),
    }
}

fn headline_table(summary: &AggregateSummary) -> Table {
    let screen = Cell::Num(Some(summary.screen));
    let weighting = Cell::Text(weighting_label(summary.weighting).into());
    let mean_row = |name: &str, value: Option<f64>, n: usize, note: &str| {
        vec![
            screen.clone(),
            weighting.clone(),
            Cell::Text(name.into()),
            Cell::Num(value),
            Cell::Num(None),
            Cell::Count(n),
            Cell::Num(None),
            Cell::Text(note.into()),
        ]
    };
    let reg_row = |name: &str, reg: Option<&RegressionResult>| {
        vec![
            screen.clone(),
            weighting.clone(),
            Cell::Text(name.into()),
            Cell::Num(reg.map(|r| r.slope)),
            Cell::Num(reg.and_then(|r| r.slope_se)),
            Cell::Count(reg.map_or(0, |r| r.n)),
            t_cell(reg),
            Cell::Text("slope = 1 under thrift theory".into()),
        ]
    };
    Table {
        columns: &["screen", "weighting", "statistic", "value", "slope_se", "n", "t_vs_one", "h0"],
        rows: vec![
            mean_row("mean_ratio", summary.mean_ratio, summary.n_ratio, "ratio = 1 under thrift theory"),
            mean_row("mean_theta", summary.mean_theta, summary.n_theta, "theta = 1 under thrift theory"),
            reg_row("slope_s_on_g", summary.reg_levels.as_ref()),
            reg_row("slope_ds_on_dg", summary.reg_diffs.as_ref()),
        ],
    }
}

fn ladder_table(ladder: &[AggregateSummary]) -> Table {
    let mut sorted: Vec<&AggregateSummary> = ladder.iter().collect();
    sorted.sort_by(|a, b| a.screen.total_cmp(&b.screen));
    Table {
        columns: &[
            "screen",
            "n_ratio",
            "mean_ratio",
            "n_theta",
            "mean_theta",
            "slope_s_on_g",
            "slope_s_on_g_se",
            "slope_ds_on_dg",
            "slope_ds_on_dg_se",
            "countries",
        ],
        rows: sorted
            .into_iter()
            .map(|s| {
                vec![
                    Cell::Num(Some(s.screen)),
                    Cell::Count(s.n_ratio),
                    Cell::Num(s.mean_ratio),
                    Cell::Count(s.n_theta),
                    Cell::Num(s.mean_theta),
                    Cell::Num(s.reg_levels.map(|r| r.slope)),
                    Cell::Num(s.reg_levels.and_then(|r| r.slope_se)),
                    Cell::Num(s.reg_diffs.map(|r| r.slope)),
                    Cell::Num(s.reg_diffs.and_then(|r| r.slope_se)),
                    Cell::Count(s.countries),
                ]
            })
            .collect(),
    }
}

fn country_table(snapshot: &AnalysisSnapshot, screen: f64) -> Table {
    Table {
        columns: &["country", "first_year", "last_year", "n_ratio", "mean_ratio", "n_theta", "mean_theta"],
        rows: snapshot
            .country_rows(screen)
            .into_iter()
            .map(|r| {
                vec![
                    Cell::Text(r.country),
                    Cell::Text(r.first_year.to_string()),
                    Cell::Text(r.last_year.to_string()),
                    Cell::Count(r.n_ratio),
                    Cell::Num(r.mean_ratio),
                    Cell::Count(r.n_theta),
                    Cell::Num(r.mean_theta),
                ]
            })
            .collect(),
    }
}

/// The stored summary at `screen`: a ladder level or the headline screen.
pub fn stored_summary(snapshot: &AnalysisSnapshot, screen: f64) -> Result<&AggregateSummary, ReportError> {
    snapshot
        .ladder_level(screen)
        .or(snapshot.headline.as_ref().filter(|h| h.screen == screen))
        .ok_or(ReportError::UnknownScreenLevel(screen))
}

pub fn render_table(snapshot: &AnalysisSnapshot, spec: &TableSpec) -> Result<Vec<u8>, ReportError> {
    let table = match spec.kind {
        TableKind::Headline => {
            let summary = stored_summary(snapshot, spec.screen)?;
            if summary.is_empty() {
                return Err(ReportError::UnknownScreenLevel(spec.screen));
            }
            headline_table(summary)
        }
        TableKind::Ladder => ladder_table(&snapshot.ladder),
        TableKind::PerCountry => {
            if !(spec.screen.is_finite() && spec.screen >= 0.0) {
                return Err(ReportError::UnknownScreenLevel(spec.screen));
            }
            country_table(snapshot, spec.screen)
        }
    };
    Ok(table.render(spec.format))
}

pub fn table_file_name(spec: &TableSpec, weighting: Weighting) -> String {
    let kind = match spec.kind {
        TableKind::Headline => "headline",
        TableKind::Ladder => "ladder",
        TableKind::PerCountry => "per-country",
    };
    format!(
        "table_{kind}_screen-{}_{}.{}",
        spec.screen,
        weighting_label(weighting),
        spec.format.extension()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub quantity: Quantity,
    pub screen: f64,
    /// Defaults to the snapshot's configured range.
    pub year_range: Option<(i32, i32)>,
    pub include_loess: bool,
    pub width: f64,
    pub height: f64,
}

impl FigureSpec {
    pub fn new(quantity: Quantity, screen: f64) -> Self {
        Self {
            quantity,
            screen,
            year_range: None,
            include_loess: true,
            width: 720.0,
            height: 405.0,
        }
    }

    pub fn file_name(&self, weighting: Weighting) -> String {
        format!(
            "figure_{}_screen-{}_{}.svg",
            self.quantity.as_str(),
            self.screen,
            weighting_label(weighting)
        )
    }
}

const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

/// Maps data coordinates onto the plot area.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (self.width - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.height - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (self.height - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn padded(lo: f64, hi: f64, fraction: f64, flat: f64) -> (f64, f64) {
    if hi - lo > 0.0 {
        let pad = (hi - lo) * fraction;
        (lo - pad, hi + pad)
    } else {
        (lo - flat, hi + flat)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(frame: &Frame, class: &str, stroke: &str, points: &[(f64, f64)]) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.6},{:.6}", frame.px(x), frame.py(y)))
        .collect();
    format!(
        "<polyline class=\"{class}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Yearly weighted averages as an SVG line chart, with the LOESS curve on top.
pub fn render_figure(snapshot: &AnalysisSnapshot, spec: &FigureSpec) -> Result<Vec<u8>, ReportError> {
    let configured = snapshot.config.year_range;
    let (start, end) = spec.year_range.unwrap_or(configured);
    if start > end || start < configured.0 || end > configured.1 {
        return Err(ReportError::RangeOutsideSnapshot(start, end));
    }
    let series = snapshot
        .yearly(spec.quantity, spec.screen, None)
        .map_err(|e| match e {
            AnalysisError::EmptyYearRange { .. } => ReportError::EmptySeries(spec.quantity.as_str()),
            other => other.into(),
        })?;
    render_series(&series, spec, (start, end))
}

fn render_series(series: &YearlySeries, spec: &FigureSpec, (start, end): (i32, i32)) -> Result<Vec<u8>, ReportError> {
    let in_range = |year: i32| (start..=end).contains(&year);
    let averages: Vec<(f64, f64)> = series
        .points
        .iter()
        .filter(|p| in_range(p.year))
        .map(|p| (p.year as f64, p.mean))
        .collect();
    if averages.is_empty() {
        return Err(ReportError::EmptySeries(spec.quantity.as_str()));
    }
    let smooth: Vec<(f64, f64)> = match (&series.loess, spec.include_loess) {
        (Some(fit), true) => fit
            .iter()
            .filter(|(y, _)| in_range(*y))
            .map(|&(y, v)| (y as f64, v))
            .collect(),
        _ => Vec::new(),
    };

    let xs = averages.iter().map(|p| p.0);
    let (x_lo, x_hi) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let ys = averages.iter().chain(&smooth).map(|p| p.1);
    let (y_lo, y_hi) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let (x0, x1) = padded(x_lo, x_hi, 0.0, 0.5);
    let (y0, y1) = padded(y_lo, y_hi, 0.05, 0.5);
    let frame = Frame {
        x0,
        x1,
        y0,
        y1,
        width: spec.width,
        height: spec.height,
    };

    let (symbol, label) = match spec.quantity {
        Quantity::Ratio => ("s*/g(K)", "s*/g(K)"),
        Quantity::Theta => ("θ", "θ = Δs*/Δg(K)"),
    };
    let weighting = match series.weighting {
        Weighting::Gdp => "GDP-weighted",
        Weighting::Unweighted => "unweighted",
    };
    let title = format!(
        "Average {symbol} over all countries, {weighting}, screen {}, {start}-{end}",
        format_sig(series.screen)
    );

    let mut svg = String::new();
    let (w, h) = (spec.width, spec.height);
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.6}\" height=\"{h:.6}\" viewBox=\"0 0 {w:.6} {h:.6}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text class=\"title\" x=\"{:.6}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        w / 2.0,
        escape(&title)
    );
    let (left, right) = (MARGIN_LEFT, w - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, h - MARGIN_BOTTOM);
    let _ = writeln!(
        svg,
        "<path class=\"axes\" fill=\"none\" stroke=\"black\" d=\"M{left:.6},{top:.6} L{left:.6},{bottom:.6} L{right:.6},{bottom:.6}\"/>"
    );

    let first_tick = (x_lo / 5.0).ceil() as i32 * 5;
    let year_ticks: Vec<i32> = if x_hi - x_lo < 5.0 {
        averages.iter().map(|p| p.0 as i32).collect()
    } else {
        (first_tick..=x_hi as i32).step_by(5).collect()
    };
    for year in year_ticks {
        let x = frame.px(year as f64);
        let _ = writeln!(
            svg,
            "<text class=\"xtick\" x=\"{x:.6}\" y=\"{:.6}\" text-anchor=\"middle\" font-size=\"11\">{year}</text>",
            bottom + 16.0
        );
    }
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let y = frame.py(v);
        let _ = writeln!(
            svg,
            "<text class=\"ytick\" x=\"{:.6}\" y=\"{y:.6}\" text-anchor=\"end\" font-size=\"11\">{}</text>",
            left - 6.0,
            format_sig(v)
        );
    }
    let _ = writeln!(
        svg,
        "<text class=\"xlabel\" x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"middle\" font-size=\"12\">year</text>",
        (left + right) / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        svg,
        "<text class=\"ylabel\" x=\"14\" y=\"{:.6}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {:.6})\">{}</text>",
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(label)
    );
    svg.push_str(&polyline(&frame, "series", "#EF3B2C", &averages));
    if !smooth.is_empty() {
        svg.push_str(&polyline(&frame, "loess", "#386CB0", &smooth));
    }
    svg.push_str("</svg>\n");
    Ok(svg.into_bytes())
}
