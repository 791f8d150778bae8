//! WID-style long-format ingestion.
//!
//! A WID download is a delimiter-separated table with one value per row,
//! keyed by country, variable code, population slice (percentile) and year.
//! [`parse_records`] turns the bytes into [`RawRecord`]s, collecting row-level
//! problems instead of dropping them, and [`assemble_panel`] maps variable
//! codes onto roles through a [`RoleMap`] and builds one year-sorted series of
//! [`Observation`]s per country.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earliest and latest calendar years accepted at ingest.
pub const YEAR_BOUNDS: (i32, i32) = (1800, 2100);

const REQUIRED_COLUMNS: [&str; 5] = ["country", "variable", "percentile", "year", "value"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("header lacks required column `{0}`")]
    MissingColumn(String),
    #[error("invalid role map: {0}")]
    InvalidRoleMap(String),
    #[error(
        "conflicting duplicate for {country} {role} {year}: {first} ({first_code}) vs {second} ({second_code})"
    )]
    ConflictingDuplicate {
        country: String,
        role: Role,
        year: i32,
        first: f64,
        first_code: String,
        second: f64,
        second_code: String,
    },
    #[error("no country reports both net saving and capital")]
    NoQualifyingCountries,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("malformed panel file at line {line}: {message}")]
    PanelFormat { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of a WID long-format file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub country: String,
    pub variable: String,
    pub percentile: String,
    pub year: i32,
    pub value: f64,
}

/// Column layout of the input.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Header {
    /// First row names the columns; required columns may appear in any order.
    #[default]
    Auto,
    /// The file has no header row; columns are named by this list.
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowErrorKind {
    BadNumber,
    InvalidRecord,
}

impl fmt::Display for RowErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowErrorKind::BadNumber => f.write_str("BadNumber"),
            RowErrorKind::InvalidRecord => f.write_str("InvalidRecord"),
        }
    }
}

/// A data row that could not be turned into a [`RawRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based physical line number in the input.
    pub line: u64,
    pub kind: RowErrorKind,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<RawRecord>,
    pub row_errors: Vec<RowError>,
}

/// Parse delimiter-separated WID rows.
///
/// Well-formed rows come back in file order. Rows with unparseable numbers or
/// out-of-range fields are reported in [`ParseOutcome::row_errors`] with their
/// line numbers; only structural problems (no data, missing columns) fail the
/// whole parse. Duplicate keys are kept here and resolved by
/// [`assemble_panel`].
pub fn parse_records<R: Read>(
    input: R,
    delimiter: u8,
    header: &Header,
) -> Result<ParseOutcome, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut rows = reader.records();
    let names: Vec<String> = match header {
        Header::Explicit(names) => names.clone(),
        Header::Auto => match rows.next() {
            Some(first) => first?.iter().map(str::to_string).collect(),
            None => return Err(IngestError::EmptyInput),
        },
    };
    let columns = locate_columns(&names)?;

    let mut outcome = ParseOutcome::default();
    let mut saw_row = false;
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(str::is_empty) {
            continue;
        }
        saw_row = true;
        match record_from_row(&row, &columns) {
            Ok(record) => outcome.records.push(record),
            Err((kind, message)) => outcome.row_errors.push(RowError {
                line,
                kind,
                message,
            }),
        }
    }
    if !saw_row {
        return Err(IngestError::EmptyInput);
    }
    Ok(outcome)
}

/// Indices of the required columns, in `REQUIRED_COLUMNS` order.
fn locate_columns(names: &[String]) -> Result<[usize; 5], IngestError> {
    let mut found = [0usize; 5];
    for (slot, required) in found.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = names
            .iter()
            .position(|n| n.trim().eq_ignore_ascii_case(required))
            .ok_or_else(|| IngestError::MissingColumn(required.to_string()))?;
    }
    Ok(found)
}

fn record_from_row(
    row: &csv::StringRecord,
    cols: &[usize; 5],
) -> Result<RawRecord, (RowErrorKind, String)> {
    let field = |i: usize| {
        row.get(cols[i]).ok_or_else(|| {
            (
                RowErrorKind::InvalidRecord,
                format!("missing `{}` field", REQUIRED_COLUMNS[i]),
            )
        })
    };
    let country = field(0)?;
    let variable = field(1)?;
    let percentile = field(2)?;
    let year_text = field(3)?;
    let value_text = field(4)?;

    if country.is_empty() {
        return Err((RowErrorKind::InvalidRecord, "empty country code".into()));
    }
    if variable.is_empty() {
        return Err((RowErrorKind::InvalidRecord, "empty variable code".into()));
    }
    let year: i32 = year_text
        .parse()
        .map_err(|_| (RowErrorKind::BadNumber, format!("year `{year_text}`")))?;
    if !(YEAR_BOUNDS.0..=YEAR_BOUNDS.1).contains(&year) {
        return Err((
            RowErrorKind::InvalidRecord,
            format!("year {year} outside [{}, {}]", YEAR_BOUNDS.0, YEAR_BOUNDS.1),
        ));
    }
    let value: f64 = value_text
        .parse()
        .map_err(|_| (RowErrorKind::BadNumber, format!("value `{value_text}`")))?;
    if !value.is_finite() {
        return Err((RowErrorKind::BadNumber, format!("non-finite value `{value_text}`")));
    }
    Ok(RawRecord {
        country: country.to_string(),
        variable: variable.to_string(),
        percentile: percentile.to_string(),
        year,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    /// `mnweal` matches `mnweal999i` and friends.
    #[default]
    Prefix,
}

/// The role a WID variable plays in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    NetSaving,
    Capital,
    Gdp,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::NetSaving => "net_saving",
            Role::Capital => "capital",
            Role::Gdp => "gdp",
        })
    }
}

/// Maps WID variable codes onto analysis roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleMap {
    pub net_saving_code: String,
    pub capital_code: String,
    pub gdp_code: String,
    pub percentile_filter: String,
    pub match_mode: MatchMode,
}

impl Default for RoleMap {
    fn default() -> Self {
        Self {
            net_saving_code: "msavin".into(),
            capital_code: "mnweal".into(),
            gdp_code: "mgdpro".into(),
            percentile_filter: "p0p100".into(),
            match_mode: MatchMode::Prefix,
        }
    }
}

impl RoleMap {
    fn codes(&self) -> [(Role, &str); 3] {
        [
            (Role::NetSaving, self.net_saving_code.as_str()),
            (Role::Capital, self.capital_code.as_str()),
            (Role::Gdp, self.gdp_code.as_str()),
        ]
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let codes = self.codes();
        for (role, code) in codes {
            if code.is_empty() {
                return Err(IngestError::InvalidRoleMap(format!("empty code for {role}")));
            }
        }
        for (i, (ra, a)) in codes.iter().enumerate() {
            for (rb, b) in &codes[i + 1..] {
                let clash = match self.match_mode {
                    MatchMode::Exact => a == b,
                    MatchMode::Prefix => a.starts_with(b) || b.starts_with(a),
                };
                if clash {
                    return Err(IngestError::InvalidRoleMap(format!(
                        "codes for {ra} (`{a}`) and {rb} (`{b}`) are not distinguishable"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn role_of(&self, variable: &str) -> Option<Role> {
        self.codes().into_iter().find_map(|(role, code)| {
            let hit = match self.match_mode {
                MatchMode::Exact => variable == code,
                MatchMode::Prefix => variable.starts_with(code),
            };
            hit.then_some(role)
        })
    }
}

/// Ingest settings as read from a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub delimiter: char,
    #[serde(flatten)]
    pub roles: RoleMap,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            delimiter: ';',
            roles: RoleMap::default(),
        }
    }
}

impl IngestConfig {
    /// Parse `key = value` settings; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, IngestError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| IngestError::Config(e.message().to_string()))?;
        const KNOWN: [&str; 6] = [
            "delimiter",
            "net_saving_code",
            "capital_code",
            "gdp_code",
            "percentile_filter",
            "match_mode",
        ];
        if let Some(key) = table.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(IngestError::Config(format!("unknown key `{key}`")));
        }
        let config: IngestConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| IngestError::Config(e.message().to_string()))?;
        if !config.delimiter.is_ascii() {
            return Err(IngestError::Config("delimiter must be a single ASCII character".into()));
        }
        config.roles.validate()?;
        Ok(config)
    }

    pub fn delimiter_byte(&self) -> u8 {
        self.delimiter as u8
    }
}

/// One country-year of raw inputs, in constant local currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub country: String,
    pub year: i32,
    /// Net national saving.
    pub s_net: f64,
    /// Market-value capital; always positive.
    pub k: f64,
    /// GDP, used only as a weight.
    pub gdp: Option<f64>,
}

/// Year-sorted observations per country, plus non-fatal ingest warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    pub countries: BTreeMap<String, Vec<Observation>>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Slots<'a> {
    values: [Option<(f64, &'a str)>; 3],
}

/// Build per-country panels from parsed records.
///
/// A country-year qualifies when both net saving and capital are present for
/// the configured percentile. Capital at or below zero drops the year with a
/// warning. The result does not depend on record order.
pub fn assemble_panel(records: &[RawRecord], roles: &RoleMap) -> Result<Panel, IngestError> {
    roles.validate()?;

    let mut relevant: Vec<(&RawRecord, Role)> = records
        .iter()
        .filter(|r| r.percentile == roles.percentile_filter)
        .filter_map(|r| roles.role_of(&r.variable).map(|role| (r, role)))
        .collect();
    // Sorting makes conflict reporting independent of input order.
    relevant.sort_by(|(a, ra), (b, rb)| {
        (&a.country, a.year, ra, &a.variable)
            .cmp(&(&b.country, b.year, rb, &b.variable))
            .then(a.value.total_cmp(&b.value))
    });

    let mut cells: BTreeMap<(&str, i32), Slots> = BTreeMap::new();
    for (record, role) in relevant {
        let slot = &mut cells
            .entry((record.country.as_str(), record.year))
            .or_default()
            .values[role as usize];
        match slot {
            Some((existing, code)) if *existing != record.value => {
                return Err(IngestError::ConflictingDuplicate {
                    country: record.country.clone(),
                    role,
                    year: record.year,
                    first: *existing,
                    first_code: code.to_string(),
                    second: record.value,
                    second_code: record.variable.clone(),
                });
            }
            Some(_) => {}
            None => *slot = Some((record.value, record.variable.as_str())),
        }
    }

    let mut panel = Panel::default();
    for ((country, year), slots) in cells {
        let [s_net, k, gdp] = slots.values.map(|v| v.map(|(x, _)| x));
        let (Some(s_net), Some(k)) = (s_net, k) else {
            continue;
        };
        if k <= 0.0 {
            panel
                .warnings
                .push(format!("{country} {year}: capital {k} is not positive, year dropped"));
            continue;
        }
        let gdp = match gdp {
            Some(g) if g < 0.0 => {
                panel
                    .warnings
                    .push(format!("{country} {year}: negative GDP {g} ignored"));
                None
            }
            other => other,
        };
        panel
            .countries
            .entry(country.to_string())
            .or_default()
            .push(Observation {
                country: country.to_string(),
                year,
                s_net,
                k,
                gdp,
            });
    }
    if panel.countries.is_empty() {
        return Err(IngestError::NoQualifyingCountries);
    }
    Ok(panel)
}

const PANEL_HEADER: [&str; 5] = ["country", "year", "s_net", "k", "gdp"];

impl Panel {
    pub fn from_observations<I: IntoIterator<Item = Observation>>(observations: I) -> Self {
        let mut panel = Panel::default();
        for obs in observations {
            panel.countries.entry(obs.country.clone()).or_default().push(obs);
        }
        for series in panel.countries.values_mut() {
            series.sort_by_key(|o| o.year);
        }
        panel
    }

    pub fn observation_count(&self) -> usize {
        self.countries.values().map(Vec::len).sum()
    }

    /// Normalized dump: `country,year,s_net,k,gdp`, absent GDP as an empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = PANEL_HEADER.join(",");
        out.push('\n');
        for obs in self.countries.values().flatten() {
            let gdp = obs.gdp.map(|g| g.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                obs.country, obs.year, obs.s_net, obs.k, gdp
            ));
        }
        out
    }

    /// Read a normalized panel dump written by [`Panel::to_csv`].
    pub fn from_csv<R: Read>(input: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        let idx = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
        };
        let cols = [idx("country")?, idx("year")?, idx("s_net")?, idx("k")?, idx("gdp")?];
        let mut observations = Vec::new();
        let mut warnings = Vec::new();
        for row in reader.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |message: String| IngestError::PanelFormat { line, message };
            let get = |i: usize| row.get(cols[i]).unwrap_or("");
            let country = get(0);
            if country.is_empty() {
                return Err(bad("empty country".into()));
            }
            let year: i32 = get(1).parse().map_err(|_| bad(format!("year `{}`", get(1))))?;
            let num = |i: usize| -> Result<f64, IngestError> {
                get(i)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("{} `{}`", PANEL_HEADER[i], get(i))))
            };
            let s_net = num(2)?;
            let k = num(3)?;
            let gdp = if get(4).is_empty() { None } else { Some(num(4)?) };
            if k <= 0.0 {
                warnings.push(format!("{country} {year}: capital {k} is not positive, year dropped"));
                continue;
            }
            observations.push(Observation {
                country: country.to_string(),
                year,
                s_net,
                k,
                gdp: gdp.filter(|g| *g >= 0.0),
            });
        }
        let mut panel = Panel::from_observations(observations);
        for series in panel.countries.values() {
            if let Some(w) = series.windows(2).find(|w| w[0].year == w[1].year) {
                return Err(IngestError::PanelFormat {
                    line: 0,
                    message: format!("duplicate year {} for {}", w[0].year, w[0].country),
                });
            }
        }
        if panel.countries.is_empty() {
            return Err(IngestError::NoQualifyingCountries);
        }
        panel.warnings = warnings;
        Ok(panel)
    }

    /// Replace GDP weights with user-supplied values keyed by `(country, year)`.
    pub fn apply_weight_overrides(&mut self, overrides: &BTreeMap<(String, i32), f64>) {
        for obs in self.countries.values_mut().flatten() {
            if let Some(w) = overrides.get(&(obs.country.clone(), obs.year)) {
                obs.gdp = Some(*w);
            }
        }
    }
}

/// Read a `country,year,weight` table of weight overrides.
pub fn read_weight_overrides<R: Read>(
    input: R,
) -> Result<BTreeMap<(String, i32), f64>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| IngestError::PanelFormat { line, message };
        let country = row.get(0).unwrap_or("").to_string();
        let year: i32 = row
            .get(1)
            .and_then(|y| y.parse().ok())
            .ok_or_else(|| bad("bad year".into()))?;
        let weight: f64 = row
            .get(2)
            .and_then(|w| w.parse().ok())
            .filter(|w: &f64| w.is_finite() && *w >= 0.0)
            .ok_or_else(|| bad("weight must be a nonnegative number".into()))?;
        out.insert((country, year), weight);
    }
    Ok(out)
}
