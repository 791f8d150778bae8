//! Pooled statistics over all countries.
//!
//! Everything here folds over data ordered by `(country, year)`, so results
//! are bit-identical however the per-country derivation was scheduled.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::derive::{derive_series, Convention, DerivedPoint, ScreenSpec, SCREEN_LADDER};
use crate::ingest::{Observation, Panel};
use crate::stats::{loess_with, weighted_mean, weighted_ols, LoessOptions, RegressionResult, StatsError, WeightedSample};

pub const SCHEMA_VERSION: &str = "capgrowth.snapshot/1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no observations survive screen {screen}")]
    EmptyAfterScreen { screen: f64 },
    #[error("no year in {start}..={end} has data")]
    EmptyYearRange { start: i32, end: i32 },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid world path: {0}")]
    InvalidPath(String),
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    #[default]
    Gdp,
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingGdpPolicy {
    /// Observations without GDP drop out of weighted statistics.
    #[default]
    Exclude,
    UnitWeight,
}

/// How per-observation quotients are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Weighted mean of the pointwise quotients.
    #[default]
    PointwiseMean,
    /// Weighted mean of numerators over weighted mean of denominators.
    RatioOfMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// `s*/g(K)`, screened on `|g|`.
    Ratio,
    /// `Δs*/Δg(K)`, screened on `|Δg|`.
    Theta,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Ratio => "ratio",
            Quantity::Theta => "theta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub screen_ladder: Vec<f64>,
    /// Screen used for headline figures and yearly series.
    pub screen: f64,
    pub weighting: Weighting,
    pub convention: Convention,
    pub year_range: (i32, i32),
    pub missing_gdp_policy: MissingGdpPolicy,
    pub aggregation: Aggregation,
    pub loess: LoessOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            screen_ladder: SCREEN_LADDER.to_vec(),
            screen: 0.01,
            weighting: Weighting::Gdp,
            convention: Convention::BeginOfPeriod,
            year_range: (1980, 2022),
            missing_gdp_policy: MissingGdpPolicy::Exclude,
            aggregation: Aggregation::PointwiseMean,
            loess: LoessOptions::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: String| Err(AnalysisError::InvalidConfig(m));
        if self.screen_ladder.is_empty() {
            return bad("screen ladder is empty".into());
        }
        if self.screen_ladder.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("screen thresholds must be finite and nonnegative".into());
        }
        if self.screen_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad("screen ladder must be strictly increasing".into());
        }
        if !self.screen.is_finite() || self.screen < 0.0 {
            return bad(format!("screen {} must be finite and nonnegative", self.screen));
        }
        if self.year_range.0 > self.year_range.1 {
            return bad(format!("year range {}..={} is empty", self.year_range.0, self.year_range.1));
        }
        if !(self.loess.span > 0.0 && self.loess.span <= 1.0) || !(1..=2).contains(&self.loess.degree) {
            return bad("loess span must lie in (0, 1] and degree be 1 or 2".into());
        }
        Ok(())
    }

    fn in_range(&self, year: i32) -> bool {
        (self.year_range.0..=self.year_range.1).contains(&year)
    }

    /// Weight of a point under this configuration, `None` when it is excluded.
    pub fn weight_of(&self, point: &DerivedPoint) -> Option<f64> {
        match (self.weighting, point.weight, self.missing_gdp_policy) {
            (Weighting::Unweighted, _, _) => Some(1.0),
            (Weighting::Gdp, Some(w), _) => Some(w),
            (Weighting::Gdp, None, MissingGdpPolicy::UnitWeight) => Some(1.0),
            (Weighting::Gdp, None, MissingGdpPolicy::Exclude) => None,
        }
    }
}

/// Derived points per country, keyed and ordered by country code.
pub type DerivedPanels = BTreeMap<String, Vec<DerivedPoint>>;

/// Derive every country in parallel.
pub fn derive_panels(panel: &Panel, convention: Convention) -> DerivedPanels {
    panel
        .countries
        .par_iter()
        .map(|(country, obs)| (country.clone(), derive_series(obs, convention)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Pooled statistics at one screen level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub screen: f64,
    pub weighting: Weighting,
    pub mean_ratio: Option<f64>,
    pub mean_theta: Option<f64>,
    /// `s*` on `g(K)`.
    pub reg_levels: Option<RegressionResult>,
    /// `Δs*` on `Δg(K)`.
    pub reg_diffs: Option<RegressionResult>,
    pub n_ratio: usize,
    pub n_theta: usize,
    pub n_levels: usize,
    pub n_diffs: usize,
    pub countries: usize,
}

impl AggregateSummary {
    pub fn empty(screen: f64, weighting: Weighting) -> Self {
        Self {
            screen,
            weighting,
            mean_ratio: None,
            mean_theta: None,
            reg_levels: None,
            reg_diffs: None,
            n_ratio: 0,
            n_theta: 0,
            n_levels: 0,
            n_diffs: 0,
            countries: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_levels == 0 && self.n_diffs == 0
    }
}

/// `(denominator, numerator, weight)` of a quotient statistic.
struct Quotients(Vec<(f64, f64, f64)>);

impl Quotients {
    fn pooled(&self, aggregation: Aggregation) -> Option<f64> {
        let usable: Vec<_> = self.0.iter().filter(|(d, _, w)| *d != 0.0 && *w > 0.0).collect();
        match aggregation {
            Aggregation::PointwiseMean => {
                let pairs: Vec<(f64, f64)> = usable.iter().map(|(d, n, w)| (n / d, *w)).collect();
                weighted_mean(&pairs).ok()
            }
            Aggregation::RatioOfMeans => {
                let num = weighted_mean(&usable.iter().map(|(_, n, w)| (*n, *w)).collect::<Vec<_>>()).ok()?;
                let den = weighted_mean(&usable.iter().map(|(d, _, w)| (*d, *w)).collect::<Vec<_>>()).ok()?;
                (den != 0.0).then(|| num / den)
            }
        }
    }

    fn count(&self) -> usize {
        self.0.iter().filter(|(d, _, w)| *d != 0.0 && *w > 0.0).count()
    }

    fn regression(&self) -> Option<RegressionResult> {
        let samples: Vec<WeightedSample> =
            self.0.iter().map(|&(x, y, w)| WeightedSample::new(x, y, w)).collect();
        weighted_ols(&samples).ok()
    }
}

fn level_pair(p: &DerivedPoint) -> Option<(f64, f64)> {
    Some((p.g?, p.s_star?))
}

fn diff_pair(p: &DerivedPoint) -> Option<(f64, f64)> {
    Some((p.d_g?, p.d_s_star?))
}

/// GDP-weighted (or unweighted) pooled statistics at one screen.
///
/// Level statistics use points with `|g| >= screen`; difference statistics
/// use points with `|Δg| >= screen`.
pub fn pooled_summary(
    panels: &DerivedPanels,
    config: &AnalysisConfig,
    screen: f64,
) -> Result<AggregateSummary, AnalysisError> {
    let growth = ScreenSpec::growth(screen);
    let accel = ScreenSpec::acceleration(screen);
    let mut levels = Quotients(Vec::new());
    let mut diffs = Quotients(Vec::new());
    let mut countries = BTreeSet::new();

    for (country, points) in panels {
        for p in points.iter().filter(|p| config.in_range(p.year)) {
            let Some(w) = config.weight_of(p).filter(|w| *w > 0.0) else {
                continue;
            };
            if growth.admits(p) {
                if let Some((x, y)) = level_pair(p) {
                    levels.0.push((x, y, w));
                    countries.insert(country.as_str());
                }
            }
            if accel.admits(p) {
                if let Some((x, y)) = diff_pair(p) {
                    diffs.0.push((x, y, w));
                    countries.insert(country.as_str());
                }
            }
        }
    }
    if levels.0.is_empty() && diffs.0.is_empty() {
        return Err(AnalysisError::EmptyAfterScreen { screen });
    }
    Ok(AggregateSummary {
        screen,
        weighting: config.weighting,
        mean_ratio: levels.pooled(config.aggregation),
        mean_theta: diffs.pooled(config.aggregation),
        reg_levels: levels.regression(),
        reg_diffs: diffs.regression(),
        n_ratio: levels.count(),
        n_theta: diffs.count(),
        n_levels: levels.0.len(),
        n_diffs: diffs.0.len(),
        countries: countries.len(),
    })
}

/// One summary per ladder threshold; empty levels are reported, not skipped.
pub fn ladder_sweep(panels: &DerivedPanels, config: &AnalysisConfig) -> Vec<AggregateSummary> {
    config
        .screen_ladder
        .iter()
        .map(|&screen| {
            pooled_summary(panels, config, screen)
                .unwrap_or_else(|_| AggregateSummary::empty(screen, config.weighting))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YearPoint {
    pub year: i32,
    pub mean: f64,
    pub count: usize,
    /// Total weight of contributing observations; LOESS weight for the year.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlySeries {
    pub quantity: Quantity,
    pub screen: f64,
    pub weighting: Weighting,
    pub points: Vec<YearPoint>,
    /// LOESS companion `(year, fitted)`; absent when too few years.
    pub loess: Option<Vec<(i32, f64)>>,
    pub loess_fallbacks: usize,
}

/// Yearly weighted averages of `quantity` with a LOESS companion.
pub fn yearly_series(
    panels: &DerivedPanels,
    config: &AnalysisConfig,
    quantity: Quantity,
    screen: f64,
) -> Result<YearlySeries, AnalysisError> {
    let (spec, pick): (ScreenSpec, fn(&DerivedPoint) -> Option<(f64, f64)>) = match quantity {
        Quantity::Ratio => (ScreenSpec::growth(screen), level_pair),
        Quantity::Theta => (ScreenSpec::acceleration(screen), diff_pair),
    };
    let mut by_year: BTreeMap<i32, Quotients> = BTreeMap::new();
    for points in panels.values() {
        for p in points.iter().filter(|p| config.in_range(p.year) && spec.admits(p)) {
            let (Some(w), Some((d, n))) = (config.weight_of(p).filter(|w| *w > 0.0), pick(p)) else {
                continue;
            };
            by_year.entry(p.year).or_insert_with(|| Quotients(Vec::new())).0.push((d, n, w));
        }
    }

    let mut points = Vec::new();
    for (year, q) in by_year {
        let Some(mean) = q.pooled(config.aggregation) else {
            continue;
        };
        let weight: f64 = q.0.iter().filter(|(d, _, _)| *d != 0.0).map(|(_, _, w)| w).sum();
        points.push(YearPoint {
            year,
            mean,
            count: q.count(),
            weight,
        });
    }
    if points.is_empty() {
        return Err(AnalysisError::EmptyYearRange {
            start: config.year_range.0,
            end: config.year_range.1,
        });
    }

    let input: Vec<(f64, f64, f64)> = points.iter().map(|p| (p.year as f64, p.mean, p.weight)).collect();
    let (loess, loess_fallbacks) = match loess_with(&input, &config.loess) {
        Ok(fit) => (
            Some(points.iter().zip(&fit.points).map(|(p, (_, y))| (p.year, *y)).collect()),
            fit.fallbacks.len(),
        ),
        Err(StatsError::TooFewPoints { .. }) => (None, 0),
        Err(e) => return Err(e.into()),
    };
    Ok(YearlySeries {
        quantity,
        screen,
        weighting: config.weighting,
        points,
        loess,
        loess_fallbacks,
    })
}

/// Per-country means at one screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRow {
    pub country: String,
    pub first_year: i32,
    pub last_year: i32,
    pub mean_ratio: Option<f64>,
    pub n_ratio: usize,
    pub mean_theta: Option<f64>,
    pub n_theta: usize,
}

pub fn country_rows(panels: &DerivedPanels, config: &AnalysisConfig, screen: f64) -> Vec<CountryRow> {
    panels
        .iter()
        .filter_map(|(country, points)| {
            let first_year = points.first()?.year;
            let last_year = points.last()?.year;
            let single: DerivedPanels = [(country.clone(), points.clone())].into();
            let summary = pooled_summary(&single, config, screen)
                .unwrap_or_else(|_| AggregateSummary::empty(screen, config.weighting));
            Some(CountryRow {
                country: country.clone(),
                first_year,
                last_year,
                mean_ratio: summary.mean_ratio,
                n_ratio: summary.n_ratio,
                mean_theta: summary.mean_theta,
                n_theta: summary.n_theta,
            })
        })
        .collect()
}

/// Level fields are kept only where `|g| >= screen` and difference fields
/// only where `|Δg| >= screen`; everything else is blanked.
pub fn screened_points(points: &[DerivedPoint], screen: f64) -> Vec<DerivedPoint> {
    let growth = ScreenSpec::growth(screen);
    let accel = ScreenSpec::acceleration(screen);
    points
        .iter()
        .map(|p| {
            let mut out = p.clone();
            if !growth.admits(p) {
                out.s_star = None;
                out.g = None;
                out.ratio = None;
            }
            if !accel.admits(p) {
                out.d_s_star = None;
                out.d_g = None;
                out.theta = None;
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorldKind {
    /// All net saving turns into capital growth.
    Thrift,
    /// Capital grows with no net saving at all.
    FreeGrowth,
}

/// A single synthetic country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub kind: WorldKind,
    pub country: String,
    pub start_year: i32,
    pub k0: f64,
    /// Per-year `s*` (thrift) or `g` (free growth); one entry per year after the first.
    pub path: Vec<f64>,
    pub noise_sd: f64,
    pub seed: u64,
}

impl WorldSpec {
    pub fn years(&self) -> usize {
        self.path.len() + 1
    }
}

/// Generate a synthetic panel.
///
/// In a thrift world `K_t = K_{t-1}(1 + s*_t)` and net saving is the realized
/// increment `K_t - K_{t-1}`, so `ΔK = S_net` holds exactly in floating point.
/// In a free-growth world `K_t = K_{t-1}(1 + g_t)` with zero saving. Optional
/// noise multiplies each `K_t` by `exp(ε)`, `ε ~ N(0, noise_sd²)`. GDP is set
/// to `K`.
pub fn generate_world(spec: &WorldSpec) -> Result<Vec<Observation>, AnalysisError> {
    if !(spec.k0.is_finite() && spec.k0 > 0.0) {
        return Err(AnalysisError::InvalidPath(format!("k0 {} must be positive", spec.k0)));
    }
    if !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0) {
        return Err(AnalysisError::InvalidPath(format!("noise_sd {}", spec.noise_sd)));
    }
    if let Some(v) = spec.path.iter().find(|v| !v.is_finite() || 1.0 + **v <= 0.0) {
        return Err(AnalysisError::InvalidPath(format!("path value {v} needs 1 + value > 0")));
    }

    let mut k = vec![spec.k0];
    let mut s = vec![0.0];
    for &rate in &spec.path {
        let prev = *k.last().expect("k0 pushed");
        let next = prev + rate * prev;
        k.push(next);
        s.push(match spec.kind {
            WorldKind::Thrift => next - prev,
            WorldKind::FreeGrowth => 0.0,
        });
    }
    if spec.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sd).map_err(|e| AnalysisError::InvalidPath(e.to_string()))?;
        for kt in &mut k {
            *kt *= normal.sample(&mut rng).exp();
        }
    }
    Ok(k
        .into_iter()
        .zip(s)
        .enumerate()
        .map(|(i, (k, s_net))| Observation {
            country: spec.country.clone(),
            year: spec.start_year + i as i32,
            s_net,
            k,
            gdp: Some(k),
        })
        .collect())
}

/// Many synthetic countries with randomly varied paths.
///
/// Each country gets 20 to 40 years within 1980..=2022; thrift paths draw
/// `s*` from [0.01, 0.15], free-growth paths draw `g` from [-0.05, 0.15].
pub fn synthetic_panel(kind: WorldKind, countries: usize, noise_sd: f64, seed: u64) -> Result<Panel, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::new();
    for i in 0..countries {
        let years = rng.random_range(20..=40usize);
        let start_year = rng.random_range(1980..=(2022 - years as i32 + 1));
        let path: Vec<f64> = (1..years)
            .map(|_| match kind {
                WorldKind::Thrift => rng.random_range(0.01..0.15),
                WorldKind::FreeGrowth => rng.random_range(-0.05..0.15),
            })
            .collect();
        let spec = WorldSpec {
            kind,
            country: format!("W{i:03}"),
            start_year,
            k0: rng.random_range(50.0..5000.0),
            path,
            noise_sd,
            seed: rng.random(),
        };
        observations.extend(generate_world(&spec)?);
    }
    Ok(Panel::from_observations(observations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryCoverage {
    pub country: String,
    pub first_year: i32,
    pub last_year: i32,
    pub observations: usize,
}

/// Everything the reports and the API need for one dataset and config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSnapshot {
    pub schema_version: String,
    pub config: AnalysisConfig,
    /// SHA-256 of the normalized panel dump.
    pub fingerprint: String,
    pub countries: Vec<CountryCoverage>,
    pub headline: Option<AggregateSummary>,
    pub ladder: Vec<AggregateSummary>,
    pub yearly_ratio: Option<YearlySeries>,
    pub yearly_theta: Option<YearlySeries>,
    pub series: DerivedPanels,
    pub warnings: Vec<String>,
}

impl AnalysisSnapshot {
    pub fn build(panel: &Panel, config: &AnalysisConfig) -> Result<Self, AnalysisError> {
        config.validate()?;
        let series = derive_panels(panel, config.convention);
        let fingerprint = Sha256::digest(panel.to_csv().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        let countries = panel
            .countries
            .iter()
            .filter_map(|(country, obs)| {
                Some(CountryCoverage {
                    country: country.clone(),
                    first_year: obs.first()?.year,
                    last_year: obs.last()?.year,
                    observations: obs.len(),
                })
            })
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION.to_string(),
            config: config.clone(),
            fingerprint,
            countries,
            headline: pooled_summary(&series, config, config.screen).ok(),
            ladder: ladder_sweep(&series, config),
            yearly_ratio: yearly_series(&series, config, Quantity::Ratio, config.screen).ok(),
            yearly_theta: yearly_series(&series, config, Quantity::Theta, config.screen).ok(),
            series,
            warnings: panel.warnings.clone(),
        })
    }

    /// Pooled summary at any screen, optionally overriding the weighting.
    pub fn summary(&self, screen: f64, weighting: Option<Weighting>) -> Result<AggregateSummary, AnalysisError> {
        check_screen(screen)?;
        let config = self.config_with(weighting);
        pooled_summary(&self.series, &config, screen)
    }

    pub fn yearly(
        &self,
        quantity: Quantity,
        screen: f64,
        weighting: Option<Weighting>,
    ) -> Result<YearlySeries, AnalysisError> {
        check_screen(screen)?;
        yearly_series(&self.series, &self.config_with(weighting), quantity, screen)
    }

    pub fn country_series(&self, country: &str, screen: f64) -> Result<Vec<DerivedPoint>, AnalysisError> {
        check_screen(screen)?;
        let points = self
            .series
            .get(country)
            .ok_or_else(|| AnalysisError::UnknownCountry(country.to_string()))?;
        Ok(screened_points(points, screen))
    }

    pub fn country_rows(&self, screen: f64) -> Vec<CountryRow> {
        country_rows(&self.series, &self.config, screen)
    }

    /// Ladder entry for `screen`, if it is one of the configured levels.
    pub fn ladder_level(&self, screen: f64) -> Option<&AggregateSummary> {
        self.ladder.iter().find(|s| s.screen == screen)
    }

    fn config_with(&self, weighting: Option<Weighting>) -> AnalysisConfig {
        let mut config = self.config.clone();
        if let Some(w) = weighting {
            config.weighting = w;
        }
        config
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("snapshot serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn check_screen(screen: f64) -> Result<(), AnalysisError> {
    if screen.is_finite() && screen >= 0.0 {
        Ok(())
    } else {
        Err(AnalysisError::InvalidConfig(format!("screen {screen} must be finite and nonnegative")))
    }
}
