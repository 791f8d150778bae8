//! Thrift-index analysis of national-accounts panels.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! - [`ingest`] parses WID-style long-format files and assembles per-country
//!   panels of net saving, market-value capital and GDP.
//! - [`derive`] computes thrift `s* = S_net / K`, capital growth `g(K)`, their
//!   first differences, the ratio `s*/g(K)` and the thrift index
//!   `θ = Δs*/Δg(K)` for every country-year, and applies denominator screens.
//! - [`stats`] holds the numerical kernels: weighted mean, weighted OLS with a
//!   slope-equals-one test, and LOESS.
//! - [`analysis`] pools everything into GDP-weighted summaries, screen-ladder
//!   sweeps, yearly series and immutable [`AnalysisSnapshot`]s; it also
//!   generates synthetic thrift and free-growth worlds.
//! - [`report`] renders snapshots as CSV/JSON/text tables and SVG figures.
//!
//! [`identities`] checks the net-output accounting identities extended to
//! human capital.

pub mod analysis;
pub mod derive;
pub mod identities;
pub mod ingest;
pub mod report;
pub mod stats;

pub use analysis::{
    generate_world, ladder_sweep, pooled_summary, yearly_series, Aggregation, AggregateSummary,
    AnalysisConfig, AnalysisError, AnalysisSnapshot, DerivedPanels, MissingGdpPolicy, Quantity,
    Weighting, WorldKind, WorldSpec, YearlySeries, SCHEMA_VERSION,
};
pub use derive::{apply_screen, derive_series, Convention, DerivedPoint, ScreenSpec, ScreenTarget};
pub use identities::{check_b4, IdentityError, IdentityLedger, IdentityReport};
pub use ingest::{
    assemble_panel, parse_records, Header, IngestError, MatchMode, Observation, Panel,
    ParseOutcome, RawRecord, RoleMap,
};
pub use report::{render_figure, render_table, FigureSpec, ReportError, TableFormat, TableKind, TableSpec};
pub use stats::{loess, weighted_mean, weighted_ols, RegressionResult, StatsError, WeightedSample};
