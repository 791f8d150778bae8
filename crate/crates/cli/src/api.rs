//! Read-only JSON API over one precomputed [`AnalysisSnapshot`].
//!
//! Handlers only look things up or re-screen stored points; nothing here
//! mutates the snapshot, so the router can be cloned across any number of
//! concurrent connections. Bodies are serialized from ordered maps and
//! vectors, which makes responses for the same query byte-identical.

use std::sync::Arc;

use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use capgrowth_core::analysis::CountryCoverage;
use capgrowth_core::*;
use serde::Serialize;
use tower_http::cors::{Any, CorsLayer};

pub const API_VERSION: &str = "capgrowth.api/1";

const ENDPOINTS: [&str; 6] = ["/countries", "/series/{country}", "/aggregate", "/yearly", "/ladder", "/meta"];

type Shared = Arc<AnalysisSnapshot>;

/// Error body: `{"error": "<class>", "message": "..."}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, error: "bad_request", message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self { status: StatusCode::NOT_FOUND, error: "not_found", message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, error: "internal", message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status;
        let mut response = json_body(&self);
        *response.status_mut() = status;
        response
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::UnknownCountry(_) => ApiError::not_found(e.to_string()),
            AnalysisError::InvalidConfig(_) => ApiError::bad_request(e.to_string()),
            other => ApiError::internal(other.to_string()),
        }
    }
}

fn json_body<T: Serialize>(value: &T) -> Response {
    match serde_json::to_vec(value) {
        Ok(mut body) => {
            body.push(b'\n');
            ([(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))], body).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

type ApiResult = Result<Response, ApiError>;

/// Query parameters, checked against a whitelist so typos are rejected
/// rather than silently ignored.
struct Params(Vec<(String, String)>);

impl Params {
    fn new(query: Result<Query<Vec<(String, String)>>, QueryRejection>, allowed: &[&str]) -> Result<Self, ApiError> {
        let Query(pairs) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
        for (i, (key, _)) in pairs.iter().enumerate() {
            if !allowed.contains(&key.as_str()) {
                return Err(ApiError::bad_request(format!("unknown parameter `{key}`")));
            }
            if pairs[..i].iter().any(|(k, _)| k == key) {
                return Err(ApiError::bad_request(format!("parameter `{key}` given twice")));
            }
        }
        Ok(Self(pairs))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn screen(&self, default: f64) -> Result<f64, ApiError> {
        let Some(raw) = self.get("screen") else { return Ok(default) };
        match raw.parse::<f64>() {
            Ok(s) if s.is_finite() && s >= 0.0 => Ok(s),
            _ => Err(ApiError::bad_request(format!("screen must be a nonnegative number, got `{raw}`"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ApiError> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "1") => Ok(true),
            Some("false" | "0") => Ok(false),
            Some(raw) => Err(ApiError::bad_request(format!("{key} must be true or false, got `{raw}`"))),
        }
    }

    fn quantity(&self) -> Result<Option<Quantity>, ApiError> {
        match self.get("quantity") {
            None => Ok(None),
            Some("ratio") => Ok(Some(Quantity::Ratio)),
            Some("theta") => Ok(Some(Quantity::Theta)),
            Some(raw) => Err(ApiError::bad_request(format!("quantity must be ratio or theta, got `{raw}`"))),
        }
    }

    fn weighting(&self, snapshot: &AnalysisSnapshot) -> Result<Weighting, ApiError> {
        let default = snapshot.config.weighting == Weighting::Gdp;
        Ok(if self.flag("weighted", default)? { Weighting::Gdp } else { Weighting::Unweighted })
    }
}

pub fn router(snapshot: Shared) -> Router {
    let cors = CorsLayer::new().allow_origin(Any).allow_methods([Method::GET]);
    Router::new()
        .route("/countries", get(countries))
        .route("/series/{country}", get(series))
        .route("/aggregate", get(aggregate))
        .route("/yearly", get(yearly))
        .route("/ladder", get(ladder))
        .route("/meta", get(meta))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(cors)
        .with_state(snapshot)
}

#[derive(Serialize)]
struct CountriesBody<'a> {
    countries: &'a [CountryCoverage],
}

async fn countries(State(snap): State<Shared>) -> Response {
    json_body(&CountriesBody { countries: &snap.countries })
}

#[derive(Serialize)]
struct SeriesBody<'a> {
    country: &'a str,
    screen: f64,
    points: Vec<DerivedPoint>,
}

async fn series(
    State(snap): State<Shared>,
    Path(country): Path<String>,
    query: Result<Query<Vec<(String, String)>>, QueryRejection>,
) -> ApiResult {
    let params = Params::new(query, &["screen"])?;
    let screen = params.screen(snap.config.screen)?;
    let points = snap.country_series(&country, screen)?;
    Ok(json_body(&SeriesBody { country: &country, screen, points }))
}

#[derive(Serialize)]
struct AggregateBody {
    quantity: Option<Quantity>,
    /// The selected mean, when `quantity` was given.
    value: Option<f64>,
    count: Option<usize>,
    #[serde(flatten)]
    summary: AggregateSummary,
}

/// Pooled summary at any nonnegative screen. An empty screen is a valid,
/// empty answer rather than an error, so sliders can go past the data.
pub fn summary_at(snap: &AnalysisSnapshot, screen: f64, weighting: Weighting) -> Result<AggregateSummary, ApiError> {
    match snap.summary(screen, Some(weighting)) {
        Ok(s) => Ok(s),
        Err(AnalysisError::EmptyAfterScreen { .. }) => Ok(AggregateSummary::empty(screen, weighting)),
        Err(e) => Err(e.into()),
    }
}

async fn aggregate(State(snap): State<Shared>, query: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let params = Params::new(query, &["screen", "weighted", "quantity"])?;
    let screen = params.screen(snap.config.screen)?;
    let weighting = params.weighting(&snap)?;
    let quantity = params.quantity()?;
    let summary = summary_at(&snap, screen, weighting)?;
    let (value, count) = match quantity {
        Some(Quantity::Ratio) => (summary.mean_ratio, Some(summary.n_ratio)),
        Some(Quantity::Theta) => (summary.mean_theta, Some(summary.n_theta)),
        None => (None, None),
    };
    Ok(json_body(&AggregateBody { quantity, value, count, summary }))
}

async fn yearly(State(snap): State<Shared>, query: Result<Query<Vec<(String, String)>>, QueryRejection>) -> ApiResult {
    let params = Params::new(query, &["quantity", "screen", "loess", "weighted"])?;
    let quantity = params.quantity()?.unwrap_or(Quantity::Theta);
    let screen = params.screen(snap.config.screen)?;
    let with_loess = params.flag("loess", true)?;
    let weighting = params.weighting(&snap)?;
    let mut series = match snap.yearly(quantity, screen, Some(weighting)) {
        Ok(s) => s,
        Err(AnalysisError::EmptyAfterScreen { .. } | AnalysisError::EmptyYearRange { .. }) => YearlySeries {
            quantity,
            screen,
            weighting,
            points: Vec::new(),
            loess: None,
            loess_fallbacks: 0,
        },
        Err(e) => return Err(e.into()),
    };
    if !with_loess {
        series.loess = None;
        series.loess_fallbacks = 0;
    }
    Ok(json_body(&series))
}

#[derive(Serialize)]
struct LadderBody<'a> {
    ladder: &'a [AggregateSummary],
}

async fn ladder(State(snap): State<Shared>) -> Response {
    json_body(&LadderBody { ladder: &snap.ladder })
}

#[derive(Serialize)]
struct MetaBody<'a> {
    api_version: &'static str,
    schema_version: &'a str,
    fingerprint: &'a str,
    config: &'a AnalysisConfig,
    country_count: usize,
    warnings: &'a [String],
    endpoints: [&'static str; 6],
}

async fn meta(State(snap): State<Shared>) -> Response {
    json_body(&MetaBody {
        api_version: API_VERSION,
        schema_version: &snap.schema_version,
        fingerprint: &snap.fingerprint,
        config: &snap.config,
        country_count: snap.countries.len(),
        warnings: &snap.warnings,
        endpoints: ENDPOINTS,
    })
}
