//! Two-country fixture checked against an exact hand computation
//! (`data/hand_computation.py`) and against committed output bytes.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the byte-level golden files.

mod fixture;

use std::fs;

use capgrowth_core::*;
use fixture::{data_dir, fixture_snapshot, golden_dir};
use serde_json::Value;

fn expected() -> Value {
    serde_json::from_str(&fs::read_to_string(data_dir().join("two_country_expected.json")).unwrap()).unwrap()
}

fn close(got: f64, want: &Value) {
    let want = want.as_f64().unwrap();
    assert!(
        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
        "got {got}, hand computation {want}"
    );
}

fn check_regression(got: &RegressionResult, want: &Value) {
    close(got.slope, &want["slope"]);
    close(got.intercept, &want["intercept"]);
    assert_eq!(got.n as u64, want["n"].as_u64().unwrap());
    match (got.slope_se, want.get("slope_se")) {
        (Some(se), Some(w)) => close(se, w),
        (None, None) => {}
        other => panic!("slope_se mismatch: {other:?}"),
    }
    if let Some(w) = want.get("t_vs_one") {
        close(got.t_vs_one.unwrap(), w);
    }
}

#[test]
fn summaries_match_hand_computation() {
    let snap = fixture_snapshot();
    for want in expected()["summaries"].as_array().unwrap() {
        let screen = want["screen"].as_f64().unwrap();
        let got = snap.summary(screen, None).unwrap();
        close(got.mean_ratio.unwrap(), &want["mean_ratio"]);
        close(got.mean_theta.unwrap(), &want["mean_theta"]);
        assert_eq!(got.n_ratio as u64, want["n_ratio"].as_u64().unwrap());
        assert_eq!(got.n_theta as u64, want["n_theta"].as_u64().unwrap());
        check_regression(got.reg_levels.as_ref().unwrap(), &want["reg_levels"]);
        check_regression(got.reg_diffs.as_ref().unwrap(), &want["reg_diffs"]);
        assert_eq!(got.countries, 2);
    }
}

#[test]
fn yearly_series_matches_hand_computation() {
    let snap = fixture_snapshot();
    let want = &expected()["yearly_at_0.01"];
    for (quantity, series) in [("ratio", snap.yearly_ratio.as_ref().unwrap()), ("theta", snap.yearly_theta.as_ref().unwrap())] {
        for (year, values) in want.as_object().unwrap() {
            let year: i32 = year.parse().unwrap();
            let got = series.points.iter().find(|p| p.year == year);
            match (&values[quantity], got) {
                (Value::Null, None) => {}
                (w, Some(p)) => close(p.mean, w),
                (w, None) => panic!("{quantity} {year}: expected {w}, no point"),
            }
        }
    }
}

fn golden(name: &str, bytes: &[u8]) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, bytes).unwrap();
    }
    let want = fs::read(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(want == bytes, "{name} differs from golden file");
}

#[test]
fn outputs_match_golden_bytes() {
    let snap = fixture_snapshot();
    for (name, bytes) in fixture::rendered_outputs(&snap, 0.01) {
        golden(&name, &bytes);
    }
}

#[test]
fn headline_csv_carries_hand_values() {
    let snap = fixture_snapshot();
    let spec = TableSpec { kind: TableKind::Headline, screen: 0.01, format: TableFormat::Csv };
    let text = String::from_utf8(render_table(&snap, &spec).unwrap()).unwrap();
    // 0.5452682... and 0.3739393... at four significant digits.
    assert!(text.contains("mean_ratio,0.5453,"));
    assert!(text.contains("mean_theta,0.3739,"));
    assert!(text.contains("slope = 1 under thrift theory"));
}
