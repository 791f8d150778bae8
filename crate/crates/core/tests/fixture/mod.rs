//! The shipped two-country fixture and its rendered outputs.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use capgrowth_core::*;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn golden_dir() -> PathBuf {
    data_dir().join("golden")
}

pub fn fixture_panel() -> Panel {
    let bytes = fs::read(data_dir().join("two_country.csv")).unwrap();
    let parsed = parse_records(bytes.as_slice(), b';', &Header::Auto).unwrap();
    assert!(parsed.row_errors.is_empty());
    assemble_panel(&parsed.records, &RoleMap::default()).unwrap()
}

pub fn fixture_snapshot() -> AnalysisSnapshot {
    AnalysisSnapshot::build(&fixture_panel(), &AnalysisConfig::default()).unwrap()
}

/// Every table format, the ladder and both figures, keyed by output file name.
/// A render error stands in for its file so runs can still be compared.
pub fn rendered_outputs(snap: &AnalysisSnapshot, screen: f64) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("snapshot.json".to_string(), snap.to_json().into_bytes())];
    for (kind, format) in [
        (TableKind::Headline, TableFormat::Csv),
        (TableKind::Headline, TableFormat::Text),
        (TableKind::Ladder, TableFormat::Json),
        (TableKind::PerCountry, TableFormat::Csv),
    ] {
        let spec = TableSpec { kind, screen, format };
        out.push((
            report::table_file_name(&spec, snap.config.weighting),
            render_table(snap, &spec).unwrap_or_else(|e| format!("error: {e}\n").into_bytes()),
        ));
    }
    for quantity in [Quantity::Ratio, Quantity::Theta] {
        let spec = FigureSpec::new(quantity, screen);
        let bytes = render_figure(snap, &spec).unwrap_or_else(|e| format!("error: {e}\n").into_bytes());
        out.push((spec.file_name(snap.config.weighting), bytes));
    }
    out
}
