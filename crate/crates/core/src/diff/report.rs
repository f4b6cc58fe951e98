use super::ComparisonReport;
use crate::error::Result;

/// Pretty-printed JSON with a fixed key order and a trailing newline.
pub fn report_to_json(report: &ComparisonReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Parses a report written by [`report_to_json`]. The coordinated pairs are
/// not part of the format; only their count survives.
pub fn parse_report_json(text: &str) -> Result<ComparisonReport> {
    Ok(serde_json::from_str(text)?)
}
