//! CSV output of BER reports.

use crate::error::{Error, Result};
use crate::harness::BerReport;

/// Column set and order of the results file.
pub const COLUMNS: [&str; 12] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "detector",
    "bits",
    "errors",
    "ber",
    "ci_low",
    "ci_high",
    "optimized_params",
    "seed",
    "runtime_s",
];

/// `name=value` pairs joined by `;`.
pub fn format_params(params: &[(String, f64)]) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Header plus one row per report, sorted by sweep value then detector.
/// `runtime_s` is left empty unless `with_runtime` is set, so that reruns
/// with the same seed give identical files.
pub fn emit_results(reports: &[BerReport], with_runtime: bool) -> Result<String> {
    let mut rows: Vec<&BerReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.detector.cmp(&b.detector))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        let runtime = if with_runtime { r.runtime_s.to_string() } else { String::new() };
        w.write_record([
            r.sweep_var.name().to_string(),
            r.sweep_value.to_string(),
            r.scheme.clone(),
            r.detector.clone(),
            r.bits.to_string(),
            r.errors.to_string(),
            r.ber.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            format_params(&r.optimized),
            r.seed.to_string(),
            runtime,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
