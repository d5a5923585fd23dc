//! CSV metric reports and ingest of externally computed scores.
//!
//! Report schema (one row per file, then a MEAN aggregate row):
//! `file,stoi,snr_db,bitrate_bps,rtf_encode,rtf_decode`.
//!
//! External scorers (e.g. perceptual tools run out-of-process on the exported
//! reference/degraded pairs) feed back a two-column CSV `file,score`.

use super::MetricReport;
use crate::error::{CodecError, Result};
use std::collections::BTreeMap;
use std::path::Path;

pub const REPORT_COLUMNS: [&str; 6] = [
    "file",
    "stoi",
    "snr_db",
    "bitrate_bps",
    "rtf_encode",
    "rtf_decode",
];

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub file: String,
    pub metrics: MetricReport,
}

/// Write per-file rows plus a MEAN aggregate. Atomic (temp file + rename).
pub fn write_report(path: impl AsRef<Path>, rows: &[ReportRow]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    {
        let mut w = csv::Writer::from_writer(tmp.as_file());
        w.write_record(REPORT_COLUMNS)
            .map_err(|e| CodecError::Io(std::io::Error::other(e)))?;
        let fmt = |v: f64| format!("{v:.6}");
        for row in rows {
            w.write_record([
                row.file.as_str(),
                &fmt(row.metrics.stoi),
                &fmt(row.metrics.snr_db),
                &fmt(row.metrics.bitrate_bps),
                &fmt(row.metrics.rtf_encode),
                &fmt(row.metrics.rtf_decode),
            ])
            .map_err(|e| CodecError::Io(std::io::Error::other(e)))?;
        }
        if !rows.is_empty() {
            let n = rows.len() as f64;
            let mean = |f: fn(&MetricReport) -> f64| {
                rows.iter().map(|r| f(&r.metrics)).sum::<f64>() / n
            };
            w.write_record([
                "MEAN",
                &fmt(mean(|m| m.stoi)),
                &fmt(mean(|m| m.snr_db)),
                &fmt(mean(|m| m.bitrate_bps)),
                &fmt(mean(|m| m.rtf_encode)),
                &fmt(mean(|m| m.rtf_decode)),
            ])
            .map_err(|e| CodecError::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| CodecError::Io(e.error))?;
    Ok(())
}

/// Read a `file,score` CSV produced by an external scorer.
pub fn ingest_external_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| CodecError::Format(format!("external scores: {e}")))?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| CodecError::Format(format!("external scores: {e}")))?;
        if record.len() < 2 {
            return Err(CodecError::Format(
                "external score rows need file,score columns".into(),
            ));
        }
        let score: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| CodecError::Format(format!("bad score for {}", &record[0])))?;
        out.insert(record[0].to_string(), score);
    }
    Ok(out)
}
