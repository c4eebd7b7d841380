//! CSV ingestion: header-based column lookup, missing-value accounting,
//! duplicate-coordinate detection.

use std::path::Path;

use variowarp::dataset::SpatialDataset;
use variowarp::geometry::Location;

use crate::config::IngestSection;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub data: SpatialDataset,
    pub n_dropped: usize,
    pub n_duplicates: usize,
}

pub fn ingest_csv(path: &Path, section: &IngestSection) -> Result<IngestReport, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Io(format!("read header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("missing column '{name}' in {}", path.display())))
    };
    let xi = col(&section.x_col)?;
    let yi = col(&section.y_col)?;
    let vi = col(&section.value_col)?;

    let mut sites = Vec::new();
    let mut values = Vec::new();
    let mut n_dropped = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.map_err(|e| CliError::Io(format!("line {line}: {e}")))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let raw = [field(xi), field(yi), field(vi)];
        if raw.iter().any(|f| f.is_empty() || f.eq_ignore_ascii_case("na")) {
            n_dropped += 1;
            continue;
        }
        let mut parsed = [0.0f64; 3];
        for (slot, text) in parsed.iter_mut().zip(&raw) {
            *slot = text.parse().map_err(|_| {
                CliError::Io(format!("line {line}: cannot parse '{text}' as a number"))
            })?;
        }
        if parsed.iter().any(|v| !v.is_finite()) {
            n_dropped += 1;
            continue;
        }
        sites.push(Location::new_2d(parsed[0], parsed[1]));
        values.push(parsed[2]);
    }
    if sites.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no usable rows after dropping {n_dropped}",
            path.display()
        )));
    }
    let mut n_duplicates = 0usize;
    let mut seen: Vec<(u64, u64)> = sites
        .iter()
        .map(|s| (s.coords()[0].to_bits(), s.coords()[1].to_bits()))
        .collect();
    seen.sort_unstable();
    for w in seen.windows(2) {
        if w[0] == w[1] {
            n_duplicates += 1;
        }
    }
    let data = SpatialDataset::new(sites, values)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(IngestReport {
        data,
        n_dropped,
        n_duplicates,
    })
}
