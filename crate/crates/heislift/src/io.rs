//! File formats: site clouds (CSV or JSON) and boundary data rows
//! (`m` domain coordinates followed by the target coordinates).
//!
//! CSV rows are comma-separated numbers; blank lines and lines starting
//! with `#` are skipped.

use std::io::Read;

use crate::error::{Error, Result};

/// Parse site rows with exactly `m` columns.
pub fn read_points_csv<R: Read>(reader: R, m: usize) -> Result<Vec<Vec<f64>>> {
    let rows = read_numeric_csv(reader)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::parse(
                "whitney",
                format!("row {i}: expected {m} columns, got {}", row.len()),
            ));
        }
    }
    Ok(rows)
}

/// Parse boundary rows of `m + target_dim` columns into (sites, values).
pub fn read_boundary_csv<R: Read>(
    reader: R,
    m: usize,
    target_dim: usize,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let rows = read_numeric_csv(reader)?;
    let mut sites = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m + target_dim {
            return Err(Error::parse(
                "cli",
                format!(
                    "boundary row {i}: expected {m}+{target_dim} columns, got {}",
                    row.len()
                ),
            ));
        }
        sites.push(row[..m].to_vec());
        values.push(row[m..].to_vec());
    }
    Ok((sites, values))
}

fn read_numeric_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse("io", e.to_string()))?;
        if record.len() == 0 || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let row: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse("io", format!("row {i}: bad number {f:?}")))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parse a JSON array of points (`[[x, y, ...], ...]`).
pub fn read_points_json<R: Read>(reader: R, m: usize) -> Result<Vec<Vec<f64>>> {
    let pts: Vec<Vec<f64>> = serde_json::from_reader(reader)?;
    for (i, p) in pts.iter().enumerate() {
        if p.len() != m {
            return Err(Error::parse(
                "whitney",
                format!("point {i}: expected {m} coordinates, got {}", p.len()),
            ));
        }
    }
    Ok(pts)
}
