//! Delimited-panel ingestion: header row mandatory, comma or tab
//! auto-detected, optional leading date column recognised by non-numeric
//! content. Missing or unparsable values are hard errors naming the spot.

use std::path::Path;

use cotrend::SeriesPanel;
use csv::ReaderBuilder;
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

#[derive(Debug)]
pub struct LoadedPanel {
    pub panel: SeriesPanel,
    /// Header of the dropped leading date column, when one was detected.
    pub date_column: Option<String>,
}

fn sniff_delimiter(text: &str) -> u8 {
    let first_line = text.lines().next().unwrap_or("");
    if first_line.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn is_numeric(field: &str) -> bool {
    !field.is_empty() && field.trim().parse::<f64>().is_ok()
}

/// Reads a panel file and applies the optional transforms, logs first:
/// x ↦ ln x, then x_t ↦ x_t − x_1 so every series starts at zero.
pub fn load_panel(path: &Path, take_log: bool, normalize_start: bool) -> Result<LoadedPanel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = ReaderBuilder::new()
        .delimiter(sniff_delimiter(&text))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: cannot read header row: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::Data(format!("{}: data row {}: {e}", path.display(), idx + 1))
        })?;
        rows.push(record);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no data rows below the header",
            path.display()
        )));
    }

    let date_offset = usize::from(!is_numeric(&rows[0][0]));
    let labels: Vec<String> = headers[date_offset..].to_vec();
    if labels.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 numeric columns, found {}",
            path.display(),
            labels.len()
        )));
    }

    let (t_len, width) = (rows.len(), labels.len());
    let mut values = DMatrix::zeros(t_len, width);
    for (r, row) in rows.iter().enumerate() {
        for (c, label) in labels.iter().enumerate() {
            let field = &row[date_offset + c];
            if field.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: missing value at data row {}, column '{label}'",
                    path.display(),
                    r + 1
                )));
            }
            values[(r, c)] = field.parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}: data row {}, column '{label}': cannot parse '{field}'",
                    path.display(),
                    r + 1
                ))
            })?;
        }
    }

    if take_log {
        for r in 0..t_len {
            for c in 0..width {
                let v = values[(r, c)];
                if v <= 0.0 {
                    return Err(CliError::Data(format!(
                        "{}: cannot take logs: value {v} at data row {}, column '{}'",
                        path.display(),
                        r + 1,
                        labels[c]
                    )));
                }
                values[(r, c)] = v.ln();
            }
        }
    }
    if normalize_start {
        let first = values.row(0).into_owned();
        for r in 0..t_len {
            for c in 0..width {
                values[(r, c)] -= first[c];
            }
        }
    }

    let panel = SeriesPanel::new(values, labels)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(LoadedPanel {
        panel,
        date_column: (date_offset == 1).then(|| headers[0].clone()),
    })
}

/// Reads a restriction matrix: plain delimited numbers, no header row, equal
/// row lengths. Rows index panel coordinates, columns restriction directions.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let delim = if sniff_delimiter(&text) == b'\t' {
        '\t'
    } else {
        ','
    };

    let mut entries: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(delim) {
            row.push(field.trim().parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "{}: line {}: cannot parse '{}' as a number",
                    path.display(),
                    idx + 1,
                    field.trim()
                ))
            })?);
        }
        if let Some(first) = entries.first() {
            if row.len() != first.len() {
                return Err(CliError::Data(format!(
                    "{}: line {}: expected {} columns, found {}",
                    path.display(),
                    idx + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        entries.push(row);
    }
    if entries.is_empty() {
        return Err(CliError::Data(format!(
            "{}: matrix file is empty",
            path.display()
        )));
    }
    let (rows, cols) = (entries.len(), entries[0].len());
    Ok(DMatrix::from_fn(rows, cols, |r, c| entries[r][c]))
}
