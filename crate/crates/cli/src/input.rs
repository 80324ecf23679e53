//! Count tables from CSV.
//!
//! A header row is recognised by any non-numeric field on the first line, a
//! label column by a non-numeric first field on the first data line.

use std::path::Path;

use latcorr::ContingencyTable;

use crate::error::CliError;

fn is_number(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

/// Reads a count table. Ragged rows and non-integer cells are parse errors;
/// negative counts and tables that are too small are validation errors.
pub fn read_counts(path: &Path) -> Result<ContingencyTable, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading {name}")))?;
    parse_counts(&text, &name)
}

pub fn parse_counts(text: &str, name: &str) -> Result<ContingencyTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let parse_err = |line: usize, msg: String| CliError::Parse {
        path: name.to_string(),
        line,
        msg,
    };

    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push((line, record));
    }
    if records.is_empty() {
        return Err(CliError::Validation(format!("{name}: no data")));
    }

    let has_header = records[0].1.iter().any(|f| !is_number(f));
    let data = &records[usize::from(has_header)..];
    let Some((_, first)) = data.first() else {
        return Err(CliError::Validation(format!(
            "{name}: header but no data rows"
        )));
    };
    let has_labels = first.get(0).is_some_and(|f| !is_number(f));
    let skip = usize::from(has_labels);
    let width = first.len() - skip;

    let mut grid = Vec::with_capacity(data.len());
    for (line, record) in data {
        if record.len() - skip.min(record.len()) != width {
            return Err(parse_err(
                *line,
                format!(
                    "expected {width} counts, found {}",
                    record.len().saturating_sub(skip)
                ),
            ));
        }
        let row = record
            .iter()
            .skip(skip)
            .enumerate()
            .map(|(j, field)| {
                field.parse::<i64>().map_err(|_| {
                    parse_err(
                        *line,
                        format!("column {}: {field:?} is not an integer count", j + 1 + skip),
                    )
                })
            })
            .collect::<Result<Vec<i64>, CliError>>()?;
        grid.push(row);
    }
    ContingencyTable::from_counts(&grid).map_err(|e| CliError::Validation(format!("{name}: {e}")))
}
