//! CSV ingestion: comma-separated, optional header, `.` decimals, UTF-8.
//!
//! The first row is treated as a header unless every one of its fields
//! parses as a number. Columns are selected by header name or by 0-based
//! index; rows with missing or non-numeric cells in the selected columns are
//! rejected with their row numbers listed.

use std::path::Path;

use pmcgd::DataMatrix;

use crate::error::CliError;

#[derive(Debug)]
pub struct IngestResult {
    pub data: DataMatrix,
    /// Class names and per-row class ids when a label column was requested.
    pub truth: Option<(Vec<String>, Vec<usize>)>,
    pub feature_names: Vec<String>,
}

enum ColumnRef {
    Index(usize),
    Name(String),
}

fn parse_column_ref(token: &str) -> ColumnRef {
    match token.trim().parse::<usize>() {
        Ok(i) => ColumnRef::Index(i),
        Err(_) => ColumnRef::Name(token.trim().to_string()),
    }
}

fn resolve(
    reference: &ColumnRef,
    header: Option<&[String]>,
    width: usize,
) -> Result<usize, CliError> {
    match reference {
        ColumnRef::Index(i) => {
            if *i >= width {
                return Err(CliError::Data(format!(
                    "column index {i} out of range for {width} columns"
                )));
            }
            Ok(*i)
        }
        ColumnRef::Name(name) => {
            let header = header.ok_or_else(|| {
                CliError::Data(format!(
                    "column `{name}` requested by name but the file has no header row"
                ))
            })?;
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| CliError::Data(format!("no column named `{name}`")))
        }
    }
}

pub fn ingest_csv(
    path: &Path,
    columns: Option<&str>,
    label_column: Option<&str>,
) -> Result<IngestResult, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut records: Vec<csv::StringRecord> = Vec::new();
    for record in reader.records() {
        records
            .push(record.map_err(|e| CliError::Data(format!("CSV parse failure: {e}")))?);
    }
    if records.is_empty() {
        return Err(CliError::Data("empty input file".into()));
    }
    let width = records[0].len();

    // Header rule: the first row is data only if every field is numeric.
    let numeric_first_row = records[0]
        .iter()
        .all(|field| field.trim().parse::<f64>().is_ok());
    let header: Option<Vec<String>> = if numeric_first_row {
        None
    } else {
        Some(records[0].iter().map(|s| s.trim().to_string()).collect())
    };
    let data_start = usize::from(header.is_some());
    if records.len() == data_start {
        return Err(CliError::Data("no data rows after the header".into()));
    }

    let label_idx = label_column
        .map(|l| resolve(&parse_column_ref(l), header.as_deref(), width))
        .transpose()?;

    let feature_idx: Vec<usize> = match columns {
        Some(spec) => spec
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| resolve(&parse_column_ref(t), header.as_deref(), width))
            .collect::<Result<Vec<_>, _>>()?,
        None => (0..width).filter(|i| Some(*i) != label_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(CliError::Data("no feature columns selected".into()));
    }
    if let Some(l) = label_idx {
        if feature_idx.contains(&l) {
            return Err(CliError::Data(
                "the label column cannot also be a feature column".into(),
            ));
        }
    }

    let feature_names: Vec<String> = feature_idx
        .iter()
        .map(|&i| match &header {
            Some(h) => h[i].clone(),
            None => format!("x{i}"),
        })
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len() - data_start);
    let mut truth_ids: Vec<usize> = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut bad_rows: Vec<usize> = Vec::new();
    for (offset, record) in records[data_start..].iter().enumerate() {
        let line_number = data_start + offset + 1; // 1-based file line
        if record.len() != width {
            bad_rows.push(line_number);
            continue;
        }
        let mut row = Vec::with_capacity(feature_idx.len());
        let mut ok = true;
        for &i in &feature_idx {
            match record[i].trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            bad_rows.push(line_number);
            continue;
        }
        rows.push(row);
        if let Some(l) = label_idx {
            let class = record[l].trim().to_string();
            let id = match classes.iter().position(|c| *c == class) {
                Some(i) => i,
                None => {
                    classes.push(class);
                    classes.len() - 1
                }
            };
            truth_ids.push(id);
        }
    }
    if !bad_rows.is_empty() {
        let shown: Vec<String> = bad_rows.iter().take(10).map(|r| r.to_string()).collect();
        let suffix = if bad_rows.len() > 10 { ", ..." } else { "" };
        return Err(CliError::Data(format!(
            "{} row(s) with missing or non-numeric cells (file lines {}{})",
            bad_rows.len(),
            shown.join(", "),
            suffix
        )));
    }
    let data = DataMatrix::from_rows(&rows)
        .map_err(|e| CliError::Data(format!("invalid data matrix: {e}")))?;
    Ok(IngestResult {
        data,
        truth: label_idx.map(|_| (classes, truth_ids)),
        feature_names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_numeric_file_has_no_header() {
        let f = write_temp("1.0,2.0\n3.0,4.0\n5.5,6.5\n");
        let out = ingest_csv(f.path(), None, None).unwrap();
        assert_eq!(out.data.n_rows(), 3);
        assert_eq!(out.data.n_cols(), 2);
        assert_eq!(out.feature_names, vec!["x0", "x1"]);
    }

    #[test]
    fn named_selection_resolves_through_header() {
        let f = write_temp("a,b,c\n1,2,3\n4,5,6\n");
        let out = ingest_csv(f.path(), Some("c,a"), None).unwrap();
        assert_eq!(out.data.n_cols(), 2);
        assert_eq!(out.feature_names, vec!["c", "a"]);
        assert_eq!(out.data.values()[(0, 0)], 3.0);
        assert_eq!(out.data.values()[(0, 1)], 1.0);
    }

    #[test]
    fn label_column_is_excluded_and_mapped() {
        let f = write_temp("x,y,cls\n1,2,red\n3,4,blue\n5,6,red\n");
        let out = ingest_csv(f.path(), None, Some("cls")).unwrap();
        assert_eq!(out.data.n_cols(), 2);
        let (classes, ids) = out.truth.unwrap();
        assert_eq!(classes, vec!["red", "blue"]);
        assert_eq!(ids, vec![0, 1, 0]);
    }

    #[test]
    fn non_numeric_cell_errors_with_row_number() {
        let f = write_temp("x,y\n1,2\n3,NA\n5,6\n");
        let err = ingest_csv(f.path(), None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("lines 3"), "{}", err.message());
    }

    #[test]
    fn unknown_column_errors() {
        let f = write_temp("x,y\n1,2\n");
        let err = ingest_csv(f.path(), Some("zz"), None).unwrap_err();
        assert!(err.message().contains("zz"));
        let err = ingest_csv(f.path(), Some("7"), None).unwrap_err();
        assert!(err.message().contains("out of range"));
    }

    #[test]
    fn missing_file_is_a_data_error() {
        let err = ingest_csv(Path::new("/nonexistent/file.csv"), None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
