//! CSV ingestion: rectangular numeric tables, '.' decimal separator,
//! optional named response column.

use std::path::Path;

use fedqr::Matrix;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("data row {row}, column {col}: cannot parse {cell:?} as a number")]
    ParseError { row: usize, col: usize, cell: String },
    #[error("data row {row} has {got} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("response column {name:?} is not in the header")]
    MissingResponse { name: String },
    #[error("file has a response column but no features")]
    NoFeatures,
    #[error("file has no data rows")]
    Empty,
}

/// Loads a numeric CSV into a matrix, optionally splitting off one named
/// column as the response. Column order is preserved; row and column
/// numbers in errors are 1-based over the data rows.
pub fn load_csv(
    path: &Path,
    has_header: bool,
    response: Option<&str>,
) -> Result<(Matrix, Option<Vec<f64>>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;

    let response_index = match response {
        Some(name) => {
            let headers = reader.headers().map_err(|source| IngestError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let index = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IngestError::MissingResponse {
                    name: name.to_string(),
                })?;
            Some(index)
        }
        None => None,
    };

    let mut width = None;
    let mut cells: Vec<f64> = Vec::new();
    let mut responses: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(IngestError::RaggedRows {
                row: r + 1,
                expected,
                got: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| IngestError::ParseError {
                row: r + 1,
                col: c + 1,
                cell: cell.to_string(),
            })?;
            if response_index == Some(c) {
                responses.push(value);
            } else {
                cells.push(value);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(IngestError::Empty);
    }
    let cols = width.unwrap() - usize::from(response_index.is_some());
    if cols == 0 {
        return Err(IngestError::NoFeatures);
    }
    let matrix = Matrix::from_rows(rows, cols, cells).expect("row-major cells fit the shape");
    Ok((matrix, response_index.map(|_| responses)))
}
