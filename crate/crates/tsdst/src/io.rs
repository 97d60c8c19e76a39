//! CSV ingestion and table rendering.

use std::fs::File;
use std::path::Path;

use tsdst_core::data::{DATE, LATITUDE, LONGITUDE, SAMPLE_ID};
use tsdst_core::{ChemDataset, Mat, RawTable};

use crate::error::{CliError, CliResult};

/// Reads a CSV with a header row into a [`RawTable`]. Empty cells are
/// missing values.
pub fn read_table(path: &Path) -> CliResult<RawTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Input(format!("{}: missing header row", path.display())));
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }
    RawTable::from_records(&header, &records).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// True when the file has no bytes besides whitespace.
pub fn is_blank(path: &Path) -> CliResult<bool> {
    let text = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.iter().all(u8::is_ascii_whitespace))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => CliError::Input(format!("{}: line {}: {e}", path.display(), p.line())),
        None => CliError::Input(format!("{}: {e}", path.display())),
    }
}

/// Renders rows as CSV. Floats use the shortest representation that reads
/// back to the same value, so outputs are exact and deterministic.
pub fn render_csv<R, S>(header: &[S], rows: R) -> Vec<u8>
where
    R: IntoIterator<Item = Vec<String>>,
    S: AsRef<str>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(AsRef::as_ref)).expect("write to memory");
    for row in rows {
        w.write_record(&row).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Row-labelled matrix as CSV.
pub fn matrix_csv(label: &str, row_names: &[String], col_names: &[String], m: &Mat) -> Vec<u8> {
    let mut header = vec![label.to_string()];
    header.extend(col_names.iter().cloned());
    render_csv(
        &header,
        (0..m.rows()).map(|i| {
            let mut row = vec![row_names[i].clone()];
            row.extend(m.row(i).iter().map(|&v| fmt(v)));
            row
        }),
    )
}

/// A dataset in the standard input schema, features in raw units.
pub fn dataset_csv(ds: &ChemDataset) -> Vec<u8> {
    let mut header: Vec<String> = [SAMPLE_ID, LATITUDE, LONGITUDE, DATE].iter().map(|s| s.to_string()).collect();
    header.extend(ds.analyte_names().iter().cloned());
    header.push(ds.target_name().to_string());
    let raw = ds.raw_features();
    render_csv(
        &header,
        (0..ds.n_samples()).map(|i| {
            let mut row = vec![
                ds.sample_ids()[i].clone(),
                fmt(ds.latitude()[i]),
                fmt(ds.longitude()[i]),
                ds.dates()[i].format("%Y-%m-%d").to_string(),
            ];
            row.extend(raw.row(i).iter().map(|&v| fmt(v)));
            row.push(fmt(ds.target()[i]));
            row
        }),
    )
}

/// Parses a row-labelled numeric CSV written by [`matrix_csv`]; returns
/// column names (without the label column) and the matrix.
pub fn read_matrix(path: &Path) -> CliResult<(Vec<String>, Mat)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .skip(1)
        .map(str::to_owned)
        .collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for cell in rec.iter().skip(1) {
            data.push(cell.parse::<f64>().map_err(|_| {
                CliError::Input(format!("{}: row {}: `{cell}` is not a number", path.display(), rows + 1))
            })?);
        }
        rows += 1;
    }
    let m = Mat::from_vec(rows, names.len(), data).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok((names, m))
}
