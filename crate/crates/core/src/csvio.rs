//! CSV files exchanged by the CLI: dense matrices and eigenvalue lists.

use std::io::{Read, Write};

use crate::dense::{CMatrix, C64};
use crate::eigen::phase;
use crate::error::{Error, Result};
use crate::format::sig12;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `row,col,<re>,<im>` with 1-based indices, every entry listed.
pub fn write_matrix_csv<W: Write>(w: W, m: &CMatrix, value_cols: [&str; 2]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "col", value_cols[0], value_cols[1]])
        .map_err(csv_err)?;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)];
            out.write_record([
                (i + 1).to_string(),
                (j + 1).to_string(),
                sig12(z.re),
                sig12(z.im),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_field(rec: &csv::StringRecord, idx: usize, line: usize) -> Result<f64> {
    let tok = rec.get(idx).unwrap_or("");
    tok.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number '{tok}'"),
    })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or(Error::Parse {
            line: 1,
            message: format!("missing column '{name}'"),
        })
}

/// Reads a square matrix written by [`write_matrix_csv`]. Missing entries
/// are zero.
pub fn read_matrix_csv<R: Read>(r: R, value_cols: [&str; 2]) -> Result<CMatrix> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let ci = [
        column_index(&headers, "row")?,
        column_index(&headers, "col")?,
        column_index(&headers, value_cols[0])?,
        column_index(&headers, value_cols[1])?,
    ];
    let mut entries = Vec::new();
    let mut n = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(csv_err)?;
        let row = parse_field(&rec, ci[0], line)?;
        let col = parse_field(&rec, ci[1], line)?;
        if row < 1.0 || col < 1.0 || row.fract() != 0.0 || col.fract() != 0.0 {
            return Err(Error::Parse {
                line,
                message: "row/col must be positive integers".into(),
            });
        }
        let (row, col) = (row as usize, col as usize);
        n = n.max(row).max(col);
        entries.push((
            row - 1,
            col - 1,
            C64::new(
                parse_field(&rec, ci[2], line)?,
                parse_field(&rec, ci[3], line)?,
            ),
        ));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, j, z) in entries {
        m[(i, j)] = z;
    }
    Ok(m)
}

/// `index,re_S,im_S,abs_S,phase_rad`, 1-based index.
pub fn write_eigenvalue_csv<W: Write>(w: W, values: &[C64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "re_S", "im_S", "abs_S", "phase_rad"])
        .map_err(csv_err)?;
    for (k, z) in values.iter().enumerate() {
        out.write_record([
            (k + 1).to_string(),
            sig12(z.re),
            sig12(z.im),
            sig12(z.norm()),
            sig12(phase(*z)),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `index,re_S,im_S` (extra columns ignored), ordered by index.
pub fn read_eigenvalue_csv<R: Read>(r: R) -> Result<Vec<C64>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let ci = [
        column_index(&headers, "index")?,
        column_index(&headers, "re_S")?,
        column_index(&headers, "im_S")?,
    ];
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(csv_err)?;
        let idx = parse_field(&rec, ci[0], line)?;
        rows.push((
            idx,
            C64::new(
                parse_field(&rec, ci[1], line)?,
                parse_field(&rec, ci[2], line)?,
            ),
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows.into_iter().map(|(_, z)| z).collect())
}

/// Which kind of measurement file a CSV header describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasuredKind {
    ImpedanceMatrix,
    EigenvalueList,
}

pub fn sniff_measured(text: &str) -> Result<MeasuredKind> {
    let header = text.lines().next().unwrap_or("");
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.contains(&"re_ohm") && cols.contains(&"row") {
        Ok(MeasuredKind::ImpedanceMatrix)
    } else if cols.contains(&"re_S") && cols.contains(&"index") {
        Ok(MeasuredKind::EigenvalueList)
    } else {
        Err(Error::Parse {
            line: 1,
            message: format!("unrecognized header '{header}'"),
        })
    }
}
