//! Plain-text matrix files and atomic writes.
//!
//! Matrices are headerless CSV, one row per line. Values use Rust's shortest
//! round-trip formatting, so reading a written file gives back the same bits.
//! Masked cells are the literal `NaN`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub fn write_matrix<W: Write>(out: W, m: MatRef<'_, f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut row = Vec::with_capacity(m.ncols());
    for i in 0..m.nrows() {
        row.clear();
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            row.push(if v.is_nan() { "NaN".to_string() } else { format!("{v:?}") });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: Read>(input: R) -> Result<Mat<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {}, column {}: '{s}' is not a number", i + 1, j + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Data(format!(
                    "row {} has {} values, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix_file(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m)?;
    write_atomic(path, &buf)
}

pub fn read_matrix_file(path: &Path) -> Result<Mat<f64>> {
    let f = fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_matrix(std::io::BufReader::new(f))
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Domain(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_with_nan() {
        let m = Mat::from_fn(3, 2, |i, j| if i == 1 && j == 0 { f64::NAN } else { (i as f64 + 0.1) / (j as f64 + 3.0) });
        let mut buf = Vec::new();
        write_matrix(&mut buf, m.as_ref()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("NaN,"));
        let back = read_matrix(&buf[..]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert!(m[(i, j)].to_bits() == back[(i, j)].to_bits() || (m[(i, j)].is_nan() && back[(i, j)].is_nan()));
            }
        }
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(read_matrix("1,2\n3\n".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(read_matrix("1,x\n".as_bytes()), Err(Error::Data(_))));
    }

    #[test]
    fn atomic_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Mat::from_fn(2, 2, |i, j| (i * 2 + j) as f64 * 1e-300);
        write_matrix_file(&path, m.as_ref()).unwrap();
        assert_eq!(read_matrix_file(&path).unwrap(), m);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    proptest! {
        #[test]
        fn finite_doubles_round_trip(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 12)) {
            let m = Mat::from_fn(3, 4, |i, j| vals[i * 4 + j]);
            let mut buf = Vec::new();
            write_matrix(&mut buf, m.as_ref()).unwrap();
            let back = read_matrix(&buf[..]).unwrap();
            for i in 0..3 {
                for j in 0..4 {
                    prop_assert_eq!(m[(i, j)].to_bits(), back[(i, j)].to_bits());
                }
            }
        }
    }
}
