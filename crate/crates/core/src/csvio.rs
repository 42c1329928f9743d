//! Row-major CSV matrices. Lines starting with `#` are comments; a first
//! line of the form `# rows cols` declares the shape and is checked.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn declared_shape(text: &str) -> Option<(usize, usize)> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    let rest = first.trim().strip_prefix('#')?;
    let mut it = rest.split_whitespace();
    let r = it.next()?.parse().ok()?;
    let c = it.next()?.parse().ok()?;
    it.next().is_none().then_some((r, c))
}

pub fn parse_matrix<R: Read>(mut reader: R) -> Result<DMatrix<f64>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let shape = declared_shape(&text);
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("record {}: cannot parse {f:?} as a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::InvalidInput(format!(
                    "record {} has {} fields, expected {}",
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("matrix file has no data".into()));
    }
    let (r, c) = (rows.len(), rows[0].len());
    if let Some((dr, dc)) = shape {
        if (dr, dc) != (r, c) {
            return Err(Error::InvalidInput(format!("header declares {dr}x{dc} but data is {r}x{c}")));
        }
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix contains non-finite entries".into()));
    }
    Ok(DMatrix::from_row_slice(r, c, &flat))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(file)
}

/// A single row or a single column, as a vector.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(Error::InvalidInput(format!("expected a vector, got a {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(m.iter().cloned().collect())
}

pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(out, "# {} {}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|c| format!("{:.16e}", m[(r, c)])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_header_and_comments() {
        let m = parse_matrix("# 2 3\n1, 2, 3\n# note\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let m = parse_matrix("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(m.nrows(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_matrix("# 3 3\n1,2\n3,4\n".as_bytes()).is_err());
        assert!(parse_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(parse_matrix("1,x\n".as_bytes()).is_err());
        assert!(parse_matrix("# only comments\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e300, 2.5e-310]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(parse_matrix(buf.as_slice()).unwrap(), m);
    }
}
