//! Row-major CSV export with `#` header comments.
//!
//! The output loads with `numpy.loadtxt(path, delimiter=",", comments="#")`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::Result;

pub fn write_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>, header: &[(&str, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "# rows={} cols={}", m.nrows(), m.ncols())?;
    for r in 0..m.nrows() {
        let line: Vec<String> = m.row(r).iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn matrix_to_string(m: &DMatrix<f64>, header: &[(&str, String)]) -> String {
    let mut buf = Vec::new();
    write_matrix(&mut buf, m, header).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Grid of optional values; walls are written as `nan`.
pub fn grid_to_string(grid: &[Vec<Option<f64>>], header: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in header {
        s.push_str(&format!("# {k}={v}\n"));
    }
    for row in grid {
        let line: Vec<String> = row
            .iter()
            .map(|x| x.map_or_else(|| "nan".to_string(), |v| format!("{v:.17e}")))
            .collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Parses the body written by `write_matrix`, skipping comment lines.
pub fn read_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| crate::Error::InvalidArgument(format!("bad number {x:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(crate::Error::Shape("ragged CSV".into()));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}
