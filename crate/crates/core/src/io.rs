//! Plain CSV formats: one row per line, comma-separated decimal fields, no
//! header. Lines starting with `#` are comments and blank lines are skipped.
//! Numbers are written with 17 significant digits so they round-trip exactly.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::geometry::{Point, PointCloud};
use crate::ifs::AttractorApprox;
use crate::operators::OperatorMatrix;
use crate::{Error, Result};

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a rectangular table of numbers, rejecting ragged rows.
pub fn read_table<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|field| {
                let field = field.trim();
                let x: f64 = field.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid number {field:?}"),
                })?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Parse {
                        line: lineno,
                        message: format!("non-finite value {field:?}"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::RaggedRow {
                    line: lineno,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_cloud<R: BufRead>(reader: R) -> Result<PointCloud> {
    PointCloud::from_points(read_table(reader)?)
}

pub fn write_cloud<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    for p in cloud.points() {
        write_row(&mut w, p)?;
    }
    Ok(())
}

fn write_row<W: Write>(w: &mut W, row: &[f64]) -> Result<()> {
    let line: Vec<String> = row.iter().map(|&x| format_f64(x)).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<OperatorMatrix> {
    let rows = read_table(reader)?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 {
        return Err(Error::Parse {
            line: 0,
            message: "empty matrix".into(),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    OperatorMatrix::new(DMatrix::from_row_slice(nrows, ncols, &flat))
}

pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        write_row(&mut w, &row)?;
    }
    Ok(())
}

/// A vector is either a single row or a single column.
pub fn read_vector<R: BufRead>(reader: R) -> Result<Point> {
    let rows = read_table(reader)?;
    let coords = match rows.as_slice() {
        [] => {
            return Err(Error::Parse {
                line: 0,
                message: "empty vector".into(),
            })
        }
        [single] => single.clone(),
        many if many[0].len() == 1 => many.iter().map(|r| r[0]).collect(),
        many => {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected a row or column vector, got {}x{}", many.len(), many[0].len()),
            })
        }
    };
    Point::new(coords)
}

/// Vectors are written as a single row.
pub fn write_vector<W: Write>(mut w: W, v: &[f64]) -> Result<()> {
    write_row(&mut w, v)
}

pub fn attractor_header(approx: &AttractorApprox) -> String {
    format!(
        "# radius={} iterations={}",
        format_f64(approx.radius),
        approx.iterations
    )
}

/// Certificate header line followed by the cloud.
pub fn write_attractor<W: Write>(mut w: W, approx: &AttractorApprox) -> Result<()> {
    writeln!(w, "{}", attractor_header(approx))?;
    write_cloud(w, &approx.cloud)
}

pub fn read_attractor<R: BufRead>(mut reader: R) -> Result<AttractorApprox> {
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let parse_err = || Error::Parse {
        line: 1,
        message: format!("malformed certificate header {:?}", header.trim_end()),
    };
    let rest = header.trim().strip_prefix('#').ok_or_else(parse_err)?;
    let mut radius = None;
    let mut iterations = None;
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("radius", v)) => radius = v.parse::<f64>().ok(),
            Some(("iterations", v)) => iterations = v.parse::<u64>().ok(),
            _ => return Err(parse_err()),
        }
    }
    let (radius, iterations) = radius.zip(iterations).ok_or_else(parse_err)?;
    Ok(AttractorApprox {
        cloud: read_cloud(reader)?,
        radius,
        iterations,
    })
}
