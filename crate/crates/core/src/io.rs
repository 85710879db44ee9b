//! CSV matrices with a `# key=value ...` header line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Formats a real with 17 significant digits so that parsing restores it.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix_csv(header: &str, m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {header}");
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|&x| fmt_real(x)).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn parse_header(line: &str) -> BTreeMap<String, String> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn parse_real(s: &str, line: usize) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t
            .parse()
            .map_err(|_| Error::parse(line, format!("`{t}` is not a number"))),
    }
}

/// Parses numeric CSV rows, skipping blank lines and `#` lines.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|s| parse_real(s, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a matrix written by [`write_matrix_csv`]. `rows`/`cols` in the
/// header, when present, must match the data.
pub fn read_matrix_csv(text: &str) -> Result<(BTreeMap<String, String>, DMatrix<f64>)> {
    let meta = text
        .lines()
        .find(|l| l.trim_start().starts_with('#'))
        .map(parse_header)
        .unwrap_or_default();
    let rows = parse_rows(text)?;
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    for (key, actual) in [("rows", nr), ("cols", nc)] {
        if let Some(v) = meta.get(key) {
            if v.parse::<usize>().ok() != Some(actual) {
                return Err(Error::parse(
                    1,
                    format!("header says {key}={v}, data has {actual}"),
                ));
            }
        }
    }
    let m = DMatrix::from_fn(nr, nc, |r, c| rows[r][c]);
    Ok((meta, m))
}
