//! Plain CSV for observables time series.
//!
//! Floats are written in `{:.16e}` form, which round-trips every `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::observables::ObservableRecord;

pub const OBSERVABLES_HEADER: &str = "t,M_P1,M_N1,M_P2,M_N2,M_P,M_N,V,min_val,dt_used";

/// Formats a table of floats under `header`.
pub fn format_table(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Parses a table written by [`format_table`], checking the header.
pub fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        Some(h) => return Err(Error::Parse(format!("unexpected header `{h}`"))),
        None => return Err(Error::Parse("empty table".into())),
    }
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", n + 2)))?;
        if row.len() != width {
            return Err(Error::Parse(format!(
                "row {}: expected {width} columns, got {}",
                n + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn observables_to_string(records: &[ObservableRecord]) -> String {
    format_table(
        OBSERVABLES_HEADER,
        records.iter().map(|r| {
            vec![
                r.t, r.m_p1, r.m_n1, r.m_p2, r.m_n2, r.m_p, r.m_n, r.v, r.min_val, r.dt_used,
            ]
        }),
    )
}

pub fn observables_from_str(text: &str) -> Result<Vec<ObservableRecord>> {
    Ok(parse_table(text, OBSERVABLES_HEADER)?
        .into_iter()
        .map(|r| ObservableRecord {
            t: r[0],
            m_p1: r[1],
            m_n1: r[2],
            m_p2: r[3],
            m_n2: r[4],
            m_p: r[5],
            m_n: r[6],
            v: r[7],
            min_val: r[8],
            dt_used: r[9],
        })
        .collect())
}

pub fn write_observables(path: &Path, records: &[ObservableRecord]) -> Result<()> {
    std::fs::write(path, observables_to_string(records)).map_err(|e| Error::io(path, e))
}

pub fn read_observables(path: &Path) -> Result<Vec<ObservableRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    observables_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let recs: Vec<_> = (0..5)
            .map(|k| {
                let x = 0.1 * k as f64 + 1.0 / 3.0;
                ObservableRecord {
                    t: k as f64,
                    m_p1: x,
                    m_n1: x * 1e-17,
                    m_p2: -x,
                    m_n2: 7e300,
                    m_p: std::f64::consts::PI,
                    m_n: 0.0,
                    v: 1.0,
                    min_val: -1e-300,
                    dt_used: 2.75e-4,
                }
            })
            .collect();
        let text = observables_to_string(&recs);
        assert!(text.starts_with(OBSERVABLES_HEADER));
        assert_eq!(observables_from_str(&text).unwrap(), recs);
    }

    #[test]
    fn rejects_bad_header_and_rows() {
        assert!(observables_from_str("t,x\n").is_err());
        let bad = format!("{OBSERVABLES_HEADER}\n1,2,3\n");
        assert!(observables_from_str(&bad).is_err());
    }
}
