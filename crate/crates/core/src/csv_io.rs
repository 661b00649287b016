//! Flat-file formats: boundary CSV (`t,beta`) and verification reports
//! (`check,statistic,threshold,result`).
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64` (at most 17 significant digits), always with a decimal point.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const BOUNDARY_HEADER: &str = "t,beta";
pub const REPORT_HEADER: &str = "check,statistic,threshold,result";

/// Shortest round-trip decimal with a mandatory decimal point (`1.0`, `0.25`).
pub fn format_decimal(x: f64) -> String {
    let s = format!("{x}");
    if x.is_finite() && !s.contains('.') {
        format!("{s}.0")
    } else {
        s
    }
}

pub fn write_boundary_csv<W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = (f64, f64)>,
) -> Result<()> {
    writeln!(out, "{BOUNDARY_HEADER}")?;
    for (t, b) in rows {
        writeln!(out, "{},{}", format_decimal(t), format_decimal(b))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_boundary_csv<R: BufRead>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != BOUNDARY_HEADER {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("expected header `{BOUNDARY_HEADER}`, got `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let raw = fields.next().ok_or_else(|| Error::Parse {
                line: lineno,
                reason: format!("missing `{name}` column"),
            })?;
            raw.trim().parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                reason: format!("bad `{name}` value `{raw}`: {e}"),
            })
        };
        let t = next("t")?;
        let b = next("beta")?;
        rows.push((t, b));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// One row of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

pub fn write_report_csv<W: Write>(mut out: W, rows: &[CheckRow]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.check,
            format_decimal(r.statistic),
            format_decimal(r.threshold),
            if r.passed { "pass" } else { "fail" }
        )?;
    }
    out.flush()?;
    Ok(())
}
