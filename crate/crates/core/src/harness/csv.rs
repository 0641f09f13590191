//! CSV export of aggregated tables: header `t,mean_sq_dist,stderr,sigma,rho,gamma`,
//! floats with 17 significant digits, LF line endings.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiment::TableRow;

pub const HEADER: &str = "t,mean_sq_dist,stderr,sigma,rho,gamma";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv_string(rows: &[TableRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 140);
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            fmt(r.mean_sq_dist),
            fmt(r.stderr),
            fmt(r.sigma),
            fmt(r.rho),
            fmt(r.gamma)
        ));
    }
    out
}

pub fn export_csv(rows: &[TableRow], path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "expected CSV header `{HEADER}`, got {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::Config(format!("CSV line {}: {what}", i + 2));
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let t = fields[0].parse().map_err(|_| bad("bad t"))?;
            let f = |k: usize| fields[k].parse::<f64>().map_err(|_| bad("bad number"));
            Ok(TableRow {
                t,
                mean_sq_dist: f(1)?,
                stderr: f(2)?,
                sigma: f(3)?,
                rho: f(4)?,
                gamma: f(5)?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<TableRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}
