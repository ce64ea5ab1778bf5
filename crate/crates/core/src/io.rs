//! CSV readers and writers for grids, curves, quotes and reports.
//!
//! Readers require the exact header, skip `#` comment lines, reject NaN and
//! infinities, and report the offending line. Grid files list one cell per
//! row, x-major: all rows of the first x value with increasing y, then the
//! next x value with the same y values, and so on. Writers emit LF line
//! endings and 17 significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::basket_hedge::IterationReport;
use crate::error::{HedgeError, Result};
use crate::indifference::IndifferenceQuote;
use crate::market_model::{GridAxis, JointDensityGrid, MarginalDensity};
use crate::payoff::{HedgeCurve, PayoffSurface};
use crate::replication::ReplicationPortfolio;

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: u64, message: impl Into<String>) -> HedgeError {
    HedgeError::Parse { line, message: message.into() }
}

/// Rows of finite numbers under the given header, with their line numbers.
fn read_table<R: Read>(r: R, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = found.iter().collect();
    if names != header {
        return Err(parse_err(1, format!("expected header {:?}, found {:?}", header.join(","), names.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = Vec::with_capacity(header.len());
        for (field, name) in rec.iter().zip(header) {
            let v: f64 = field.parse().map_err(|_| parse_err(line, format!("{name}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{name}: value {field} is not finite")));
            }
            vals.push(v);
        }
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| HedgeError::Io(format!("{}: {e}", path.display())))
}

/// Axis from a column that must be strictly increasing.
fn column_axis(rows: &[(u64, Vec<f64>)]) -> Result<GridAxis> {
    for w in rows.windows(2) {
        if !(w[1].1[0] > w[0].1[0]) {
            return Err(parse_err(w[1].0, format!("coordinate {} does not increase", w[1].1[0])));
        }
    }
    GridAxis::new(rows.iter().map(|(_, v)| v[0]).collect())
}

/// Splits x-major `x,y,value` rows into axes and values.
fn grid_layout(rows: &[(u64, Vec<f64>)]) -> Result<(GridAxis, GridAxis, Vec<f64>)> {
    let first_x = rows[0].1[0];
    let ys: Vec<f64> = rows.iter().take_while(|(_, v)| v[0] == first_x).map(|(_, v)| v[1]).collect();
    let ny = ys.len();
    if !rows.len().is_multiple_of(ny) {
        return Err(parse_err(rows[rows.len() - 1].0, format!("{} rows do not form blocks of {ny} y values", rows.len())));
    }
    let mut xs = Vec::new();
    for (b, block) in rows.chunks(ny).enumerate() {
        let x = block[0].1[0];
        if let Some(&prev) = xs.last() {
            if !(x > prev) {
                return Err(parse_err(block[0].0, format!("x value {x} does not increase")));
            }
        }
        for (k, (line, v)) in block.iter().enumerate() {
            if v[0] != x {
                return Err(parse_err(*line, format!("expected x = {x} in block {b}, found {}", v[0])));
            }
            if v[1] != ys[k] {
                return Err(parse_err(*line, format!("expected y = {}, found {}", ys[k], v[1])));
            }
        }
        xs.push(x);
    }
    let axis_y = GridAxis::new(ys).map_err(|e| parse_err(rows[0].0, e.to_string()))?;
    let axis_x = GridAxis::new(xs).map_err(|e| parse_err(rows[0].0, e.to_string()))?;
    Ok((axis_x, axis_y, rows.iter().map(|(_, v)| v[2]).collect()))
}

/// `x,y,mass`, total within the input tolerance of one.
pub fn read_joint<R: Read>(r: R) -> Result<JointDensityGrid> {
    let rows = read_table(r, &["x", "y", "mass"])?;
    let (ax, ay, mass) = grid_layout(&rows)?;
    JointDensityGrid::new(ax, ay, mass)
}

pub fn read_joint_path(path: &Path) -> Result<JointDensityGrid> {
    read_joint(open(path)?)
}

/// `x,mass`.
pub fn read_marginal<R: Read>(r: R) -> Result<MarginalDensity> {
    let rows = read_table(r, &["x", "mass"])?;
    let axis = column_axis(&rows)?;
    MarginalDensity::new(axis, rows.iter().map(|(_, v)| v[1]).collect())
}

pub fn read_marginal_path(path: &Path) -> Result<MarginalDensity> {
    read_marginal(open(path)?)
}

/// `strike,price` as two vectors.
pub fn read_calls<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_table(r, &["strike", "price"])?;
    let axis = column_axis(&rows)?;
    Ok((axis.points().to_vec(), rows.iter().map(|(_, v)| v[1]).collect()))
}

pub fn read_calls_path(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    read_calls(open(path)?)
}

/// `x,y,value`.
pub fn read_payoff<R: Read>(r: R) -> Result<PayoffSurface> {
    let rows = read_table(r, &["x", "y", "value"])?;
    let (ax, ay, values) = grid_layout(&rows)?;
    PayoffSurface::new(ax, ay, values)
}

pub fn read_payoff_path(path: &Path) -> Result<PayoffSurface> {
    read_payoff(open(path)?)
}

/// `x,f` (or any two-column header given in `header`).
pub fn read_curve<R: Read>(r: R, header: [&str; 2]) -> Result<HedgeCurve> {
    let rows = read_table(r, &header)?;
    let axis = column_axis(&rows)?;
    HedgeCurve::new(axis, rows.iter().map(|(_, v)| v[1]).collect())
}

pub fn read_curve_path(path: &Path, header: [&str; 2]) -> Result<HedgeCurve> {
    read_curve(open(path)?, header)
}

fn write_comments<W: Write>(w: &mut W, comments: &[(String, String)]) -> Result<()> {
    for (k, v) in comments {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Two-column curve with trailing `# key=value` lines.
pub fn write_curve<W: Write>(w: &mut W, header: [&str; 2], curve: &HedgeCurve, comments: &[(String, String)]) -> Result<()> {
    writeln!(w, "{},{}", header[0], header[1])?;
    for (x, v) in curve.axis().points().iter().zip(curve.values()) {
        writeln!(w, "{},{}", fmt_num(*x), fmt_num(*v))?;
    }
    write_comments(w, comments)
}

pub fn write_joint<W: Write>(w: &mut W, grid: &JointDensityGrid) -> Result<()> {
    writeln!(w, "x,y,mass")?;
    for (i, x) in grid.axis_x().points().iter().enumerate() {
        for (j, y) in grid.axis_y().points().iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_num(*x), fmt_num(*y), fmt_num(grid.at(i, j)))?;
        }
    }
    write_comments(w, &[("truncated_mass".into(), fmt_num(grid.truncated_mass()))])
}

pub fn write_payoff<W: Write>(w: &mut W, surface: &PayoffSurface) -> Result<()> {
    writeln!(w, "x,y,value")?;
    for (i, x) in surface.axis_x().points().iter().enumerate() {
        for (j, y) in surface.axis_y().points().iter().enumerate() {
            writeln!(w, "{},{},{}", fmt_num(*x), fmt_num(*y), fmt_num(surface.at(i, j)))?;
        }
    }
    Ok(())
}

pub fn write_marginal<W: Write>(w: &mut W, m: &MarginalDensity) -> Result<()> {
    writeln!(w, "x,mass")?;
    for (x, v) in m.axis().points().iter().zip(m.mass()) {
        writeln!(w, "{},{}", fmt_num(*x), fmt_num(*v))?;
    }
    Ok(())
}

/// `type,strike,weight` rows; cash and forward use κ as strike.
pub fn write_portfolio<W: Write>(w: &mut W, port: &ReplicationPortfolio) -> Result<()> {
    writeln!(w, "type,strike,weight")?;
    writeln!(w, "cash,{},{}", fmt_num(port.kappa), fmt_num(port.cash))?;
    writeln!(w, "forward,{},{}", fmt_num(port.kappa), fmt_num(port.forward_units))?;
    for (k, wt) in port.put_strikes.iter().zip(&port.put_weights) {
        writeln!(w, "put,{},{}", fmt_num(*k), fmt_num(*wt))?;
    }
    for (k, wt) in port.call_strikes.iter().zip(&port.call_weights) {
        writeln!(w, "call,{},{}", fmt_num(*k), fmt_num(*wt))?;
    }
    write_comments(w, &[("one_sided_endpoints".into(), port.one_sided_endpoints.to_string())])
}

/// `iter,l2_residual,expected_utility`; iteration 0 is the starting point
/// and has no residual.
pub fn write_trace<W: Write>(w: &mut W, report: &IterationReport) -> Result<()> {
    writeln!(w, "iter,l2_residual,expected_utility")?;
    for (n, eu) in report.expected_utilities.iter().enumerate() {
        let res = if n == 0 { String::new() } else { fmt_num(report.l2_residuals[n - 1]) };
        writeln!(w, "{n},{res},{}", fmt_num(*eu))?;
    }
    Ok(())
}

pub fn write_quote<W: Write>(w: &mut W, quote: &IndifferenceQuote, gap: f64) -> Result<()> {
    writeln!(w, "nu,gamma,price,verification_gap")?;
    writeln!(w, "{},{},{},{}", fmt_num(quote.nu), fmt_num(quote.gamma), fmt_num(quote.price), fmt_num(gap))?;
    Ok(())
}
