//! CSV time series, summary tables and Wigner grid files.

use std::io::{self, BufRead, Write};

use qsqueeze::observables::to_db;
use qsqueeze::{TimeSeries, WignerGrid};

use crate::engine::Summary;

pub const SERIES_HEADER: [&str; 8] = [
    "t",
    "var_x1",
    "var_x2",
    "cov",
    "var_x1_db",
    "var_x1_renorm_db",
    "purity",
    "p_e",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_series<W: Write>(out: W, series: &TimeSeries) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SERIES_HEADER)?;
    for r in series.rows() {
        w.write_record([
            num(r.t),
            num(r.var_x1),
            num(r.var_x2),
            num(r.cov),
            num(r.var_x1_db),
            num(r.var_x1_renorm_db),
            num(r.purity),
            opt(r.p_e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_COLUMNS: [&str; 9] = [
    "status",
    "steady_var_x1",
    "steady_var_x1_db",
    "window_mean",
    "final_t",
    "final_var_x1",
    "final_purity",
    "final_p_e",
    "error",
];

/// Writes summary rows; with `axis` set, each row is prefixed by its value.
pub fn write_summaries<W: Write>(out: W, axis: Option<&str>, rows: &[(Option<f64>, &Summary)]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = axis.into_iter().collect();
    header.extend(SUMMARY_COLUMNS);
    w.write_record(&header)?;
    for (value, s) in rows {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if axis.is_some() {
            rec.push(opt(*value));
        }
        rec.push(s.status.as_str().to_string());
        rec.push(opt(s.steady_var_x1));
        rec.push(opt(s.steady_var_x1.and_then(|v| to_db(v).ok())));
        rec.push(opt(s.window_mean));
        rec.push(opt(s.last.map(|r| r.t)));
        rec.push(opt(s.last.map(|r| r.var_x1)));
        rec.push(opt(s.last.map(|r| r.purity)));
        rec.push(opt(s.last.and_then(|r| r.p_e)));
        rec.push(s.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Grid file: one header line `nx ny x_min x_max y_min y_max`, then `ny`
/// lines of `nx` values, the first line at `y_min`.
pub fn write_wigner<W: Write>(mut out: W, grid: &WignerGrid) -> io::Result<()> {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let first = |v: &[f64]| v.first().copied().unwrap_or(0.0);
    let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
    writeln!(
        out,
        "{nx} {ny} {} {} {} {}",
        first(&grid.xs),
        last(&grid.xs),
        first(&grid.ys),
        last(&grid.ys)
    )?;
    for row in &grid.values {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a grid written by [`write_wigner`].
pub fn read_wigner<R: BufRead>(input: R) -> io::Result<WignerGrid> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty grid file"))??;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 {
        return Err(bad("grid header needs nx ny x_min x_max y_min y_max"));
    }
    let nx: usize = h[0].parse().map_err(|_| bad("bad nx"))?;
    let ny: usize = h[1].parse().map_err(|_| bad("bad ny"))?;
    let f = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
    let axis = |lo: f64, hi: f64, n: usize| qsqueeze::observables::linspace(lo, hi, n);
    let xs = axis(f(h[2])?, f(h[3])?, nx);
    let ys = axis(f(h[4])?, f(h[5])?, ny);
    let mut values = Vec::with_capacity(ny);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split_whitespace().map(f).collect::<io::Result<Vec<f64>>>()?;
        if row.len() != nx {
            return Err(bad(format!("expected {nx} values per row, got {}", row.len())));
        }
        values.push(row);
    }
    if values.len() != ny {
        return Err(bad(format!("expected {ny} rows, got {}", values.len())));
    }
    Ok(WignerGrid { xs, ys, values })
}
