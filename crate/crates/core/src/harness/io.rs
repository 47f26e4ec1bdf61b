use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use super::experiment::{ResultRow, SummaryRow};
use crate::error::{Error, Result};
use crate::model::AdjacencyMatrix;

pub const RESULTS_HEADER: &str =
    "experiment,value,replicate,seed,rel_err_theta,rel_err_b,rho_err,runtime_ms,eps0,kappa,status";

pub const SUMMARY_HEADER: &str = "experiment,value,ok,failed,rel_err_theta_mean,rel_err_theta_std,\
rel_err_b_mean,rel_err_b_std,rho_err_mean,rho_err_std,runtime_ms_mean,runtime_ms_std";

/// Nine significant digits in the shortest of fixed and scientific
/// notation, trailing zeros removed (C's `%.9g`).
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a whitespace-separated edge list. Lines starting with `#` and
/// blank lines are skipped; duplicate pairs collapse and self-loops are
/// dropped. The node count is one past the largest id, or the value of a
/// `# nodes N` comment if that is larger.
pub fn load_edge_list(path: &Path, zero_indexed: bool) -> Result<AdjacencyMatrix> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    let mut loops = 0usize;
    let mut n = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(count) = comment.trim().strip_prefix("nodes ") {
                if let Ok(count) = count.trim().parse::<usize>() {
                    n = n.max(count);
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(path, lineno, format!("expected two node ids, got {line:?}")));
        }
        let mut ids = [0usize; 2];
        for (slot, field) in ids.iter_mut().zip(&fields) {
            let raw: i64 = field
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("not an integer node id: {field:?}")))?;
            let id = if zero_indexed { raw } else { raw - 1 };
            if id < 0 {
                return Err(Error::invalid(format!(
                    "{}:{lineno}: node id {raw} is out of range",
                    path.display()
                )));
            }
            *slot = id as usize;
        }
        if ids[0] == ids[1] {
            loops += 1;
            continue;
        }
        n = n.max(ids[0] + 1).max(ids[1] + 1);
        edges.push((ids[0], ids[1]));
    }
    if loops > 0 {
        warn!("{}: dropped {loops} self-loop(s)", path.display());
    }
    AdjacencyMatrix::from_edges(n, edges)
}

/// Writes `i j` per undirected edge (`i <= j`), zero-indexed.
pub fn write_edge_list(a: &AdjacencyMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# nodes {}", a.n())?;
    for (i, j) in a.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless comma-separated numeric matrix.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, lineno + 1, format!("not a number: {:?}", f.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    lineno + 1,
                    format!("expected {} columns, got {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no rows"));
    }
    let k = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
}

/// Reads membership counts or weights and normalizes each row to sum 1.
pub fn load_ground_truth(path: &Path) -> Result<DMatrix<f64>> {
    let mut m = read_matrix_csv(path)?;
    for (i, mut row) in m.row_iter_mut().enumerate() {
        if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(parse_err(path, i + 1, "entries must be finite and nonnegative"));
        }
        let s = row.sum();
        if s == 0.0 {
            return Err(parse_err(path, i + 1, "all-zero membership row"));
        }
        row.unscale_mut(s);
    }
    Ok(m)
}

pub fn write_matrix_csv(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes the results table with [`RESULTS_HEADER`].
pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            format_float(r.value),
            r.replicate,
            r.seed,
            format_float(r.rel_err_theta),
            format_float(r.rel_err_b),
            format_float(r.rho_err),
            format_float(r.runtime_ms),
            format_float(r.eps0),
            format_float(r.kappa),
            r.status
        );
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let stats = [
            r.rel_err_theta,
            r.rel_err_b,
            r.rho_err,
            r.runtime_ms,
        ]
        .iter()
        .map(|(m, s)| format!("{},{}", format_float(*m), format_float(*s)))
        .collect::<Vec<_>>()
        .join(",");
        let _ = writeln!(
            out,
            "{},{},{},{},{stats}",
            r.experiment,
            format_float(r.value),
            r.ok,
            r.failed
        );
    }
    fs::write(path, out)?;
    Ok(())
}
