//! CSV and JSON writers. Numbers are printed with 17 significant digits so
//! every `f64` reads back bit-exactly; files are written to a temporary
//! sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::{FieldState, Grid};
use crate::VERSION;

/// `{:.16e}`: 17 significant digits. Non-finite values print as `nan`,
/// `inf` or `-inf`.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn header(out: &mut String, meta: &[(String, String)]) {
    let _ = writeln!(out, "# pnp {VERSION}");
    for (k, v) in meta {
        let k = k.trim_start_matches("# ");
        let _ = writeln!(out, "# {k} = {v}");
    }
}

fn row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let line: Vec<String> = values.into_iter().map(format_value).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

/// Writes `x,c_1,...,c_N,phi`, one row per node, after a comment header
/// holding `meta` and the state time.
pub fn write_snapshot(
    state: &FieldState,
    grid: &Grid,
    meta: &[(String, String)],
    path: &Path,
) -> Result<()> {
    state.check_shape(grid)?;
    let mut out = String::new();
    header(&mut out, meta);
    let _ = writeln!(out, "# t = {}", format_value(state.t));
    let mut cols = vec!["x".to_string()];
    cols.extend((1..=state.n_species()).map(|i| format!("c_{i}")));
    cols.push("phi".to_string());
    out.push_str(&cols.join(","));
    out.push('\n');
    for (j, &x) in grid.nodes().iter().enumerate() {
        row(
            &mut out,
            std::iter::once(x)
                .chain(state.c.iter().map(|c| c[j]))
                .chain(std::iter::once(state.phi[j])),
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a file written by [`write_snapshot`]. Returns the node
/// coordinates and the state.
pub fn read_snapshot(path: &Path) -> Result<(Vec<f64>, FieldState)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, message: String| Error::ConfigSyntax { line, message };
    let mut t = 0.0;
    let mut columns: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("t = ") {
                t = v.parse().map_err(|_| bad(n, format!("bad time `{v}`")))?;
            }
            continue;
        }
        let Some(width) = columns else {
            let names: Vec<&str> = line.split(',').collect();
            if names.first() != Some(&"x") || names.last() != Some(&"phi") || names.len() < 3 {
                return Err(bad(n, format!("unexpected column header `{line}`")));
            }
            columns = Some(names.len());
            continue;
        };
        let values = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|_| bad(n, format!("bad number `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != width {
            return Err(bad(n, format!("expected {width} columns, found {}", values.len())));
        }
        rows.push(values);
    }
    let width = columns.ok_or_else(|| bad(0, "missing column header".to_string()))?;
    let x = rows.iter().map(|r| r[0]).collect();
    let c = (1..width - 1)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    let phi = rows.iter().map(|r| r[width - 1]).collect();
    Ok((x, FieldState { t, c, phi }))
}

/// Writes `t,ctot_1,...,ctot_N,energy,dissipation_rhs,max_dcdt,min_c`, one
/// row per sample. Undefined energies print as `nan`.
pub fn write_timeseries(record: &DiagnosticsRecord, meta: &[(String, String)], path: &Path) -> Result<()> {
    let first = record
        .samples
        .first()
        .ok_or_else(|| Error::TooFewSamples { needed: 1, found: 0 })?;
    let mut out = String::new();
    header(&mut out, meta);
    for (k, v) in &record.meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=first.total.len()).map(|i| format!("ctot_{i}")));
    cols.extend(["energy", "dissipation_rhs", "max_dcdt", "min_c"].map(String::from));
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in &record.samples {
        row(
            &mut out,
            std::iter::once(s.t).chain(s.total.iter().copied()).chain([
                s.energy.unwrap_or(f64::NAN),
                s.dissipation_rhs.unwrap_or(f64::NAN),
                s.max_rate,
                s.min_concentration,
            ]),
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Writes a numeric table with the given column names.
pub fn write_table(
    columns: &[&str],
    rows: &[Vec<f64>],
    meta: &[(String, String)],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    header(&mut out, meta);
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        if r.len() != columns.len() {
            return Err(Error::Shape {
                expected: columns.len(),
                found: r.len(),
            });
        }
        row(&mut out, r.iter().copied());
    }
    write_atomic(path, out.as_bytes())
}

/// Pretty-printed JSON with the version and `meta` under `"config"`.
pub fn write_json<T: Serialize>(report: &T, meta: &[(String, String)], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        version: &'a str,
        config: serde_json::Map<String, serde_json::Value>,
        report: &'a T,
    }
    let config = meta
        .iter()
        .map(|(k, v)| (k.trim_start_matches("# ").to_string(), serde_json::Value::String(v.clone())))
        .collect();
    let wrapped = Wrapped {
        version: VERSION,
        config,
        report,
    };
    let mut text = serde_json::to_string_pretty(&wrapped).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
