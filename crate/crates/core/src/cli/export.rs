//! CSV and plot-data writers with a fixed, platform-independent format.

use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{PointwiseRow, SweepRecord};
use crate::grid::GridFunction;
use crate::solver::TracePoint;
use crate::tension::TensionResult;

/// 17 significant digits in scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub const ATLAS_HEADER: &[&str] = &["kind", "k", "s", "delta", "value", "T", "N", "converged"];
pub const SWEEP_HEADER: &[&str] = &[
    "param",
    "energy",
    "inner_transitions",
    "outer_upper",
    "outer_lower",
    "converged",
];

pub fn atlas_csv(results: &[TensionResult]) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InsufficientData("no tension results to export".into()));
    }
    Ok(table(
        ATLAS_HEADER,
        results.iter().map(|r| {
            vec![
                r.kind.name().to_string(),
                r.k.to_string(),
                fmt_float(r.s),
                fmt_float(r.delta),
                fmt_float(r.value),
                fmt_float(r.t_final),
                r.n_final.to_string(),
                r.converged.to_string(),
            ]
        }),
    ))
}

pub fn sweep_csv(record: &SweepRecord) -> Result<String> {
    if record.rows.is_empty() {
        return Err(Error::InsufficientData("sweep has no rows to export".into()));
    }
    Ok(table(
        SWEEP_HEADER,
        record.rows.iter().map(|r| {
            vec![
                fmt_float(r.param),
                fmt_float(r.energy),
                r.inner_transitions.to_string(),
                r.outer_upper.to_string(),
                r.outer_lower.to_string(),
                r.converged.to_string(),
            ]
        }),
    ))
}

pub fn history_csv(result: &TensionResult) -> String {
    table(
        &["T", "N", "value", "converged"],
        result.history.iter().map(|h| {
            vec![
                fmt_float(h.t),
                h.n.to_string(),
                fmt_float(h.value),
                h.converged.to_string(),
            ]
        }),
    )
}

pub fn pointwise_csv(rows: &[PointwiseRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no pointwise rows to export".into()));
    }
    Ok(table(
        &["s", "scaled", "target"],
        rows.iter().map(|r| vec![fmt_float(r.s), fmt_float(r.scaled), fmt_float(r.target)]),
    ))
}

pub fn trace_csv(trace: &[TracePoint]) -> String {
    table(
        &["iteration", "energy", "grad_norm"],
        trace
            .iter()
            .map(|t| vec![t.iteration.to_string(), fmt_float(t.energy), fmt_float(t.grad_norm)]),
    )
}

/// Whitespace-separated columns for gnuplot and friends.
pub fn dat(columns: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (x, y) in columns {
        out.push_str(&fmt_float(*x));
        out.push(' ');
        out.push_str(&fmt_float(*y));
        out.push('\n');
    }
    out
}

pub fn profile_dat(v: &GridFunction) -> String {
    let pts: Vec<(f64, f64)> = v.grid.centers().into_iter().zip(v.values.iter().copied()).collect();
    dat(&pts)
}

pub fn sweep_dat(record: &SweepRecord) -> String {
    dat(&record.rows.iter().map(|r| (r.param, r.energy)).collect::<Vec<_>>())
}

pub fn export_csv(results: &[TensionResult], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &atlas_csv(results)?)
}

pub fn export_sweep(record: &SweepRecord, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &sweep_csv(record)?)
}

pub fn write_file(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_text(path.as_ref(), text)
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tension::{hermite_reference, TensionKind};

    fn result() -> TensionResult {
        TensionResult {
            kind: TensionKind::FdMK,
            k: 2,
            s: 0.0,
            delta: 1.0,
            value: hermite_reference(2, 1.0).unwrap(),
            t_final: 6f64.sqrt(),
            n_final: 512,
            profile: None,
            history: vec![],
            converged: true,
            notes: vec![],
        }
    }

    #[test]
    fn one_result_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atlas.csv");
        export_csv(&[result()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("kind,k,s,delta,value,T,N,converged\n"));
        assert!(text.ends_with("true\n") && !text.contains('\r'));
        let first = std::fs::read(&path).unwrap();
        export_csv(&[result()], &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn empty_results_are_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(export_csv(&[], dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn floats_keep_17_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.5), "-2.5000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }
}
