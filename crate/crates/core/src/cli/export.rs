//! Plain-column plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::manifest::TOOLKIT_VERSION;
use super::sweep::read_rows_csv;
use crate::error::{Error, Result};
use crate::grid::io::read_field;
use crate::grid::RealField;

/// Midline columns: the coordinate, then one column per field.
pub fn midline_table(columns: &[(&str, &RealField)], header: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    let _ = writeln!(
        out,
        "# x {}",
        columns.iter().map(|c| c.0).collect::<Vec<_>>().join(" ")
    );
    let Some((_, first)) = columns.first() else {
        return out;
    };
    let grid = first.grid();
    let slices: Vec<Vec<f64>> = columns.iter().map(|c| c.1.midline()).collect();
    for (i, idx) in grid.midline().into_iter().enumerate() {
        let _ = write!(out, "{:.17e}", grid.coord(idx)[0]);
        for s in &slices {
            let _ = write!(out, " {:.17e}", s[i]);
        }
        out.push('\n');
    }
    out
}

fn meta_header(meta: Option<String>) -> String {
    let hash = meta
        .and_then(|m| serde_json::from_str::<serde_json::Value>(&m).ok())
        .and_then(|v| v["manifest_hash"].as_str().map(str::to_owned))
        .unwrap_or_else(|| "unknown".into());
    format!("qtat {TOOLKIT_VERSION} manifest {hash}")
}

/// Writes `midline.txt` from the fields of a pipeline run and, when the run
/// directory holds `sweep.csv`, `error_vs_delta.txt` with cell means.
pub fn export_plotdata(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let sweep = run_dir.join("sweep.csv");
    let q_path = run_dir.join("q_true.qtaf");
    if !q_path.exists() && !sweep.exists() {
        return Err(Error::FileNotFound(q_path));
    }
    fs::create_dir_all(out_dir)?;
    if q_path.exists() {
        let (q_true, meta) = read_field(&q_path)?;
        let mut fields = vec![("q_o", q_true.into_real()?)];
        for (label, file) in [("q_s", "q_s.qtaf"), ("q_hat_star", "q_hat_star.qtaf")] {
            let path = run_dir.join(file);
            if path.exists() {
                fields.push((label, read_field(&path)?.0.into_real()?));
            }
        }
        let cols: Vec<(&str, &RealField)> = fields.iter().map(|(l, f)| (*l, f)).collect();
        let path = out_dir.join("midline.txt");
        fs::write(&path, midline_table(&cols, &meta_header(meta)))?;
        written.push(path);
    }
    if sweep.exists() {
        let rows = read_rows_csv(&sweep)?;
        let mut keys: Vec<(f64, f64)> = Vec::new();
        for r in &rows {
            if !keys.contains(&(r.sigma, r.delta)) {
                keys.push((r.sigma, r.delta));
            }
        }
        let mut out =
            String::from("# sigma delta window mean_mse_qs mean_mse_noise mean_mse_qhat\n");
        for (sigma, delta) in keys {
            let cell: Vec<_> = rows
                .iter()
                .filter(|r| r.sigma == sigma && r.delta == delta && r.status == "ok")
                .collect();
            let avg = |f: fn(&crate::cli::SweepRow) -> Option<f64>| {
                let v: Vec<f64> = cell.iter().filter_map(|r| f(r)).collect();
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let window = cell.first().map_or(f64::NAN, |r| r.window);
            let _ = writeln!(
                out,
                "{sigma:.17e} {delta:.17e} {window:.17e} {:.17e} {:.17e} {:.17e}",
                avg(|r| r.mse_qs),
                avg(|r| r.mse_noise),
                avg(|r| r.mse_qhat)
            );
        }
        let path = out_dir.join("error_vs_delta.txt");
        fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}
