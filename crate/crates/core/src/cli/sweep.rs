//! Monte-Carlo sweeps over noise amplitude and correlation length.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{ExperimentManifest, SweepSpec, TOOLKIT_VERSION};
use super::pipeline::{evaluation_mask, forward_stage, refine_stage};
use crate::acquisition::{loglog_slope, MeasurementSet, NoiseModel, NoiseSpec};
use crate::error::{config, Error, Result};
use crate::grid::RealField;
use crate::inversion::initial_guess;

/// Realizations needed before a fitted slope is marked reliable.
pub const MIN_FIT_REALIZATIONS: usize = 20;

/// One realization of one `(sigma, delta)` cell. Errors are mean squares over
/// the evaluation region; `mse_noise` is measured against the reconstruction
/// from smoothed noiseless data with the same window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub delta: f64,
    pub p: f64,
    pub window: f64,
    pub realization: u64,
    pub status: String,
    pub mse_qs: Option<f64>,
    pub mse_noise: Option<f64>,
    pub mse_qstar: Option<f64>,
    pub mse_qhat: Option<f64>,
    pub improved: Option<bool>,
    pub clipping_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// The quantity held fixed (`sigma` for a δ-slope, `delta` for a σ-slope).
    pub fixed: f64,
    pub slope: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub sigma: f64,
    pub delta: f64,
    pub ok: usize,
    pub failed: usize,
    pub mean_mse_qs: Option<f64>,
    pub mean_mse_noise: Option<f64>,
    pub mean_mse_qhat: Option<f64>,
    pub improvement_fraction: Option<f64>,
    pub clipping_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub toolkit_version: String,
    pub manifest_hash: String,
    pub evaluation_inset: f64,
    pub cells: Vec<CellSummary>,
    /// `mse_noise` against δ at each fixed σ; predicted `d − (d+6)p`.
    pub delta_slopes: Vec<SlopeFit>,
    /// `mse_noise` against σ at each fixed δ; predicted 2.
    pub sigma_slopes: Vec<SlopeFit>,
    pub fits_reliable: bool,
}

fn mean_square(a: &RealField, b: &RealField, mask: &[bool]) -> f64 {
    let (sum, count) = a
        .values()
        .iter()
        .zip(b.values())
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), ((x, y), _)| {
            (s + (x - y) * (x - y), c + 1)
        });
    sum / count as f64
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, c) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

struct Cell {
    spec: NoiseSpec,
    model: NoiseModel,
    /// Reconstruction from smoothed noiseless data.
    q_delta: RealField,
}

fn realization(
    m: &ExperimentManifest,
    ms: &MeasurementSet,
    q_true: &RealField,
    cell: &Cell,
    r: u64,
    mask: &[bool],
) -> Result<SweepRow> {
    let noisy = cell.model.corrupt(ms, r)?;
    let q_s = initial_guess(&noisy, m.k, &m.inversion)?.q_hat;
    let mse_qs = mean_square(&q_s, q_true, mask);
    let mut row = SweepRow {
        sigma: cell.spec.sigma,
        delta: cell.spec.delta,
        p: cell.spec.p,
        window: cell.spec.window(),
        realization: r,
        status: "ok".into(),
        mse_qs: Some(mse_qs),
        mse_noise: Some(mean_square(&q_s, &cell.q_delta, mask)),
        mse_qstar: None,
        mse_qhat: None,
        improved: None,
        clipping_ok: None,
    };
    if m.refine.enabled {
        let res = refine_stage(m, &ms.g_list[0], &q_s, &noisy.es_list[0])?;
        let qstar = mean_square(&res.q_star, q_true, mask);
        let qhat = mean_square(&res.q_star_clipped, q_true, mask);
        let all = vec![true; q_true.len()];
        row.mse_qstar = Some(qstar);
        row.mse_qhat = Some(qhat);
        row.improved = Some(qhat < mse_qs);
        row.clipping_ok = Some(
            mean_square(&res.q_star_clipped, q_true, &all)
                <= mean_square(&res.q_star, q_true, &all),
        );
    }
    Ok(row)
}

fn summarize(
    sweep: &SweepSpec,
    rows: &[SweepRow],
    dim: usize,
    p: f64,
) -> (Vec<CellSummary>, Vec<SlopeFit>, Vec<SlopeFit>) {
    let mut cells = Vec::new();
    for &sigma in &sweep.sigmas {
        for &delta in &sweep.deltas {
            let rs: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.sigma == sigma && r.delta == delta)
                .collect();
            let ok: Vec<&&SweepRow> = rs.iter().filter(|r| r.status == "ok").collect();
            let frac = |f: fn(&SweepRow) -> Option<bool>| {
                let v: Vec<bool> = ok.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().filter(|&&b| b).count() as f64 / v.len() as f64)
            };
            cells.push(CellSummary {
                sigma,
                delta,
                ok: ok.len(),
                failed: rs.len() - ok.len(),
                mean_mse_qs: mean(ok.iter().filter_map(|r| r.mse_qs)),
                mean_mse_noise: mean(ok.iter().filter_map(|r| r.mse_noise)),
                mean_mse_qhat: mean(ok.iter().filter_map(|r| r.mse_qhat)),
                improvement_fraction: frac(|r| r.improved),
                clipping_fraction: frac(|r| r.clipping_ok),
            });
        }
    }
    let d = dim as f64;
    let fit = |pts: Vec<(f64, f64)>| {
        let pts: Vec<(f64, f64)> = pts
            .into_iter()
            .filter(|&(x, y)| x > 0.0 && y > 0.0)
            .collect();
        (pts.len() >= 2).then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            loglog_slope(&x, &y)
        })
    };
    let noise_at = |s: f64, dl: f64| {
        cells
            .iter()
            .find(|c| c.sigma == s && c.delta == dl)
            .and_then(|c| c.mean_mse_noise)
    };
    let mut delta_slopes = Vec::new();
    for &s in &sweep.sigmas {
        let pts = sweep
            .deltas
            .iter()
            .filter_map(|&dl| noise_at(s, dl).map(|v| (dl, v)))
            .collect();
        if let Some(slope) = fit(pts) {
            delta_slopes.push(SlopeFit {
                fixed: s,
                slope,
                predicted: d - (d + 6.0) * p,
            });
        }
    }
    let mut sigma_slopes = Vec::new();
    for &dl in &sweep.deltas {
        let pts = sweep
            .sigmas
            .iter()
            .filter_map(|&s| noise_at(s, dl).map(|v| (s, v)))
            .collect();
        if let Some(slope) = fit(pts) {
            sigma_slopes.push(SlopeFit {
                fixed: dl,
                slope,
                predicted: 2.0,
            });
        }
    }
    (cells, delta_slopes, sigma_slopes)
}

/// Runs every cell of the manifest's sweep. Failed realizations are recorded
/// in the `status` column and the sweep continues.
pub fn sweep_rows(m: &ExperimentManifest) -> Result<(Vec<SweepRow>, SweepSummary)> {
    m.validate()?;
    let Some(sweep) = &m.sweep else {
        return config("manifest has no sweep section");
    };
    let (q_true, ms) = forward_stage(m)?;
    if !ms.properness.is_proper && !m.continue_on_improper {
        return Err(Error::Improper(
            "probe solutions fail the properness check".into(),
        ));
    }
    let grid = *q_true.grid();
    let base = m.noise_spec();
    let max_window = sweep
        .deltas
        .iter()
        .map(|&delta| NoiseSpec { delta, ..base }.window())
        .fold(0.0, f64::max);
    let (mask, inset) = evaluation_mask(&grid, max_window, m.inversion.boundary_layer);
    let mut cells = Vec::new();
    for &sigma in &sweep.sigmas {
        for &delta in &sweep.deltas {
            let spec = NoiseSpec {
                sigma,
                delta,
                ..base
            };
            let model = NoiseModel::new(&spec, &grid)?;
            let clean = NoiseModel::new(&NoiseSpec { sigma: 0.0, ..spec }, &grid)?;
            let q_delta = initial_guess(&clean.corrupt(&ms, 0)?, m.k, &m.inversion)?.q_hat;
            cells.push(Cell {
                spec,
                model,
                q_delta,
            });
        }
    }
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..sweep.realizations as u64).map(move |r| (c, r)))
        .collect();
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            realization(m, &ms, &q_true, cell, r, &mask).unwrap_or_else(|e| SweepRow {
                sigma: cell.spec.sigma,
                delta: cell.spec.delta,
                p: cell.spec.p,
                window: cell.spec.window(),
                realization: r,
                status: e.to_string(),
                mse_qs: None,
                mse_noise: None,
                mse_qstar: None,
                mse_qhat: None,
                improved: None,
                clipping_ok: None,
            })
        })
        .collect();
    let (cells, delta_slopes, sigma_slopes) = summarize(sweep, &rows, grid.dim(), base.p);
    let summary = SweepSummary {
        toolkit_version: TOOLKIT_VERSION.into(),
        manifest_hash: m.hash(),
        evaluation_inset: inset,
        cells,
        delta_slopes,
        sigma_slopes,
        fits_reliable: sweep.realizations >= MIN_FIT_REALIZATIONS,
    };
    Ok((rows, summary))
}

/// Long-format CSV, preceded by one `#` line naming the toolkit version and manifest hash.
pub fn write_rows_csv(path: &Path, rows: &[SweepRow], manifest_hash: &str) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# qtat {TOOLKIT_VERSION} manifest {manifest_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv(path: &Path) -> Result<Vec<SweepRow>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Format(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(e.to_string())))
        .collect()
}

/// Runs the sweep and writes `sweep.csv` and `sweep_summary.json`.
pub fn run_sweep(m: &ExperimentManifest) -> Result<SweepSummary> {
    let (rows, summary) = sweep_rows(m)?;
    fs::create_dir_all(&m.output_dir)?;
    fs::write(m.output_dir.join("manifest.json"), m.to_json() + "\n")?;
    write_rows_csv(
        &m.output_dir.join("sweep.csv"),
        &rows,
        &summary.manifest_hash,
    )?;
    fs::write(
        m.output_dir.join("sweep_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}
