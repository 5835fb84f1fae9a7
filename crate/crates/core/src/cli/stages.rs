//! Independently re-runnable stages. Each reads the previous stage's files
//! from the run directory and writes its own next to them.

use std::path::Path;

use serde_json::json;

use super::manifest::{ExperimentManifest, TOOLKIT_VERSION};
use super::pipeline::{
    evaluation_mask, forward_stage, refine_stage, write_measurements, write_noisy, FieldWriter,
};
use crate::acquisition::{MeasurementSet, MeasurementSummary, NoiseModel, NoisyMeasurementSet};
use crate::error::{Error, Result};
use crate::grid::io::read_field;
use crate::grid::{ComplexField, RealField};
use crate::inversion::{check_divergence_identity, invert, relative_error};
use crate::probes::{make_xi_family, probe_boundary_data_with};

fn real(dir: &Path, name: &str) -> Result<RealField> {
    read_field(&dir.join(name))?.0.into_real()
}

fn complex(dir: &Path, name: &str) -> Result<ComplexField> {
    read_field(&dir.join(name))?.0.into_complex()
}

fn count(m: &ExperimentManifest) -> usize {
    m.grid.dim + 1
}

fn improper(ms: &MeasurementSet) -> Error {
    let p = &ms.properness;
    Error::Improper(format!(
        "min |u_1|/max |u_1| = {:.3e}, min Hadamard ratio = {:.3e}",
        p.min_rel_u1, p.min_rel_det
    ))
}

/// Rebuilds the measurement set from `q_true.qtaf` and `u_j.qtaf`.
fn load_measurements(m: &ExperimentManifest, dir: &Path) -> Result<(RealField, MeasurementSet)> {
    let q = real(dir, "q_true.qtaf")?;
    let grid = *q.grid();
    let probes = make_xi_family(m.probes.n, grid.dim())?;
    let g_list = probes
        .iter()
        .map(|p| probe_boundary_data_with(p, m.k, &grid, m.probes.mode))
        .collect::<Result<_>>()?;
    let u_list = (1..=count(m))
        .map(|j| complex(dir, &format!("u_{j}.qtaf")))
        .collect::<Result<_>>()?;
    let ms = MeasurementSet::from_solutions(&q, g_list, u_list, m.probes.thresholds)?;
    Ok((q, ms))
}

/// Phantom and forward solutions: `q_true`, `u_j`, `e_j`, `forward.json`.
pub fn forward(m: &ExperimentManifest, dir: &Path) -> Result<()> {
    let (q, ms) = forward_stage(m)?;
    let mut w = FieldWriter::new(dir, m)?;
    std::fs::write(dir.join("manifest.json"), m.to_json() + "\n")?;
    w.real("q_true.qtaf", &q)?;
    write_measurements(&mut w, &ms)?;
    let summary = MeasurementSummary::from(&ms);
    w.json(
        "forward.json",
        &json!({
            "toolkit_version": TOOLKIT_VERSION,
            "manifest_hash": m.hash(),
            "measurements": summary,
            "divergence_residual": check_divergence_identity(&ms.u_list[0], &q, m.k),
        }),
    )?;
    if !ms.properness.is_proper && !m.continue_on_improper {
        return Err(improper(&ms));
    }
    Ok(())
}

/// Energies, noise and smoothing: `em_j`, `es_j`, `acquire.json`.
pub fn acquire(m: &ExperimentManifest, dir: &Path) -> Result<()> {
    let (q, ms) = load_measurements(m, dir)?;
    if !ms.properness.is_proper && !m.continue_on_improper {
        return Err(improper(&ms));
    }
    let noise = m.noise_spec();
    let model = NoiseModel::new(&noise, q.grid())?;
    let noisy = model.corrupt(&ms, 0)?;
    let mut w = FieldWriter::new(dir, m)?;
    write_measurements(&mut w, &ms)?;
    write_noisy(&mut w, &noisy, m.dump_noise)?;
    w.json(
        "acquire.json",
        &json!({
            "toolkit_version": TOOLKIT_VERSION,
            "manifest_hash": m.hash(),
            "sigma": noisy.sigma,
            "window": model.smoother().width(),
            "measurements": MeasurementSummary::from(&ms),
        }),
    )
}

fn noisy_from_dir(m: &ExperimentManifest, dir: &Path) -> Result<NoisyMeasurementSet> {
    let em_list = (1..=count(m))
        .map(|j| complex(dir, &format!("em_{j}.qtaf")))
        .collect::<Result<_>>()?;
    let es_list = (1..=count(m))
        .map(|j| complex(dir, &format!("es_{j}.qtaf")))
        .collect::<Result<_>>()?;
    Ok(NoisyMeasurementSet {
        em_list,
        es_list,
        realization_id: 0,
        noise_fields: Vec::new(),
        sigma: f64::NAN,
    })
}

/// Exact inversion of clean and smoothed data: `q_exact`, `q_s`, `invert.json`.
pub fn invert_stage(m: &ExperimentManifest, dir: &Path) -> Result<()> {
    let q = real(dir, "q_true.qtaf")?;
    let e_list: Vec<ComplexField> = (1..=count(m))
        .map(|j| complex(dir, &format!("e_{j}.qtaf")))
        .collect::<Result<_>>()?;
    let noisy = noisy_from_dir(m, dir)?;
    let (ws, exact) = invert(&e_list, m.k, &m.inversion)?;
    let q_s = invert(&noisy.es_list, m.k, &m.inversion)?.1.q_hat;
    let window = NoiseModel::new(&m.noise_spec(), q.grid())?
        .smoother()
        .width();
    let (mask, inset) = evaluation_mask(q.grid(), window, m.inversion.boundary_layer);
    let mut w = FieldWriter::new(dir, m)?;
    w.real("q_exact.qtaf", &exact.q_hat)?;
    w.real("q_s.qtaf", &q_s)?;
    let all = vec![true; q.len()];
    w.json(
        "invert.json",
        &json!({
            "toolkit_version": TOOLKIT_VERSION,
            "manifest_hash": m.hash(),
            "coverage": exact.interior_coverage(0),
            "max_condition": ws.solution.cond.values().iter().cloned().filter(|c| c.is_finite()).fold(0.0, f64::max),
            "evaluation_inset": inset,
            "exact_inversion": { "full": relative_error(&exact.q_hat, &q, &all), "interior": relative_error(&exact.q_hat, &q, &mask) },
            "initial_guess": { "full": relative_error(&q_s, &q, &all), "interior": relative_error(&q_s, &q, &mask) },
        }),
    )
}

/// One refinement from `q_s`: `q_star`, `q_hat_star`, `refine.json`.
pub fn refine(m: &ExperimentManifest, dir: &Path) -> Result<()> {
    let q_s = real(dir, "q_s.qtaf")?;
    let es1 = complex(dir, "es_1.qtaf")?;
    let grid = *q_s.grid();
    let probe = make_xi_family(m.probes.n, grid.dim())?[0];
    let g = probe_boundary_data_with(&probe, m.k, &grid, m.probes.mode)?;
    let r = refine_stage(m, &g, &q_s, &es1)?;
    let mut w = FieldWriter::new(dir, m)?;
    w.real("q_star.qtaf", &r.q_star)?;
    w.real("q_hat_star.qtaf", &r.q_star_clipped)?;
    w.json(
        "refine.json",
        &json!({
            "toolkit_version": TOOLKIT_VERSION,
            "manifest_hash": m.hash(),
            "eta": r.eta,
            "invertibility_ok": r.invertibility_ok,
            "residual_history": r.residual_history,
            "cg_iterations": r.ls_iterations,
            "stagnated": r.stagnated,
            "forward_failure": r.forward_failure,
        }),
    )
}
