//! The forward → acquire → invert → refine chain and its report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::manifest::{ExperimentManifest, TOOLKIT_VERSION};
use crate::acquisition::{
    acquire, MeasurementSet, MeasurementSummary, NoiseModel, NoisyMeasurementSet, TRUNCATION,
};
use crate::error::{Error, Result};
use crate::grid::io::{encode_complex, encode_real};
use crate::grid::{ComplexField, Grid, RealField};
use crate::helmholtz::{BoundaryTrace, HelmholtzOperator};
use crate::inversion::{
    check_divergence_identity, initial_guess, inset_mask, interior_mask, invert, relative_error,
};
use crate::probes::make_xi_family;
use crate::refine::{clip, iterate_refinement, RefinementResult};

/// Relative L² errors `‖f − q_o‖/‖q_o‖` on the whole grid and on the
/// evaluation region, where the full mollifier window fits inside the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub full: f64,
    pub interior: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Improper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub q_star: ErrorPair,
    pub q_hat_star: ErrorPair,
    /// `‖q̂_* − q_o‖ ≤ ‖q_* − q_o‖` on the whole grid.
    pub clipping_ok: bool,
    pub eta: f64,
    pub invertibility_ok: bool,
    pub residual_history: Vec<f64>,
    pub cg_iterations: usize,
    pub stagnated: bool,
    pub forward_failure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub toolkit_version: String,
    pub manifest_hash: String,
    pub status: RunStatus,
    pub measurements: MeasurementSummary,
    /// Relative residual of `−div β = k E_1` for the noiseless first solution.
    pub divergence_residual: f64,
    /// Absolute noise amplitude.
    pub sigma: f64,
    pub window: f64,
    /// Distance from the boundary excluded from the `interior` errors.
    pub evaluation_inset: f64,
    /// Noiseless, unsmoothed data.
    pub exact_inversion: Option<ErrorPair>,
    pub initial_guess: Option<ErrorPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementReport>,
    /// SHA-256 of every field file written with the report.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub files: BTreeMap<String, String>,
}

/// Everything a pipeline run computes.
pub struct PipelineOutput {
    pub report: ReconstructionReport,
    pub q_true: RealField,
    pub measurements: MeasurementSet,
    pub q_exact: Option<RealField>,
    pub noisy: Option<NoisyMeasurementSet>,
    pub q_s: Option<RealField>,
    pub refinement: Option<RefinementResult>,
}

/// Nodes at least `TRUNCATION · window` from the boundary, or the inversion's
/// inner region when the window is too wide to leave any.
pub fn evaluation_mask(grid: &Grid, window: f64, boundary_layer: usize) -> (Vec<bool>, f64) {
    let inset = TRUNCATION * window;
    let mask = inset_mask(grid, inset);
    if mask.iter().any(|&m| m) {
        (mask, inset)
    } else {
        (
            interior_mask(grid, boundary_layer),
            boundary_layer as f64 * grid.spacing(),
        )
    }
}

fn errors(f: &RealField, q: &RealField, mask: &[bool]) -> ErrorPair {
    ErrorPair {
        full: relative_error(f, q, &vec![true; q.len()]),
        interior: relative_error(f, q, mask),
    }
}

/// Phantom and forward solutions for every probe.
pub fn forward_stage(m: &ExperimentManifest) -> Result<(RealField, MeasurementSet)> {
    let grid = m.grid.build()?;
    let q = m.phantom.generate(&grid)?;
    let operator = HelmholtzOperator::new(m.k, &q)?;
    let probes = make_xi_family(m.probes.n, grid.dim())?;
    let ms = acquire(&operator, &probes, m.probes.mode, m.probes.thresholds)?;
    Ok((q, ms))
}

/// One refinement from the projected initial guess.
///
/// The linearization point is `q^s` projected onto `[q_min, q_max]`: near the
/// boundary the raw `q^s` is far outside the admissible set and the sensitivity
/// problem at it is badly conditioned.
pub fn refine_stage(
    m: &ExperimentManifest,
    g: &BoundaryTrace,
    q_s: &RealField,
    es1: &ComplexField,
) -> Result<RefinementResult> {
    let cfg = &m.refine.config;
    let base = clip(q_s, cfg.q_min, cfg.q_max)?;
    iterate_refinement(m.k, g, &base, es1, cfg)
}

pub fn execute(m: &ExperimentManifest) -> Result<PipelineOutput> {
    m.validate()?;
    let (q_true, ms) = forward_stage(m)?;
    let grid = *q_true.grid();
    let noise = m.noise_spec();
    let model = NoiseModel::new(&noise, &grid)?;
    let window = model.smoother().width();
    let (mask, inset) = evaluation_mask(&grid, window, m.inversion.boundary_layer);
    let mut report = ReconstructionReport {
        toolkit_version: TOOLKIT_VERSION.into(),
        manifest_hash: m.hash(),
        status: if ms.properness.is_proper {
            RunStatus::Ok
        } else {
            RunStatus::Improper
        },
        measurements: MeasurementSummary::from(&ms),
        divergence_residual: check_divergence_identity(&ms.u_list[0], &q_true, m.k),
        sigma: noise.effective_sigma(ms.max_e1()),
        window,
        evaluation_inset: inset,
        exact_inversion: None,
        initial_guess: None,
        refinement: None,
        files: BTreeMap::new(),
    };
    let mut out = PipelineOutput {
        report: report.clone(),
        q_true,
        measurements: ms,
        q_exact: None,
        noisy: None,
        q_s: None,
        refinement: None,
    };
    if report.status == RunStatus::Improper && !m.continue_on_improper {
        return Ok(out);
    }
    let q_exact = invert(&out.measurements.e_list, m.k, &m.inversion)?.1.q_hat;
    report.exact_inversion = Some(errors(&q_exact, &out.q_true, &mask));
    let noisy = model.corrupt(&out.measurements, 0)?;
    let q_s = initial_guess(&noisy, m.k, &m.inversion)?.q_hat;
    report.initial_guess = Some(errors(&q_s, &out.q_true, &mask));
    if m.refine.enabled {
        let r = refine_stage(m, &out.measurements.g_list[0], &q_s, &noisy.es_list[0])?;
        let star = errors(&r.q_star, &out.q_true, &mask);
        let hat = errors(&r.q_star_clipped, &out.q_true, &mask);
        report.refinement = Some(RefinementReport {
            q_star: star,
            q_hat_star: hat,
            clipping_ok: hat.full <= star.full,
            eta: r.eta,
            invertibility_ok: r.invertibility_ok,
            residual_history: r.residual_history.clone(),
            cg_iterations: r.ls_iterations,
            stagnated: r.stagnated,
            forward_failure: r.forward_failure,
        });
        out.refinement = Some(r);
    }
    out.report = report;
    out.q_exact = Some(q_exact);
    out.noisy = Some(noisy);
    out.q_s = Some(q_s);
    Ok(out)
}

/// Trailer text stored in every field file.
pub fn file_meta(m: &ExperimentManifest) -> String {
    serde_json::json!({ "toolkit_version": TOOLKIT_VERSION, "manifest_hash": m.hash() }).to_string()
}

/// Writes field files into a directory and records their hashes.
pub struct FieldWriter<'a> {
    dir: &'a Path,
    meta: String,
    pub hashes: BTreeMap<String, String>,
}

impl<'a> FieldWriter<'a> {
    pub fn new(dir: &'a Path, m: &ExperimentManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir,
            meta: file_meta(m),
            hashes: BTreeMap::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: Vec<u8>) -> Result<()> {
        self.hashes
            .insert(name.to_owned(), hex::encode(Sha256::digest(&bytes)));
        Ok(fs::write(self.dir.join(name), bytes)?)
    }

    pub fn real(&mut self, name: &str, f: &RealField) -> Result<()> {
        self.put(name, encode_real(f, Some(&self.meta)))
    }

    pub fn complex(&mut self, name: &str, f: &ComplexField) -> Result<()> {
        self.put(name, encode_complex(f, Some(&self.meta)))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(name, text.into_bytes())
    }
}

/// Stores the solutions `u_j` and energies `E_j`.
pub fn write_measurements(w: &mut FieldWriter, ms: &MeasurementSet) -> Result<()> {
    for (j, (u, e)) in ms.u_list.iter().zip(&ms.e_list).enumerate() {
        w.complex(&format!("u_{}.qtaf", j + 1), u)?;
        w.complex(&format!("e_{}.qtaf", j + 1), e)?;
    }
    Ok(())
}

pub fn write_noisy(
    w: &mut FieldWriter,
    noisy: &NoisyMeasurementSet,
    dump_noise: bool,
) -> Result<()> {
    for (j, (em, es)) in noisy.em_list.iter().zip(&noisy.es_list).enumerate() {
        w.complex(&format!("em_{}.qtaf", j + 1), em)?;
        w.complex(&format!("es_{}.qtaf", j + 1), es)?;
    }
    if dump_noise {
        for (i, f) in noisy.noise_fields.iter().enumerate() {
            w.real(&format!("noise_{i}.qtaf"), f)?;
        }
    }
    Ok(())
}

/// Runs the pipeline and writes every field, the manifest and `report.json`
/// into `manifest.output_dir`. A properness failure writes the report and
/// then returns [`Error::Improper`] unless the manifest asks to continue.
pub fn run_pipeline(m: &ExperimentManifest) -> Result<ReconstructionReport> {
    let out = execute(m)?;
    let mut w = FieldWriter::new(&m.output_dir, m)?;
    std::fs::write(m.output_dir.join("manifest.json"), m.to_json() + "\n")?;
    w.real("q_true.qtaf", &out.q_true)?;
    write_measurements(&mut w, &out.measurements)?;
    if let Some(q) = &out.q_exact {
        w.real("q_exact.qtaf", q)?;
    }
    if let Some(noisy) = &out.noisy {
        write_noisy(&mut w, noisy, m.dump_noise)?;
    }
    if let Some(q) = &out.q_s {
        w.real("q_s.qtaf", q)?;
    }
    if let Some(r) = &out.refinement {
        w.real("q_star.qtaf", &r.q_star)?;
        w.real("q_hat_star.qtaf", &r.q_star_clipped)?;
    }
    let mut report = out.report;
    report.files = std::mem::take(&mut w.hashes);
    w.json("report.json", &report)?;
    if report.status == RunStatus::Improper && !m.continue_on_improper {
        let p = &report.measurements.properness;
        return Err(Error::Improper(format!(
            "min |u_1|/max |u_1| = {:.3e}, min Hadamard ratio = {:.3e}",
            p.min_rel_u1, p.min_rel_det
        )));
    }
    Ok(report)
}
