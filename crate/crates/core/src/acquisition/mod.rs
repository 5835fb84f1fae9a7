//! Internal data: energies `q|u|²`, their polarized combinations
//! `E_j = q u_j conj(u_1)`, correlated noise and mollification.

mod noise;
mod smoothing;
pub(crate) mod spectral;
mod variance;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use noise::{
    realization_rng, sample_noise_field, CovarianceKind, NoiseSampler, NoiseSpec, PeriodicSampler,
};
pub use smoothing::{smooth, Smoother, TRUNCATION};
pub use variance::{loglog_slope, verify_noise_variance, VarianceCheckConfig, VarianceCheckReport};

use crate::error::{config, Result};
use crate::grid::{ComplexField, RealField, C64};
use crate::helmholtz::{BoundaryTrace, HelmholtzOperator};
use crate::probes::{
    check_proper, probe_boundary_data_with, ProbeMode, ProbeVector, PropernessReport,
    PropernessThresholds,
};

/// `q |u|²`.
pub fn energy(q: &RealField, u: &ComplexField) -> RealField {
    q.zip_map(u, |a, b| a * b.norm_sqr())
}

/// Combines the four measurable energies `q|u_1+u_j|²`, `q|iu_1+u_j|²`,
/// `q|u_1|²` and `q|u_j|²` into `q u_j conj(u_1)`.
pub fn polarize(q: &RealField, u1: &ComplexField, uj: &ComplexField) -> ComplexField {
    let i = C64::new(0.0, 1.0);
    let e1 = energy(q, u1);
    let ej = energy(q, uj);
    let sum = energy(q, &(u1 + uj));
    let isum = energy(q, &u1.zip_map(uj, |a, b| i * a + b));
    let values = (0..q.len())
        .map(|n| {
            let (a, b, s, t) = (
                e1.values()[n],
                ej.values()[n],
                sum.values()[n],
                isum.values()[n],
            );
            C64::new(0.5 * (s - a - b), 0.5 * (t - a - b))
        })
        .collect();
    ComplexField::from_raw(*q.grid(), values)
}

/// Boundary data, solutions and the energies `E_1..E_{d+1}`.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    pub g_list: Vec<BoundaryTrace>,
    pub u_list: Vec<ComplexField>,
    pub e_list: Vec<ComplexField>,
    pub properness: PropernessReport,
}

impl MeasurementSet {
    /// Builds the energies from known solutions. `E_1` is stored with zero imaginary part.
    pub fn from_solutions(
        q: &RealField,
        g_list: Vec<BoundaryTrace>,
        u_list: Vec<ComplexField>,
        thresholds: PropernessThresholds,
    ) -> Result<Self> {
        if u_list.len() != q.grid().dim() + 1 || g_list.len() != u_list.len() {
            return config(format!("expected {} probes", q.grid().dim() + 1));
        }
        let properness = check_proper(&u_list, thresholds)?;
        let mut e_list = vec![energy(q, &u_list[0]).to_complex()];
        e_list.extend(u_list[1..].iter().map(|uj| polarize(q, &u_list[0], uj)));
        Ok(Self {
            g_list,
            u_list,
            e_list,
            properness,
        })
    }

    pub fn e1(&self) -> RealField {
        self.e_list[0].re()
    }

    pub fn max_e1(&self) -> f64 {
        self.e1().max()
    }

    /// Every `E_j` times the same constant.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            e_list: self.e_list.iter().map(|e| e.scale(c)).collect(),
            ..self.clone()
        }
    }
}

/// Solves the forward problem for every probe with one factorization.
pub fn acquire(
    operator: &HelmholtzOperator,
    probes: &[ProbeVector],
    mode: ProbeMode,
    thresholds: PropernessThresholds,
) -> Result<MeasurementSet> {
    let grid = *operator.grid();
    let zero = ComplexField::zeros(grid);
    let mut g_list = Vec::with_capacity(probes.len());
    let mut u_list = Vec::with_capacity(probes.len());
    for probe in probes {
        let g = probe_boundary_data_with(probe, operator.k(), &grid, mode)?;
        let (u, _) = operator.solve(&zero, &g)?;
        g_list.push(g);
        u_list.push(u);
    }
    MeasurementSet::from_solutions(operator.q(), g_list, u_list, thresholds)
}

#[derive(Clone, Debug)]
pub struct NoisyMeasurementSet {
    pub em_list: Vec<ComplexField>,
    pub es_list: Vec<ComplexField>,
    pub realization_id: u64,
    /// `W_1`, then `(W_j, W_1j, W_1j')` for each `j ≥ 2`, after clipping.
    pub noise_fields: Vec<RealField>,
    /// Absolute noise amplitude used.
    pub sigma: f64,
}

/// Sampler and smoother for one grid, reused across realizations.
pub struct NoiseModel {
    spec: NoiseSpec,
    sampler: Option<NoiseSampler>,
    smoother: Smoother,
}

impl NoiseModel {
    pub fn new(spec: &NoiseSpec, grid: &crate::grid::Grid) -> Result<Self> {
        spec.validate(grid.dim())?;
        let sampler = if spec.sigma > 0.0 {
            Some(NoiseSampler::new(spec, grid)?)
        } else {
            None
        };
        Ok(Self {
            spec: *spec,
            sampler,
            smoother: Smoother::new(spec, grid)?,
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn smoother(&self) -> &Smoother {
        &self.smoother
    }

    /// Draws realization `id` (stream `id` of `spec.seed`) and smooths it.
    pub fn corrupt(&self, ms: &MeasurementSet, id: u64) -> Result<NoisyMeasurementSet> {
        let mut rng = realization_rng(self.spec.seed, id);
        self.corrupt_with(ms, id, &mut rng)
    }

    pub fn corrupt_with(
        &self,
        ms: &MeasurementSet,
        id: u64,
        rng: &mut impl Rng,
    ) -> Result<NoisyMeasurementSet> {
        let e1 = ms.e1();
        let sigma = self.spec.effective_sigma(e1.max());
        let Some(sampler) = &self.sampler else {
            return Ok(self.finish(ms.e_list.clone(), Vec::new(), id, 0.0));
        };
        noise::check_positivity(sigma, self.spec.clip_bound, e1.min())?;
        let d = ms.e_list.len() - 1;
        let w = sampler.sample(rng, noise::noise_field_count(d));
        let mut em = vec![ms.e_list[0].zip_map(&w[0], |e, n| e + sigma * n)];
        for j in 1..=d {
            let (wj, w1j, w1jp) = (&w[3 * j - 2], &w[3 * j - 1], &w[3 * j]);
            let vals = (0..e1.len())
                .map(|n| {
                    let base = w[0].values()[n] + wj.values()[n];
                    let u = 0.5 * (w1j.values()[n] - base);
                    let v = 0.5 * (w1jp.values()[n] - base);
                    ms.e_list[j].values()[n] + C64::new(sigma * u, sigma * v)
                })
                .collect();
            em.push(ComplexField::from_raw(*e1.grid(), vals));
        }
        Ok(self.finish(em, w, id, sigma))
    }

    fn finish(
        &self,
        em_list: Vec<ComplexField>,
        noise_fields: Vec<RealField>,
        id: u64,
        sigma: f64,
    ) -> NoisyMeasurementSet {
        let es_list = em_list
            .iter()
            .map(|e| self.smoother.smooth_complex(e))
            .collect();
        NoisyMeasurementSet {
            em_list,
            es_list,
            realization_id: id,
            noise_fields,
            sigma,
        }
    }
}

/// One realization of the corruption model, seeded by `spec.seed`.
pub fn corrupt(ms: &MeasurementSet, spec: &NoiseSpec, id: u64) -> Result<NoisyMeasurementSet> {
    NoiseModel::new(spec, ms.e_list[0].grid())?.corrupt(ms, id)
}

/// Serializable summary of a measurement set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSummary {
    pub min_e1: f64,
    pub max_e1: f64,
    pub properness: PropernessReport,
}

impl From<&MeasurementSet> for MeasurementSummary {
    fn from(ms: &MeasurementSet) -> Self {
        let e1 = ms.e1();
        Self {
            min_e1: e1.min(),
            max_e1: e1.max(),
            properness: ms.properness,
        }
    }
}
