//! Correlated Gaussian noise by circulant embedding, and the corruption model
//! `E^m_1 = E_1 + σW_1`, `E^m_j = E_j + σU_j + iσV_j`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::spectral::{fast_size, wrapped_offset, PeriodicFft};
use crate::error::{config, parameter, Result};
use crate::grid::{Grid, RealField, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// `R(z) = exp(-|z|²/2)`.
    #[default]
    Gaussian,
    /// `R(z) = exp(-|z|)`.
    Exponential,
}

impl CovarianceKind {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Self::Gaussian => (-0.5 * r * r).exp(),
            Self::Exponential => (-r.abs()).exp(),
        }
    }

    /// Distance, in correlation lengths, beyond which `R` is treated as zero.
    fn reach(self) -> f64 {
        match self {
            Self::Gaussian => 8.0,
            Self::Exponential => 30.0,
        }
    }
}

/// Noise amplitude, correlation length and smoothing window.
///
/// The mollifier has width `ℓ (δ/ℓ)^p`: the exponent `p` is the one the
/// variance laws are stated in, and `ℓ` fixes the unit length of that power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub sigma: f64,
    /// When set, `sigma` is a fraction of `max E_1`.
    pub sigma_relative: bool,
    pub delta: f64,
    pub p: f64,
    pub length_scale: f64,
    pub covariance_kind: CovarianceKind,
    pub clip_bound: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: 1e-3,
            sigma_relative: true,
            delta: 4.0 / 255.0,
            p: 0.125,
            length_scale: 0.05,
            covariance_kind: CovarianceKind::Gaussian,
            clip_bound: 3.5,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// Defaults tied to a grid: `δ = 4h`, `p = d/(2(d+6))`, and `ℓ` at least
    /// `16h` so that the window stays several nodes wide on coarse grids.
    pub fn for_grid(grid: &Grid) -> Self {
        let d = grid.dim() as f64;
        let h = grid.spacing();
        let length_scale = Self::default().length_scale.max(16.0 * h);
        Self {
            delta: 4.0 * h,
            p: d / (2.0 * (d + 6.0)),
            length_scale,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let d = dim as f64;
        let upper = d / (d + 6.0);
        if !(self.p > 0.0 && self.p < upper) {
            return parameter(format!("p = {} outside (0, {upper})", self.p));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return parameter(format!("sigma must be non-negative, got {}", self.sigma));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return parameter(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return parameter(format!(
                "length scale must be positive, got {}",
                self.length_scale
            ));
        }
        if !(self.clip_bound >= 0.0) {
            return parameter(format!(
                "clip bound must be non-negative, got {}",
                self.clip_bound
            ));
        }
        Ok(())
    }

    /// Standard deviation of the mollifier, `ℓ (δ/ℓ)^p`.
    pub fn window(&self) -> f64 {
        self.length_scale * (self.delta / self.length_scale).powf(self.p)
    }

    pub fn effective_sigma(&self, max_e1: f64) -> f64 {
        if self.sigma_relative {
            self.sigma * max_e1
        } else {
            self.sigma
        }
    }
}

/// The RNG for one realization; streams keep realizations independent and reproducible.
pub fn realization_rng(seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    rng
}

/// Stationary Gaussian fields with covariance `R(|x-y|/δ)` on a periodic box of
/// spacing `h`. Each draw yields two independent fields (real and imaginary parts).
pub struct PeriodicSampler {
    fft: PeriodicFft,
    sqrt_eigen: Vec<f64>,
    /// Most negative embedding eigenvalue relative to the largest, zeroed before use.
    pub negative_mass: f64,
}

impl PeriodicSampler {
    pub fn new(shape: &[usize], spacing: f64, delta: f64, kind: CovarianceKind) -> Self {
        let fft = PeriodicFft::new(shape);
        let len = fft.len();
        let mut cov = vec![C64::new(0.0, 0.0); len];
        for (lin, c) in cov.iter_mut().enumerate() {
            let mut rem = lin;
            let mut r2 = 0.0;
            for axis in (0..shape.len()).rev() {
                let off = wrapped_offset(rem % shape[axis], shape[axis]) * spacing;
                rem /= shape[axis];
                r2 += off * off;
            }
            *c = C64::new(kind.eval(r2.sqrt() / delta), 0.0);
        }
        fft.forward(&mut cov);
        let max = cov.iter().map(|v| v.re).fold(0.0, f64::max);
        let min = cov.iter().map(|v| v.re).fold(0.0, f64::min);
        let sqrt_eigen = cov
            .iter()
            .map(|v| (v.re.max(0.0) / len as f64).sqrt())
            .collect();
        Self {
            fft,
            sqrt_eigen,
            negative_mass: -min / max,
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.fft.shape()
    }

    /// Two independent unit-variance fields over the whole box.
    pub fn sample_pair(&self, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<C64> = self
            .sqrt_eigen
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re * s, im * s)
            })
            .collect();
        self.fft.forward(&mut buf);
        buf.into_iter().map(|v| (v.re, v.im)).unzip()
    }
}

/// Noise fields restricted to a grid, from a periodic box padded beyond the correlation reach.
pub struct NoiseSampler {
    grid: Grid,
    periodic: PeriodicSampler,
    clip_bound: f64,
}

impl NoiseSampler {
    pub fn new(spec: &NoiseSpec, grid: &Grid) -> Result<Self> {
        spec.validate(grid.dim())?;
        let h = grid.spacing();
        if spec.delta < 2.0 * h {
            return parameter(format!(
                "correlation length {} below 2h = {}",
                spec.delta,
                2.0 * h
            ));
        }
        let pad = (spec.covariance_kind.reach() * spec.delta / h).ceil() as usize;
        let m = fast_size(grid.n() + pad);
        let shape = vec![m; grid.dim()];
        let periodic = PeriodicSampler::new(&shape, h, spec.delta, spec.covariance_kind);
        if periodic.negative_mass > 1e-6 {
            log::warn!(
                "circulant embedding dropped negative eigenvalues ({:e})",
                periodic.negative_mass
            );
        }
        Ok(Self {
            grid: *grid,
            periodic,
            clip_bound: spec.clip_bound,
        })
    }

    fn crop(&self, full: &[f64]) -> Vec<f64> {
        let m = self.periodic.shape()[0];
        (0..self.grid.len())
            .map(|idx| {
                let mi = self.grid.multi_index(idx);
                let lin = (0..self.grid.dim()).fold(0, |acc, a| acc * m + mi[a]);
                full[lin]
            })
            .collect()
    }

    /// Two independent fields, before clipping.
    pub fn sample_pair_unclipped(&self, rng: &mut impl Rng) -> (RealField, RealField) {
        let (a, b) = self.periodic.sample_pair(rng);
        (
            RealField::from_raw(self.grid, self.crop(&a)),
            RealField::from_raw(self.grid, self.crop(&b)),
        )
    }

    /// `count` independent fields hard-clipped to `±clip_bound`.
    pub fn sample(&self, rng: &mut impl Rng, count: usize) -> Vec<RealField> {
        let c = self.clip_bound;
        let mut out = Vec::with_capacity(count + 1);
        while out.len() < count {
            let (a, b) = self.sample_pair_unclipped(rng);
            out.push(a);
            out.push(b);
        }
        out.truncate(count);
        out.into_iter().map(|f| f.map(|v| v.clamp(-c, c))).collect()
    }
}

/// One clipped field `W_δ` drawn from stream 0 of `spec.seed`.
pub fn sample_noise_field(spec: &NoiseSpec, grid: &Grid) -> Result<RealField> {
    let sampler = NoiseSampler::new(spec, grid)?;
    let mut rng = realization_rng(spec.seed, 0);
    Ok(sampler.sample(&mut rng, 1).pop().unwrap())
}

/// The `3d+1` fields in the order `W_1`, then `(W_j, W_1j, W_1j')` for `j = 2..=d+1`.
pub(crate) fn noise_field_count(dim: usize) -> usize {
    3 * dim + 1
}

/// Checks the positivity hypothesis `σ·clip < min E_1`.
pub(crate) fn check_positivity(sigma: f64, clip_bound: f64, min_e1: f64) -> Result<()> {
    if sigma * clip_bound >= min_e1 {
        return parameter(format!(
            "σ·clip = {:e} reaches min E_1 = {:e}; measured E_1 could vanish",
            sigma * clip_bound,
            min_e1
        ));
    }
    Ok(())
}

pub(crate) fn require_realizations(n: usize) -> Result<()> {
    if n < 20 {
        return config(format!(
            "{n} realizations is too few for a variance estimate (need 20)"
        ));
    }
    Ok(())
}
