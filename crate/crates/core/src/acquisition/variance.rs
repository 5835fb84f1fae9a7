//! Monte-Carlo check of the variance law `E|W_δ * ∂^γφ_δ|² ∝ δ^{d-(d+2|γ|)p}`.
//!
//! Everything runs on a periodic box where both the field and the convolution
//! are exactly stationary, so the variance is averaged over every node.

use serde::{Deserialize, Serialize};

use super::noise::{
    realization_rng, require_realizations, CovarianceKind, NoiseSpec, PeriodicSampler,
};
use super::spectral::{fast_size, wrapped_offset, PeriodicFft};
use crate::error::{config, Result};
use crate::grid::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheckConfig {
    pub dim: usize,
    /// Order of the derivative `∂_1^m` applied to the mollifier.
    pub order: usize,
    pub deltas: Vec<f64>,
    pub realizations: usize,
    /// Nodes per correlation length.
    pub resolution: f64,
}

impl Default for VarianceCheckConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            order: 0,
            deltas: vec![0.02, 0.05, 0.12],
            realizations: 200,
            resolution: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheckReport {
    pub order: usize,
    pub deltas: Vec<f64>,
    pub variances: Vec<f64>,
    /// `δ^d (2m-1)!! (2s²)^{-m-d/2}` evaluated per δ: the leading term.
    pub leading: Vec<f64>,
    /// `δ^d (2m-1)!! (2s²+δ²)^{-m-d/2}`: exact for Gaussian covariance.
    pub exact: Vec<f64>,
    pub predicted_slope: f64,
    pub measured_slope: f64,
}

impl VarianceCheckReport {
    pub fn slope_error(&self) -> f64 {
        (self.measured_slope - self.predicted_slope).abs()
    }
}

fn double_factorial_odd(m: usize) -> f64 {
    (1..=m).map(|i| (2 * i - 1) as f64).product()
}

/// Probabilists' Hermite polynomial `He_m`.
fn hermite(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if m == 0 {
        return prev;
    }
    for k in 1..m {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Sample variance of `W_δ * ∂_1^m φ_s` for one δ.
fn variance_at(spec: &NoiseSpec, cfg: &VarianceCheckConfig, delta: f64) -> f64 {
    let d = cfg.dim;
    let s = NoiseSpec { delta, ..*spec }.window();
    let h = delta / cfg.resolution;
    let extent = 2.0 * (5.0 * s + 8.0 * delta);
    let m = fast_size((extent / h).ceil() as usize);
    let shape = vec![m; d];
    let sampler = PeriodicSampler::new(&shape, h, delta, CovarianceKind::Gaussian);
    let fft = PeriodicFft::new(&shape);
    let norm = (2.0 * std::f64::consts::PI * s * s).powf(-0.5 * d as f64);
    let mut kernel = vec![C64::new(0.0, 0.0); fft.len()];
    for (lin, v) in kernel.iter_mut().enumerate() {
        let mut rem = lin;
        let mut r2 = 0.0;
        let mut x1 = 0.0;
        for axis in (0..d).rev() {
            let off = wrapped_offset(rem % m, m) * h;
            rem /= m;
            r2 += off * off;
            if axis == 0 {
                x1 = off;
            }
        }
        // ∂_1^m of the Gaussian density, times the quadrature weight h^d
        let sign = if cfg.order % 2 == 0 { 1.0 } else { -1.0 };
        let deriv = sign * s.powi(-(cfg.order as i32)) * hermite(cfg.order, x1 / s);
        *v = C64::new(
            deriv * norm * (-0.5 * r2 / (s * s)).exp() * h.powi(d as i32),
            0.0,
        );
    }
    fft.forward(&mut kernel);
    let mut rng = realization_rng(spec.seed, (delta.to_bits() >> 8) ^ cfg.order as u64);
    let mut acc = 0.0;
    let mut count = 0usize;
    while count < cfg.realizations {
        let (a, b) = sampler.sample_pair(&mut rng);
        // two independent real fields packed into one complex transform
        let mut buf: Vec<C64> = a.iter().zip(&b).map(|(&x, &y)| C64::new(x, y)).collect();
        fft.forward(&mut buf);
        buf.iter_mut().zip(&kernel).for_each(|(v, k)| *v *= k);
        fft.inverse(&mut buf);
        acc += buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / buf.len() as f64;
        count += 2;
    }
    acc / count as f64
}

/// Runs the sweep over `cfg.deltas` with `spec.p`, `spec.length_scale` and `spec.seed`.
pub fn verify_noise_variance(
    spec: &NoiseSpec,
    cfg: &VarianceCheckConfig,
) -> Result<VarianceCheckReport> {
    require_realizations(cfg.realizations)?;
    spec.validate(cfg.dim)?;
    if cfg.order > 3 {
        return config(format!("derivative order {} above 3", cfg.order));
    }
    if cfg.deltas.len() < 2 {
        return config("need at least two correlation lengths");
    }
    if spec.covariance_kind != CovarianceKind::Gaussian {
        return config("variance law check uses the gaussian covariance");
    }
    if let Some(&delta) = cfg
        .deltas
        .iter()
        .find(|&&delta| NoiseSpec { delta, ..*spec }.window() < 2.0 * delta)
    {
        return config(format!(
            "window narrower than 2δ at δ = {delta}; the variance law needs s ≫ δ (raise length_scale)"
        ));
    }
    let d = cfg.dim as f64;
    let mo = cfg.order as f64;
    let dfact = double_factorial_odd(cfg.order);
    let mut variances = Vec::new();
    let mut leading = Vec::new();
    let mut exact = Vec::new();
    for &delta in &cfg.deltas {
        let s = NoiseSpec { delta, ..*spec }.window();
        let v = if spec.sigma == 0.0 {
            0.0
        } else {
            variance_at(spec, cfg, delta)
        };
        variances.push(v);
        leading.push(delta.powf(d) * dfact * (2.0 * s * s).powf(-mo - d / 2.0));
        exact.push(delta.powf(d) * dfact * (2.0 * s * s + delta * delta).powf(-mo - d / 2.0));
    }
    let measured_slope = if variances.iter().all(|&v| v > 0.0) {
        loglog_slope(&cfg.deltas, &variances)
    } else {
        0.0
    };
    Ok(VarianceCheckReport {
        order: cfg.order,
        deltas: cfg.deltas.clone(),
        variances,
        leading,
        exact,
        predicted_slope: d - (d + 2.0 * mo) * spec.p,
        measured_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 2.0), 1.0);
        assert_eq!(hermite(1, 2.0), 2.0);
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        assert_eq!(double_factorial_odd(3), 15.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.6)).collect();
        assert!((loglog_slope(&x, &y) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_gives_zero_variance() {
        let spec = NoiseSpec {
            sigma: 0.0,
            p: 0.2,
            length_scale: 1.0,
            ..NoiseSpec::default()
        };
        let r = verify_noise_variance(
            &spec,
            &VarianceCheckConfig {
                realizations: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.variances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn window_narrower_than_delta_refused() {
        let spec = NoiseSpec {
            sigma: 1.0,
            sigma_relative: false,
            length_scale: 0.05,
            ..NoiseSpec::default()
        };
        assert!(verify_noise_variance(&spec, &VarianceCheckConfig::default()).is_err());
    }

    #[test]
    fn too_few_realizations_refused() {
        let cfg = VarianceCheckConfig {
            realizations: 10,
            ..Default::default()
        };
        assert!(verify_noise_variance(&NoiseSpec::default(), &cfg).is_err());
    }

    #[test]
    fn small_run_tracks_exact_gaussian_variance() {
        let spec = NoiseSpec {
            p: 0.2,
            seed: 5,
            length_scale: 1.0,
            ..NoiseSpec::default()
        };
        let cfg = VarianceCheckConfig {
            realizations: 20,
            deltas: vec![0.05, 0.1],
            ..Default::default()
        };
        let r = verify_noise_variance(&spec, &cfg).unwrap();
        for (v, e) in r.variances.iter().zip(&r.exact) {
            assert!((v / e - 1.0).abs() < 0.1, "{v} vs {e}");
        }
    }
}
