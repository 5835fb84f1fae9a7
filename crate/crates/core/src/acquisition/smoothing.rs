//! Mollification by a truncated Gaussian of width `ℓ(δ/ℓ)^p`.
//!
//! Convolution runs by FFT on a zero-padded box. Near `∂X` the kernel mass is
//! renormalized over in-domain nodes, so constants are reproduced everywhere.

use super::noise::NoiseSpec;
use super::spectral::{fast_size, wrapped_offset, PeriodicFft};
use crate::error::{parameter, Result};
use crate::grid::{ComplexField, Grid, RealField, C64};

/// Truncation radius in standard deviations.
pub const TRUNCATION: f64 = 4.0;

pub struct Smoother {
    grid: Grid,
    width: f64,
    fft: PeriodicFft,
    kernel_hat: Vec<C64>,
    /// Kernel mass inside the domain at each node.
    mass: Vec<f64>,
}

impl Smoother {
    pub fn new(spec: &NoiseSpec, grid: &Grid) -> Result<Self> {
        spec.validate(grid.dim())?;
        Self::with_width(spec.window(), grid)
    }

    /// Smoother with standard deviation `width`, which must be at least `2h`.
    pub fn with_width(width: f64, grid: &Grid) -> Result<Self> {
        let h = grid.spacing();
        if !(width >= 2.0 * h) {
            return parameter(format!("smoothing window {width} below 2h = {}", 2.0 * h));
        }
        let radius = ((TRUNCATION * width / h).floor() as usize).min(grid.n() - 1);
        let m = fast_size(grid.n() + radius);
        let shape = vec![m; grid.dim()];
        let fft = PeriodicFft::new(&shape);
        let mut kernel = vec![C64::new(0.0, 0.0); fft.len()];
        let cutoff = TRUNCATION * width;
        let mut total = 0.0;
        for (lin, v) in kernel.iter_mut().enumerate() {
            let mut rem = lin;
            let mut r2 = 0.0;
            let mut inside = true;
            for _ in 0..grid.dim() {
                let off = wrapped_offset(rem % m, m);
                rem /= m;
                inside &= off.abs() <= radius as f64;
                r2 += (off * h).powi(2);
            }
            if inside && r2.sqrt() <= cutoff {
                let w = (-0.5 * r2 / (width * width)).exp();
                *v = C64::new(w, 0.0);
                total += w;
            }
        }
        kernel.iter_mut().for_each(|v| *v /= total);
        fft.forward(&mut kernel);
        let mut s = Self {
            grid: *grid,
            width,
            fft,
            kernel_hat: kernel,
            mass: Vec::new(),
        };
        let ones = vec![C64::new(1.0, 0.0); grid.len()];
        s.mass = s.convolve(&ones).into_iter().map(|v| v.re).collect();
        Ok(s)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    fn box_index(&self, idx: usize) -> usize {
        let m = self.fft.shape()[0];
        let mi = self.grid.multi_index(idx);
        (0..self.grid.dim()).fold(0, |acc, a| acc * m + mi[a])
    }

    fn convolve(&self, values: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.fft.len()];
        for (idx, &v) in values.iter().enumerate() {
            buf[self.box_index(idx)] = v;
        }
        self.fft.forward(&mut buf);
        buf.iter_mut()
            .zip(&self.kernel_hat)
            .for_each(|(b, k)| *b *= k);
        self.fft.inverse(&mut buf);
        (0..values.len())
            .map(|idx| buf[self.box_index(idx)])
            .collect()
    }

    pub fn smooth_complex(&self, f: &ComplexField) -> ComplexField {
        assert_eq!(*f.grid(), self.grid, "field and smoother grids differ");
        let out = self
            .convolve(f.values())
            .into_iter()
            .zip(&self.mass)
            .map(|(v, m)| v / *m)
            .collect();
        ComplexField::from_raw(self.grid, out)
    }

    pub fn smooth_real(&self, f: &RealField) -> RealField {
        self.smooth_complex(&f.to_complex()).re()
    }
}

/// `f * φ_δ` with the configured window.
pub fn smooth(f: &ComplexField, spec: &NoiseSpec) -> Result<ComplexField> {
    Ok(Smoother::new(spec, f.grid())?.smooth_complex(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::noise::realization_rng;
    use rand_distr::{Distribution, StandardNormal};

    fn grid() -> Grid {
        Grid::square(41, 0.5).unwrap()
    }

    #[test]
    fn constants_survive() {
        let g = grid();
        let s = Smoother::with_width(3.0 * g.spacing(), &g).unwrap();
        let out = s.smooth_complex(&ComplexField::constant(g, C64::new(2.5, -1.0)));
        for v in out.values() {
            assert!((v - C64::new(2.5, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_fields_unchanged_in_interior() {
        let g = grid();
        let width = 2.0 * g.spacing();
        let s = Smoother::with_width(width, &g).unwrap();
        let f = RealField::from_fn(g, |x| 3.0 * x[0] - 2.0 * x[1] + 1.0);
        let out = s.smooth_real(&f);
        let depth = (TRUNCATION * 2.0).ceil() as usize + 1;
        for idx in 0..g.len() {
            if g.is_inner(idx, depth) {
                assert!((out.values()[idx] - f.values()[idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_and_additive() {
        let g = grid();
        let s = Smoother::with_width(2.5 * g.spacing(), &g).unwrap();
        let a = ComplexField::from_fn(g, |x| C64::new(x[0].sin(), x[1]));
        let b = ComplexField::from_fn(g, |x| C64::new(x[0] * x[1], 1.0));
        let lhs = s.smooth_complex(&(&a + &b));
        let rhs = &s.smooth_complex(&a) + &s.smooth_complex(&b);
        assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn white_noise_variance_matches_kernel_energy() {
        // discrete white noise of unit variance through a unit-mass kernel has
        // variance Σ k_i², which for a Gaussian of width s is ≈ h²/(4πs²)
        let g = Grid::square(65, 0.5).unwrap();
        let h = g.spacing();
        let s = Smoother::with_width(3.0 * h, &g).unwrap();
        let mut rng = realization_rng(11, 0);
        let centre = g.len() / 2;
        let trials = 200;
        let mut var = 0.0;
        for _ in 0..trials {
            let w = RealField::from_fn(g, |_| StandardNormal.sample(&mut rng));
            var += s.smooth_real(&w).values()[centre].powi(2);
        }
        var /= trials as f64;
        let predicted = h * h / (4.0 * std::f64::consts::PI * (3.0 * h).powi(2));
        assert!(
            (var / predicted - 1.0).abs() < 0.2,
            "ratio {}",
            var / predicted
        );
    }

    #[test]
    fn rejects_unresolved_window() {
        let g = grid();
        assert!(Smoother::with_width(g.spacing(), &g).is_err());
    }
}
