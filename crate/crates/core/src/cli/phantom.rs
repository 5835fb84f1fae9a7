//! Smooth absorption phantoms.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::grid::{Grid, Point, RealField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    Constant,
    #[default]
    GaussianBumps,
    /// Soft-edged discs: `width` is the radius, the edge has thickness `width/4`.
    SmoothInclusion,
}

/// `background` plus one feature per entry of `centers`, `widths`, `amplitudes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub background: f64,
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomKind::GaussianBumps,
            background: 0.035,
            centers: vec![vec![-0.12, 0.06], vec![0.14, -0.1]],
            widths: vec![0.1, 0.08],
            amplitudes: vec![0.02, 0.012],
            q_min: 0.02,
            q_max: 0.07,
        }
    }
}

impl PhantomSpec {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: PhantomKind::Constant,
            background: value,
            centers: Vec::new(),
            widths: Vec::new(),
            amplitudes: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.q_min > 0.0 && self.q_min <= self.q_max && self.q_max.is_finite()) {
            return config(format!(
                "phantom bounds ({}, {}) are not an interval of positive values",
                self.q_min, self.q_max
            ));
        }
        let m = self.centers.len();
        if self.kind != PhantomKind::Constant
            && (self.widths.len() != m || self.amplitudes.len() != m)
        {
            return config("phantom centers, widths and amplitudes must have equal length");
        }
        if self.centers.iter().any(|c| c.len() != dim) {
            return config(format!("phantom centers must have {dim} coordinates"));
        }
        if self.widths.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return config("phantom widths must be positive");
        }
        Ok(())
    }

    fn value(&self, x: &Point) -> f64 {
        let features = self.centers.iter().zip(&self.widths).zip(&self.amplitudes);
        let bump = |c: &[f64]| c.iter().zip(x).map(|(c, x)| (x - c) * (x - c)).sum::<f64>();
        match self.kind {
            PhantomKind::Constant => self.background,
            PhantomKind::GaussianBumps => {
                self.background
                    + features
                        .map(|((c, w), a)| a * (-bump(c) / (2.0 * w * w)).exp())
                        .sum::<f64>()
            }
            PhantomKind::SmoothInclusion => {
                self.background
                    + features
                        .map(|((c, w), a)| {
                            a * 0.5 * (1.0 + ((w - bump(c).sqrt()) / (0.25 * w)).tanh())
                        })
                        .sum::<f64>()
            }
        }
    }

    /// Samples the phantom; fails when any value leaves `[q_min, q_max]`.
    pub fn generate(&self, grid: &Grid) -> Result<RealField> {
        self.validate(grid.dim())?;
        let q = RealField::from_fn(*grid, |x| self.value(x));
        let (lo, hi) = (q.min(), q.max());
        if lo < self.q_min || hi > self.q_max {
            return config(format!(
                "phantom range [{lo:.4}, {hi:.4}] leaves [{}, {}]",
                self.q_min, self.q_max
            ));
        }
        Ok(q)
    }
}
