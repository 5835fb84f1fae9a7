//! Boundary data from complex plane waves `e^{ξ·x}` with `ξ·ξ = 0`, and the
//! numerical check that the resulting solutions form a proper set of
//! measurements: `|u_1| > 0` and `[u_j, ∇ᵀu_j]` invertible at every node.

use serde::{Deserialize, Serialize};

use crate::error::{config, parameter, Result};
use crate::grid::{gradient, ComplexField, Grid, Point, C64, MAX_DIM};
use crate::helmholtz::BoundaryTrace;
use crate::linalg::determinant;

/// A null complex frequency `ξ` (`ξ·ξ = 0`, unconjugated) with its scale `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeVector {
    dim: usize,
    xi: [C64; MAX_DIM],
    scale_n: f64,
}

impl ProbeVector {
    /// Wraps a frequency, rejecting vectors that are not null to 1e-12 (relative to `|ξ|²`).
    pub fn new(xi: &[C64], scale_n: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&xi.len()) {
            return config(format!("probe dimension {} unsupported", xi.len()));
        }
        let mut arr = [C64::new(0.0, 0.0); MAX_DIM];
        arr[..xi.len()].copy_from_slice(xi);
        let p = Self {
            dim: xi.len(),
            xi: arr,
            scale_n,
        };
        let mag: f64 = xi.iter().map(|v| v.norm_sqr()).sum();
        if p.null_residual() > 1e-12 * mag.max(1.0) {
            return parameter(format!("ξ·ξ = {:e} is not zero", p.null_residual()));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xi(&self) -> &[C64] {
        &self.xi[..self.dim]
    }

    pub fn scale_n(&self) -> f64 {
        self.scale_n
    }

    /// `|ξ·ξ|`.
    pub fn null_residual(&self) -> f64 {
        self.xi().iter().map(|v| v * v).sum::<C64>().norm()
    }

    pub fn dot(&self, x: &Point) -> C64 {
        self.xi().iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `e^{ξ·x}`.
    pub fn plane_wave(&self, x: &Point) -> C64 {
        self.dot(x).exp()
    }

    /// `ζ = Re ξ + i s Im ξ` with `s = sqrt(1 + k²/|Im ξ|²)`, so that `ζ·ζ = −k²`
    /// and `e^{ζ·x}` solves `Δu + k²u = 0`. As `n` grows, `ζ − ξ = O(k²/n)`.
    pub fn helmholtz_frequency(&self, k: f64) -> Vec<C64> {
        let b2: f64 = self.xi().iter().map(|v| v.im * v.im).sum();
        let s = if b2 > 0.0 {
            (1.0 + k * k / b2).sqrt()
        } else {
            1.0
        };
        self.xi().iter().map(|v| C64::new(v.re, v.im * s)).collect()
    }

    /// The frequency used for boundary data in `mode`.
    pub fn frequency(&self, k: f64, mode: ProbeMode) -> Vec<C64> {
        match mode {
            ProbeMode::Null => self.xi().to_vec(),
            ProbeMode::Helmholtz => self.helmholtz_frequency(k),
        }
    }
}

/// Which exponential supplies the Robin data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// `e^{ξ·x}` with the null `ξ` itself.
    Null,
    /// `e^{ζ·x}` with `ζ·ζ = −k²`: the absorption-free solution of the same family.
    #[default]
    Helmholtz,
}

/// The family `ξ_j = n(e_j + i e_{j+1})` (j < d), `ξ_d = n(e_d + i e_1)`,
/// `ξ_{d+1} = n([Σ_{j<d} e_j + sqrt(d-1) e_d] + i[Σ_{j<d} e_j − sqrt(d-1) e_d])`.
pub fn make_xi_family(n: f64, d: usize) -> Result<Vec<ProbeVector>> {
    if !(n.is_finite() && n > 0.0) {
        return parameter(format!("probe scale must be positive, got {n}"));
    }
    if !(2..=MAX_DIM).contains(&d) {
        return config(format!("unsupported dimension {d}"));
    }
    let zero = C64::new(0.0, 0.0);
    let mut family = Vec::with_capacity(d + 1);
    for j in 0..d {
        let mut xi = vec![zero; d];
        xi[j] += C64::new(n, 0.0);
        xi[(j + 1) % d] += C64::new(0.0, n);
        family.push(ProbeVector::new(&xi, n)?);
    }
    let root = ((d - 1) as f64).sqrt();
    let mut xi = vec![C64::new(n, n); d];
    xi[d - 1] = C64::new(n * root, -n * root);
    family.push(ProbeVector::new(&xi, n)?);
    Ok(family)
}

/// `|det[1, ξ_jᵀ]|` over the family.
pub fn independence_determinant(family: &[ProbeVector]) -> f64 {
    let m = family.len();
    let mut a = Vec::with_capacity(m * m);
    for p in family {
        a.push(C64::new(1.0, 0.0));
        a.extend_from_slice(p.xi());
    }
    if a.len() != m * m {
        return 0.0;
    }
    determinant(&a, m).norm()
}

/// Robin datum `g = ν·∇e^{ξ·x} − ik e^{ξ·x}` on the grid boundary.
pub fn probe_boundary_data(probe: &ProbeVector, k: f64, grid: &Grid) -> Result<BoundaryTrace> {
    probe_boundary_data_with(probe, k, grid, ProbeMode::Null)
}

/// Robin datum of `e^{ζ·x}` with `ζ` chosen by `mode`.
pub fn probe_boundary_data_with(
    probe: &ProbeVector,
    k: f64,
    grid: &Grid,
    mode: ProbeMode,
) -> Result<BoundaryTrace> {
    if probe.dim() != grid.dim() {
        return config("probe and grid dimensions differ");
    }
    let zeta = probe.frequency(k, mode);
    Ok(BoundaryTrace::from_fn(*grid, |x, nu| {
        let nu_z: C64 = zeta.iter().zip(nu).map(|(a, b)| a * b).sum();
        let phase: C64 = zeta.iter().zip(x).map(|(a, b)| a * b).sum();
        (nu_z - C64::new(0.0, k)) * phase.exp()
    }))
}

/// Thresholds on the scale-free properness measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropernessThresholds {
    /// Bound on `min|u_1| / max|u_1|`.
    pub tau_u: f64,
    /// Bound on the Hadamard ratio `|det| / Π_j ||row_j||` at each node.
    pub tau_det: f64,
}

impl Default for PropernessThresholds {
    fn default() -> Self {
        Self {
            tau_u: 1e-6,
            tau_det: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropernessReport {
    pub min_abs_u1: f64,
    pub min_abs_det: f64,
    /// `min|u_1| / max|u_1|`.
    pub min_rel_u1: f64,
    /// Minimum over nodes of `|det| / Π_j ||(u_j, ∇u_j)||`.
    pub min_rel_det: f64,
    pub is_proper: bool,
}

/// Evaluates both properness conditions at every node. Never fails on an improper set.
pub fn check_proper(
    solutions: &[ComplexField],
    thresholds: PropernessThresholds,
) -> Result<PropernessReport> {
    let Some(first) = solutions.first() else {
        return config("no solutions given");
    };
    let grid = *first.grid();
    let d = grid.dim();
    if solutions.len() != d + 1 {
        return config(format!("need {} solutions, got {}", d + 1, solutions.len()));
    }
    if solutions.iter().any(|u| *u.grid() != grid) {
        return config("solutions live on different grids");
    }
    let grads: Vec<_> = solutions.iter().map(gradient).collect();
    let m = d + 1;
    let mut min_abs_det = f64::INFINITY;
    let mut min_rel_det = f64::INFINITY;
    let mut mat = vec![C64::new(0.0, 0.0); m * m];
    for node in 0..grid.len() {
        let mut row_norms = 1.0;
        for (j, (u, g)) in solutions.iter().zip(&grads).enumerate() {
            mat[j * m] = u.values()[node];
            for a in 0..d {
                mat[j * m + 1 + a] = g.component(a).values()[node];
            }
            row_norms *= mat[j * m..(j + 1) * m]
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                .sqrt();
        }
        let det = determinant(&mat, m).norm();
        min_abs_det = min_abs_det.min(det);
        let rel = if row_norms > 0.0 {
            det / row_norms
        } else {
            0.0
        };
        min_rel_det = min_rel_det.min(rel);
    }
    let min_abs_u1 = first.min_abs();
    let max_u1 = first.max_abs();
    let min_rel_u1 = if max_u1 > 0.0 {
        min_abs_u1 / max_u1
    } else {
        0.0
    };
    Ok(PropernessReport {
        min_abs_u1,
        min_abs_det,
        min_rel_u1,
        min_rel_det,
        is_proper: min_rel_u1 > thresholds.tau_u && min_rel_det > thresholds.tau_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn planar_family_matches_closed_form() {
        let f = make_xi_family(1.0, 2).unwrap();
        assert_eq!(f.len(), 3);
        assert_eq!(f[0].xi(), &[c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(f[1].xi(), &[c(0.0, 1.0), c(1.0, 0.0)]);
        assert_eq!(f[2].xi(), &[c(1.0, 1.0), c(1.0, -1.0)]);
    }

    #[test]
    fn every_family_member_is_null() {
        for d in [2, 3] {
            for n in [0.5, 1.0, 8.0, 40.0] {
                for p in make_xi_family(n, d).unwrap() {
                    assert!(p.null_residual() <= 1e-12 * n * n, "d={d} n={n}");
                }
            }
        }
    }

    #[test]
    fn independence_determinant_regression_and_growth() {
        // rows (1, 8, 8i), (1, 8i, 8), (1, 8+8i, 8-8i): det = 64 · 2i by cofactor expansion
        let f = make_xi_family(8.0, 2).unwrap();
        let det = independence_determinant(&f);
        assert!((det - 128.0).abs() < 1e-9, "{det}");
        let mut prev = 0.0;
        for n in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let d2 = independence_determinant(&make_xi_family(n, 2).unwrap());
            let d3 = independence_determinant(&make_xi_family(n, 3).unwrap());
            assert!(d2 > prev && d3 > 0.0);
            prev = d2;
        }
    }

    #[test]
    fn boundary_data_on_right_face() {
        let grid = Grid::square(9, 0.5).unwrap();
        let n = 2.0;
        let k = 6.0;
        let p = ProbeVector::new(&[c(n, 0.0), c(0.0, n)], n).unwrap();
        let g = probe_boundary_data(&p, k, &grid).unwrap();
        for (&node, &v) in g.nodes().iter().zip(g.values()) {
            let mi = grid.multi_index(node);
            if mi[0] == 8 && mi[1] != 0 && mi[1] != 8 {
                let expect = c(n, -k) * p.plane_wave(&grid.coord(node));
                assert!((v - expect).norm() < 1e-12 * expect.norm());
            }
        }
        let zero = ProbeVector::new(&[c(0.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        let g0 = probe_boundary_data(&zero, k, &grid).unwrap();
        assert!(g0.values().iter().all(|v| (*v - c(0.0, -k)).norm() < 1e-15));
    }

    #[test]
    fn equal_solutions_are_improper() {
        let grid = Grid::square(12, 0.5).unwrap();
        let u = ComplexField::from_fn(grid, |x| c(1.0 + x[0], x[1]).exp());
        let r = check_proper(&[u.clone(), u.clone(), u], PropernessThresholds::default()).unwrap();
        assert!(r.min_abs_det < 1e-9);
        assert!(!r.is_proper);
    }

    #[test]
    fn helmholtz_frequency_squares_to_minus_k2() {
        for d in [2, 3] {
            for p in make_xi_family(1.5, d).unwrap() {
                let z = p.helmholtz_frequency(6.0);
                let zz: C64 = z.iter().map(|v| v * v).sum();
                assert!((zz + 36.0).norm() < 1e-12, "{zz}");
                assert_eq!(p.frequency(6.0, ProbeMode::Null), p.xi().to_vec());
            }
        }
        let p = make_xi_family(400.0, 2).unwrap()[0];
        let gap: f64 = p
            .helmholtz_frequency(6.0)
            .iter()
            .zip(p.xi())
            .map(|(a, b)| (a - b).norm())
            .sum();
        assert!(gap < 36.0 / 400.0);
    }

    #[test]
    fn rejects_non_null_vector() {
        assert!(ProbeVector::new(&[c(1.0, 0.0), c(1.0, 0.0)], 1.0).is_err());
    }
}
