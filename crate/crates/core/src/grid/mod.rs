//! Uniform node-centred grids on the centred cube `[-L, L]^d`, nodal fields,
//! and the finite-difference calculus used by every other module.

mod calculus;
mod field;
pub mod io;

pub use calculus::{
    axis_derivative, axis_second_derivative, divergence, divergence_with, gradient, gradient_with,
    laplacian, laplacian_with, DiffOrder,
};
pub use field::{ComplexField, Field, RealField, Scalar, VectorField};

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub type C64 = num_complex::Complex64;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point in space; trailing entries beyond the grid dimension are zero.
pub type Point = [f64; MAX_DIM];

/// Per-axis node index; trailing entries beyond the grid dimension are zero.
pub type NodeIndex = [usize; MAX_DIM];

/// Uniform grid with `n` nodes per axis on `[-L, L]^d`, boundary nodes lying on the faces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return config(format!("unsupported dimension {dim}, expected 2 or 3"));
        }
        if n < 3 {
            return config(format!("need at least 3 nodes per axis, got {n}"));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return config(format!("half width must be positive, got {half_width}"));
        }
        Ok(Self { dim, n, half_width })
    }

    /// Two-dimensional square grid.
    pub fn square(n: usize, half_width: f64) -> Result<Self> {
        Self::new(2, n, half_width)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Total node count, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Distance in linear index between neighbours along `axis` (row-major, axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> NodeIndex {
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn linear_index(&self, index: &NodeIndex) -> usize {
        index[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinate of node `i` along any axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + 2.0 * self.half_width * i as f64 / (self.n - 1) as f64
    }

    pub fn coord(&self, idx: usize) -> Point {
        let mi = self.multi_index(idx);
        let mut p = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            p[axis] = self.axis_coord(mi[axis]);
        }
        p
    }

    /// Per-axis side of the boundary the node lies on: -1 low face, +1 high face, 0 interior.
    pub fn boundary_sides(&self, idx: usize) -> [i8; MAX_DIM] {
        let mi = self.multi_index(idx);
        let mut sides = [0i8; MAX_DIM];
        for axis in 0..self.dim {
            if mi[axis] == 0 {
                sides[axis] = -1;
            } else if mi[axis] == self.n - 1 {
                sides[axis] = 1;
            }
        }
        sides
    }

    /// Number of faces the node lies on (0 interior, 1 face, 2 edge/corner, 3 corner).
    pub fn boundary_multiplicity(&self, idx: usize) -> usize {
        self.boundary_sides(idx).iter().filter(|&&s| s != 0).count()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary_multiplicity(idx) > 0
    }

    /// Linear indices of all boundary nodes in increasing order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Outward unit normal at a boundary node. Edge and corner nodes get the
    /// normalized average of the adjacent face normals; interior nodes get zero.
    pub fn outward_normal(&self, idx: usize) -> Point {
        let sides = self.boundary_sides(idx);
        let m = sides.iter().filter(|&&s| s != 0).count();
        let mut nu = [0.0; MAX_DIM];
        if m == 0 {
            return nu;
        }
        let scale = 1.0 / (m as f64).sqrt();
        for axis in 0..self.dim {
            nu[axis] = sides[axis] as f64 * scale;
        }
        nu
    }

    /// Trapezoidal quadrature weight of a node: `h^d / 2^m` with `m` the boundary multiplicity.
    pub fn weight(&self, idx: usize) -> f64 {
        self.spacing().powi(self.dim as i32) / (1u32 << self.boundary_multiplicity(idx)) as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Volume of the domain, `(2L)^d`.
    pub fn measure(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// `rad(X) = sup |x|` over the boundary, `L sqrt(d)` for the cube.
    pub fn radius(&self) -> f64 {
        self.half_width * (self.dim as f64).sqrt()
    }

    /// Star-shape constant: `x . nu >= gamma rad(X)` on every face with `gamma = 1/sqrt(d)`.
    pub fn star_shape_constant(&self) -> f64 {
        1.0 / (self.dim as f64).sqrt()
    }

    /// Nodes at least `depth` nodes away from every face.
    pub fn is_inner(&self, idx: usize, depth: usize) -> bool {
        let mi = self.multi_index(idx);
        mi[..self.dim]
            .iter()
            .all(|&i| i >= depth && i + depth < self.n)
    }

    /// Linear indices along the midline: axis 0 varies, every other axis at its centre node.
    pub fn midline(&self) -> Vec<usize> {
        let mid = self.n / 2;
        (0..self.n)
            .map(|i| {
                let mut mi = [mid; MAX_DIM];
                mi[0] = i;
                self.linear_index(&mi)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_spans_domain() {
        for n in [3, 17, 64, 129, 256] {
            let g = Grid::square(n, 0.5).unwrap();
            let span = g.spacing() * (n - 1) as f64;
            assert!((span - 1.0).abs() <= f64::EPSILON);
            assert_eq!(g.axis_coord(0), -0.5);
            assert!((g.axis_coord(n - 1) - 0.5).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(3, 5, 1.0).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.linear_index(&g.multi_index(idx)), idx);
        }
        assert_eq!(g.stride(0), 25);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn star_shape_holds_on_boundary() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 9, 0.5).unwrap();
            let gamma = g.star_shape_constant();
            let h = g.spacing();
            let min_xnu = g
                .boundary_nodes()
                .into_iter()
                .map(|i| {
                    let x = g.coord(i);
                    let nu = g.outward_normal(i);
                    (0..dim).map(|a| x[a] * nu[a]).sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(min_xnu >= gamma * g.radius() - h);
        }
        let g = Grid::square(11, 0.5).unwrap();
        assert!((g.radius() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn corner_normal_is_averaged() {
        let g = Grid::square(5, 1.0).unwrap();
        let nu = g.outward_normal(0);
        let s = 1.0 / 2f64.sqrt();
        assert!((nu[0] + s).abs() < 1e-15 && (nu[1] + s).abs() < 1e-15);
        let face = g.linear_index(&[4, 2, 0]);
        assert_eq!(g.outward_normal(face), [1.0, 0.0, 0.0]);
        assert_eq!(g.outward_normal(12), [0.0; 3]);
    }

    #[test]
    fn weights_integrate_volume() {
        for dim in [2, 3] {
            let g = Grid::new(dim, 7, 0.5).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!((total - g.measure()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_count() {
        let g = Grid::square(10, 1.0).unwrap();
        assert_eq!(g.boundary_nodes().len(), 100 - 64);
        let g = Grid::new(3, 6, 1.0).unwrap();
        assert_eq!(g.boundary_nodes().len(), 216 - 64);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, 10, 1.0).is_err());
        assert!(Grid::new(2, 2, 1.0).is_err());
        assert!(Grid::new(2, 10, 0.0).is_err());
    }
}
