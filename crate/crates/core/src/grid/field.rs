use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_traits::Zero;

use super::{Grid, Point, C64};
use crate::error::{config, Result};

/// Nodal scalar type: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn is_finite_value(&self) -> bool;
    fn modulus_sq(&self) -> f64;
    fn modulus(&self) -> f64 {
        self.modulus_sq().sqrt()
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
    fn modulus_sq(&self) -> f64 {
        self * self
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for C64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn modulus_sq(&self) -> f64 {
        self.norm_sqr()
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

/// Scalar values at every node of a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<C64>;

impl<T: Scalar> Field<T> {
    /// Wraps nodal values, checking the length and that every value is finite.
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return config(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite_value()) {
            return config(format!("non-finite value {:?} at node {i}", values[i]));
        }
        Ok(Self { grid, values })
    }

    /// Unchecked constructor for values produced by finite arithmetic on finite inputs.
    pub(crate) fn from_raw(grid: Grid, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![T::zero(); grid.len()])
    }

    pub fn constant(grid: Grid, value: T) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples a function at every node.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&Point) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coord(i))).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination with a field on the same grid.
    ///
    /// Panics if the grids differ.
    pub fn zip_map<U: Scalar, V: Scalar>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Field<V> {
        self.assert_same_grid(other.grid());
        Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(other.values())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> bool {
        self.grid == other.grid
    }

    pub(crate) fn assert_same_grid(&self, other: &Grid) {
        assert!(
            self.grid == *other,
            "grid mismatch: {:?} vs {:?}",
            self.grid,
            other
        );
    }

    /// Discrete `L^2(X)` norm with trapezoidal weights.
    pub fn norm_l2(&self) -> f64 {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| g.weight(i) * v.modulus_sq())
            .sum::<f64>()
            .sqrt()
    }

    /// `L^2` norm restricted to nodes where `mask` is true.
    pub fn norm_l2_masked(&self, mask: &[bool]) -> f64 {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i])
            .map(|(i, v)| g.weight(i) * v.modulus_sq())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.modulus())
            .fold(f64::INFINITY, f64::min)
    }

    /// Value at every node along the grid midline (axis 0 varies).
    pub fn midline(&self) -> Vec<T> {
        self.grid
            .midline()
            .into_iter()
            .map(|i| self.values[i])
            .collect()
    }
}

impl Field<f64> {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Weighted inner product `sum w_i a_i b_i`.
    pub fn inner(&self, other: &Field<f64>) -> f64 {
        self.assert_same_grid(other.grid());
        let g = &self.grid;
        self.values
            .iter()
            .zip(other.values())
            .enumerate()
            .map(|(i, (a, b))| g.weight(i) * a * b)
            .sum()
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| C64::new(v, 0.0))
    }
}

impl Field<C64> {
    pub fn re(&self) -> RealField {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|v| v.im)
    }

    pub fn abs(&self) -> RealField {
        self.map(|v| v.norm())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }
}

impl<T: Scalar> Add for &Field<T> {
    type Output = Field<T>;
    fn add(self, rhs: Self) -> Field<T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for &Field<T> {
    type Output = Field<T>;
    fn sub(self, rhs: Self) -> Field<T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for &Field<T> {
    type Output = Field<T>;
    fn mul(self, rhs: Self) -> Field<T> {
        self.zip_map(rhs, |a, b| a * b)
    }
}

/// `d` component fields on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    components: Vec<Field<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(components: Vec<Field<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return config("vector field needs at least one component");
        };
        let grid = *first.grid();
        if components.len() != grid.dim() {
            return config(format!(
                "vector field has {} components on a {}-dimensional grid",
                components.len(),
                grid.dim()
            ));
        }
        if components.iter().any(|c| *c.grid() != grid) {
            return config("vector field components live on different grids");
        }
        Ok(Self { components })
    }

    pub(crate) fn from_raw(components: Vec<Field<T>>) -> Self {
        Self { components }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw((0..grid.dim()).map(|_| Field::zeros(grid)).collect())
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[Field<T>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &Field<T> {
        &self.components[axis]
    }

    pub fn into_components(self) -> Vec<Field<T>> {
        self.components
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> VectorField<U> {
        VectorField::from_raw(self.components.iter().map(|c| c.map(f)).collect())
    }

    /// Pointwise dot product `sum_a v_a w_a` (no conjugation).
    pub fn dot(&self, other: &VectorField<T>) -> Field<T> {
        let mut out = Field::zeros(*self.grid());
        for (a, b) in self.components.iter().zip(&other.components) {
            a.assert_same_grid(b.grid());
            for ((o, &x), &y) in out.values_mut().iter_mut().zip(a.values()).zip(b.values()) {
                *o += x * y;
            }
        }
        out
    }

    /// `L^2` norm of the pointwise Euclidean magnitude.
    pub fn norm_l2(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.norm_l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every component pointwise by a real field.
    pub fn scale_by(&self, s: &RealField) -> Self {
        VectorField::from_raw(
            self.components
                .iter()
                .map(|c| {
                    Field::from_raw(
                        *c.grid(),
                        c.values()
                            .iter()
                            .zip(s.values())
                            .map(|(&v, &w)| v * w)
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

impl VectorField<C64> {
    pub fn re(&self) -> VectorField<f64> {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> VectorField<f64> {
        self.map(|v| v.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::square(4, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
        assert!(Field::new(g, vec![1.0; 16]).is_ok());
    }

    #[test]
    fn l2_norm_of_constant() {
        let g = Grid::square(33, 0.5).unwrap();
        let f = Field::constant(g, 3.0);
        assert!((f.norm_l2() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn vector_field_component_count() {
        let g = Grid::square(4, 1.0).unwrap();
        let f = RealField::zeros(g);
        assert!(VectorField::new(vec![f.clone()]).is_err());
        assert!(VectorField::new(vec![f.clone(), f]).is_ok());
    }
}
