//! Finite-difference gradient, divergence and Laplacian.
//!
//! Central differences at interior nodes, one-sided stencils of the same order
//! at boundary nodes. With second-order stencils `divergence(gradient(f))` is the
//! wide `(f[i+2] - 2 f[i] + f[i-2]) / 4h^2` stencil per axis, so it agrees with
//! `laplacian(f)` only to `O(h^2)`, not to rounding.

use serde::{Deserialize, Serialize};

use super::{Field, Scalar, VectorField};

/// Accuracy order of the difference stencils.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffOrder {
    #[default]
    Second,
    Fourth,
}

impl DiffOrder {
    /// Fewest nodes per axis the one-sided stencils need.
    fn min_nodes(self) -> usize {
        match self {
            DiffOrder::Second => 4,
            DiffOrder::Fourth => 6,
        }
    }
}

fn first_derivative_line<T: Scalar>(f: &[T], out: &mut [T], inv_h: f64, order: DiffOrder) {
    let n = f.len();
    let order = if n < order.min_nodes() {
        DiffOrder::Second
    } else {
        order
    };
    match order {
        DiffOrder::Second => {
            let c = 0.5 * inv_h;
            out[0] = (f[0] * -3.0 + f[1] * 4.0 - f[2]) * c;
            out[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * c;
            for i in 1..n - 1 {
                out[i] = (f[i + 1] - f[i - 1]) * c;
            }
        }
        DiffOrder::Fourth => {
            let c = inv_h / 12.0;
            out[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * c;
            out[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * c;
            out[n - 1] = (f[n - 1] * 25.0 - f[n - 2] * 48.0 + f[n - 3] * 36.0 - f[n - 4] * 16.0
                + f[n - 5] * 3.0)
                * c;
            out[n - 2] = (f[n - 1] * 3.0 + f[n - 2] * 10.0 - f[n - 3] * 18.0 + f[n - 4] * 6.0
                - f[n - 5])
                * c;
            for i in 2..n - 2 {
                out[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * c;
            }
        }
    }
}

fn second_derivative_line<T: Scalar>(f: &[T], out: &mut [T], inv_h2: f64, order: DiffOrder) {
    let n = f.len();
    if n < 4 {
        // three nodes: the only available stencil is the central one
        let v = (f[0] - f[1] * 2.0 + f[2]) * inv_h2;
        out.iter_mut().for_each(|o| *o = v);
        return;
    }
    let order = if n < order.min_nodes() {
        DiffOrder::Second
    } else {
        order
    };
    match order {
        DiffOrder::Second => {
            out[0] = (f[0] * 2.0 - f[1] * 5.0 + f[2] * 4.0 - f[3]) * inv_h2;
            out[n - 1] = (f[n - 1] * 2.0 - f[n - 2] * 5.0 + f[n - 3] * 4.0 - f[n - 4]) * inv_h2;
            for i in 1..n - 1 {
                out[i] = (f[i - 1] - f[i] * 2.0 + f[i + 1]) * inv_h2;
            }
        }
        DiffOrder::Fourth => {
            let c = inv_h2 / 12.0;
            let edge = |g: [T; 6]| {
                (g[0] * 45.0 - g[1] * 154.0 + g[2] * 214.0 - g[3] * 156.0 + g[4] * 61.0
                    - g[5] * 10.0)
                    * c
            };
            let near = |g: [T; 6]| {
                (g[0] * 10.0 - g[1] * 15.0 - g[2] * 4.0 + g[3] * 14.0 - g[4] * 6.0 + g[5]) * c
            };
            out[0] = edge([f[0], f[1], f[2], f[3], f[4], f[5]]);
            out[1] = near([f[0], f[1], f[2], f[3], f[4], f[5]]);
            out[n - 1] = edge([f[n - 1], f[n - 2], f[n - 3], f[n - 4], f[n - 5], f[n - 6]]);
            out[n - 2] = near([f[n - 1], f[n - 2], f[n - 3], f[n - 4], f[n - 5], f[n - 6]]);
            for i in 2..n - 2 {
                out[i] =
                    (-f[i - 2] + f[i - 1] * 16.0 - f[i] * 30.0 + f[i + 1] * 16.0 - f[i + 2]) * c;
            }
        }
    }
}

/// Applies a 1-D line operator along `axis` to every grid line.
fn along_axis<T: Scalar>(f: &Field<T>, axis: usize, op: impl Fn(&[T], &mut [T])) -> Field<T> {
    let grid = *f.grid();
    let n = grid.n();
    let stride = grid.stride(axis);
    let src = f.values();
    let mut out = vec![T::zero(); src.len()];
    let mut line = vec![T::zero(); n];
    let mut res = vec![T::zero(); n];
    for base in 0..src.len() {
        if (base / stride) % n != 0 {
            continue;
        }
        for (i, v) in line.iter_mut().enumerate() {
            *v = src[base + i * stride];
        }
        op(&line, &mut res);
        for (i, &v) in res.iter().enumerate() {
            out[base + i * stride] = v;
        }
    }
    Field::from_raw(grid, out)
}

/// Partial derivative along one axis.
pub fn axis_derivative<T: Scalar>(f: &Field<T>, axis: usize, order: DiffOrder) -> Field<T> {
    let inv_h = 1.0 / f.grid().spacing();
    along_axis(f, axis, |line, out| {
        first_derivative_line(line, out, inv_h, order)
    })
}

/// Second partial derivative along one axis.
pub fn axis_second_derivative<T: Scalar>(f: &Field<T>, axis: usize, order: DiffOrder) -> Field<T> {
    let h = f.grid().spacing();
    let inv_h2 = 1.0 / (h * h);
    along_axis(f, axis, |line, out| {
        second_derivative_line(line, out, inv_h2, order)
    })
}

pub fn gradient<T: Scalar>(f: &Field<T>) -> VectorField<T> {
    gradient_with(f, DiffOrder::Second)
}

pub fn gradient_with<T: Scalar>(f: &Field<T>, order: DiffOrder) -> VectorField<T> {
    VectorField::from_raw(
        (0..f.grid().dim())
            .map(|axis| axis_derivative(f, axis, order))
            .collect(),
    )
}

pub fn divergence<T: Scalar>(v: &VectorField<T>) -> Field<T> {
    divergence_with(v, DiffOrder::Second)
}

pub fn divergence_with<T: Scalar>(v: &VectorField<T>, order: DiffOrder) -> Field<T> {
    let mut out = Field::zeros(*v.grid());
    for (axis, c) in v.components().iter().enumerate() {
        let d = axis_derivative(c, axis, order);
        for (o, &x) in out.values_mut().iter_mut().zip(d.values()) {
            *o += x;
        }
    }
    out
}

pub fn laplacian<T: Scalar>(f: &Field<T>) -> Field<T> {
    laplacian_with(f, DiffOrder::Second)
}

pub fn laplacian_with<T: Scalar>(f: &Field<T>, order: DiffOrder) -> Field<T> {
    let mut out = Field::zeros(*f.grid());
    for axis in 0..f.grid().dim() {
        let d = axis_second_derivative(f, axis, order);
        for (o, &x) in out.values_mut().iter_mut().zip(d.values()) {
            *o += x;
        }
    }
    out
}
