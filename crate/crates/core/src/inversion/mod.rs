//! Closed-form reconstruction of `q` from the internal data.
//!
//! With `α_j = E_j/E_1` and `A_{jl} = ∂_l α_{j+1}`, the vector `a = A⁻¹ Δα`
//! gives `q = (−Re a·Im a + div Im a) / (2k)`. Third derivatives of the data
//! enter through `div Im a`, which is why noisy data must be mollified first.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::NoisyMeasurementSet;
use crate::error::{config, parameter, Result};
use crate::grid::{
    axis_derivative, divergence, divergence_with, gradient, laplacian_with, ComplexField,
    DiffOrder, Field, Grid, RealField, Scalar, VectorField, C64,
};
use crate::linalg::solve_with_condition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionConfig {
    /// `E_floor = e_floor_rel · max E_1`.
    pub e_floor_rel: f64,
    pub cond_max: f64,
    pub order: DiffOrder,
    /// Nodes closer than this to `∂X` take the nearest interior value of `q`:
    /// there the nested one-sided stencils for third derivatives are unreliable.
    pub boundary_layer: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            e_floor_rel: 1e-8,
            cond_max: 1e8,
            order: DiffOrder::Second,
            boundary_layer: 2,
        }
    }
}

/// `α_{j+1} = E_{j+1}/E_1` for `j = 1..=d`, with nodes where `Re E_1` is below the floor excluded.
#[derive(Clone, Debug)]
pub struct Ratios {
    pub alpha: Vec<ComplexField>,
    /// `true` where the node is usable.
    pub mask: Vec<bool>,
}

pub fn form_ratios(e_list: &[ComplexField], e_floor_rel: f64) -> Result<Ratios> {
    let Some(e1) = e_list.first() else {
        return config("empty data set");
    };
    if e_list.len() != e1.grid().dim() + 1 {
        return config(format!(
            "expected {} energies, got {}",
            e1.grid().dim() + 1,
            e_list.len()
        ));
    }
    let max_e1 = e1
        .values()
        .iter()
        .map(|v| v.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_e1 > 0.0) {
        return parameter("E_1 has no positive value");
    }
    let floor = e_floor_rel * max_e1;
    let mask: Vec<bool> = e1.values().iter().map(|v| v.re >= floor).collect();
    let dropped = mask.iter().filter(|m| !**m).count();
    if dropped > 0 {
        log::warn!("{dropped} nodes with E_1 below the floor {floor:e} excluded");
    }
    let denom = e1.zip_map(&RealField::zeros(*e1.grid()), |v, _| {
        if v.re >= floor {
            v
        } else {
            C64::new(floor, 0.0)
        }
    });
    let alpha = e_list[1..]
        .iter()
        .map(|ej| ej.zip_map(&denom, |a, b| a / b))
        .collect();
    Ok(Ratios { alpha, mask })
}

/// The pointwise systems `A a = Δα`: `a_matrix[j * d + l] = ∂_l α_{j+1}`.
#[derive(Clone, Debug)]
pub struct PointwiseSystem {
    pub a_matrix: Vec<ComplexField>,
    pub rhs: Vec<ComplexField>,
}

impl PointwiseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    fn matrix_at(&self, node: usize) -> Vec<C64> {
        self.a_matrix.iter().map(|f| f.values()[node]).collect()
    }

    fn rhs_at(&self, node: usize) -> Vec<C64> {
        self.rhs.iter().map(|f| f.values()[node]).collect()
    }
}

pub fn assemble_a_and_rhs(alpha: &[ComplexField], order: DiffOrder) -> PointwiseSystem {
    let d = alpha.len();
    let mut a_matrix = Vec::with_capacity(d * d);
    for al in alpha {
        for l in 0..d {
            a_matrix.push(axis_derivative(al, l, order));
        }
    }
    let rhs = alpha.iter().map(|al| laplacian_with(al, order)).collect();
    PointwiseSystem { a_matrix, rhs }
}

#[derive(Clone, Debug)]
pub struct PointwiseSolution {
    pub a: VectorField<C64>,
    pub cond: RealField,
    pub mask: Vec<bool>,
    /// Largest `|A a − rhs| / |rhs|` over unmasked nodes.
    pub max_residual: f64,
}

/// Solves `A a = rhs` node by node. Nodes that are singular or have condition
/// number above `cond_max` are masked and `a` is set to zero there.
pub fn solve_for_a(system: &PointwiseSystem, cond_max: f64) -> PointwiseSolution {
    let d = system.dim();
    let grid = *system.rhs[0].grid();
    let results: Vec<(Vec<C64>, f64, bool, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let m = system.matrix_at(node);
            let b = system.rhs_at(node);
            match solve_with_condition(&m, d, &b) {
                Some((x, cond)) if cond <= cond_max => {
                    let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                    let rn = (0..d)
                        .map(|r| {
                            ((0..d).map(|c| m[r * d + c] * x[c]).sum::<C64>() - b[r]).norm_sqr()
                        })
                        .sum::<f64>()
                        .sqrt();
                    let res = if bn > 0.0 { rn / bn } else { rn };
                    (x, cond, true, res)
                }
                Some((_, cond)) => (vec![C64::new(0.0, 0.0); d], cond, false, 0.0),
                None => (vec![C64::new(0.0, 0.0); d], f64::INFINITY, false, 0.0),
            }
        })
        .collect();
    let mut comps = vec![Vec::with_capacity(grid.len()); d];
    let mut cond = Vec::with_capacity(grid.len());
    let mut mask = Vec::with_capacity(grid.len());
    let mut max_residual: f64 = 0.0;
    for (x, c, ok, res) in results {
        for (comp, v) in comps.iter_mut().zip(x) {
            comp.push(v);
        }
        cond.push(if c.is_finite() { c } else { f64::MAX });
        mask.push(ok);
        max_residual = max_residual.max(res);
    }
    let a = VectorField::from_raw(
        comps
            .into_iter()
            .map(|c| Field::from_raw(grid, c))
            .collect(),
    );
    PointwiseSolution {
        a,
        cond: RealField::from_raw(grid, cond),
        mask,
        max_residual,
    }
}

/// Copies each masked node's value from the nearest unmasked node (graph distance).
pub fn fill_masked<T: Scalar>(f: &Field<T>, mask: &[bool]) -> Field<T> {
    let grid = *f.grid();
    let mut source: Vec<Option<usize>> = mask
        .iter()
        .enumerate()
        .map(|(i, &m)| m.then_some(i))
        .collect();
    if source.iter().all(Option::is_none) {
        return f.clone();
    }
    let mut queue: VecDeque<usize> = (0..grid.len()).filter(|&i| mask[i]).collect();
    while let Some(node) = queue.pop_front() {
        let mi = grid.multi_index(node);
        for axis in 0..grid.dim() {
            for step in [-1i64, 1] {
                let j = mi[axis] as i64 + step;
                if j < 0 || j >= grid.n() as i64 {
                    continue;
                }
                let mut nb = mi;
                nb[axis] = j as usize;
                let nb = grid.linear_index(&nb);
                if source[nb].is_none() {
                    source[nb] = source[node];
                    queue.push_back(nb);
                }
            }
        }
    }
    let values = source.iter().map(|s| f.values()[s.unwrap()]).collect();
    Field::from_raw(grid, values)
}

/// `(−Re a·Im a + div Im a) / (2k)`, with masked values of `a` and of the
/// result replaced by their nearest unmasked neighbours.
pub fn exact_q(a: &VectorField<C64>, k: f64, mask: &[bool], order: DiffOrder) -> RealField {
    let filled = VectorField::from_raw(
        a.components()
            .iter()
            .map(|c| fill_masked(c, mask))
            .collect(),
    );
    let re = filled.re();
    let im = filled.im();
    let div = divergence_with(&im, order);
    let dot = re.dot(&im);
    let q = dot.zip_map(&div, |p, dv| (dv - p) / (2.0 * k));
    fill_masked(&q, mask)
}

/// `β = Im(conj(u_1) ∇u_1)`.
pub fn beta_from_solution(u1: &ComplexField) -> VectorField<f64> {
    let g = gradient(u1);
    VectorField::from_raw(
        g.components()
            .iter()
            .map(|c| u1.zip_map(c, |u, du| (u.conj() * du).im))
            .collect(),
    )
}

/// `β = −E_1 Im(a) / (2q)`; zero where `q` vanishes.
pub fn beta_from_a(a: &VectorField<C64>, e1: &RealField, q: &RealField) -> VectorField<f64> {
    let im = a.im();
    let scale = e1.zip_map(
        q,
        |e, qv| if qv.abs() > 0.0 { -e / (2.0 * qv) } else { 0.0 },
    );
    im.scale_by(&scale)
}

/// Relative L² norm of `div β + k q|u_1|²` over nodes at least two stencils
/// inside the domain, normalized by `‖k q|u_1|²‖`. With `q ≡ 0` the absolute norm is returned.
pub fn check_divergence_identity(u1: &ComplexField, q: &RealField, k: f64) -> f64 {
    check_divergence_identity_on(u1, q, k, &interior_mask(u1.grid(), 2))
}

/// The same residual over an arbitrary node set. Robin data that are not
/// compatible at the corners leave a weak corner singularity, so convergence
/// studies should use a fixed physical inset ([`inset_mask`]).
pub fn check_divergence_identity_on(
    u1: &ComplexField,
    q: &RealField,
    k: f64,
    mask: &[bool],
) -> f64 {
    let div = divergence(&beta_from_solution(u1));
    let ke = q.zip_map(u1, |qv, u| k * qv * u.norm_sqr());
    let resid = (&div + &ke).norm_l2_masked(mask);
    let scale = ke.norm_l2_masked(mask);
    if scale > 0.0 {
        resid / scale
    } else {
        resid
    }
}

#[derive(Clone, Debug)]
pub struct InversionWorkspace {
    pub ratios: Ratios,
    pub system: PointwiseSystem,
    pub solution: PointwiseSolution,
}

#[derive(Clone, Debug)]
pub struct ExactReconstruction {
    pub q_hat: RealField,
    pub beta_from_a: VectorField<f64>,
    pub mask: Vec<bool>,
}

impl ExactReconstruction {
    /// Fraction of nodes at depth ≥ `depth` that were evaluated without infill.
    pub fn interior_coverage(&self, depth: usize) -> f64 {
        let grid = self.q_hat.grid();
        let inner: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.is_inner(i, depth))
            .collect();
        inner.iter().filter(|&&i| self.mask[i]).count() as f64 / inner.len() as f64
    }
}

/// Runs ratios, assembly, pointwise solves and the closed form on one data set.
pub fn invert(
    e_list: &[ComplexField],
    k: f64,
    cfg: &InversionConfig,
) -> Result<(InversionWorkspace, ExactReconstruction)> {
    if !(k > 0.0) {
        return parameter(format!("wavenumber must be positive, got {k}"));
    }
    let ratios = form_ratios(e_list, cfg.e_floor_rel)?;
    let system = assemble_a_and_rhs(&ratios.alpha, cfg.order);
    let mut solution = solve_for_a(&system, cfg.cond_max);
    for (m, r) in solution.mask.iter_mut().zip(&ratios.mask) {
        *m &= *r;
    }
    let grid = *e_list[0].grid();
    let mask: Vec<bool> = solution
        .mask
        .iter()
        .enumerate()
        .map(|(i, &m)| m && grid.is_inner(i, cfg.boundary_layer))
        .collect();
    let q_hat = fill_masked(&exact_q(&solution.a, k, &solution.mask, cfg.order), &mask);
    let e1 = e_list[0].re();
    let beta = beta_from_a(&fill_vector(&solution.a, &solution.mask), &e1, &q_hat);
    Ok((
        InversionWorkspace {
            ratios,
            system,
            solution,
        },
        ExactReconstruction {
            q_hat,
            beta_from_a: beta,
            mask,
        },
    ))
}

fn fill_vector(a: &VectorField<C64>, mask: &[bool]) -> VectorField<C64> {
    VectorField::from_raw(
        a.components()
            .iter()
            .map(|c| fill_masked(c, mask))
            .collect(),
    )
}

/// `q^s`: the closed form applied to smoothed measured data. No positivity is imposed.
pub fn initial_guess(
    noisy: &NoisyMeasurementSet,
    k: f64,
    cfg: &InversionConfig,
) -> Result<ExactReconstruction> {
    Ok(invert(&noisy.es_list, k, cfg)?.1)
}

/// Relative L² distance `‖a − b‖/‖b‖` restricted to `mask`.
pub fn relative_error(a: &RealField, b: &RealField, mask: &[bool]) -> f64 {
    (a - b).norm_l2_masked(mask) / b.norm_l2_masked(mask)
}

/// Nodes at least `depth` from the boundary.
pub fn interior_mask(grid: &Grid, depth: usize) -> Vec<bool> {
    (0..grid.len()).map(|i| grid.is_inner(i, depth)).collect()
}

/// Nodes whose coordinates all lie within `half_width − inset` of the centre.
pub fn inset_mask(grid: &Grid, inset: f64) -> Vec<bool> {
    let bound = grid.half_width() - inset + 1e-12;
    (0..grid.len())
        .map(|i| grid.coord(i)[..grid.dim()].iter().all(|c| c.abs() <= bound))
        .collect()
}

#[cfg(test)]
mod tests;
