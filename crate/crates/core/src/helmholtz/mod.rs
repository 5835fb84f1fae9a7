//! Forward model: `(Δ + k² + ikq) u = f` in the cube with the Robin condition
//! `ν·∇u − iku = g` on its boundary.
//!
//! Boundary rows eliminate one ghost node per boundary axis with a centred
//! difference across the boundary node. At edges and corners the normal is the
//! normalized average of the face normals, and only the sum of the outward
//! axis derivatives enters the stencil, which equals `sqrt(m) ν·∇u` exactly.
//! Scaling row `i` by the trapezoidal weight `w_i` makes the matrix complex
//! symmetric, which the adjoint computations in `refine` rely on.

mod krylov;
mod sparse;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use serde::{Deserialize, Serialize};

pub use krylov::{bicgstab, Ilu0};
pub use sparse::SparseMatrix;

use crate::error::{config, parameter, Error, Result};
use crate::grid::{gradient, ComplexField, Grid, Point, RealField, C64};

/// Complex data on the boundary nodes of a grid, ordered as `Grid::boundary_nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid,
    nodes: Vec<usize>,
    values: Vec<C64>,
}

impl BoundaryTrace {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        let nodes = grid.boundary_nodes();
        if values.len() != nodes.len() {
            return config(format!(
                "boundary trace has {} values, grid has {} boundary nodes",
                values.len(),
                nodes.len()
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return config("non-finite boundary value");
        }
        Ok(Self {
            grid,
            nodes,
            values,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        let nodes = grid.boundary_nodes();
        let values = vec![C64::new(0.0, 0.0); nodes.len()];
        Self {
            grid,
            nodes,
            values,
        }
    }

    /// Evaluates `g(x, ν)` at every boundary node.
    pub fn from_fn(grid: Grid, g: impl Fn(&Point, &Point) -> C64) -> Self {
        let nodes = grid.boundary_nodes();
        let values = nodes
            .iter()
            .map(|&i| g(&grid.coord(i), &grid.outward_normal(i)))
            .collect();
        Self {
            grid,
            nodes,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm() == 0.0)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &BoundaryTrace, b: C64) -> Result<Self> {
        if self.grid != other.grid {
            return config("boundary traces live on different grids");
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: self.grid,
            nodes: self.nodes.clone(),
            values,
        })
    }

    /// Scatters onto a full-grid field that is zero at interior nodes.
    pub fn to_field(&self) -> ComplexField {
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (&i, &v) in self.nodes.iter().zip(&self.values) {
            out[i] = v;
        }
        ComplexField::from_raw(self.grid, out)
    }
}

/// A Robin–Helmholtz boundary value problem.
#[derive(Clone, Debug)]
pub struct HelmholtzProblem {
    pub grid: Grid,
    pub k: f64,
    pub q: RealField,
    pub g: BoundaryTrace,
    pub f: ComplexField,
}

impl HelmholtzProblem {
    /// Homogeneous equation driven by boundary data only.
    pub fn new(k: f64, q: RealField, g: BoundaryTrace) -> Result<Self> {
        let grid = *q.grid();
        Self::with_source(k, q, g, ComplexField::zeros(grid))
    }

    pub fn with_source(k: f64, q: RealField, g: BoundaryTrace, f: ComplexField) -> Result<Self> {
        let grid = *q.grid();
        if *g.grid() != grid || *f.grid() != grid {
            return config("q, g and f must share one grid");
        }
        validate_wavenumber(k)?;
        Ok(Self { grid, k, q, g, f })
    }
}

fn validate_wavenumber(k: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return parameter(format!("wavenumber must be positive, got {k}"));
    }
    Ok(())
}

/// Assembled linear system `A u = b`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<C64>,
}

/// Coefficient of the Robin term in a boundary row: `2 sqrt(m) / h`.
fn robin_coefficient(grid: &Grid, idx: usize) -> f64 {
    let m = grid.boundary_multiplicity(idx);
    2.0 * (m as f64).sqrt() / grid.spacing()
}

/// Assembles the matrix of `Δ + k² + ikq` with the ghost-node Robin closure.
pub fn assemble_matrix(grid: &Grid, k: f64, q: &RealField) -> Result<SparseMatrix> {
    validate_wavenumber(k)?;
    if q.grid() != grid {
        return config("q is not on the problem grid");
    }
    let n = grid.n();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let ik = C64::new(0.0, k);
    let rows = (0..grid.len())
        .map(|idx| {
            let mi = grid.multi_index(idx);
            let mut row = Vec::with_capacity(2 * grid.dim() + 1);
            let mut diag = C64::new(k * k, 0.0) + ik * q.values()[idx];
            for axis in 0..grid.dim() {
                let s = grid.stride(axis);
                let i = mi[axis];
                diag -= 2.0 * inv_h2;
                if i == 0 {
                    row.push((idx + s, C64::new(2.0 * inv_h2, 0.0)));
                } else if i == n - 1 {
                    row.push((idx - s, C64::new(2.0 * inv_h2, 0.0)));
                } else {
                    row.push((idx - s, C64::new(inv_h2, 0.0)));
                    row.push((idx + s, C64::new(inv_h2, 0.0)));
                }
            }
            if grid.is_boundary(idx) {
                diag += ik * robin_coefficient(grid, idx);
            }
            row.push((idx, diag));
            row
        })
        .collect();
    Ok(SparseMatrix::from_rows(rows))
}

/// Right-hand side `f − (2 sqrt(m)/h) g` (the Robin datum enters boundary rows only).
pub fn assemble_rhs(f: &ComplexField, g: &BoundaryTrace) -> Vec<C64> {
    let grid = f.grid();
    let mut b = f.values().to_vec();
    for (&i, &gv) in g.nodes().iter().zip(g.values()) {
        b[i] -= gv * robin_coefficient(grid, i);
    }
    b
}

pub fn assemble(problem: &HelmholtzProblem) -> Result<LinearSystem> {
    let matrix = assemble_matrix(&problem.grid, problem.k, &problem.q)?;
    let rhs = assemble_rhs(&problem.f, &problem.g);
    Ok(LinearSystem { matrix, rhs })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Sparse LU factorization.
    #[default]
    Direct,
    /// BiCGSTAB preconditioned by ILU(0).
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Relative residual required of the direct solve.
    pub direct_tolerance: f64,
    /// Relative residual required of the Krylov solve.
    pub iterative_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Direct,
            direct_tolerance: 1e-10,
            iterative_tolerance: 1e-8,
            max_iterations: 5000,
        }
    }
}

/// Outcome of one forward solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// `||A u - b|| / ||b||`.
    pub residual_norm: f64,
    /// Krylov iterations, 0 for the direct solve.
    pub iterations: usize,
    /// L2 stability bound check; only evaluated for source problems with `g = 0` and `min q > 0`.
    pub l2_bound_ok: Option<bool>,
    /// H1 stability bound check, same applicability.
    pub h1_bound_ok: Option<bool>,
}

enum Factorization {
    Direct(Lu<usize, C64>),
    Iterative(Ilu0),
}

/// Assembled and factorized operator for fixed `(k, q)`; reusable across right-hand sides.
pub struct HelmholtzOperator {
    grid: Grid,
    k: f64,
    q: RealField,
    matrix: SparseMatrix,
    factorization: Factorization,
    config: SolverConfig,
}

impl HelmholtzOperator {
    pub fn new(k: f64, q: &RealField) -> Result<Self> {
        Self::with_config(k, q, SolverConfig::default())
    }

    /// Factorizes the operator. A failed direct factorization falls back to the Krylov path.
    pub fn with_config(k: f64, q: &RealField, config: SolverConfig) -> Result<Self> {
        let grid = *q.grid();
        let matrix = assemble_matrix(&grid, k, q)?;
        let factorization = match config.kind {
            SolverKind::Direct => match factor_direct(&matrix) {
                Ok(lu) => Factorization::Direct(lu),
                Err(e) => {
                    log::warn!("direct factorization failed ({e}); using ILU(0)-BiCGSTAB");
                    Factorization::Iterative(Ilu0::new(&matrix)?)
                }
            },
            SolverKind::Iterative => Factorization::Iterative(Ilu0::new(&matrix)?),
        };
        Ok(Self {
            grid,
            k,
            q: q.clone(),
            matrix,
            factorization,
            config,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn q(&self) -> &RealField {
        &self.q
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solves `A x = b` for a raw right-hand side, returning `(x, residual, iterations)`.
    pub fn solve_raw(&self, rhs: &[C64]) -> Result<(Vec<C64>, f64, usize)> {
        match &self.factorization {
            Factorization::Direct(lu) => {
                let mut x = faer::Col::<C64>::from_fn(rhs.len(), |i| rhs[i]);
                lu.solve_in_place(x.as_mat_mut());
                let mut x: Vec<C64> = (0..rhs.len()).map(|i| x[i]).collect();
                let mut res = sparse::relative_residual(&self.matrix, &x, rhs);
                if res > self.config.direct_tolerance && res.is_finite() {
                    // one step of iterative refinement
                    let mut ax = vec![C64::new(0.0, 0.0); rhs.len()];
                    self.matrix.matvec(&x, &mut ax);
                    let mut r = faer::Col::<C64>::from_fn(rhs.len(), |i| rhs[i] - ax[i]);
                    lu.solve_in_place(r.as_mat_mut());
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi += r[i];
                    }
                    res = sparse::relative_residual(&self.matrix, &x, rhs);
                }
                if !(res <= self.config.direct_tolerance) {
                    return Err(Error::NotConverged {
                        iterations: 0,
                        residual: res,
                    });
                }
                Ok((x, res, 0))
            }
            Factorization::Iterative(ilu) => bicgstab(
                &self.matrix,
                ilu,
                rhs,
                self.config.iterative_tolerance,
                self.config.max_iterations,
            ),
        }
    }

    /// Solves with volume source `f` and Robin datum `g`.
    pub fn solve(
        &self,
        f: &ComplexField,
        g: &BoundaryTrace,
    ) -> Result<(ComplexField, SolveReport)> {
        if *f.grid() != self.grid || *g.grid() != self.grid {
            return config("source or boundary data not on the operator grid");
        }
        let rhs = assemble_rhs(f, g);
        let (x, residual_norm, iterations) = self.solve_raw(&rhs)?;
        let u = ComplexField::new(self.grid, x)?;
        let mut report = SolveReport {
            residual_norm,
            iterations,
            l2_bound_ok: None,
            h1_bound_ok: None,
        };
        if g.is_zero() && f.max_abs() > 0.0 && self.q.min() > 0.0 {
            let b = check_stability_bounds(&u, f, self.k, &self.q)?;
            report.l2_bound_ok = Some(b.l2_bound_ok);
            report.h1_bound_ok = Some(b.h1_bound_ok);
        }
        Ok((u, report))
    }
}

fn factor_direct(matrix: &SparseMatrix) -> Result<Lu<usize, C64>> {
    let a = matrix.to_faer().map_err(Error::Singular)?;
    a.sp_lu().map_err(|e| Error::Singular(format!("{e:?}")))
}

/// Solves a problem with the default direct solver.
pub fn solve(problem: &HelmholtzProblem) -> Result<(ComplexField, SolveReport)> {
    solve_with(problem, SolverConfig::default())
}

pub fn solve_with(
    problem: &HelmholtzProblem,
    config: SolverConfig,
) -> Result<(ComplexField, SolveReport)> {
    HelmholtzOperator::with_config(problem.k, &problem.q, config)?.solve(&problem.f, &problem.g)
}

/// Relative slack allowed when comparing discrete norms with the continuum bounds.
pub const BOUND_SLACK: f64 = 0.05;

/// Stability bounds of the homogeneous-Robin source problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityBounds {
    pub l2_bound_ok: bool,
    pub h1_bound_ok: bool,
    /// `||u||_L2 / (||f||_L2 / (k inf q))`.
    pub l2_ratio: f64,
    /// `||u||_H1 / (sqrt(k²+1+k inf q) ||f||_L2 / (k inf q))`.
    pub h1_ratio: f64,
}

/// Checks `||u|| <= ||f||/(k inf q)` and
/// `||u||_H1 <= sqrt((k²+1) + k inf q)/(k inf q) ||f||` with 5% slack.
pub fn check_stability_bounds(
    u: &ComplexField,
    f: &ComplexField,
    k: f64,
    q: &RealField,
) -> Result<StabilityBounds> {
    validate_wavenumber(k)?;
    let q_min = q.min();
    if !(q_min > 0.0) {
        return parameter(format!("bounds need min q > 0, got {q_min}"));
    }
    if u.grid() != f.grid() || u.grid() != q.grid() {
        return config("u, f and q must share one grid");
    }
    let f_norm = f.norm_l2();
    if f_norm == 0.0 {
        return Ok(StabilityBounds {
            l2_bound_ok: true,
            h1_bound_ok: true,
            l2_ratio: 0.0,
            h1_ratio: 0.0,
        });
    }
    let kq = k * q_min;
    let u_l2 = u.norm_l2();
    let grad_l2 = gradient(u).norm_l2();
    let h1 = (u_l2 * u_l2 + grad_l2 * grad_l2).sqrt();
    let l2_ratio = u_l2 / (f_norm / kq);
    let h1_ratio = h1 / ((k * k + 1.0 + kq).sqrt() / kq * f_norm);
    Ok(StabilityBounds {
        l2_bound_ok: l2_ratio <= 1.0 + BOUND_SLACK,
        h1_bound_ok: h1_ratio <= 1.0 + BOUND_SLACK,
        l2_ratio,
        h1_ratio,
    })
}

#[cfg(test)]
mod tests;
