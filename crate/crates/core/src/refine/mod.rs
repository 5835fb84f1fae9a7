//! Linearized least-squares correction of an initial guess.
//!
//! `F[q] = q|u[q]|²` is differentiated through the discrete forward model:
//! `DF[q]ρ = ρ|u|² + 2q Re(u v̄)` with `A(q) v = −ikρu`. Because `W·A` is
//! complex-symmetric for the trapezoid weights `W`, the adjoint in the
//! weighted inner product reuses the same factorization:
//! `DF*r = r|u|² + Re(−ik u · A⁻¹(2qrū))`.

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::grid::{ComplexField, Grid, RealField, C64};
use crate::helmholtz::{BoundaryTrace, HelmholtzOperator};

/// Projection bounds and solver controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Tikhonov weight relative to `(‖DF*b‖/‖b‖)²`.
    pub lambda_rel: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub max_iters: usize,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    /// Star-shape constant; `None` takes the grid's own.
    pub gamma: Option<f64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            lambda_rel: 1e-6,
            q_min: 0.01,
            q_max: 0.07,
            max_iters: 1,
            cg_tolerance: 1e-6,
            cg_max_iterations: 200,
            gamma: None,
        }
    }
}

/// The linearization of `F` at `q_ref` for boundary datum `g`.
pub struct DerivativeOperator {
    operator: HelmholtzOperator,
    u_ref: ComplexField,
    include_sensitivity: bool,
}

impl DerivativeOperator {
    /// Factorizes `A(q_ref)` and solves for `u_ref`; the forward residual is checked by the solver.
    pub fn new(k: f64, q_ref: &RealField, g: &BoundaryTrace) -> Result<Self> {
        let operator = HelmholtzOperator::new(k, q_ref)?;
        let rhs = crate::helmholtz::assemble_rhs(&ComplexField::zeros(*q_ref.grid()), g);
        let (u, _, _) = operator.solve_raw(&rhs)?;
        let u_ref = ComplexField::new(*q_ref.grid(), u)?;
        Ok(Self {
            operator,
            u_ref,
            include_sensitivity: true,
        })
    }

    /// Drops the `2q Re(u v̄)` term, leaving multiplication by `|u_ref|²`.
    pub fn without_sensitivity(mut self) -> Self {
        self.include_sensitivity = false;
        self
    }

    pub fn grid(&self) -> &Grid {
        self.operator.grid()
    }

    pub fn k(&self) -> f64 {
        self.operator.k()
    }

    pub fn q_ref(&self) -> &RealField {
        self.operator.q()
    }

    pub fn u_ref(&self) -> &ComplexField {
        &self.u_ref
    }

    /// `F[q_ref] = q_ref |u_ref|²`.
    pub fn energy(&self) -> RealField {
        crate::acquisition::energy(self.q_ref(), &self.u_ref)
    }

    fn solve(&self, rhs: Vec<C64>) -> Result<Vec<C64>> {
        Ok(self.operator.solve_raw(&rhs)?.0)
    }

    /// `ρ|u|² + 2q Re(u v̄)` with `v` the sensitivity solution.
    pub fn apply(&self, rho: &RealField) -> Result<RealField> {
        let u = self.u_ref.values();
        let mut out: Vec<f64> = rho
            .values()
            .iter()
            .zip(u)
            .map(|(r, u)| r * u.norm_sqr())
            .collect();
        if self.include_sensitivity {
            let ik = C64::new(0.0, self.k());
            let v = self.solve(
                rho.values()
                    .iter()
                    .zip(u)
                    .map(|(r, u)| -ik * *r * u)
                    .collect(),
            )?;
            for (((o, q), u), v) in out.iter_mut().zip(self.q_ref().values()).zip(u).zip(v) {
                *o += 2.0 * q * (u * v.conj()).re;
            }
        }
        Ok(RealField::from_raw(*self.grid(), out))
    }

    /// Adjoint of [`apply`](Self::apply) in the trapezoid-weighted inner product.
    pub fn apply_adjoint(&self, r: &RealField) -> Result<RealField> {
        let u = self.u_ref.values();
        let mut out: Vec<f64> = r
            .values()
            .iter()
            .zip(u)
            .map(|(r, u)| r * u.norm_sqr())
            .collect();
        if self.include_sensitivity {
            let rhs = r
                .values()
                .iter()
                .zip(self.q_ref().values())
                .zip(u)
                .map(|((r, q), u)| 2.0 * q * r * u.conj())
                .collect();
            let z = self.solve(rhs)?;
            let mik = C64::new(0.0, -self.k());
            for ((o, u), z) in out.iter_mut().zip(u).zip(z) {
                *o += (mik * u * z).re;
            }
        }
        Ok(RealField::from_raw(*self.grid(), out))
    }
}

/// `F[q]` for one boundary datum, with its solution.
pub fn forward_energy(
    k: f64,
    q: &RealField,
    g: &BoundaryTrace,
) -> Result<(RealField, ComplexField)> {
    let op = DerivativeOperator::new(k, q, g)?;
    let e = op.energy();
    Ok((e, op.u_ref))
}

pub fn apply_df(op: &DerivativeOperator, rho: &RealField) -> Result<RealField> {
    op.apply(rho)
}

pub fn apply_df_adjoint(op: &DerivativeOperator, r: &RealField) -> Result<RealField> {
    op.apply_adjoint(r)
}

/// Pointwise projection onto `[q_min, q_max]`.
pub fn clip(q: &RealField, q_min: f64, q_max: f64) -> Result<RealField> {
    if !(q_min < q_max) {
        return parameter(format!("clip bounds [{q_min}, {q_max}] are empty"));
    }
    Ok(q.map(|v| v.clamp(q_min, q_max)))
}

/// `η = sqrt((8(1+1/γ)² + 2d + 29)/(11 − 2d)) · max{rad, 1}`.
pub fn eta(dim: usize, gamma: f64, radius: f64) -> f64 {
    let d = dim as f64;
    let g = 1.0 + 1.0 / gamma;
    ((8.0 * g * g + 2.0 * d + 29.0) / (11.0 - 2.0 * d)).sqrt() * radius.max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: f64,
    /// `η ‖q‖_∞ < 1/4`.
    pub invertibility_ok: bool,
    /// `1/(inf|u|² sqrt(1 − 4η‖q‖_∞))` when the condition holds.
    pub inv_bound: Option<f64>,
}

pub fn eta_and_condition(
    q: &RealField,
    gamma: f64,
    u_ref: Option<&ComplexField>,
) -> Result<EtaReport> {
    let grid = q.grid();
    if !(gamma > 0.0 && gamma <= 1.0) {
        return parameter(format!("star-shape constant {gamma} outside (0, 1]"));
    }
    let e = eta(grid.dim(), gamma, grid.radius());
    let margin = 1.0 - 4.0 * e * q.max_abs();
    let ok = margin > 0.0;
    let inv_bound = match (ok, u_ref) {
        (true, Some(u)) => {
            let m = u.min_abs();
            (m > 0.0).then(|| 1.0 / (m * m * margin.sqrt()))
        }
        _ => None,
    };
    Ok(EtaReport {
        eta: e,
        invertibility_ok: ok,
        inv_bound,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeastSquaresStats {
    pub iterations: usize,
    /// Final `‖DF*(b − DF c) − λc‖ / ‖DF*b‖`.
    pub normal_residual: f64,
    pub lambda: f64,
    pub stagnated: bool,
}

/// CGLS for `min ‖DF c − b‖² + λ‖c‖²` in the weighted inner product.
pub fn solve_least_squares(
    op: &DerivativeOperator,
    b: &RealField,
    cfg: &RefineConfig,
) -> Result<(RealField, LeastSquaresStats)> {
    let grid = *b.grid();
    let b_norm = b.norm_l2();
    let s0 = op.apply_adjoint(b)?;
    let s0_norm = s0.norm_l2();
    if b_norm == 0.0 || s0_norm == 0.0 {
        return Ok((
            RealField::zeros(grid),
            LeastSquaresStats {
                iterations: 0,
                normal_residual: 0.0,
                lambda: 0.0,
                stagnated: false,
            },
        ));
    }
    let lambda = cfg.lambda_rel * (s0_norm / b_norm).powi(2);
    let mut c = RealField::zeros(grid);
    let mut r = b.clone();
    let mut s = s0;
    let mut p = s.clone();
    let mut gamma = s.inner(&s);
    let mut best = (c.clone(), 1.0);
    let mut iterations = 0;
    while iterations < cfg.cg_max_iterations {
        iterations += 1;
        let qv = op.apply(&p)?;
        let delta = qv.inner(&qv) + lambda * p.inner(&p);
        if !(delta > 0.0) {
            break;
        }
        let alpha = gamma / delta;
        c = &c + &p.scale(alpha);
        r = &r - &qv.scale(alpha);
        s = &op.apply_adjoint(&r)? - &c.scale(lambda);
        let gamma_new = s.inner(&s);
        let rel = gamma_new.sqrt() / s0_norm;
        if rel < best.1 {
            best = (c.clone(), rel);
        }
        if rel < cfg.cg_tolerance {
            break;
        }
        p = &s + &p.scale(gamma_new / gamma);
        gamma = gamma_new;
    }
    let stagnated = best.1 >= cfg.cg_tolerance;
    Ok((
        best.0,
        LeastSquaresStats {
            iterations,
            normal_residual: best.1,
            lambda,
            stagnated,
        },
    ))
}

#[derive(Clone, Debug)]
pub struct RefinementResult {
    pub q_star: RealField,
    pub q_star_clipped: RealField,
    /// `J = ‖F[q] − Re E^s_1‖²` at the start and after each accepted iterate.
    pub residual_history: Vec<f64>,
    pub ls_iterations: usize,
    pub eta: f64,
    pub invertibility_ok: bool,
    pub stagnated: bool,
    /// Set when a forward solve failed and the last good iterate was returned.
    pub forward_failure: bool,
}

/// One correction `q_* = q_s + c` with `c` the regularized least-squares solution of
/// `DF[q_s] c ≈ Re E^s_1 − F[q_s]`, followed by projection.
pub fn least_squares_step(
    op: &DerivativeOperator,
    e1_s: &ComplexField,
    cfg: &RefineConfig,
) -> Result<RefinementResult> {
    let target = e1_s.re();
    let f = op.energy();
    let b = &target - &f;
    let (c, stats) = solve_least_squares(op, &b, cfg)?;
    let q_star = op.q_ref() + &c;
    let q_star_clipped = clip(&q_star, cfg.q_min, cfg.q_max)?;
    let gamma = cfg.gamma.unwrap_or_else(|| op.grid().star_shape_constant());
    let eta = eta_and_condition(&q_star_clipped, gamma, None)?;
    let j0 = b.norm_l2().powi(2);
    Ok(RefinementResult {
        q_star,
        q_star_clipped,
        residual_history: vec![j0],
        ls_iterations: stats.iterations,
        eta: eta.eta,
        invertibility_ok: eta.invertibility_ok,
        stagnated: stats.stagnated,
        forward_failure: false,
    })
}

/// Discrepancy `J[q] = ‖F[q] − Re E^s_1‖²`.
pub fn discrepancy(k: f64, q: &RealField, g: &BoundaryTrace, e1_s: &ComplexField) -> Result<f64> {
    let (f, _) = forward_energy(k, q, g)?;
    Ok((&f - &e1_s.re()).norm_l2().powi(2))
}

/// Repeated steps, re-linearized at each clipped iterate. The first step is
/// taken in full. Later steps that raise `J` are halved up to four times and
/// otherwise rejected; iteration stops when `J` falls by less than 1%.
pub fn iterate_refinement(
    k: f64,
    g: &BoundaryTrace,
    q0: &RealField,
    e1_s: &ComplexField,
    cfg: &RefineConfig,
) -> Result<RefinementResult> {
    if cfg.max_iters == 0 {
        return parameter("max_iters must be at least 1");
    }
    let op = DerivativeOperator::new(k, q0, g)?;
    let mut result = least_squares_step(&op, e1_s, cfg)?;
    let mut current = result.q_star_clipped.clone();
    let mut j_prev = match discrepancy(k, &current, g, e1_s) {
        Ok(j) => j,
        Err(_) => {
            result.forward_failure = true;
            return Ok(result);
        }
    };
    result.residual_history.push(j_prev);
    for _ in 1..cfg.max_iters {
        let Ok(op) = DerivativeOperator::new(k, &current, g) else {
            result.forward_failure = true;
            break;
        };
        let step = least_squares_step(&op, e1_s, cfg)?;
        result.ls_iterations += step.ls_iterations;
        result.stagnated |= step.stagnated;
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..5 {
            let trial = &current + &(&step.q_star_clipped - &current).scale(t);
            match discrepancy(k, &trial, g, e1_s) {
                Ok(j) if j <= j_prev => {
                    accepted = Some((trial, j, t));
                    break;
                }
                Ok(_) => t *= 0.5,
                Err(_) => {
                    result.forward_failure = true;
                    break;
                }
            }
        }
        let Some((q_next, j, t)) = accepted else {
            break;
        };
        result.q_star = &current + &(&step.q_star - &current).scale(t);
        result.residual_history.push(j);
        current = q_next;
        let decrease = (j_prev - j) / j_prev.max(f64::MIN_POSITIVE);
        j_prev = j;
        if decrease < 0.01 {
            break;
        }
    }
    let gamma = cfg.gamma.unwrap_or_else(|| q0.grid().star_shape_constant());
    let report = eta_and_condition(&current, gamma, None)?;
    result.eta = report.eta;
    result.invertibility_ok = report.invertibility_ok;
    result.q_star_clipped = current;
    Ok(result)
}
