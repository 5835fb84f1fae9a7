use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{ξ·x}` with a null `ξ` solves `Δu = 0`; build the matching `f` and `g`.
fn manufactured(n: usize, k: f64, q0: f64, xi: [C64; 2]) -> (HelmholtzProblem, ComplexField) {
    let grid = Grid::square(n, 0.5).unwrap();
    let exact = |x: &Point| (xi[0] * x[0] + xi[1] * x[1]).exp();
    let u_ex = ComplexField::from_fn(grid, exact);
    let q = RealField::constant(grid, q0);
    let f = u_ex.map(|u| u * c(k * k, k * q0));
    let g = BoundaryTrace::from_fn(grid, |x, nu| {
        (xi[0] * nu[0] + xi[1] * nu[1] - c(0.0, k)) * exact(x)
    });
    (HelmholtzProblem::with_source(k, q, g, f).unwrap(), u_ex)
}

fn relative_error(n: usize, xi: [C64; 2]) -> f64 {
    let (problem, u_ex) = manufactured(n, 6.0, 0.05, xi);
    let (u, report) = solve(&problem).unwrap();
    assert!(report.residual_norm <= 1e-10);
    (&u - &u_ex).norm_l2() / u_ex.norm_l2()
}

#[test]
fn three_by_three_center_stencil() {
    let grid = Grid::square(3, 1.0).unwrap();
    let h = grid.spacing();
    let a = assemble_matrix(&grid, 1.0, &RealField::constant(grid, 1.0)).unwrap();
    let center = 4;
    assert_eq!(a.get(center, center), c(-4.0 / (h * h) + 1.0, 1.0));
    for nb in [1, 3, 5, 7] {
        assert_eq!(a.get(center, nb), c(1.0 / (h * h), 0.0));
    }
    assert_eq!(a.row_nnz(center), 5);
    assert!((0..9).all(|i| a.row_nnz(i) <= 5));
}

#[test]
fn zero_data_gives_zero_solution() {
    let grid = Grid::square(16, 0.5).unwrap();
    let q = RealField::constant(grid, 0.05);
    let problem = HelmholtzProblem::new(6.0, q, BoundaryTrace::zeros(grid)).unwrap();
    let (u, report) = solve(&problem).unwrap();
    assert_eq!(u.max_abs(), 0.0);
    assert_eq!(report.residual_norm, 0.0);
    assert_eq!(report.iterations, 0);
}

#[test]
fn rejects_nonpositive_wavenumber() {
    let grid = Grid::square(8, 0.5).unwrap();
    let q = RealField::constant(grid, 0.05);
    assert!(matches!(
        HelmholtzProblem::new(0.0, q.clone(), BoundaryTrace::zeros(grid)),
        Err(Error::Parameter(_))
    ));
    assert!(assemble_matrix(&grid, -1.0, &q).is_err());
}

#[test]
fn manufactured_solution_converges_quadratically() {
    let xi = [c(3.0, 0.0), c(0.0, 3.0)];
    let e64 = relative_error(64, xi);
    let e128 = relative_error(128, xi);
    let order = (e64 / e128).log2();
    assert!(order >= 1.7, "order {order} ({e64:.3e} -> {e128:.3e})");
    // frozen regression: C = e / h^2 measured 0.817 at 64^2
    let h = 1.0 / 63.0;
    assert!(e64 / (h * h) < 0.85, "C = {}", e64 / (h * h));
}

#[test]
fn weighted_matrix_is_complex_symmetric() {
    let grid = Grid::square(7, 0.5).unwrap();
    let q = RealField::from_fn(grid, |x| 0.05 + 0.01 * x[0]);
    let a = assemble_matrix(&grid, 6.0, &q).unwrap();
    let w = grid.weights();
    for i in 0..grid.len() {
        for (j, v) in a.row(i) {
            let lhs = v * w[i];
            let rhs = a.get(j, i) * w[j];
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0), "({i},{j})");
        }
    }
    let grid = Grid::new(3, 5, 0.5).unwrap();
    let a = assemble_matrix(&grid, 3.0, &RealField::constant(grid, 0.1)).unwrap();
    let w = grid.weights();
    for i in 0..grid.len() {
        for (j, v) in a.row(i) {
            assert!((v * w[i] - a.get(j, i) * w[j]).norm() < 1e-9 * v.norm().max(1.0));
        }
    }
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ComplexField {
    ComplexField::from_fn(grid, |_| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

#[test]
fn source_problem_satisfies_stability_bounds() {
    let grid = Grid::square(48, 0.5).unwrap();
    let q = RealField::from_fn(grid, |x| {
        0.05 + 0.03 * (-(x[0] * x[0] + x[1] * x[1]) * 20.0).exp()
    });
    let op = HelmholtzOperator::new(6.0, &q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let f = random_field(grid, &mut rng);
        let (u, report) = op.solve(&f, &BoundaryTrace::zeros(grid)).unwrap();
        assert_eq!(report.l2_bound_ok, Some(true));
        assert_eq!(report.h1_bound_ok, Some(true));
        let b = check_stability_bounds(&u, &f, 6.0, &q).unwrap();
        assert!(b.l2_ratio <= 1.0 && b.h1_ratio <= 1.0, "{b:?}");
    }
}

#[test]
fn bounds_guard_trivial_and_invalid_cases() {
    let grid = Grid::square(8, 0.5).unwrap();
    let q = RealField::constant(grid, 0.05);
    let zero = ComplexField::zeros(grid);
    let b = check_stability_bounds(&zero, &zero, 6.0, &q).unwrap();
    assert!(b.l2_bound_ok && b.h1_bound_ok);
    assert_eq!(b.l2_ratio, 0.0);
    let bad_q = RealField::constant(grid, 0.0);
    assert!(matches!(
        check_stability_bounds(&zero, &zero, 6.0, &bad_q),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn solution_is_linear_in_data() {
    let grid = Grid::square(24, 0.5).unwrap();
    let q = RealField::constant(grid, 0.04);
    let op = HelmholtzOperator::new(6.0, &q).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (f1, f2) = (random_field(grid, &mut rng), random_field(grid, &mut rng));
    let g1 = BoundaryTrace::from_fn(grid, |x, _| c(x[0], x[1]));
    let g2 = BoundaryTrace::from_fn(grid, |x, _| c(1.0, x[0] * x[1]));
    let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
    let (u1, _) = op.solve(&f1, &g1).unwrap();
    let (u2, _) = op.solve(&f2, &g2).unwrap();
    let f = f1.zip_map(&f2, |x, y| a * x + b * y);
    let g = g1.combine(a, &g2, b).unwrap();
    let (u, _) = op.solve(&f, &g).unwrap();
    let combo = u1.zip_map(&u2, |x, y| a * x + b * y);
    assert!((&u - &combo).norm_l2() <= 1e-9 * u.norm_l2());
}

#[test]
fn discrete_energy_identity_balances() {
    // Im <A u, u>_w = k sum w q |u|^2 + k sum_boundary w (2 sqrt(m)/h) |u|^2 = Im <f, u>_w
    let grid = Grid::square(40, 0.5).unwrap();
    let q = RealField::from_fn(grid, |x| 0.03 + 0.02 * x[0] * x[0]);
    let k = 6.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let f = random_field(grid, &mut rng);
    let (u, _) = solve(
        &HelmholtzProblem::with_source(k, q.clone(), BoundaryTrace::zeros(grid), f.clone())
            .unwrap(),
    )
    .unwrap();
    let mut absorbed = 0.0;
    let mut source = 0.0;
    for i in 0..grid.len() {
        let w = grid.weight(i);
        let mut coeff = q.values()[i];
        if grid.is_boundary(i) {
            coeff += robin_coefficient(&grid, i);
        }
        absorbed += w * k * coeff * u.values()[i].norm_sqr();
        source += w * (u.values()[i].conj() * f.values()[i]).im;
    }
    assert!(
        (absorbed - source).abs() <= 1e-9 * source.abs(),
        "{absorbed} vs {source}"
    );
}

#[test]
fn iterative_solver_matches_direct() {
    let (problem, _) = manufactured(40, 6.0, 0.05, [c(2.0, 0.0), c(0.0, 2.0)]);
    let (ud, _) = solve(&problem).unwrap();
    let config = SolverConfig {
        kind: SolverKind::Iterative,
        ..Default::default()
    };
    let (ui, report) = solve_with(&problem, config).unwrap();
    assert!(report.iterations > 0);
    assert!(report.residual_norm <= 1e-8);
    assert!((&ud - &ui).norm_l2() <= 1e-6 * ud.norm_l2());
}

#[test]
fn three_dimensional_manufactured_solution() {
    let xi = [c(2.0, 0.0), c(0.0, 2.0), c(0.0, 0.0)];
    let err = |n: usize| {
        let grid = Grid::new(3, n, 0.5).unwrap();
        let exact = |x: &Point| (xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2]).exp();
        let u_ex = ComplexField::from_fn(grid, exact);
        let k = 4.0;
        let q = RealField::constant(grid, 0.05);
        let f = u_ex.map(|u| u * c(k * k, k * 0.05));
        let g = BoundaryTrace::from_fn(grid, |x, nu| {
            (xi[0] * nu[0] + xi[1] * nu[1] + xi[2] * nu[2] - c(0.0, k)) * exact(x)
        });
        let (u, _) = solve(&HelmholtzProblem::with_source(k, q, g, f).unwrap()).unwrap();
        (&u - &u_ex).norm_l2() / u_ex.norm_l2()
    };
    let (e1, e2) = (err(12), err(23));
    assert!((e1 / e2).log2() > 1.6, "{e1} {e2}");
}
