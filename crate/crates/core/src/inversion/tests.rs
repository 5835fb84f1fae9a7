use super::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn grid() -> Grid {
    Grid::square(21, 0.5).unwrap()
}

#[test]
fn equal_energies_give_unit_ratios() {
    let g = grid();
    let e = ComplexField::from_fn(g, |x| c(1.0 + x[0] * x[0], 0.0));
    let r = form_ratios(&[e.clone(), e.clone(), e], 1e-8).unwrap();
    for al in &r.alpha {
        assert!(al.values().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
    }
    assert!(r.mask.iter().all(|&m| m));
}

#[test]
fn floored_node_is_masked_alone() {
    let g = grid();
    let mut vals = vec![c(1.0, 0.0); g.len()];
    vals[100] = c(1e-12, 0.0);
    let e1 = ComplexField::new(g, vals).unwrap();
    let e2 = ComplexField::from_fn(g, |x| c(x[0], x[1]));
    let r = form_ratios(&[e1, e2.clone(), e2.clone()], 1e-8).unwrap();
    assert!(!r.mask[100]);
    assert_eq!(r.mask.iter().filter(|m| !**m).count(), 1);
    assert_eq!(r.alpha[0].values()[101], e2.values()[101]);
    assert!(r.alpha[0].is_finite());
}

#[test]
fn linear_ratios_give_constant_matrix_and_zero_rhs() {
    let g = grid();
    let a2 = ComplexField::from_fn(g, |x| c(2.0 * x[0] + 1.0, x[1]));
    let a3 = ComplexField::from_fn(g, |x| c(-x[1], 3.0 * x[0]));
    let sys = assemble_a_and_rhs(&[a2, a3], DiffOrder::Second);
    for r in &sys.rhs {
        assert!(r.max_abs() < 1e-9);
    }
    let expect = [c(2.0, 0.0), c(0.0, 1.0), c(0.0, 3.0), c(-1.0, 0.0)];
    for (f, e) in sys.a_matrix.iter().zip(expect) {
        assert!(f.values().iter().all(|v| (v - e).norm() < 1e-10));
    }
}

#[test]
fn identity_system_returns_rhs() {
    let g = grid();
    let one = ComplexField::constant(g, c(1.0, 0.0));
    let zero = ComplexField::zeros(g);
    let r1 = ComplexField::from_fn(g, |x| c(x[0], 2.0));
    let r2 = ComplexField::from_fn(g, |x| c(-1.0, x[1]));
    let sys = PointwiseSystem {
        a_matrix: vec![one.clone(), zero.clone(), zero, one],
        rhs: vec![r1.clone(), r2.clone()],
    };
    let sol = solve_for_a(&sys, 1e8);
    assert!(sol.mask.iter().all(|&m| m));
    assert_eq!(sol.a.component(0).values(), r1.values());
    assert_eq!(sol.a.component(1).values(), r2.values());
    assert!(sol.max_residual <= 1e-10);
}

#[test]
fn rank_deficient_system_masks_everything() {
    let g = grid();
    let a2 = ComplexField::from_fn(g, |x| c(x[0] * x[0], x[1]));
    let sys = assemble_a_and_rhs(&[a2.clone(), a2], DiffOrder::Second);
    let sol = solve_for_a(&sys, 1e8);
    assert!(sol.mask.iter().all(|&m| !m));
}

#[test]
fn trivial_closed_form_values() {
    let g = grid();
    let mask = vec![true; g.len()];
    let zero = VectorField::<C64>::zeros(g);
    assert_eq!(exact_q(&zero, 6.0, &mask, DiffOrder::Second).max_abs(), 0.0);
    let real = VectorField::from_raw(vec![
        ComplexField::from_fn(g, |x| c(x[0], 0.0)),
        ComplexField::from_fn(g, |x| c(x[1] * x[1], 0.0)),
    ]);
    assert_eq!(exact_q(&real, 6.0, &mask, DiffOrder::Second).max_abs(), 0.0);
}

#[test]
fn infill_uses_nearest_neighbour() {
    let g = Grid::square(5, 1.0).unwrap();
    let f = RealField::from_fn(g, |x| x[0] + 10.0 * x[1]);
    let mut mask = vec![true; g.len()];
    mask[12] = false;
    mask[13] = false;
    let filled = fill_masked(&f, &mask);
    assert!([8, 14, 18]
        .iter()
        .any(|&n| filled.values()[13] == f.values()[n]));
    assert!([7, 11, 17]
        .iter()
        .any(|&n| filled.values()[12] == f.values()[n]));
}

#[test]
fn divergence_identity_with_zero_absorption() {
    let g = grid();
    let u = ComplexField::from_fn(g, |x| c(x[0].cos(), 0.0));
    assert_eq!(
        check_divergence_identity(&u, &RealField::zeros(g), 6.0),
        0.0
    );
}
