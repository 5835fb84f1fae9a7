//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! binary fails if any check fails.

use std::time::Instant;

use qtat::acquisition::realization_rng;
use qtat::acquisition::{polarize, verify_noise_variance, NoiseSpec, VarianceCheckConfig};
use qtat::cli::{execute, run_pipeline, sweep_rows, ExperimentManifest, GridSpec, SweepSpec};
use qtat::grid::{ComplexField, Grid, Point, RealField, C64};
use qtat::helmholtz::{solve, BoundaryTrace, HelmholtzProblem};
use qtat::inversion::{
    check_divergence_identity, check_divergence_identity_on, inset_mask, invert, relative_error,
};
use qtat::refine::{eta, eta_and_condition, forward_energy, DerivativeOperator, RefineConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fixed(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn manifest(n: usize) -> ExperimentManifest {
    ExperimentManifest {
        grid: GridSpec {
            n,
            ..GridSpec::default()
        },
        ..ExperimentManifest::default()
    }
}

fn forward_convergence() -> Outcome {
    let k = 6.0;
    let q0 = 0.05;
    let xi = [C64::new(3.0, 0.0), C64::new(0.0, 3.0)];
    let err = |n: usize| {
        let grid = Grid::square(n + 1, 0.5).unwrap();
        let exact = |x: &Point| (xi[0] * x[0] + xi[1] * x[1]).exp();
        let u_ex = ComplexField::from_fn(grid, exact);
        let f = u_ex.map(|u| u * C64::new(k * k, k * q0));
        let g = BoundaryTrace::from_fn(grid, |x, nu| {
            (xi[0] * nu[0] + xi[1] * nu[1] - C64::new(0.0, k)) * exact(x)
        });
        let problem =
            HelmholtzProblem::with_source(k, RealField::constant(grid, q0), g, f).unwrap();
        let (u, _) = solve(&problem).unwrap();
        (&u - &u_ex).norm_l2() / u_ex.norm_l2()
    };
    let (e64, e128) = (err(64), err(128));
    let order = (e64 / e128).log2();
    outcome(
        order >= 1.7,
        format!("L2 order {order:.3} ({e64:.3e} -> {e128:.3e})"),
    )
}

fn divergence_identity() -> Outcome {
    let mut inset = Vec::new();
    let mut depth2 = 0.0;
    for n in [129, 257, 513] {
        let m = manifest(n);
        let (q, ms) = qtat::cli::forward_stage(&m).unwrap();
        let mask = inset_mask(q.grid(), 0.125);
        inset.push(check_divergence_identity_on(&ms.u_list[0], &q, m.k, &mask));
        if n == 257 {
            depth2 = check_divergence_identity(&ms.u_list[0], &q, m.k);
        }
    }
    let orders: Vec<f64> = inset.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = orders.iter().all(|&o| o >= 1.5) && depth2 <= 1e-2;
    outcome(pass, format!("interior residuals [{}], orders [{}]; residual two nodes from the boundary at 256^2 {depth2:.3e}", sci(&inset), fixed(&orders)))
}

fn polarization() -> Outcome {
    let grid = Grid::square(17, 0.5).unwrap();
    let mut rng = realization_rng(11, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = RealField::from_fn(grid, |_| rng.random_range(0.02..0.08));
        let mut z = || {
            ComplexField::from_fn(grid, |_| {
                C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
            })
        };
        let (u1, uj) = (z(), z());
        let direct = uj
            .zip_map(&u1, |b, a| b * a.conj())
            .zip_map(&q, |v, qv| v * qv);
        let got = polarize(&q, &u1, &uj);
        worst = worst.max((&got - &direct).max_abs() / direct.max_abs());
    }
    outcome(
        worst <= 1e-13,
        format!("max relative deviation {worst:.3e} over 100 trials"),
    )
}

fn exact_formula() -> Outcome {
    let mut errs = Vec::new();
    for n in [257, 513] {
        let m = manifest(n);
        let (q, ms) = qtat::cli::forward_stage(&m).unwrap();
        let q_hat = invert(&ms.e_list, m.k, &m.inversion).unwrap().1.q_hat;
        errs.push(relative_error(&q_hat, &q, &vec![true; q.len()]));
    }
    let pass = errs[0] <= 0.05 && errs[1] < errs[0];
    outcome(
        pass,
        format!(
            "relative L2 error {:.3e} at 256^2, {:.3e} at 512^2",
            errs[0], errs[1]
        ),
    )
}

fn derivative_check() -> Outcome {
    let m = manifest(65);
    let (q, ms) = qtat::cli::forward_stage(&m).unwrap();
    let grid = *q.grid();
    let g = &ms.g_list[0];
    let op = DerivativeOperator::new(m.k, &q, g).unwrap();
    let mut rng = realization_rng(5, 0);
    let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let rho = RealField::from_fn(grid, |x| {
        0.02 * (c[0] + c[1] * x[0] + c[2] * (3.0 * x[1]).sin() + c[3] * x[0] * x[1])
    });
    let df = op.apply(&rho).unwrap();
    let f0 = op.energy();
    let fd_err = |eps: f64| {
        let (f1, _) = forward_energy(m.k, &(&q + &rho.scale(eps)), g).unwrap();
        (&(&f1 - &f0).scale(1.0 / eps) - &df).norm_l2() / df.norm_l2()
    };
    let eps = [1e-2, 1e-3, 1e-4, 1e-5];
    let errs: Vec<f64> = eps.iter().map(|&e| fd_err(e)).collect();
    let slope = (errs[0] / errs[3]).log10() / 3.0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = RealField::from_fn(grid, |_| rng.random_range(-1.0..1.0));
        let b = RealField::from_fn(grid, |_| rng.random_range(-1.0..1.0));
        let lhs = op.apply(&a).unwrap().inner(&b);
        let rhs = a.inner(&op.apply_adjoint(&b).unwrap());
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    let pass = errs[3] <= 1e-3 && (slope - 1.0).abs() <= 0.2 && worst <= 1e-10;
    outcome(
        pass,
        format!(
            "FD errors [{}], slope {slope:.3}; adjoint asymmetry {worst:.3e}",
            sci(&errs)
        ),
    )
}

fn coercivity() -> Outcome {
    let m = manifest(65);
    let (q, ms) = qtat::cli::forward_stage(&m).unwrap();
    let grid = *q.grid();
    let cfg = RefineConfig::default();
    let e_sq = eta(2, grid.star_shape_constant(), grid.radius());
    let defaults_ok = e_sq * cfg.q_max < 0.25;
    let report = eta_and_condition(&q, grid.star_shape_constant(), None).unwrap();
    let op = DerivativeOperator::new(m.k, &q, &ms.g_list[0]).unwrap();
    let inf_u = op.u_ref().min_abs();
    let bound = 1.0 - 4.0 * report.eta * q.max_abs();
    let mut rng = realization_rng(6, 0);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let rho = RealField::from_fn(grid, |_| rng.random_range(-1.0..1.0));
        let ratio =
            op.apply(&rho).unwrap().norm_l2().powi(2) / (inf_u.powi(4) * rho.norm_l2().powi(2));
        worst = worst.min(ratio);
    }
    let (e2, e3) = (eta(2, 1.0, 1.0), eta(3, 1.0, 1.0));
    let pass = defaults_ok
        && report.invertibility_ok
        && worst >= bound
        && (e2 - 3.05).abs() < 0.01
        && (e3 - 3.66).abs() < 0.01;
    outcome(
        pass,
        format!(
            "eta*q_max = {:.4} on the square; min ratio {worst:.3} >= {bound:.3}; eta = {e2:.4} (d=2), {e3:.4} (d=3)",
            e_sq * cfg.q_max
        ),
    )
}

fn noise_variance() -> Outcome {
    // The literal window δ^p: the law needs s ≫ δ over the whole δ range.
    let spec = NoiseSpec {
        sigma: 1.0,
        sigma_relative: false,
        length_scale: 1.0,
        ..NoiseSpec::default()
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for order in [0, 3] {
        let cfg = VarianceCheckConfig {
            order,
            realizations: 200,
            ..VarianceCheckConfig::default()
        };
        let r = verify_noise_variance(&spec, &cfg).unwrap();
        pass &= r.slope_error() <= 0.3 && r.deltas.len() == 3;
        parts.push(format!(
            "|gamma|={order}: slope {:.3} vs {:.3}",
            r.measured_slope, r.predicted_slope
        ));
    }
    outcome(pass, parts.join("; "))
}

fn initial_guess_scaling() -> Outcome {
    let mut m = manifest(257);
    m.refine.enabled = false;
    m.sweep = Some(SweepSpec {
        sigmas: vec![1e-5, 4e-5],
        deltas: vec![2.0 / 256.0, 4.0 / 256.0],
        realizations: 50,
    });
    let (_, summary) = sweep_rows(&m).unwrap();
    let d_ok = summary.delta_slopes.len() == 2
        && summary
            .delta_slopes
            .iter()
            .all(|s| (s.slope - s.predicted).abs() <= 0.3);
    let s_ok = summary.sigma_slopes.len() == 2
        && summary
            .sigma_slopes
            .iter()
            .all(|s| (s.slope - 2.0).abs() <= 0.3);
    let ds: Vec<f64> = summary.delta_slopes.iter().map(|s| s.slope).collect();
    let ss: Vec<f64> = summary.sigma_slopes.iter().map(|s| s.slope).collect();
    let pred = summary
        .delta_slopes
        .first()
        .map_or(f64::NAN, |s| s.predicted);
    outcome(
        d_ok && s_ok,
        format!(
            "MSE-vs-delta slopes [{}] (predicted {pred:.3}), MSE-vs-sigma slopes [{}]",
            fixed(&ds),
            fixed(&ss)
        ),
    )
}

fn refinement_improvement() -> Outcome {
    let mut m = manifest(257);
    m.sweep = Some(SweepSpec {
        sigmas: vec![m.noise.sigma],
        deltas: vec![m.noise.delta],
        realizations: 50,
    });
    let (rows, summary) = sweep_rows(&m).unwrap();
    let cell = &summary.cells[0];
    let improved = cell.improvement_fraction.unwrap_or(0.0);
    let clipped = cell.clipping_fraction.unwrap_or(0.0);
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let pass = failed == 0 && improved >= 0.9 && clipped == 1.0;
    outcome(
        pass,
        format!(
            "improved on {:.0}% of 50 realizations, clipping inequality on {:.0}%; mean MSE q^s {:.3e}, q_hat_* {:.3e}",
            100.0 * improved,
            100.0 * clipped,
            cell.mean_mse_qs.unwrap_or(f64::NAN),
            cell.mean_mse_qhat.unwrap_or(f64::NAN)
        ),
    )
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let reports: Vec<_> = dirs
        .iter()
        .map(|d| {
            let m = ExperimentManifest {
                output_dir: d.path().to_path_buf(),
                seed: 7,
                ..manifest(129)
            };
            run_pipeline(&m).unwrap()
        })
        .collect();
    let same = reports[0] == reports[1] && !reports[0].files.is_empty();
    let again = execute(&ExperimentManifest {
        seed: 7,
        ..manifest(129)
    })
    .unwrap()
    .report;
    let pass = same
        && again.manifest_hash == reports[0].manifest_hash
        && again.initial_guess == reports[0].initial_guess;
    outcome(
        pass,
        format!(
            "{} output hashes identical across two runs",
            reports[0].files.len()
        ),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("forward solver convergence", forward_convergence),
        ("divergence identity", divergence_identity),
        ("polarization identity", polarization),
        ("noiseless exact formula", exact_formula),
        ("derivative and adjoint", derivative_check),
        ("coercivity and eta", coercivity),
        ("noise variance scaling", noise_variance),
        ("initial-guess MSE scaling", initial_guess_scaling),
        ("refinement improvement", refinement_improvement),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{:>2}/10] {status} {name} ({:.1} s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
