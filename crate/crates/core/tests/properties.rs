use num_complex::Complex64 as C64;
use proptest::prelude::*;

use qtat::acquisition::{polarize, Smoother};
use qtat::cli::ExperimentManifest;
use qtat::grid::io::{decode, encode_complex, encode_real};
use qtat::grid::{ComplexField, Grid, RealField};
use qtat::inversion::{inset_mask, relative_error};
use qtat::probes::{make_xi_family, probe_boundary_data};
use qtat::refine::{clip, eta, DerivativeOperator};

const N: usize = 9;

fn grid() -> Grid {
    Grid::square(N, 0.5).unwrap()
}

fn real_values(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, N * N)
}

fn complex_values() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b)),
        N * N,
    )
}

fn real(v: Vec<f64>) -> RealField {
    RealField::new(grid(), v).unwrap()
}

fn complex(v: Vec<C64>) -> ComplexField {
    ComplexField::new(grid(), v).unwrap()
}

proptest! {
    #[test]
    fn polarization_recovers_cross_energy(q in real_values(0.01, 0.1), a in complex_values(), b in complex_values()) {
        let (q, u1, uj) = (real(q), complex(a), complex(b));
        let p = polarize(&q, &u1, &uj);
        for n in 0..q.len() {
            let expect = q.values()[n] * uj.values()[n] * u1.values()[n].conj();
            prop_assert!((p.values()[n] - expect).norm() <= 1e-14 * (1.0 + expect.norm()) * 8.0);
        }
    }

    #[test]
    fn clip_is_a_contraction_onto_the_box(a in real_values(-0.5, 0.5), b in real_values(0.01, 0.07)) {
        let (q, p) = (real(a), real(b));
        let c = clip(&q, 0.01, 0.07).unwrap();
        prop_assert!(c.min() >= 0.01 && c.max() <= 0.07);
        prop_assert_eq!(&clip(&c, 0.01, 0.07).unwrap(), &c);
        let dist = |x: &RealField| x.zip_map(&p, |s, t| s - t).norm_l2();
        prop_assert!(dist(&c) <= dist(&q) + 1e-15);
    }

    #[test]
    fn field_files_round_trip(a in real_values(-1e3, 1e3), b in complex_values(), meta in "[a-z0-9 ]{0,40}") {
        let (f, g) = (real(a), complex(b));
        let (stored, m) = decode(&encode_real(&f, Some(&meta))).unwrap();
        prop_assert_eq!(stored.into_real().unwrap(), f);
        prop_assert_eq!(m.as_deref(), Some(meta.as_str()));
        let (stored, m) = decode(&encode_complex(&g, None)).unwrap();
        prop_assert_eq!(stored.into_complex().unwrap(), g);
        prop_assert!(m.is_none());
    }

    #[test]
    fn manifest_round_trip_and_hash(seed in any::<u64>(), k in 0.5..20.0f64, dir in "[a-z]{1,8}") {
        let mut m = ExperimentManifest { seed, k, ..ExperimentManifest::default() };
        let back = ExperimentManifest::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.hash(), m.hash());
        let h = m.hash();
        m.output_dir = dir.into();
        prop_assert_eq!(m.hash(), h.clone());
        m.seed = seed.wrapping_add(1);
        prop_assert_ne!(m.hash(), h);
    }

    #[test]
    fn smoothing_is_linear_and_keeps_constants(a in real_values(-1.0, 1.0), b in real_values(-1.0, 1.0), s in -3.0..3.0f64, c in -5.0..5.0f64) {
        let sm = Smoother::with_width(0.3, &grid()).unwrap();
        let (f, g) = (real(a), real(b));
        let combo = f.zip_map(&g, |x, y| x + s * y);
        let lhs = sm.smooth_real(&combo);
        let rhs = sm.smooth_real(&f).zip_map(&sm.smooth_real(&g), |x, y| x + s * y);
        prop_assert!(relative_error(&lhs, &rhs, &vec![true; lhs.len()]) < 1e-12 || rhs.norm_l2() < 1e-12);
        let flat = sm.smooth_real(&RealField::constant(grid(), c));
        prop_assert!(flat.values().iter().all(|v| (v - c).abs() <= 1e-12 * (1.0 + c.abs())));
    }

    #[test]
    fn smoothing_does_not_increase_the_maximum(a in real_values(-1.0, 1.0), w in 0.25..0.6f64) {
        let sm = Smoother::with_width(w, &grid()).unwrap();
        let f = real(a);
        let s = sm.smooth_real(&f);
        prop_assert!(s.max() <= f.max() + 1e-12 && s.min() >= f.min() - 1e-12);
    }

    #[test]
    fn inset_masks_are_nested(a in 0.0..0.4f64, b in 0.0..0.4f64) {
        let g = Grid::square(33, 0.5).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let outer = inset_mask(&g, lo);
        let inner = inset_mask(&g, hi);
        prop_assert!(outer.iter().zip(&inner).all(|(o, i)| *o || !*i));
    }

    #[test]
    fn eta_decreases_with_gamma(g1 in 0.05..5.0f64, g2 in 0.05..5.0f64, r in 0.0..3.0f64) {
        let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(eta(2, hi, r) <= eta(2, lo, r));
        prop_assert!(eta(2, lo, r) >= eta(2, lo, 0.5));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linearized_map_and_adjoint_agree(rho in real_values(-0.01, 0.01), r in real_values(-1.0, 1.0), q in real_values(0.02, 0.06)) {
        let g = grid();
        let probe = &make_xi_family(1.0, 2).unwrap()[0];
        let trace = probe_boundary_data(probe, 6.0, &g).unwrap();
        let op = DerivativeOperator::new(6.0, &real(q), &trace).unwrap();
        let (rho, r) = (real(rho), real(r));
        let lhs = op.apply(&rho).unwrap().inner(&r);
        let rhs = rho.inner(&op.apply_adjoint(&r).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs() + rhs.abs() + 1e-12));
    }
}
