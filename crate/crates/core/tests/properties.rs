use axivort_core::biot_savart::{oracle_ring_velocity_nd, BiotSavart};
use axivort_core::field::{HalfPlanePoint, VortexElement, VorticityField};
use axivort_core::inequalities::FieldNorms;
use axivort_core::kernels::{Dimension, KernelMode};
use proptest::prelude::*;

fn element(r: f64, z: f64, q: f64, area: f64) -> VortexElement {
    VortexElement::new(HalfPlanePoint::new(r, z), q, area).unwrap()
}

fn arb_elements() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.2..3.0f64, -2.0..2.0f64, -2.0..2.0f64, 1e-3..1e-2f64), 1..12)
}

fn build(d: u32, raw: &[(f64, f64, f64, f64)], delta: f64) -> VorticityField {
    let els = raw.iter().map(|&(r, z, q, a)| element(r, z, q, a)).collect();
    VorticityField::new(Dimension::new(d).unwrap(), els, delta).unwrap()
}

#[test]
fn single_ring_matches_full_space_kernel_in_high_d() {
    let solver = BiotSavart::new(KernelMode::Quadrature);
    let targets = [(0.4, 0.3), (1.7, -0.6), (1.0, 1.2), (2.5, 0.1), (0.0, 0.5)];
    for d in 4..=6 {
        let dd = Dimension::new(d).unwrap();
        let field = VorticityField::new(dd, vec![element(1.1, 0.2, 1.3, 1e-4)], 0.0).unwrap();
        let gamma = field.elements()[0].circulation(dd);
        for (r, z) in targets {
            let p = HalfPlanePoint::new(r, z);
            let u = solver.velocity_at(&field, p).unwrap();
            let o = oracle_ring_velocity_nd(dd, 1.1, 0.2, gamma, p).unwrap();
            let err = (u.ur - o.ur).hypot(u.uz - o.uz) / o.norm();
            assert!(err < 1e-7, "d={d} at ({r},{z}): {u:?} vs {o:?}");
        }
    }
}

#[test]
fn tabulated_kernel_tracks_quadrature() {
    let raw = [(0.8, 0.1, 1.0, 0.01), (1.3, -0.4, -0.7, 0.02), (2.0, 0.9, 0.4, 0.005)];
    for d in 3..=6 {
        let field = build(d, &raw, 0.05);
        let pts: Vec<_> = (0..20).map(|k| HalfPlanePoint::new(0.1 + 0.15 * k as f64, -1.0 + 0.1 * k as f64)).collect();
        let a = BiotSavart::new(KernelMode::Quadrature).velocities(&field, &pts).unwrap();
        let b = BiotSavart::tabulated().velocities(&field, &pts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.ur - y.ur).hypot(x.uz - y.uz) <= 1e-7 * x.norm().max(1e-3), "d={d}");
        }
    }
}

#[test]
fn velocities_do_not_depend_on_thread_count() {
    let raw: Vec<_> = (0..300).map(|k| {
        let t = k as f64 * 0.37;
        (1.0 + 0.5 * t.sin(), t.cos(), (0.3 * t).sin(), 1e-3)
    }).collect();
    let field = build(3, &raw, 0.03);
    let pts: Vec<_> = field.elements().iter().map(|e| e.pos).collect();
    let run = |n| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| {
            let s = BiotSavart::tabulated();
            (s.velocities(&field, &pts).unwrap(), s.kinetic_energy(&field).unwrap().value)
        })
    };
    let (v1, e1) = run(1);
    let (v3, e3) = run(3);
    assert_eq!(e1.to_bits(), e3.to_bits());
    for (a, b) in v1.iter().zip(&v3) {
        assert_eq!((a.ur.to_bits(), a.uz.to_bits()), (b.ur.to_bits(), b.uz.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn velocity_is_linear_in_the_field(a in arb_elements(), b in arb_elements(), d in 3u32..=6) {
        let fa = build(d, &a, 0.05);
        let fb = build(d, &b, 0.05);
        let both = fa.concat(&fb).unwrap();
        let s = BiotSavart::tabulated();
        let p = HalfPlanePoint::new(1.234, 0.321);
        let (ua, ub, uab) = (s.velocity_at(&fa, p).unwrap(), s.velocity_at(&fb, p).unwrap(), s.velocity_at(&both, p).unwrap());
        let scale = ua.norm() + ub.norm() + 1e-12;
        prop_assert!((ua.ur + ub.ur - uab.ur).abs() <= 1e-12 * scale);
        prop_assert!((ua.uz + ub.uz - uab.uz).abs() <= 1e-12 * scale);
    }

    #[test]
    fn rescaling_composes(raw in arb_elements(), l1 in 0.2..5.0f64, l2 in 0.2..5.0f64) {
        let f = build(3, &raw, 0.05);
        let twice = f.rescale(l1, 0.0).unwrap().rescale(l2, 0.0).unwrap();
        let once = f.rescale(l1 * l2, 0.0).unwrap();
        prop_assert!((twice.delta() / once.delta() - 1.0).abs() < 1e-14);
        for (x, y) in twice.elements().iter().zip(once.elements()) {
            prop_assert!((x.pos.r / y.pos.r - 1.0).abs() < 1e-14);
            prop_assert!((x.q - y.q).abs() <= 1e-14 * y.q.abs());
            prop_assert!((x.area / y.area - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_ignore_element_order(raw in arb_elements(), d in 3u32..=6, rot in 0usize..12) {
        let f = build(d, &raw, 0.05);
        let mut shuffled = raw.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let g = build(d, &shuffled, 0.05);
        let s = BiotSavart::tabulated();
        let (nf, ng) = (FieldNorms::compute(&s, &f).unwrap(), FieldNorms::compute(&s, &g).unwrap());
        prop_assert_eq!(f.lp_norm_rel_vort(1.0).unwrap(), g.lp_norm_rel_vort(1.0).unwrap());
        prop_assert_eq!(f.weighted_l1(1).unwrap(), g.weighted_l1(1).unwrap());
        prop_assert_eq!(f.omega_max(), g.omega_max());
        prop_assert!((nf.energy - ng.energy).abs() <= 1e-13 * nf.energy);
    }

    #[test]
    fn energy_scales_with_half_dimension(raw in arb_elements(), d in 3u32..=6, lambda in 0.25..4.0f64) {
        let f = build(d, &raw, 0.05);
        let s = BiotSavart::tabulated();
        let e = s.kinetic_energy(&f).unwrap().value;
        prop_assume!(e > 1e-8);
        let el = s.kinetic_energy(&f.rescale(lambda, 0.0).unwrap()).unwrap().value;
        let expected = e * lambda.powf(-(d as f64) / 2.0);
        prop_assert!((el / expected - 1.0).abs() < 1e-9, "{} vs {}", el, expected);
    }
}
