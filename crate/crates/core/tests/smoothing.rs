//! Sobolev smoothing identities on random shapes and fields.

mod common;

use common::*;
use proptest::prelude::*;
use shapeopt_core::deform::Design;
use shapeopt_core::geometry::SurfaceMesh;
use shapeopt_core::math::dot;
use shapeopt_core::param::AngularBasis;
use shapeopt_core::sobolev::*;

fn wobbly(n: usize, amp: f64, phase: f64) -> SurfaceMesh {
    let nodes = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = 1.0 + amp * (3.0 * t + phase).sin();
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    SurfaceMesh::closed_from_nodes(nodes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn riesz_identity_and_residual(seed in 0u64..u64::MAX, amp in 0.0..0.3f64, e1 in 0.01..10.0f64, e2 in 0.0..5.0f64) {
        let mesh = wobbly(24, amp, seed as f64 * 1e-3);
        let ops = assemble_surface_operators(&mesh).unwrap();
        let mut r = rng(seed);
        let f = random_vec(&mut r, 48, 1.0);
        let v = random_vec(&mut r, 48, 1.0);
        let g = smooth_surface_field(&ops, &f, e1, e2).unwrap();
        let a = block_expand(&ops.system(e1, e2, false));
        let m = block_expand(&ops.mass.to_dense());
        let resid: f64 = a.matvec(&g).iter().zip(m.matvec(&f)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(resid <= 1e-10);
        prop_assert!((dot(&a.matvec(&g), &v) - dot(&m.matvec(&f), &v)).abs() <= 1e-10);
    }

    #[test]
    fn operator_invariants(amp in 0.0..0.3f64, phase in 0.0..6.0f64, n in 5usize..40) {
        let mesh = wobbly(n, amp, phase);
        let ops = assemble_surface_operators(&mesh).unwrap();
        prop_assert!(ops.stiffness.row_sums().iter().all(|x| x.abs() <= 1e-12));
        let total: f64 = ops.mass.row_sums().iter().sum();
        prop_assert!((total - mesh.perimeter()).abs() <= 1e-12);
        prop_assert!(ops.mass.to_dense().symmetry_defect() <= 1e-14);
        prop_assert!(ops.stiffness.to_dense().symmetry_defect() <= 1e-14);
    }

    #[test]
    fn diagonal_shift_is_additive(seed in 0u64..u64::MAX, e3 in 0.0..2.0f64) {
        let s = setup(12, 2);
        let param = radial(&s, AngularBasis::Fourier(5), 0.5);
        let design = Design::new(&param, &s.deformer).unwrap();
        let p = random_vec(&mut rng(seed), 5, 0.05);
        let b0 = assemble_hybrid_operator(&design, &p, SmoothingWeights::new(1.0, 0.3, 0.0), OperatorDomain::Surface).unwrap().b;
        let mut b = b0.clone();
        b.add_diagonal(e3);
        let b3 = assemble_hybrid_operator(&design, &p, SmoothingWeights::new(1.0, 0.3, e3), OperatorDomain::Surface).unwrap().b;
        prop_assert!(b.sub(&b3).max_abs() <= 1e-12);
    }
}

#[test]
fn identity_switch_uses_the_literal_identity() {
    let s = setup(10, 2);
    let param = hicks_henne(&s, 2);
    let design = Design::new(&param, &s.deformer).unwrap();
    let mut w = SmoothingWeights::new(2.0, 0.0, 0.0);
    w.identity_as_matrix = true;
    let b = assemble_hybrid_operator(&design, &[0.0; 4], w, OperatorDomain::Surface).unwrap().b;
    let j = design.surface_jacobian(&[0.0; 4]).unwrap();
    let expect = j.transpose().matmul(&j).scaled(2.0);
    assert!(b.sub(&expect).max_abs() < 1e-12);
}
