//! Chain-rule Hessian assembly against brute-force finite differences.

mod common;

use common::*;
use shapeopt_core::deform::{Design, MeshDeformation, RadialBlendDeformer};
use shapeopt_core::hessian::*;
use shapeopt_core::linalg::{spd_solve, Mat};
use shapeopt_core::model::*;
use shapeopt_core::param::{AngularBasis, NodalDisplacementParam, Parameterization};
use shapeopt_core::Result;

const OPTS: SolverOptions = SolverOptions { tol: 1e-13, max_iter: 1_000_000 };

#[test]
fn chain_rule_matches_fd_for_linear_and_nonlinear_maps() {
    let s = setup(8, 2);
    let q = benchmark(&s, BenchmarkConfig::default());
    let mut r = rng(7);
    for (name, param, linear) in [
        ("hicks-henne", hicks_henne(&s, 2), true),
        ("ffd", ffd(&s), true),
        ("radial", radial(&s, AngularBasis::Fourier(3), 0.5), false),
    ] {
        let design = Design::new(&param, &s.deformer).unwrap();
        for _ in 0..5 {
            let p = random_vec(&mut r, design.n_params(), 0.03);
            let rep = hessian_report(&q, &design, &p, 1e-4, &OPTS).unwrap();
            assert!(rep.relative_error() <= 1e-3, "{name}: {:e}", rep.relative_error());
            assert!(rep.symmetry_defect <= 1e-5, "{name}: {:e}", rep.symmetry_defect);
            if linear {
                assert_eq!(rep.term2_norm, 0.0, "{name}");
            } else {
                assert!(rep.term2_norm > 0.0);
            }
        }
    }
}

#[test]
fn identity_map_on_one_layer_gives_the_surface_block() {
    let s = setup(8, 1);
    let q = benchmark(&s, BenchmarkConfig::default());
    let ident = Parameterization::NodalDisplacement(NodalDisplacementParam::new(s.surface.clone()));
    let design = Design::new(&ident, &s.deformer).unwrap();
    let p = vec![0.0; 16];
    let m = design.mesh(&p).unwrap();
    let h_mm = mesh_level_hessian_fd(&q, &m, 1e-4, &OPTS).unwrap().matrix;
    let w = mesh_objective_covector(&q, &m, None, &OPTS).unwrap();
    let fdb = faa_di_bruno_assemble(&design, &p, &h_mm, &w).unwrap();
    let idx: Vec<usize> = (0..16).collect();
    assert!(fdb.total.sub(&h_mm.select(&idx, &idx)).max_abs() < 1e-12);
}

/// Radial blend with an artificial nonzero second derivative reported.
struct Curved(RadialBlendDeformer);

impl MeshDeformation for Curved {
    fn surface_len(&self) -> usize {
        self.0.surface_len()
    }
    fn mesh_len(&self) -> usize {
        self.0.mesh_len()
    }
    fn deform(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.0.deform(s)
    }
    fn deform_jvp(&self, s: &[f64], ds: &[f64]) -> Result<Vec<f64>> {
        self.0.deform_jvp(s, ds)
    }
    fn deform_vjp(&self, s: &[f64], wm: &[f64]) -> Result<Vec<f64>> {
        self.0.deform_vjp(s, wm)
    }
    fn curvature_contraction(&self, s: &[f64], wm: &[f64]) -> Result<Option<Mat>> {
        let scale: f64 = wm.iter().map(|x| x.abs()).sum();
        Ok(Some(Mat::identity(s.len()).scaled(scale)))
    }
}

#[test]
fn spurious_deformation_curvature_is_detected() {
    let s = setup(8, 2);
    let q = benchmark(&s, BenchmarkConfig::default());
    let param = hicks_henne(&s, 2);
    let p = vec![0.01, 0.0, -0.02, 0.01];
    let good = Design::new(&param, &s.deformer).unwrap();
    let rep = hessian_report(&q, &good, &p, 1e-4, &OPTS).unwrap();
    let curved = Curved(s.deformer.clone());
    let bad = Design::new(&param, &curved).unwrap();
    let m = bad.mesh(&p).unwrap();
    let h_mm = mesh_level_hessian_fd(&q, &m, 1e-4, &OPTS).unwrap().matrix;
    let w = mesh_objective_covector(&q, &m, None, &OPTS).unwrap();
    let fdb = faa_di_bruno_assemble(&bad, &p, &h_mm, &w).unwrap();
    let err = fdb.total.sub(&rep.h_fd).max_abs() / rep.h_fd.max_abs();
    assert!(err > 100.0 * rep.relative_error(), "{err:e} vs {:e}", rep.relative_error());
}

#[test]
fn quadratic_composite_has_constant_hessian_and_newton_decreases() {
    let s = setup(12, 2);
    let q = benchmark(
        &s,
        BenchmarkConfig {
            coupling: 0.0,
            omega: Some(1.0),
            source: Source::Linear { gradient: [0.7, 0.2], offset: 0.1 },
            gamma: 0.0,
            target: vec![0.4; 12],
            ..Default::default()
        },
    );
    let param = hicks_henne(&s, 3);
    let design = Design::new(&param, &s.deformer).unwrap();
    let a = reduced_hessian_fd(&q, &design, &[0.0; 6], 1e-3, &OPTS).unwrap().matrix;
    let p = vec![0.05, -0.03, 0.02, 0.0, 0.04, -0.01];
    let b = reduced_hessian_fd(&q, &design, &p, 1e-3, &OPTS).unwrap().matrix;
    assert!(a.sub(&b).max_abs() <= 1e-6 * a.max_abs().max(1.0));

    let mut reg = b.clone();
    reg.add_diagonal(1e-10);
    let eval = evaluate_design(&q, &design, &p, None, &OPTS).unwrap();
    let neg: Vec<f64> = eval.gradient.iter().map(|x| -x).collect();
    let w = spd_solve(&reg, &neg).unwrap();
    let next: Vec<f64> = p.iter().zip(&w).map(|(a, b)| a + b).collect();
    assert!(reduced_objective(&q, &design, &next, &OPTS).unwrap() < eval.objective);
}
