#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeopt_core::deform::{build_volume, RadialBlendDeformer};
use shapeopt_core::geometry::{signed_area, SurfaceMesh, VolumeMesh};
use shapeopt_core::model::{solve_state, AnnulusBenchmark, BenchmarkConfig, SolverOptions, Source};
use shapeopt_core::param::{AngularBasis, Axis, FfdParam, HicksHenneParam, NonlinearRadialParam, Parameterization};

pub const TIGHT: SolverOptions = SolverOptions {
    tol: 1e-14,
    max_iter: 1_000_000,
};

pub struct Setup {
    pub surface: SurfaceMesh,
    pub volume: VolumeMesh,
    pub deformer: RadialBlendDeformer,
}

pub fn setup(n_s: usize, layers: usize) -> Setup {
    let surface = SurfaceMesh::unit_circle(n_s, 1.0).unwrap();
    let (volume, deformer) = build_volume(&surface, layers, 3.0).unwrap();
    Setup {
        surface,
        volume,
        deformer,
    }
}

pub fn benchmark(s: &Setup, config: BenchmarkConfig) -> AnnulusBenchmark {
    AnnulusBenchmark::new(&s.volume, config).unwrap()
}

pub fn hicks_henne(s: &Setup, per_side: usize) -> Parameterization {
    Parameterization::HicksHenne(HicksHenneParam::uniform(s.surface.clone(), per_side, 3.0).unwrap())
}

pub fn ffd(s: &Setup) -> Parameterization {
    Parameterization::Ffd(FfdParam::around(s.surface.clone(), 3, 3, 0.1, Axis::Y).unwrap())
}

pub fn radial(s: &Setup, basis: AngularBasis, alpha: f64) -> Parameterization {
    Parameterization::NonlinearRadial(NonlinearRadialParam::new(s.surface.clone(), [0.0, 0.0], basis, alpha).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Free-node radial moves on a circle, perturbed by two even modes; the
/// state barely depends on the shape, so the perimeter dominates.
pub struct PerimeterCase {
    pub setup: Setup,
    pub param: Parameterization,
    pub problem: AnnulusBenchmark,
    pub p0: Vec<f64>,
}

pub fn perimeter_case(n_s: usize) -> PerimeterCase {
    let setup = setup(n_s, 2);
    let param = radial(&setup, AngularBasis::Nodal, 0.0);
    let p0: Vec<f64> = (0..n_s)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n_s as f64;
            0.05 * (2.0 * t).cos() + 0.03 * (4.0 * t).sin()
        })
        .collect();
    let design = shapeopt_core::deform::Design::new(&param, &setup.deformer).unwrap();
    let m0 = design.mesh(&p0).unwrap();
    let a0 = signed_area(&m0[..2 * n_s]);
    let mut problem = benchmark(
        &setup,
        BenchmarkConfig {
            source: Source::Gaussian {
                center: [0.0, 0.0],
                width: 8.0,
            },
            gamma: 0.04,
            area_target: Some(a0),
            ..Default::default()
        },
    );
    let u0 = solve_state(&problem, &setup.volume.coords(), None, &SolverOptions::default()).unwrap();
    problem.set_target(u0.value[..n_s].to_vec()).unwrap();
    PerimeterCase {
        setup,
        param,
        problem,
        p0,
    }
}

/// Default source and perimeter weight with an area equality at the
/// baseline area and radius bounds `r ≥ 0.9`.
pub fn constrained_case(n_s: usize, layers: usize) -> (Setup, AnnulusBenchmark) {
    let s = setup(n_s, layers);
    let a0 = s.surface.signed_area().unwrap();
    let q = benchmark(
        &s,
        BenchmarkConfig {
            area_target: Some(a0),
            radius_min: Some(0.9),
            ..Default::default()
        },
    );
    (s, q)
}
