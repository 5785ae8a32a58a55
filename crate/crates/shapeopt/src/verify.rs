//! `verify`: finite-difference, chain-rule and operator checks on small
//! built-in instances, reported as one line per check.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapeopt_core::deform::{build_volume, Design};
use shapeopt_core::geometry::{SurfaceMesh, DIM};
use shapeopt_core::hessian::hessian_report;
use shapeopt_core::linalg::Cholesky;
use shapeopt_core::math::{dot, norm_inf};
use shapeopt_core::model::{
    evaluate_design, reduced_objective, AnnulusBenchmark, BenchmarkConfig, ModelProblem, SolverOptions,
};
use shapeopt_core::param::{AngularBasis, Axis, FfdParam, HicksHenneParam, NonlinearRadialParam, Parameterization};
use shapeopt_core::sobolev::{
    assemble_hybrid_operator, assemble_surface_operators, assemble_volume_operators, smooth_surface_field,
    OperatorDomain, SmoothingWeights,
};

use crate::formats;

const TIGHT: SolverOptions = SolverOptions {
    tol: 1e-14,
    max_iter: 1_000_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Gradient,
    Hessian,
    Operators,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: String,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn new(id: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            measured,
            tolerance,
            detail: detail.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn gradient_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let surface = SurfaceMesh::unit_circle(32, 1.0)?;
    let (volume, deformer) = build_volume(&surface, 4, 3.0)?;
    let q = AnnulusBenchmark::new(
        &volume,
        BenchmarkConfig {
            area_target: Some(surface.signed_area()?),
            radius_min: Some(0.9),
            ..Default::default()
        },
    )?;
    let param = Parameterization::HicksHenne(HicksHenneParam::uniform(surface, 6, 3.0)?);
    let design = Design::new(&param, &deformer)?;
    let n = design.n_params();
    let (pairs, h) = (20, 1e-5);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let p = random_vec(rng, n, 0.02);
        let mut d = random_vec(rng, n, 1.0);
        let nd = dot(&d, &d).sqrt();
        d.iter_mut().for_each(|x| *x /= nd);
        let g = evaluate_design(&q, &design, &p, None, &TIGHT)?.gradient;
        let at = |t: f64| {
            let x: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            reduced_objective(&q, &design, &x, &TIGHT)
        };
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        let ad = dot(&g, &d);
        worst = worst.max((fd - ad).abs() / ad.abs().max(1e-3));
    }
    out.push(Check::new(
        "gradient.objective",
        worst,
        1e-6,
        format!("max relative error over {pairs} random directions, h = {h:e}"),
    ));

    let p = random_vec(rng, n, 0.02);
    let eval = evaluate_design(&q, &design, &p, None, &TIGHT)?;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[j] += h;
        minus[j] -= h;
        let cp = evaluate_design(&q, &design, &plus, None, &TIGHT)?.constraints;
        let cm = evaluate_design(&q, &design, &minus, None, &TIGHT)?.constraints;
        for l in 0..q.n_equality() {
            worst = worst.max(((cp.e[l] - cm.e[l]) / (2.0 * h) - eval.constraints.je[(l, j)]).abs());
        }
        for l in 0..q.n_inequality() {
            worst = worst.max(((cp.c[l] - cm.c[l]) / (2.0 * h) - eval.constraints.jc[(l, j)]).abs());
        }
    }
    out.push(Check::new(
        "gradient.constraints",
        worst,
        1e-7,
        format!("max abs Jacobian error, {} rows, h = {h:e}", q.n_equality() + q.n_inequality()),
    ));
    Ok(())
}

fn hessian_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>) -> Result<()> {
    let surface = SurfaceMesh::unit_circle(8, 1.0)?;
    let (volume, deformer) = build_volume(&surface, 2, 3.0)?;
    let q = AnnulusBenchmark::new(&volume, BenchmarkConfig::default())?;
    let opts = SolverOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
    };
    let cases = [
        (
            "hicks_henne",
            Parameterization::HicksHenne(HicksHenneParam::uniform(surface.clone(), 2, 3.0)?),
            true,
        ),
        ("ffd", Parameterization::Ffd(FfdParam::around(surface.clone(), 3, 3, 0.1, Axis::Y)?), true),
        (
            "radial",
            Parameterization::NonlinearRadial(NonlinearRadialParam::new(
                surface,
                [0.0, 0.0],
                AngularBasis::Fourier(3),
                0.5,
            )?),
            false,
        ),
    ];
    for (name, param, linear) in cases {
        let design = Design::new(&param, &deformer)?;
        let p = random_vec(rng, design.n_params(), 0.02);
        let r = hessian_report(&q, &design, &p, 1e-4, &opts)?;
        out.push(Check::new(
            &format!("hessian.{name}"),
            r.relative_error(),
            1e-3,
            format!(
                "chain rule vs central differences; |term1| = {:.3e}, |term2| = {:.3e}, symmetry defect {:.1e}",
                r.term1_norm, r.term2_norm, r.symmetry_defect
            ),
        ));
        if linear {
            out.push(Check::new(
                &format!("hessian.{name}.term2"),
                r.term2_norm,
                0.0,
                "second parameterization term of a linear map",
            ));
        }
    }
    Ok(())
}

fn operator_checks(rng: &mut ChaCha8Rng, out: &mut Vec<Check>, dump: Option<&Path>) -> Result<()> {
    let surface = SurfaceMesh::unit_circle(32, 1.0)?;
    let ops = assemble_surface_operators(&surface)?;
    out.push(Check::new(
        "operators.stiffness_row_sum",
        norm_inf(&ops.stiffness.row_sums()),
        1e-12,
        "max |row sum| of the surface stiffness matrix",
    ));
    let total: f64 = ops.mass.row_sums().iter().sum();
    out.push(Check::new(
        "operators.mass_total",
        (total - surface.perimeter()).abs() / surface.perimeter(),
        1e-12,
        "relative gap between the mass matrix sum and the perimeter",
    ));

    let (e1, e2) = (1.0, 0.0625);
    let f = random_vec(rng, surface.len(), 1.0);
    let g = smooth_surface_field(&ops, &f, e1, e2)?;
    let lhs = ops.mass.combine(e1, &ops.stiffness, e2).matvec(&g);
    let rhs = ops.mass.matvec(&f);
    let res: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    out.push(Check::new(
        "operators.sobolev_identity",
        norm_inf(&res) / norm_inf(&rhs).max(f64::MIN_POSITIVE),
        1e-10,
        format!("relative residual of the smoothed field, eps = ({e1}, {e2})"),
    ));

    let (volume, deformer) = build_volume(&surface, 4, 3.0)?;
    let vops = assemble_volume_operators(&volume)?;
    out.push(Check::new(
        "operators.volume_stiffness_row_sum",
        norm_inf(&vops.stiffness.row_sums()),
        1e-12,
        "max |row sum| of the volume stiffness matrix",
    ));
    let coords = volume.coords();
    let area: f64 = volume
        .triangles()
        .iter()
        .map(|t| {
            let p = |k: usize| [coords[DIM * t[k]], coords[DIM * t[k] + 1]];
            let (a, b, c) = (p(0), p(1), p(2));
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
        })
        .sum();
    let vtotal: f64 = vops.mass.row_sums().iter().sum();
    out.push(Check::new(
        "operators.volume_mass_total",
        (vtotal - area).abs() / area,
        1e-12,
        "relative gap between the volume mass sum and the triangulated area",
    ));

    let param = Parameterization::HicksHenne(HicksHenneParam::uniform(surface, 6, 3.0)?);
    let design = Design::new(&param, &deformer)?;
    let p = vec![0.0; design.n_params()];
    for (name, weights, domain) in [
        ("surface", SmoothingWeights::new(56.9, 0.9, 0.1), OperatorDomain::Surface),
        ("volume", SmoothingWeights::new(0.0, 7.1, 0.1), OperatorDomain::Volume(&volume)),
    ] {
        let b = assemble_hybrid_operator(&design, &p, weights, domain)?.b;
        let spd = Cholesky::factor(&b).is_ok();
        out.push(Check::new(
            &format!("operators.hybrid_{name}_symmetry"),
            b.symmetry_defect(),
            1e-12,
            format!(
                "max |B - B^T|, eps = ({}, {}, {}), {}",
                weights.eps1,
                weights.eps2,
                weights.eps3,
                if spd { "positive definite" } else { "NOT positive definite" }
            ),
        ));
        out.push(Check::new(
            &format!("operators.hybrid_{name}_spd"),
            if spd { 0.0 } else { 1.0 },
            0.0,
            "Cholesky factorization succeeds",
        ));
        if let Some(dir) = dump {
            let path = dir.join(format!("hybrid_{name}.mtx"));
            formats::write_matrix_market_dense(std::fs::File::create(&path)?, &b, "hybrid operator B")?;
            let back = formats::read_matrix_market(&std::fs::read_to_string(&path)?)?;
            out.push(Check::new(
                &format!("operators.hybrid_{name}_dump"),
                back.sub(&b).max_abs(),
                0.0,
                format!("round trip through {}", path.display()),
            ));
        }
    }
    if let Some(dir) = dump {
        formats::write_matrix_market_sparse(std::fs::File::create(dir.join("mass.mtx"))?, &ops.mass, "surface mass")?;
        formats::write_matrix_market_sparse(
            std::fs::File::create(dir.join("stiffness.mtx"))?,
            &ops.stiffness,
            "surface stiffness",
        )?;
    }
    Ok(())
}

/// Runs the checks of `level`; `dump` receives operator files.
pub fn run_checks(level: Level, seed: u64, dump: Option<&Path>) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if matches!(level, Level::Gradient | Level::All) {
        gradient_checks(&mut rng, &mut out)?;
    }
    if matches!(level, Level::Hessian | Level::All) {
        hessian_checks(&mut rng, &mut out)?;
    }
    if matches!(level, Level::Operators | Level::All) {
        operator_checks(&mut rng, &mut out, dump)?;
    }
    Ok(out)
}

pub fn render(checks: &[Check], seed: u64) -> String {
    let width = checks.iter().map(|c| c.id.len()).max().unwrap_or(0);
    let mut s = String::new();
    let failed = checks.iter().filter(|c| !c.passed()).count();
    let _ = writeln!(s, "# shapeopt verification report");
    let _ = writeln!(s, "# seed = {seed}, checks = {}, failed = {failed}", checks.len());
    for c in checks {
        let _ = writeln!(
            s,
            "{:<width$}  {}  measured = {:.3e}  tolerance = {:.1e}  # {}",
            c.id,
            if c.passed() { "PASS" } else { "FAIL" },
            c.measured,
            c.tolerance,
            c.detail
        );
    }
    s
}
