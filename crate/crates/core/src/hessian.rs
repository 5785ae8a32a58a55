//! Brute-force Hessian oracles and the parameterized chain rule
//! `D_pp F̃ = J_Mᵀ H_mm J_M + Σ_k w_k D_pp M_k`, where `H_mm` is the
//! free-node Hessian and `w` the free-node covector of the Lagrangian.

use alloc::format;
use alloc::vec::Vec;

use crate::deform::{Design, MeshDeformation};
use crate::error::{check_len, Error, Result};
use crate::linalg::Mat;
use crate::model::{
    evaluate_design, mesh_covector, solve_adjoint, solve_state, Functional, ModelProblem, SolverOptions,
};
use crate::param::SurfaceParameterization;

/// Largest mesh-coordinate count the free-node oracle accepts.
pub const MESH_HESSIAN_LIMIT: usize = 400;

/// A finite-difference matrix after `(H + Hᵀ)/2`, with the defect
/// `max |H − Hᵀ|` measured before symmetrization.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedFd {
    pub matrix: Mat,
    pub symmetry_defect: f64,
}

fn check_step(h: f64, opts: &SolverOptions) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("difference step {h} must be positive")));
    }
    if opts.tol > h * h * 1e-2 {
        return Err(Error::Domain(format!(
            "solver tolerance {:e} is too loose for step {h:e}; need at most {:e}",
            opts.tol,
            h * h * 1e-2
        )));
    }
    Ok(())
}

fn central_columns(n: usize, h: f64, mut eval: impl FnMut(usize, f64) -> Result<Vec<f64>>) -> Result<SymmetrizedFd> {
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let plus = eval(j, h)?;
        let minus = eval(j, -h)?;
        cols.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    let raw = Mat::from_columns(n, &cols);
    Ok(SymmetrizedFd {
        symmetry_defect: raw.symmetry_defect(),
        matrix: raw.symmetrized(),
    })
}

/// Central differences of the reduced objective gradient.
pub fn reduced_hessian_fd<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<SymmetrizedFd>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    check_step(h, opts)?;
    check_len("design parameters", design.n_params(), p.len())?;
    let mut q = p.to_vec();
    central_columns(p.len(), h, |j, step| {
        q[j] = p[j] + step;
        let g = evaluate_design(problem, design, &q, None, opts).map(|e| e.gradient);
        q[j] = p[j];
        g
    })
}

/// Central differences of the free-node objective covector `D_m L` with the
/// state and adjoint re-solved at every perturbed mesh.
pub fn mesh_level_hessian_fd<Q: ModelProblem + ?Sized>(
    problem: &Q,
    m: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<SymmetrizedFd> {
    check_step(h, opts)?;
    let n = problem.mesh_len();
    check_len("mesh coordinates", n, m.len())?;
    if n > MESH_HESSIAN_LIMIT {
        return Err(Error::TooLarge {
            size: n,
            limit: MESH_HESSIAN_LIMIT,
        });
    }
    let base = solve_state(problem, m, None, opts)?;
    let mut q = m.to_vec();
    central_columns(n, h, |j, step| {
        q[j] = m[j] + step;
        let w = mesh_objective_covector(problem, &q, Some(&base.value), opts);
        q[j] = m[j];
        w
    })
}

/// `D_m L` of the objective at mesh `m` with converged state and adjoint.
pub fn mesh_objective_covector<Q: ModelProblem + ?Sized>(
    problem: &Q,
    m: &[f64],
    warm_state: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let u = solve_state(problem, m, warm_state, opts)?;
    let lam = solve_adjoint(problem, &u.value, m, Functional::Objective, None, opts)?;
    Ok(mesh_covector(problem, &u.value, m, &lam))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaaDiBruno {
    /// `J_Mᵀ H_mm J_M`
    pub term1: Mat,
    /// `Σ_k w_k D_pp M_k`
    pub term2: Mat,
    pub total: Mat,
}

pub fn faa_di_bruno_assemble<P, V>(design: &Design<'_, P, V>, p: &[f64], h_mm: &Mat, w: &[f64]) -> Result<FaaDiBruno>
where
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let n = design.mesh_len();
    check_len("mesh Hessian rows", n, h_mm.rows())?;
    check_len("mesh Hessian columns", n, h_mm.cols())?;
    check_len("mesh covector", n, w.len())?;
    let term1 = design.mesh_jacobian(p)?.congruence(h_mm);
    let term2 = design.second_derivative_contraction(p, w)?;
    let total = term1.add(&term2);
    Ok(FaaDiBruno { term1, term2, total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HessianReport {
    pub h_fd: Mat,
    pub h_fdb: Mat,
    pub term1_norm: f64,
    pub term2_norm: f64,
    pub max_abs_error: f64,
    /// Of the raw reduced FD Hessian.
    pub symmetry_defect: f64,
}

impl HessianReport {
    /// `max_abs_error / max |H_fd|`
    pub fn relative_error(&self) -> f64 {
        let scale = self.h_fd.max_abs();
        if scale == 0.0 {
            self.max_abs_error
        } else {
            self.max_abs_error / scale
        }
    }
}

/// Compares the reduced FD Hessian with the chain-rule assembly built
/// from the free-node FD Hessian at the same design.
pub fn hessian_report<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<HessianReport>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let fd = reduced_hessian_fd(problem, design, p, h, opts)?;
    let m = design.mesh(p)?;
    let h_mm = mesh_level_hessian_fd(problem, &m, h, opts)?;
    let w = mesh_objective_covector(problem, &m, None, opts)?;
    let fdb = faa_di_bruno_assemble(design, p, &h_mm.matrix, &w)?;
    Ok(HessianReport {
        max_abs_error: fd.matrix.sub(&fdb.total).max_abs(),
        term1_norm: fdb.term1.max_abs(),
        term2_norm: fdb.term2.max_abs(),
        h_fdb: fdb.total,
        h_fd: fd.matrix,
        symmetry_defect: fd.symmetry_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::build_volume;
    use crate::geometry::{perimeter_hessian, SurfaceMesh, DIM};
    use crate::model::{reduced_objective, AnnulusBenchmark, BenchmarkConfig, Source};
    use crate::param::{AngularBasis, HicksHenneParam, NonlinearRadialParam, Parameterization};
    use alloc::vec;

    const OPTS: SolverOptions = SolverOptions {
        tol: 1e-13,
        max_iter: 200_000,
    };

    #[test]
    fn perimeter_only_mesh_hessian() {
        let s = SurfaceMesh::unit_circle(8, 1.0).unwrap();
        let (v, _) = build_volume(&s, 2, 3.0).unwrap();
        let q = AnnulusBenchmark::new(
            &v,
            BenchmarkConfig {
                source: Source::Constant(0.3),
                gamma: 0.7,
                ..Default::default()
            },
        )
        .unwrap();
        let m = v.coords();
        let h = mesh_level_hessian_fd(&q, &m, 1e-4, &OPTS).unwrap();
        let exact = perimeter_hessian(&s.coords(), true).scaled(0.7);
        let n = DIM * 8;
        for i in 0..m.len() {
            for j in 0..m.len() {
                let e = if i < n && j < n { exact[(i, j)] } else { 0.0 };
                assert!((h.matrix[(i, j)] - e).abs() < 1e-6, "({i},{j})");
            }
        }
        let tx: Vec<f64> = (0..m.len()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert!(h.matrix.matvec(&tx).iter().all(|x| x.abs() < 1e-6));

        let q0 = AnnulusBenchmark::new(
            &v,
            BenchmarkConfig {
                source: Source::Constant(0.3),
                gamma: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(mesh_level_hessian_fd(&q0, &m, 1e-4, &OPTS).unwrap().matrix.is_zero());
    }

    #[test]
    fn size_and_tolerance_guards() {
        let s = SurfaceMesh::unit_circle(40, 1.0).unwrap();
        let (v, _) = build_volume(&s, 5, 3.0).unwrap();
        let q = AnnulusBenchmark::new(&v, BenchmarkConfig::default()).unwrap();
        assert!(matches!(
            mesh_level_hessian_fd(&q, &v.coords(), 1e-4, &OPTS),
            Err(Error::TooLarge { .. })
        ));
        let loose = SolverOptions { tol: 1e-6, ..OPTS };
        assert!(matches!(mesh_level_hessian_fd(&q, &v.coords(), 1e-4, &loose), Err(Error::Domain(_))));
    }

    #[test]
    fn one_parameter_value_oracle() {
        let s = SurfaceMesh::unit_circle(8, 1.0).unwrap();
        let (v, d) = build_volume(&s, 2, 3.0).unwrap();
        let q = AnnulusBenchmark::new(&v, BenchmarkConfig::default()).unwrap();
        let rad = Parameterization::NonlinearRadial(
            NonlinearRadialParam::new(s, [0.0, 0.0], AngularBasis::Fourier(1), 0.5).unwrap(),
        );
        let design = Design::new(&rad, &d).unwrap();
        let p = [0.05];
        let h = 1e-4;
        let fd = reduced_hessian_fd(&q, &design, &p, h, &OPTS).unwrap();
        let hv = 1e-3;
        let f = |x: f64| reduced_objective(&q, &design, &[x], &OPTS).unwrap();
        let second = (f(p[0] + hv) - 2.0 * f(p[0]) + f(p[0] - hv)) / (hv * hv);
        assert!((fd.matrix[(0, 0)] - second).abs() < 1e-4 * second.abs().max(1.0));
    }

    #[test]
    fn linear_parameterization_has_no_second_term() {
        let s = SurfaceMesh::unit_circle(8, 1.0).unwrap();
        let (v, d) = build_volume(&s, 2, 3.0).unwrap();
        let q = AnnulusBenchmark::new(&v, BenchmarkConfig::default()).unwrap();
        let hh = Parameterization::HicksHenne(HicksHenneParam::uniform(s, 2, 3.0).unwrap());
        let design = Design::new(&hh, &d).unwrap();
        let p = vec![0.01, -0.02, 0.0, 0.03];
        let report = hessian_report(&q, &design, &p, 1e-4, &OPTS).unwrap();
        assert_eq!(report.term2_norm, 0.0);
        assert!(report.relative_error() < 1e-3, "{}", report.relative_error());
        assert!(report.symmetry_defect < 1e-5);
    }
}
