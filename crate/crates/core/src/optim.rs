//! Reduced SQP with a Hessian approximation in the quadratic subproblem,
//! and the projected gradient-descent baseline (`B = I/step` through the
//! same machinery).
//!
//! Steps are unit steps, optionally scaled down by a global cap on
//! `‖v‖_∞`. The loop stops once
//! `max(‖g + J_Eᵀν − J_Cᵀμ‖_∞, ‖E‖_∞, max(0, −min C)) ≤ tol`, with the
//! multipliers of the previous subproblem.

use alloc::format;
use alloc::vec::Vec;

use crate::deform::{Design, MeshDeformation};
use crate::error::{Error, Result};
use crate::hessian::reduced_hessian_fd;
use crate::linalg::Mat;
use crate::math::{self, norm_inf};
use crate::model::{evaluate_design, ConstraintJacobians, ModelProblem, SolverOptions, WarmStart};
use crate::oneshot::limit_step;
use crate::param::SurfaceParameterization;
use crate::qp::{regularize, solve_kkt_equality, solve_qp_mixed, QpResult, Regularization};
use crate::sobolev::{HybridAssembler, OperatorDomain, SmoothingWeights};

/// Source of elapsed seconds for history timestamps.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Reports zero everywhere, which keeps histories reproducible.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// `‖E‖_∞`, zero without equalities.
    pub e_max: f64,
    /// `min_l C_l`, `None` without inequalities.
    pub c_min: Option<f64>,
    /// Infinity norm of the reduced Lagrangian gradient.
    pub grad_norm: f64,
    /// `‖v‖_∞` of the step taken from this iterate (zero for the last one).
    pub step_norm: f64,
    /// Factor applied by the step limiter.
    pub step_scale: f64,
    pub time_s: f64,
    /// Design at this iterate.
    pub p: Vec<f64>,
}

/// Residuals after one inner piggyback step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiggybackRecord {
    pub outer: usize,
    pub inner: usize,
    pub primal: f64,
    pub adjoint: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptHistory {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    /// Final design.
    pub p: Vec<f64>,
    /// Multipliers of the last subproblem.
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// Design updates applied.
    pub steps: usize,
    /// Fixed-point iterations spent on state and adjoint solves (or
    /// piggyback steps).
    pub solver_iterations: usize,
    pub piggyback: Vec<PiggybackRecord>,
}

impl OptHistory {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a history holds at least the initial record")
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Hessian approximation used in the subproblem.
#[derive(Clone, Debug)]
pub enum HessianModel<'a> {
    /// Hybrid Laplace–Beltrami operator.
    Sobolev {
        weights: SmoothingWeights,
        domain: OperatorDomain<'a>,
    },
    /// `c·I`
    Identity(f64),
    /// Central-difference reduced Hessian, rebuilt at every iterate.
    FiniteDifference { h: f64 },
    Fixed(Mat),
}

pub(crate) struct HessianBuilder<'a> {
    model: HessianModel<'a>,
    assembler: Option<HybridAssembler<'a>>,
    regularization: Regularization,
}

impl<'a> HessianBuilder<'a> {
    pub(crate) fn new(model: HessianModel<'a>, regularization: Regularization) -> Result<Self> {
        let assembler = match &model {
            HessianModel::Sobolev { weights, domain } => Some(HybridAssembler::new(*weights, *domain)?),
            HessianModel::Identity(c) if !(*c > 0.0) => {
                return Err(Error::Domain(format!("identity scale {c} must be positive")))
            }
            _ => None,
        };
        Ok(Self {
            model,
            assembler,
            regularization,
        })
    }

    pub(crate) fn build<Q, P, V>(
        &mut self,
        problem: &Q,
        design: &Design<'_, P, V>,
        p: &[f64],
        solver: &SolverOptions,
    ) -> Result<Mat>
    where
        Q: ModelProblem + ?Sized,
        P: SurfaceParameterization,
        V: MeshDeformation,
    {
        let n = design.n_params();
        let b = match &self.model {
            HessianModel::Sobolev { .. } => self.assembler.as_mut().expect("built with the model").assemble(design, p)?.b,
            HessianModel::Identity(c) => Mat::identity(n).scaled(*c),
            HessianModel::FiniteDifference { h } => reduced_hessian_fd(problem, design, p, *h, solver)?.matrix,
            HessianModel::Fixed(b) => b.clone(),
        };
        Ok(regularize(&b, self.regularization)?.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqpOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverOptions,
    /// Bound on `‖v‖_∞`; `None` takes unit steps.
    pub step_cap: Option<f64>,
    pub regularization: Regularization,
    /// Start state and adjoint solves from the previous iterate.
    pub warm_start: bool,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            solver: SolverOptions::default(),
            step_cap: None,
            regularization: Regularization::Auto,
            warm_start: true,
        }
    }
}

/// Constraint data seen by the subproblem.
pub(crate) fn effective_constraints(full: ConstraintJacobians, mixed: bool, n: usize) -> ConstraintJacobians {
    if mixed {
        full
    } else {
        ConstraintJacobians {
            c: Vec::new(),
            jc: Mat::zeros(0, n),
            ..full
        }
    }
}

pub(crate) fn lagrangian_gradient_norm(g: &[f64], cons: &ConstraintJacobians, nu: &[f64], mu: &[f64]) -> f64 {
    let mut r = g.to_vec();
    if !nu.is_empty() {
        math::axpy(1.0, &cons.je.tmatvec(nu), &mut r);
    }
    if !mu.is_empty() {
        math::axpy(-1.0, &cons.jc.tmatvec(mu), &mut r);
    }
    norm_inf(&r)
}

pub(crate) fn feasibility(cons: &ConstraintJacobians) -> (f64, Option<f64>) {
    let e_max = norm_inf(&cons.e);
    let c_min = cons.c.iter().copied().reduce(f64::min);
    (e_max, c_min)
}

pub(crate) fn subproblem(b: &Mat, g: &[f64], cons: &ConstraintJacobians) -> Result<QpResult> {
    if cons.c.is_empty() {
        let mut r = solve_kkt_equality(b, g, &cons.je, &cons.e)?;
        r.mu = Vec::new();
        Ok(r)
    } else {
        solve_qp_mixed(b, g, &cons.je, &cons.e, &cons.jc, &cons.c)
    }
}

/// Surface validity at `p`: a proper curve the deformation can mesh.
pub(crate) fn check_design<P, V>(design: &Design<'_, P, V>, p: &[f64]) -> Result<()>
where
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("design parameters are not finite".into()));
    }
    let s = design.surface(p)?;
    s.validate()?;
    design.deformer.admissible(&s.coords())
}

fn sqp<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    hessian: HessianModel<'_>,
    opts: &SqpOptions,
    mixed: bool,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let t0 = clock.seconds();
    let n = design.n_params();
    crate::error::check_len("initial design", n, p0.len())?;
    let mut builder = HessianBuilder::new(hessian, opts.regularization)?;
    let mut p = p0.to_vec();
    let mut warm: Option<WarmStart> = None;
    let mut multipliers: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut records = Vec::new();
    let mut solver_iterations = 0;
    let mut steps = 0;
    let termination;
    let mut iter = 0;
    loop {
        let step = |e: Error| e.at(iter);
        check_design(design, &p).map_err(step)?;
        let eval = evaluate_design(problem, design, &p, warm.as_ref(), &opts.solver).map_err(step)?;
        solver_iterations += eval.solver_iterations();
        let cons = effective_constraints(eval.constraints.clone(), mixed, n);
        let mut current: Option<QpResult> = None;
        let qp_here = |builder: &mut HessianBuilder<'_>| -> Result<QpResult> {
            let b = builder.build(problem, design, &p, &opts.solver)?;
            subproblem(&b, &eval.gradient, &cons)
        };
        let (nu, mu) = match &multipliers {
            Some(m) => m.clone(),
            None => {
                let q = qp_here(&mut builder).map_err(step)?;
                let m = (q.nu.clone(), q.mu.clone());
                current = Some(q);
                m
            }
        };
        let grad_norm = lagrangian_gradient_norm(&eval.gradient, &cons, &nu, &mu);
        let (e_max, c_min_eff) = feasibility(&cons);
        let c_min = feasibility(&eval.constraints).1;
        let err = grad_norm.max(e_max).max(c_min_eff.map_or(0.0, |c| (-c).max(0.0)));
        records.push(IterationRecord {
            iter,
            objective: eval.objective,
            e_max,
            c_min,
            grad_norm,
            step_norm: 0.0,
            step_scale: 1.0,
            time_s: clock.seconds() - t0,
            p: p.clone(),
        });
        if !err.is_finite() {
            return Err(Error::Divergence {
                iteration: iter,
                reason: format!("non-finite optimality measure {err}"),
            });
        }
        if err <= opts.tol {
            termination = Termination::Converged;
            break;
        }
        if iter == opts.max_iter {
            termination = Termination::MaxIterations;
            break;
        }
        let q = match current {
            Some(q) => q,
            None => qp_here(&mut builder).map_err(step)?,
        };
        let (v, scale) = limit_step(&q.v, opts.step_cap.unwrap_or(f64::INFINITY));
        math::axpy(1.0, &v, &mut p);
        let rec = records.last_mut().expect("just pushed");
        rec.step_norm = norm_inf(&v);
        rec.step_scale = scale;
        steps += 1;
        multipliers = Some((q.nu, q.mu));
        if opts.warm_start {
            warm = Some(WarmStart::from(&eval));
        }
        iter += 1;
    }
    let (nu, mu) = multipliers.unwrap_or_default();
    Ok(OptHistory {
        records,
        termination,
        p,
        nu,
        mu,
        steps,
        solver_iterations,
        piggyback: Vec::new(),
    })
}

/// Equality-constrained reduced SQP. Inequalities of the problem are
/// ignored (their values are still recorded).
pub fn sqp_equality<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    hessian: HessianModel<'_>,
    opts: &SqpOptions,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    sqp(problem, design, p0, hessian, opts, false, clock)
}

/// Reduced SQP with equality and inequality constraints.
pub fn sqp_mixed<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    hessian: HessianModel<'_>,
    opts: &SqpOptions,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    sqp(problem, design, p0, hessian, opts, true, clock)
}

/// Fixed-step descent projected onto the linearized constraints, i.e.
/// [`sqp_mixed`] with `B = I/step` and no regularization.
pub fn gradient_descent_projected<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    step: f64,
    opts: &SqpOptions,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    if !(step > 0.0) {
        return Err(Error::Domain(format!("descent step {step} must be positive")));
    }
    let opts = SqpOptions {
        regularization: Regularization::Fixed(0.0),
        ..*opts
    };
    sqp(problem, design, p0, HessianModel::Identity(1.0 / step), &opts, true, clock)
}
