//! Multistep One Shot: each outer iteration advances the state and all
//! adjoints by `J` piggyback steps on the current mesh, forms inexact
//! reduced gradients from them and takes a step `B v = −δp` (or the mixed
//! subproblem with constraints), limited in `‖v‖_∞`.

use alloc::format;
use alloc::vec::Vec;

use crate::deform::{Design, MeshDeformation};
use crate::error::{check_len, Error, Result};
use crate::math::{self, norm_inf};
use crate::model::{
    constraint_values_and_jacobians, piggyback_step, reduced_gradient, solve_state, Functional, ModelProblem,
    PiggybackState, SolverOptions,
};
use crate::optim::{
    check_design, effective_constraints, feasibility, lagrangian_gradient_norm, subproblem, Clock, HessianBuilder,
    HessianModel, IterationRecord, OptHistory, PiggybackRecord, Termination,
};
use crate::param::SurfaceParameterization;
use crate::qp::Regularization;

/// Scales `v` by `min(1, bound/‖v‖_∞)`; returns the step and the factor.
pub fn limit_step(v: &[f64], bound: f64) -> (Vec<f64>, f64) {
    let n = norm_inf(v);
    let scale = if n > bound { bound / n } else { 1.0 };
    (v.iter().map(|x| x * scale).collect(), scale)
}

#[derive(Clone, Debug)]
pub struct OneShotConfig<'a> {
    /// Piggyback steps per outer iteration (`J ≥ 1`).
    pub inner_steps: usize,
    /// Bound on `‖v‖_∞`; infinity disables the limiter.
    pub max_design_update: f64,
    pub outer_iters: usize,
    /// Stops once the optimality measure, including the piggyback
    /// residuals, falls below this.
    pub tol: f64,
    pub hessian: HessianModel<'a>,
    /// Keep adjoints across outer iterations instead of restarting at zero.
    pub adjoint_carryover: bool,
    /// Options of the initial state solve.
    pub solver: SolverOptions,
    pub regularization: Regularization,
    /// Residual growth over one outer iteration that counts as divergence.
    pub divergence_factor: f64,
}

impl<'a> OneShotConfig<'a> {
    pub fn new(hessian: HessianModel<'a>) -> Self {
        Self {
            inner_steps: 10,
            max_design_update: 5e-3,
            outer_iters: 500,
            tol: 1e-6,
            hessian,
            adjoint_carryover: true,
            solver: SolverOptions::default(),
            regularization: Regularization::Auto,
            divergence_factor: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_steps < 1 {
            return Err(Error::Domain("at least one piggyback step is required".into()));
        }
        if !(self.max_design_update > 0.0) {
            return Err(Error::Domain(format!(
                "max_design_update {} must be positive",
                self.max_design_update
            )));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::Domain(format!("divergence factor {} must exceed 1", self.divergence_factor)));
        }
        Ok(())
    }
}

/// Unconstrained multistep One Shot; constraints of the problem are
/// ignored.
pub fn oneshot_multistep<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    cfg: &OneShotConfig<'_>,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let start = initial_state(problem, design, p0, cfg)?;
    oneshot_from(problem, design, p0, start, cfg, false, clock)
}

/// Constrained multistep One Shot with the mixed subproblem.
pub fn oneshot_constrained<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    cfg: &OneShotConfig<'_>,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let start = initial_state(problem, design, p0, cfg)?;
    oneshot_from(problem, design, p0, start, cfg, true, clock)
}

/// Converged state at `p0` with zero adjoints.
pub fn initial_state<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    cfg: &OneShotConfig<'_>,
) -> Result<PiggybackState>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let m = design.mesh(p0)?;
    let mut s = PiggybackState::zeros(problem);
    s.u = solve_state(problem, &m, None, &cfg.solver)?.value;
    Ok(s)
}

fn divergence(iteration: usize, reason: alloc::string::String) -> Error {
    Error::Divergence { iteration, reason }
}

/// One Shot from an explicit starting state and adjoints.
pub fn oneshot_from<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p0: &[f64],
    start: PiggybackState,
    cfg: &OneShotConfig<'_>,
    constrained: bool,
    clock: &dyn Clock,
) -> Result<OptHistory>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    cfg.validate()?;
    let t0 = clock.seconds();
    let n = design.n_params();
    check_len("initial design", n, p0.len())?;
    check_len("initial state", problem.state_len(), start.u.len())?;
    let mut builder = HessianBuilder::new(cfg.hessian.clone(), cfg.regularization)?;
    let mut p = p0.to_vec();
    let mut state = start;
    let mut multipliers: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut records = Vec::new();
    let mut trace = Vec::new();
    let mut steps = 0;
    let termination;
    let mut iter = 0;
    loop {
        check_design(design, &p).map_err(|e| divergence(iter, format!("invalid shape: {e}")))?;
        let m = design.mesh(&p).map_err(|e| e.at(iter))?;
        if !cfg.adjoint_carryover {
            let u = core::mem::take(&mut state.u);
            state = PiggybackState::zeros(problem);
            state.u = u;
        }
        let mut first = 0.0;
        let mut last = (0.0, 0.0);
        for j in 0..cfg.inner_steps {
            let next = piggyback_step(problem, &state, &m);
            let (primal, adjoint) = next.distance(&state);
            trace.push(PiggybackRecord {
                outer: iter,
                inner: j,
                primal,
                adjoint,
            });
            if !primal.is_finite() || !adjoint.is_finite() {
                return Err(divergence(iter, format!("non-finite piggyback residual at inner step {j}")));
            }
            if j == 0 {
                first = primal.max(adjoint);
            }
            last = (primal, adjoint);
            state = next;
        }
        let r_last = last.0.max(last.1);
        if r_last > cfg.divergence_factor * first && r_last > 1e-10 {
            return Err(divergence(
                iter,
                format!("piggyback residual grew from {first:e} to {r_last:e} over {} steps", cfg.inner_steps),
            ));
        }

        let adjoints: Vec<_> = problem.functionals().into_iter().map(|f| state.tagged(f)).collect();
        let u = &state.u;
        let gradient = reduced_gradient(problem, design, &p, u, &adjoints[0], Functional::Objective).map_err(|e| e.at(iter))?;
        let full = constraint_values_and_jacobians(problem, design, &p, u, &adjoints[1..]).map_err(|e| e.at(iter))?;
        let objective = problem.evaluate(Functional::Objective, u, &m);
        let cons = effective_constraints(full.clone(), constrained, n);

        let mut current = None;
        let (nu, mu) = match &multipliers {
            Some(mm) => mm.clone(),
            None => {
                let b = builder.build(problem, design, &p, &cfg.solver).map_err(|e| e.at(iter))?;
                let q = subproblem(&b, &gradient, &cons).map_err(|e| e.at(iter))?;
                let mm = (q.nu.clone(), q.mu.clone());
                current = Some(q);
                mm
            }
        };
        let grad_norm = lagrangian_gradient_norm(&gradient, &cons, &nu, &mu);
        let (e_max, c_min_eff) = feasibility(&cons);
        let err = grad_norm
            .max(e_max)
            .max(c_min_eff.map_or(0.0, |c| (-c).max(0.0)))
            .max(r_last);
        records.push(IterationRecord {
            iter,
            objective,
            e_max,
            c_min: feasibility(&full).1,
            grad_norm,
            step_norm: 0.0,
            step_scale: 1.0,
            time_s: clock.seconds() - t0,
            p: p.clone(),
        });
        if !err.is_finite() {
            return Err(divergence(iter, format!("non-finite optimality measure {err}")));
        }
        if err <= cfg.tol {
            termination = Termination::Converged;
            break;
        }
        if iter == cfg.outer_iters {
            termination = Termination::MaxIterations;
            break;
        }
        let q = match current {
            Some(q) => q,
            None => {
                let b = builder.build(problem, design, &p, &cfg.solver).map_err(|e| e.at(iter))?;
                subproblem(&b, &gradient, &cons).map_err(|e| e.at(iter))?
            }
        };
        let (v, scale) = limit_step(&q.v, cfg.max_design_update);
        math::axpy(1.0, &v, &mut p);
        let rec = records.last_mut().expect("just pushed");
        rec.step_norm = norm_inf(&v);
        rec.step_scale = scale;
        steps += 1;
        multipliers = Some((q.nu, q.mu));
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
        solver_iterations: trace.len(),
        piggyback: trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetardationReport {
    pub time_optimization: f64,
    pub time_single_solve: f64,
    pub time_factor: f64,
    pub iter_optimization: f64,
    pub iter_single_solve: f64,
    pub iter_factor: f64,
}

/// Cost of an optimization relative to one converged state solve, by time
/// and by fixed-point iteration count.
pub fn retardation(
    time_optimization: f64,
    time_single_solve: f64,
    iter_optimization: f64,
    iter_single_solve: f64,
) -> Result<RetardationReport> {
    if !(time_single_solve > 0.0) {
        return Err(Error::ZeroDenominator("single-solve time"));
    }
    if !(iter_single_solve > 0.0) {
        return Err(Error::ZeroDenominator("single-solve iteration count"));
    }
    Ok(RetardationReport {
        time_optimization,
        time_single_solve,
        time_factor: time_optimization / time_single_solve,
        iter_optimization,
        iter_single_solve,
        iter_factor: iter_optimization / iter_single_solve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn limiter_examples() {
        assert_eq!(limit_step(&[0.001, -0.002], 0.005), (vec![0.001, -0.002], 1.0));
        let (v, s) = limit_step(&[0.01, -0.02], 0.005);
        assert_eq!(s, 0.25);
        assert!((v[0] - 0.0025).abs() < 1e-18 && (v[1] + 0.005).abs() < 1e-18);
        assert_eq!(limit_step(&[0.0, 0.0], 0.005).0, vec![0.0, 0.0]);
    }

    #[test]
    fn retardation_arithmetic() {
        let r = retardation(41280.76, 2224.1, 10.0, 10.0).unwrap();
        assert_eq!(libm::round(r.time_factor * 100.0) / 100.0, 18.56);
        assert_eq!(r.iter_factor, 1.0);
        let r = retardation(173046.68, 2224.1, 1.0, 1.0).unwrap();
        assert_eq!(libm::round(r.time_factor * 100.0) / 100.0, 77.81);
        assert_eq!(retardation(1.0, 0.0, 1.0, 1.0), Err(Error::ZeroDenominator("single-solve time")));
    }
}
