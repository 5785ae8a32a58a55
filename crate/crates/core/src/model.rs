//! Model state problem in fixed-point form `u = G(u, m)`, its reverse
//! accumulation adjoint, the piggyback iteration and reduced derivatives.
//!
//! The adjoint of functional `f` solves `λ = (D_u G)ᵀ λ + (D_u f)ᵀ` by the
//! same fixed-point iteration as the state, so it contracts at the rate of
//! `D_u G` and only the converged state has to be kept. Reduced gradients
//! follow from the mesh covector `(D_m G)ᵀ λ + (D_m f)ᵀ` pulled back through
//! the design map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::deform::{Design, MeshDeformation};
use crate::error::{check_len, Error, Result};
use crate::geometry::{self, Point, VolumeMesh, DIM};
use crate::linalg::{power_iteration, Mat, PowerEstimate, SymSparse, SymSparseBuilder};
use crate::math::{self, exp, hypot};
use crate::param::SurfaceParameterization;

/// Identifies the objective or one of the constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Functional {
    Objective,
    Equality(usize),
    Inequality(usize),
}

/// Fixed-point state problem with objective `F`, equalities `E_k = 0` and
/// inequalities `C_l ≥ 0`, all given through their partial-derivative
/// products.
pub trait ModelProblem {
    fn state_len(&self) -> usize;
    fn mesh_len(&self) -> usize;
    fn n_equality(&self) -> usize;
    fn n_inequality(&self) -> usize;

    /// `out = G(u, m)`
    fn fixed_point(&self, u: &[f64], m: &[f64], out: &mut [f64]);
    /// `out = (D_u G)ᵀ v`
    fn state_adjoint_product(&self, u: &[f64], m: &[f64], v: &[f64], out: &mut [f64]);
    /// `out = (D_m G)ᵀ v`
    fn mesh_adjoint_product(&self, u: &[f64], m: &[f64], v: &[f64], out: &mut [f64]);

    fn evaluate(&self, f: Functional, u: &[f64], m: &[f64]) -> f64;
    /// `out = (D_u f)ᵀ`
    fn state_partial(&self, f: Functional, u: &[f64], m: &[f64], out: &mut [f64]);
    /// `out = (D_m f)ᵀ`
    fn mesh_partial(&self, f: Functional, u: &[f64], m: &[f64], out: &mut [f64]);

    /// Functionals without state dependence have identically zero adjoints.
    fn depends_on_state(&self, f: Functional) -> bool {
        let _ = f;
        true
    }

    /// Objective first, then equalities, then inequalities.
    fn functionals(&self) -> Vec<Functional> {
        let mut fs = vec![Functional::Objective];
        fs.extend((0..self.n_equality()).map(Functional::Equality));
        fs.extend((0..self.n_inequality()).map(Functional::Inequality));
        fs
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bound on the infinity norm of the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    pub value: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adjoint {
    pub functional: Functional,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn iterate_to_tolerance(
    n: usize,
    start: Option<&[f64]>,
    opts: &SolverOptions,
    mut step: impl FnMut(&[f64], &mut [f64]),
) -> Result<FixedPoint> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("solver tolerance {} must be positive", opts.tol)));
    }
    let mut x = match start {
        Some(s) => {
            check_len("initial iterate", n, s.len())?;
            s.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        step(&x, &mut next);
        residual = math::dist_inf(&next, &x);
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.tol {
            return Ok(FixedPoint {
                value: x,
                iterations: it,
                residual,
            });
        }
        if it == opts.max_iter {
            break;
        }
        core::mem::swap(&mut x, &mut next);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Iterates `u ← G(u, m)` until `‖G(u, m) − u‖_∞ ≤ tol`.
pub fn solve_state<Q: ModelProblem + ?Sized>(
    problem: &Q,
    m: &[f64],
    initial: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<FixedPoint> {
    check_len("mesh coordinates", problem.mesh_len(), m.len())?;
    iterate_to_tolerance(problem.state_len(), initial, opts, |u, out| {
        problem.fixed_point(u, m, out)
    })
}

/// Reverse-accumulation adjoint: iterates `λ ← (D_u G)ᵀ λ + (D_u f)ᵀ` at
/// the fixed state `u`.
pub fn solve_adjoint<Q: ModelProblem + ?Sized>(
    problem: &Q,
    u: &[f64],
    m: &[f64],
    f: Functional,
    initial: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Adjoint> {
    check_len("state", problem.state_len(), u.len())?;
    check_len("mesh coordinates", problem.mesh_len(), m.len())?;
    let n = problem.state_len();
    if !problem.depends_on_state(f) {
        return Ok(Adjoint {
            functional: f,
            lambda: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut seed = vec![0.0; n];
    problem.state_partial(f, u, m, &mut seed);
    let fp = iterate_to_tolerance(n, initial, opts, |lam, out| {
        problem.state_adjoint_product(u, m, lam, out);
        math::axpy(1.0, &seed, out);
    })?;
    Ok(Adjoint {
        functional: f,
        lambda: fp.value,
        iterations: fp.iterations,
        residual: fp.residual,
    })
}

/// Power-iteration estimate of the spectral radius of `D_u G` at `(u, m)`
/// (computed on the transpose, which has the same spectrum).
pub fn contraction_estimate<Q: ModelProblem + ?Sized>(
    problem: &Q,
    u: &[f64],
    m: &[f64],
    tol: f64,
    max_iter: usize,
) -> PowerEstimate {
    let mut est = power_iteration(
        problem.state_len(),
        |v, out| problem.state_adjoint_product(u, m, v, out),
        tol,
        max_iter,
    );
    est.value = est.value.abs();
    est
}

/// Primal state plus one adjoint per functional, advanced together.
#[derive(Clone, Debug, PartialEq)]
pub struct PiggybackState {
    pub u: Vec<f64>,
    pub lambda_f: Vec<f64>,
    pub lambda_e: Vec<Vec<f64>>,
    pub lambda_c: Vec<Vec<f64>>,
}

impl PiggybackState {
    pub fn zeros<Q: ModelProblem + ?Sized>(problem: &Q) -> Self {
        let n = problem.state_len();
        Self {
            u: vec![0.0; n],
            lambda_f: vec![0.0; n],
            lambda_e: vec![vec![0.0; n]; problem.n_equality()],
            lambda_c: vec![vec![0.0; n]; problem.n_inequality()],
        }
    }

    pub fn adjoint(&self, f: Functional) -> &[f64] {
        match f {
            Functional::Objective => &self.lambda_f,
            Functional::Equality(k) => &self.lambda_e[k],
            Functional::Inequality(l) => &self.lambda_c[l],
        }
    }

    fn adjoint_mut(&mut self, f: Functional) -> &mut Vec<f64> {
        match f {
            Functional::Objective => &mut self.lambda_f,
            Functional::Equality(k) => &mut self.lambda_e[k],
            Functional::Inequality(l) => &mut self.lambda_c[l],
        }
    }

    /// `(primal, adjoint)` infinity-norm differences; the adjoint part is
    /// the maximum over all functionals.
    pub fn distance(&self, other: &Self) -> (f64, f64) {
        let primal = math::dist_inf(&self.u, &other.u);
        let mut adjoint = math::dist_inf(&self.lambda_f, &other.lambda_f);
        for (a, b) in self.lambda_e.iter().zip(&other.lambda_e) {
            adjoint = adjoint.max(math::dist_inf(a, b));
        }
        for (a, b) in self.lambda_c.iter().zip(&other.lambda_c) {
            adjoint = adjoint.max(math::dist_inf(a, b));
        }
        (primal, adjoint)
    }

    /// Adjoint tagged with its functional, for reduced-gradient evaluation.
    pub fn tagged(&self, f: Functional) -> Adjoint {
        Adjoint {
            functional: f,
            lambda: self.adjoint(f).to_vec(),
            iterations: 0,
            residual: f64::NAN,
        }
    }
}

/// One coupled step: `u' = G(u, m)` and, for every functional,
/// `λ' = (D_u G(u, m))ᵀ λ + (D_u f(u, m))ᵀ`, all evaluated at the old `u`.
pub fn piggyback_step<Q: ModelProblem + ?Sized>(
    problem: &Q,
    state: &PiggybackState,
    m: &[f64],
) -> PiggybackState {
    let n = problem.state_len();
    let mut next = state.clone();
    problem.fixed_point(&state.u, m, &mut next.u);
    let mut seed = vec![0.0; n];
    for f in problem.functionals() {
        if !problem.depends_on_state(f) {
            continue;
        }
        problem.state_partial(f, &state.u, m, &mut seed);
        let out = next.adjoint_mut(f);
        problem.state_adjoint_product(&state.u, m, state.adjoint(f), out);
        math::axpy(1.0, &seed, out);
    }
    next
}

/// Mesh covector `(D_m G)ᵀ λ + (D_m f)ᵀ`, the free-node derivative of the
/// Lagrangian of `f`.
pub fn mesh_covector<Q: ModelProblem + ?Sized>(
    problem: &Q,
    u: &[f64],
    m: &[f64],
    adjoint: &Adjoint,
) -> Vec<f64> {
    let mut w = vec![0.0; problem.mesh_len()];
    let mut tmp = vec![0.0; problem.mesh_len()];
    if problem.depends_on_state(adjoint.functional) {
        problem.mesh_adjoint_product(u, m, &adjoint.lambda, &mut w);
    }
    problem.mesh_partial(adjoint.functional, u, m, &mut tmp);
    math::axpy(1.0, &tmp, &mut w);
    w
}

/// Reduced gradient of `f` with respect to the design parameters.
pub fn reduced_gradient<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    u: &[f64],
    adjoint: &Adjoint,
    f: Functional,
) -> Result<Vec<f64>>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    if adjoint.functional != f {
        return Err(Error::StaleAdjoint {
            computed: adjoint.functional,
            requested: f,
        });
    }
    check_len("design mesh size", problem.mesh_len(), design.mesh_len())?;
    let m = design.mesh(p)?;
    design.vjp(p, &mesh_covector(problem, u, &m, adjoint))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintJacobians {
    pub e: Vec<f64>,
    pub c: Vec<f64>,
    /// `n_E × n_p`
    pub je: Mat,
    /// `n_C × n_p`
    pub jc: Mat,
}

/// Constraint values and reduced Jacobian rows. `adjoints` must hold the
/// converged adjoint of every state-dependent constraint; geometric ones
/// use a zero adjoint.
pub fn constraint_values_and_jacobians<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    u: &[f64],
    adjoints: &[Adjoint],
) -> Result<ConstraintJacobians>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let m = design.mesh(p)?;
    let (ne, nc, np) = (problem.n_equality(), problem.n_inequality(), design.n_params());
    let mut out = ConstraintJacobians {
        e: Vec::with_capacity(ne),
        c: Vec::with_capacity(nc),
        je: Mat::zeros(ne, np),
        jc: Mat::zeros(nc, np),
    };
    let zero = vec![0.0; problem.state_len()];
    for f in problem.functionals().into_iter().skip(1) {
        let adj = if problem.depends_on_state(f) {
            adjoints
                .iter()
                .find(|a| a.functional == f)
                .cloned()
                .ok_or(Error::MissingAdjoint(f))?
        } else {
            Adjoint {
                functional: f,
                lambda: zero.clone(),
                iterations: 0,
                residual: 0.0,
            }
        };
        let row = design.vjp(p, &mesh_covector(problem, u, &m, &adj))?;
        let value = problem.evaluate(f, u, &m);
        match f {
            Functional::Equality(k) => {
                out.e.push(value);
                out.je.row_mut(k).copy_from_slice(&row);
            }
            Functional::Inequality(l) => {
                out.c.push(value);
                out.jc.row_mut(l).copy_from_slice(&row);
            }
            Functional::Objective => unreachable!(),
        }
    }
    Ok(out)
}

/// Everything an optimizer iteration needs at one design point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub mesh: Vec<f64>,
    pub state: FixedPoint,
    /// One per functional in [`ModelProblem::functionals`] order.
    pub adjoints: Vec<Adjoint>,
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub constraints: ConstraintJacobians,
}

impl Evaluation {
    /// Total fixed-point iterations spent on state and adjoints.
    pub fn solver_iterations(&self) -> usize {
        self.state.iterations + self.adjoints.iter().map(|a| a.iterations).sum::<usize>()
    }
}

/// Warm-start values carried between designs.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub u: Vec<f64>,
    pub adjoints: Vec<Vec<f64>>,
}

impl From<&Evaluation> for WarmStart {
    fn from(e: &Evaluation) -> Self {
        Self {
            u: e.state.value.clone(),
            adjoints: e.adjoints.iter().map(|a| a.lambda.clone()).collect(),
        }
    }
}

/// Converged state, adjoints, objective, reduced gradient and constraint
/// Jacobians at `p`.
pub fn evaluate_design<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    warm: Option<&WarmStart>,
    opts: &SolverOptions,
) -> Result<Evaluation>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let m = design.mesh(p)?;
    let state = solve_state(problem, &m, warm.map(|w| w.u.as_slice()), opts)?;
    let u = &state.value;
    let adjoints = problem
        .functionals()
        .into_iter()
        .enumerate()
        .map(|(k, f)| {
            let init = warm.and_then(|w| w.adjoints.get(k)).map(Vec::as_slice);
            solve_adjoint(problem, u, &m, f, init, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let objective = problem.evaluate(Functional::Objective, u, &m);
    let gradient = reduced_gradient(problem, design, p, u, &adjoints[0], Functional::Objective)?;
    let constraints = constraint_values_and_jacobians(problem, design, p, u, &adjoints[1..])?;
    Ok(Evaluation {
        mesh: m,
        state,
        adjoints,
        objective,
        gradient,
        constraints,
    })
}

/// `F̃(p) = F(u(M(p)), M(p))` from a cold-started state solve.
pub fn reduced_objective<Q, P, V>(
    problem: &Q,
    design: &Design<'_, P, V>,
    p: &[f64],
    opts: &SolverOptions,
) -> Result<f64>
where
    Q: ModelProblem + ?Sized,
    P: SurfaceParameterization,
    V: MeshDeformation,
{
    let m = design.mesh(p)?;
    let u = solve_state(problem, &m, None, opts)?;
    Ok(problem.evaluate(Functional::Objective, &u.value, &m))
}

/// Per-node source term `b_i(m)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Source {
    /// `exp(−‖m_i − center‖² / width²)`
    Gaussian { center: Point, width: f64 },
    /// `⟨gradient, m_i⟩ + offset`
    Linear { gradient: Point, offset: f64 },
    /// Independent of the mesh.
    Constant(f64),
}

impl Source {
    fn value_and_gradient(&self, x: Point) -> (f64, Point) {
        match *self {
            Source::Gaussian { center, width } => {
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                let w2 = width * width;
                let b = exp(-(dx * dx + dy * dy) / w2);
                (b, [-2.0 * dx / w2 * b, -2.0 * dy / w2 * b])
            }
            Source::Linear { gradient, offset } => {
                (gradient[0] * x[0] + gradient[1] * x[1] + offset, gradient)
            }
            Source::Constant(c) => (c, [0.0, 0.0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    /// Weight of the graph Laplacian in `A = I + coupling·L`; 1 gives unit
    /// edge weights, 0 gives `A = I`.
    pub coupling: f64,
    /// Relaxation factor; `None` selects `1/(1 + max_i Σ_j |A_ij|)`.
    pub omega: Option<f64>,
    pub source: Source,
    pub gamma: f64,
    /// Target state on the surface nodes; empty means zero.
    pub target: Vec<f64>,
    /// Enables `E_1 = area − A₀`.
    pub area_target: Option<f64>,
    /// Enables `C_i = ‖s_i − center‖ − r_min` for every surface node.
    pub radius_min: Option<f64>,
    pub center: Point,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            coupling: 1.0,
            omega: None,
            source: Source::Gaussian {
                center: [1.6, 0.4],
                width: 0.8,
            },
            gamma: 0.05,
            target: Vec::new(),
            area_target: None,
            radius_min: None,
            center: [0.0, 0.0],
        }
    }
}

/// Built-in model problem on a layered annulus:
///
/// * `G(u, m) = u − ω (A u − b(m))` with `A = I + L_graph` fixed,
/// * `F(u, m) = ½‖P u − u_target‖² + γ · perimeter(Γ(m))`,
/// * `E_1(m) = area(Γ(m)) − A₀`, `C_i(m) = ‖s_i − c‖ − r_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnulusBenchmark {
    n_s: usize,
    n_nodes: usize,
    operator: SymSparse,
    omega: f64,
    source: Source,
    gamma: f64,
    target: Vec<f64>,
    area_target: Option<f64>,
    radius_min: Option<f64>,
    center: Point,
}

impl AnnulusBenchmark {
    pub fn new(volume: &VolumeMesh, config: BenchmarkConfig) -> Result<Self> {
        let n = volume.len();
        let n_s = volume.surface_len();
        if !(config.coupling >= 0.0) {
            return Err(Error::Domain(format!("coupling {} < 0", config.coupling)));
        }
        let mut builder = SymSparseBuilder::new(n);
        for i in 0..n {
            builder.add(i, i, 1.0);
        }
        if config.coupling > 0.0 {
            for &(i, j) in volume.edges() {
                builder.add(i, i, config.coupling);
                builder.add(j, j, config.coupling);
                builder.add(i, j, -config.coupling);
            }
        }
        let operator = builder.build();
        let omega = config
            .omega
            .unwrap_or_else(|| 1.0 / (1.0 + operator.abs_row_sum_max()));
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("relaxation factor {omega} must be positive")));
        }
        let target = if config.target.is_empty() {
            vec![0.0; n_s]
        } else {
            check_len("surface target", n_s, config.target.len())?;
            config.target
        };
        Ok(Self {
            n_s,
            n_nodes: n,
            operator,
            omega,
            source: config.source,
            gamma: config.gamma,
            target,
            area_target: config.area_target,
            radius_min: config.radius_min,
            center: config.center,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn operator(&self) -> &SymSparse {
        &self.operator
    }

    pub fn surface_len(&self) -> usize {
        self.n_s
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn set_target(&mut self, target: Vec<f64>) -> Result<()> {
        check_len("surface target", self.n_s, target.len())?;
        self.target = target;
        Ok(())
    }

    pub fn source_values(&self, m: &[f64]) -> Vec<f64> {
        m.chunks_exact(DIM)
            .map(|c| self.source.value_and_gradient([c[0], c[1]]).0)
            .collect()
    }

    fn surface<'m>(&self, m: &'m [f64]) -> &'m [f64] {
        &m[..DIM * self.n_s]
    }
}

impl ModelProblem for AnnulusBenchmark {
    fn state_len(&self) -> usize {
        self.n_nodes
    }

    fn mesh_len(&self) -> usize {
        DIM * self.n_nodes
    }

    fn n_equality(&self) -> usize {
        usize::from(self.area_target.is_some())
    }

    fn n_inequality(&self) -> usize {
        if self.radius_min.is_some() {
            self.n_s
        } else {
            0
        }
    }

    fn fixed_point(&self, u: &[f64], m: &[f64], out: &mut [f64]) {
        self.operator.matvec_into(u, out);
        for (i, c) in m.chunks_exact(DIM).enumerate() {
            let b = self.source.value_and_gradient([c[0], c[1]]).0;
            out[i] = u[i] - self.omega * (out[i] - b);
        }
    }

    fn state_adjoint_product(&self, _u: &[f64], _m: &[f64], v: &[f64], out: &mut [f64]) {
        self.operator.matvec_into(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - self.omega * *o;
        }
    }

    fn mesh_adjoint_product(&self, _u: &[f64], m: &[f64], v: &[f64], out: &mut [f64]) {
        for (i, c) in m.chunks_exact(DIM).enumerate() {
            let g = self.source.value_and_gradient([c[0], c[1]]).1;
            out[DIM * i] = self.omega * v[i] * g[0];
            out[DIM * i + 1] = self.omega * v[i] * g[1];
        }
    }

    fn evaluate(&self, f: Functional, u: &[f64], m: &[f64]) -> f64 {
        let s = self.surface(m);
        match f {
            Functional::Objective => {
                let mismatch: f64 = u[..self.n_s]
                    .iter()
                    .zip(&self.target)
                    .map(|(a, t)| (a - t) * (a - t))
                    .sum();
                0.5 * mismatch + self.gamma * geometry::perimeter(s, true)
            }
            Functional::Equality(_) => {
                geometry::signed_area(s) - self.area_target.unwrap_or(0.0)
            }
            Functional::Inequality(i) => {
                hypot(s[DIM * i] - self.center[0], s[DIM * i + 1] - self.center[1])
                    - self.radius_min.unwrap_or(0.0)
            }
        }
    }

    fn state_partial(&self, f: Functional, u: &[f64], _m: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if f == Functional::Objective {
            for i in 0..self.n_s {
                out[i] = u[i] - self.target[i];
            }
        }
    }

    fn mesh_partial(&self, f: Functional, _u: &[f64], m: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let s = self.surface(m);
        match f {
            Functional::Objective => {
                if self.gamma != 0.0 {
                    for (o, g) in out.iter_mut().zip(geometry::perimeter_gradient(s, true)) {
                        *o = self.gamma * g;
                    }
                }
            }
            Functional::Equality(_) => {
                out[..s.len()].copy_from_slice(&geometry::signed_area_gradient(s));
            }
            Functional::Inequality(i) => {
                let (dx, dy) = (s[DIM * i] - self.center[0], s[DIM * i + 1] - self.center[1]);
                let r = hypot(dx, dy);
                out[DIM * i] = dx / r;
                out[DIM * i + 1] = dy / r;
            }
        }
    }

    fn depends_on_state(&self, f: Functional) -> bool {
        f == Functional::Objective
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deform::build_volume;
    use crate::geometry::SurfaceMesh;
    use crate::param::{HicksHenneParam, Parameterization};

    /// `u = u − ω(A u − b)` on a fixed dense `A`, no mesh dependence.
    struct Affine {
        a: Mat,
        b: Vec<f64>,
        omega: f64,
        target: Vec<f64>,
    }

    impl ModelProblem for Affine {
        fn state_len(&self) -> usize {
            self.b.len()
        }
        fn mesh_len(&self) -> usize {
            0
        }
        fn n_equality(&self) -> usize {
            0
        }
        fn n_inequality(&self) -> usize {
            0
        }
        fn fixed_point(&self, u: &[f64], _m: &[f64], out: &mut [f64]) {
            let au = self.a.matvec(u);
            for i in 0..u.len() {
                out[i] = u[i] - self.omega * (au[i] - self.b[i]);
            }
        }
        fn state_adjoint_product(&self, _u: &[f64], _m: &[f64], v: &[f64], out: &mut [f64]) {
            let av = self.a.tmatvec(v);
            for i in 0..v.len() {
                out[i] = v[i] - self.omega * av[i];
            }
        }
        fn mesh_adjoint_product(&self, _u: &[f64], _m: &[f64], _v: &[f64], _out: &mut [f64]) {}
        fn evaluate(&self, _f: Functional, u: &[f64], _m: &[f64]) -> f64 {
            0.5 * u.iter().zip(&self.target).map(|(a, t)| (a - t) * (a - t)).sum::<f64>()
        }
        fn state_partial(&self, _f: Functional, u: &[f64], _m: &[f64], out: &mut [f64]) {
            for i in 0..u.len() {
                out[i] = u[i] - self.target[i];
            }
        }
        fn mesh_partial(&self, _f: Functional, _u: &[f64], _m: &[f64], _out: &mut [f64]) {}
    }

    fn two_by_two() -> Affine {
        Affine {
            a: Mat::from_rows(&[&[2.0, -1.0], &[-1.0, 2.0]]),
            b: vec![1.0, 1.0],
            omega: 0.4,
            target: vec![0.0, 0.0],
        }
    }

    fn annulus(config: BenchmarkConfig) -> (AnnulusBenchmark, Vec<f64>) {
        let s = SurfaceMesh::unit_circle(16, 1.0).unwrap();
        let (v, _) = build_volume(&s, 3, 3.0).unwrap();
        let m = v.coords();
        (AnnulusBenchmark::new(&v, config).unwrap(), m)
    }

    #[test]
    fn two_by_two_fixed_point_and_residual_identity() {
        let q = two_by_two();
        let opts = SolverOptions { tol: 1e-12, max_iter: 10_000 };
        let u = solve_state(&q, &[], None, &opts).unwrap();
        // Direct solve of A u = b.
        let direct = crate::linalg::spd_solve(&q.a, &q.b).unwrap();
        assert!(math::dist_inf(&u.value, &direct) < 1e-11);
        assert!((u.value[0] - 1.0).abs() < 1e-11 && (u.value[1] - 1.0).abs() < 1e-11);
        let au = q.a.matvec(&u.value);
        let r = math::dist_inf(&au, &q.b);
        assert!(r <= opts.tol / q.omega * (1.0 + 1e-9));
    }

    #[test]
    fn identity_operator_converges_in_one_step() {
        let (q, m) = annulus(BenchmarkConfig {
            coupling: 0.0,
            omega: Some(1.0),
            ..BenchmarkConfig::default()
        });
        let u = solve_state(&q, &m, None, &SolverOptions::default()).unwrap();
        assert_eq!(u.iterations, 1);
        assert_eq!(u.value, q.source_values(&m));
    }

    #[test]
    fn non_convergence_reports_residual() {
        let (q, m) = annulus(BenchmarkConfig::default());
        let err = solve_state(&q, &m, None, &SolverOptions { tol: 1e-12, max_iter: 5 }).unwrap_err();
        match err {
            Error::NonConvergence { iterations, residual } => {
                assert_eq!(iterations, 5);
                assert!(residual > 1e-12 && residual.is_finite());
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn default_omega_gives_contraction() {
        let (q, m) = annulus(BenchmarkConfig::default());
        let u = solve_state(&q, &m, None, &SolverOptions::default()).unwrap();
        let rho = contraction_estimate(&q, &u.value, &m, 1e-12, 10_000);
        assert!(1.0 - rho.value > 1e-3, "{rho:?}");
        // Eigenvalue of the constant mode is 1 − ω, the dominant one.
        assert!((rho.value - (1.0 - q.omega())).abs() < 1e-8);
    }

    #[test]
    fn adjoint_of_state_free_objective_is_zero() {
        let (q, m) = annulus(BenchmarkConfig {
            target: Vec::new(),
            source: Source::Constant(0.0),
            ..BenchmarkConfig::default()
        });
        let opts = SolverOptions::default();
        let u = solve_state(&q, &m, None, &opts).unwrap();
        let lam = solve_adjoint(&q, &u.value, &m, Functional::Objective, None, &opts).unwrap();
        assert!(lam.lambda.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adjoint_and_primal_iteration_counts_agree() {
        // Seed (D_u F)ᵀ = ω b, so both iterations contract the same error.
        let mut q = two_by_two();
        q.target = vec![-0.4, -0.4];
        let opts = SolverOptions { tol: 1e-10, max_iter: 10_000 };
        let u = solve_state(&q, &[], None, &opts).unwrap();
        let seed_like = solve_adjoint(&q, &[0.0, 0.0], &[], Functional::Objective, None, &opts).unwrap();
        assert!((seed_like.iterations as i64 - u.iterations as i64).abs() <= 2);
        let (bench, m) = annulus(BenchmarkConfig::default());
        let u = solve_state(&bench, &m, None, &opts).unwrap();
        let lam = solve_adjoint(&bench, &u.value, &m, Functional::Objective, None, &opts).unwrap();
        let resid = {
            let mut out = vec![0.0; bench.state_len()];
            let mut seed = vec![0.0; bench.state_len()];
            bench.state_adjoint_product(&u.value, &m, &lam.lambda, &mut out);
            bench.state_partial(Functional::Objective, &u.value, &m, &mut seed);
            math::axpy(1.0, &seed, &mut out);
            math::dist_inf(&out, &lam.lambda)
        };
        assert!(resid <= opts.tol);
    }

    #[test]
    fn piggyback_fixed_point_and_truncation() {
        let (q, m) = annulus(BenchmarkConfig::default());
        let opts = SolverOptions { tol: 1e-14, max_iter: 100_000 };
        let u = solve_state(&q, &m, None, &opts).unwrap();
        let lam = solve_adjoint(&q, &u.value, &m, Functional::Objective, None, &opts).unwrap();
        let state = PiggybackState {
            u: u.value.clone(),
            lambda_f: lam.lambda.clone(),
            lambda_e: vec![],
            lambda_c: vec![],
        };
        let next = piggyback_step(&q, &state, &m);
        let (dp, da) = next.distance(&state);
        assert!(dp <= 1e-12 && da <= 1e-12);

        // J steps with a frozen converged u equal the truncated adjoint solve.
        let mut s = PiggybackState { lambda_f: vec![0.0; q.state_len()], ..state.clone() };
        for _ in 0..7 {
            s = piggyback_step(&q, &s, &m);
            s.u = u.value.clone();
        }
        let truncated = iterate_to_tolerance(q.state_len(), None, &SolverOptions { tol: 1e-300, max_iter: 7 }, |l, out| {
            let mut seed = vec![0.0; q.state_len()];
            q.state_adjoint_product(&u.value, &m, l, out);
            q.state_partial(Functional::Objective, &u.value, &m, &mut seed);
            math::axpy(1.0, &seed, out);
        });
        assert!(truncated.is_err());
        let mut l = vec![0.0; q.state_len()];
        for _ in 0..7 {
            let mut out = vec![0.0; q.state_len()];
            let mut seed = vec![0.0; q.state_len()];
            q.state_adjoint_product(&u.value, &m, &l, &mut out);
            q.state_partial(Functional::Objective, &u.value, &m, &mut seed);
            math::axpy(1.0, &seed, &mut out);
            l = out;
        }
        assert_eq!(s.lambda_f, l);
    }

    #[test]
    fn stale_adjoint_is_rejected() {
        let s = SurfaceMesh::unit_circle(16, 1.0).unwrap();
        let (v, d) = build_volume(&s, 3, 3.0).unwrap();
        let q = AnnulusBenchmark::new(&v, BenchmarkConfig { area_target: Some(1.0), ..Default::default() }).unwrap();
        let hh = Parameterization::HicksHenne(HicksHenneParam::uniform(s, 2, 3.0).unwrap());
        let design = Design::new(&hh, &d).unwrap();
        let adj = Adjoint {
            functional: Functional::Equality(0),
            lambda: vec![0.0; q.state_len()],
            iterations: 0,
            residual: 0.0,
        };
        let err = reduced_gradient(&q, &design, &[0.0; 4], &vec![0.0; q.state_len()], &adj, Functional::Objective);
        assert!(matches!(err, Err(Error::StaleAdjoint { .. })));
    }
}
