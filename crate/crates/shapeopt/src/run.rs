//! `run`: executes the configured optimizer and writes its artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use shapeopt_core::model::solve_state;
use shapeopt_core::oneshot::{oneshot_constrained, oneshot_multistep};
use shapeopt_core::optim::{gradient_descent_projected, sqp_equality, sqp_mixed, Clock, NoClock, OptHistory};
use shapeopt_core::sobolev::{assemble_hybrid_operator, assemble_surface_operators, OperatorDomain};

use crate::config::{Algorithm, FormulationConfig, RunConfig, OUTPUT_DIR_ENV};
use crate::formats;
use crate::scenario::Scenario;

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub seed: u64,
    pub algorithm: &'static str,
    pub termination: &'static str,
    pub n_params: usize,
    /// Design updates applied.
    pub iterations: usize,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub e_max: f64,
    pub c_min: Option<f64>,
    pub grad_norm: f64,
    /// Fixed-point iterations spent by the whole optimization.
    pub solver_iterations: usize,
    /// Fixed-point iterations of one converged state solve at the initial
    /// design, the baseline of the iteration retardation factor.
    pub single_solve_iterations: usize,
    /// Present only with `output.timing`.
    pub single_solve_time_s: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub p: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
}

pub struct RunOutput {
    pub history: OptHistory,
    pub summary: Summary,
    pub final_mesh: Vec<f64>,
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(&cfg.output.directory),
    }
}

pub fn execute(cfg: &RunConfig, sc: &Scenario) -> Result<RunOutput> {
    let design = sc.design();
    let wall = WallClock::start();
    let clock: &dyn Clock = if cfg.output.timing { &wall } else { &NoClock };

    let t = Instant::now();
    let m0 = design.mesh(&sc.p0).context("initial design")?;
    let single = solve_state(&sc.problem, &m0, None, &sc.solver).context("state solve at the initial design")?;
    let single_time = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let op = &cfg.optimizer;
    let history = match op.algorithm {
        Algorithm::SqpEq => sqp_equality(&sc.problem, &design, &sc.p0, sc.hessian(cfg), &sc.sqp_options(cfg), clock),
        Algorithm::SqpMixed => sqp_mixed(&sc.problem, &design, &sc.p0, sc.hessian(cfg), &sc.sqp_options(cfg), clock),
        Algorithm::GradDesc => {
            gradient_descent_projected(&sc.problem, &design, &sc.p0, op.step, &sc.sqp_options(cfg), clock)
        }
        Algorithm::Oneshot => oneshot_multistep(&sc.problem, &design, &sc.p0, &sc.oneshot_config(cfg), clock),
        Algorithm::OneshotConstrained => {
            oneshot_constrained(&sc.problem, &design, &sc.p0, &sc.oneshot_config(cfg), clock)
        }
    }
    .with_context(|| format!("{} failed", op.algorithm.as_str()))?;
    let run_time = t.elapsed().as_secs_f64();

    let first = &history.records[0];
    let last = history.last();
    let summary = Summary {
        preset: cfg.preset.clone(),
        seed: cfg.seed,
        algorithm: op.algorithm.as_str(),
        termination: history.termination.as_str(),
        n_params: design.n_params(),
        iterations: history.steps,
        objective_initial: first.objective,
        objective_final: last.objective,
        e_max: last.e_max,
        c_min: last.c_min,
        grad_norm: last.grad_norm,
        solver_iterations: history.solver_iterations,
        single_solve_iterations: single.iterations,
        single_solve_time_s: cfg.output.timing.then_some(single_time),
        wall_time_s: cfg.output.timing.then_some(run_time),
        p: history.p.clone(),
        nu: history.nu.clone(),
        mu: history.mu.clone(),
    };
    let final_mesh = design.mesh(&history.p).context("final design")?;
    Ok(RunOutput {
        history,
        summary,
        final_mesh,
    })
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    written.push(path);
    Ok(BufWriter::new(f))
}

/// Writes every artifact of `out` into `dir` and returns their paths.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, sc: &Scenario, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    formats::write_history(create(dir, "history.csv", &mut written)?, &out.history)?;
    serde_json::to_writer_pretty(create(dir, "summary.json", &mut written)?, &out.summary)?;
    let n_s = sc.surface.len();
    let nodes: Vec<[f64; 2]> = out.final_mesh[..2 * n_s].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    formats::write_surface(create(dir, "surface.csv", &mut written)?, &nodes)?;
    if cfg.optimizer.algorithm.is_oneshot() {
        formats::write_piggyback(create(dir, "piggyback_residuals.csv", &mut written)?, &out.history.piggyback)?;
    }
    if cfg.output.dump_volume {
        let volume = sc.volume.with_coords(&out.final_mesh)?;
        formats::write_volume(create(dir, "volume.csv", &mut written)?, &volume)?;
    }
    if cfg.output.dump_operators {
        let design = sc.design();
        let surface = design.surface(&out.history.p)?;
        let ops = assemble_surface_operators(&surface)?;
        formats::write_matrix_market_sparse(create(dir, "mass.mtx", &mut written)?, &ops.mass, "surface mass matrix")?;
        formats::write_matrix_market_sparse(
            create(dir, "stiffness.mtx", &mut written)?,
            &ops.stiffness,
            "surface stiffness matrix",
        )?;
        let domain = match cfg.smoothing.formulation {
            FormulationConfig::Surface => OperatorDomain::Surface,
            FormulationConfig::Volume => OperatorDomain::Volume(&sc.volume),
        };
        let b = assemble_hybrid_operator(&design, &out.history.p, Scenario::weights(cfg), domain)?;
        formats::write_matrix_market_dense(create(dir, "hybrid.mtx", &mut written)?, &b.b, "hybrid operator B")?;
    }
    Ok(written)
}
