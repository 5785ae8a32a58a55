//! Builds the model problem, parameterization and optimizer settings a
//! [`RunConfig`] describes.

use anyhow::{bail, Context, Result};
use shapeopt_core::deform::{build_volume, Design, RadialBlendDeformer};
use shapeopt_core::geometry::{signed_area, SurfaceMesh, VolumeMesh, DIM};
use shapeopt_core::model::{solve_state, AnnulusBenchmark, BenchmarkConfig, SolverOptions, Source};
use shapeopt_core::oneshot::OneShotConfig;
use shapeopt_core::optim::{HessianModel, SqpOptions};
use shapeopt_core::param::{
    AngularBasis, Axis, Bump, FfdParam, HicksHenneParam, NonlinearRadialParam, Parameterization, Side,
    SurfaceParameterization,
};
use shapeopt_core::qp::Regularization;
use shapeopt_core::sobolev::{OperatorDomain, SmoothingWeights};

use crate::config::*;

pub type RunDesign<'a> = Design<'a, Parameterization, RadialBlendDeformer>;

pub struct Scenario {
    pub surface: SurfaceMesh,
    pub volume: VolumeMesh,
    pub deformer: RadialBlendDeformer,
    pub param: Parameterization,
    pub problem: AnnulusBenchmark,
    pub p0: Vec<f64>,
    pub solver: SolverOptions,
}

fn parameterization(cfg: &ParamConfig, surface: &SurfaceMesh, center: [f64; 2]) -> Result<Parameterization> {
    let s = surface.clone();
    Ok(match cfg.kind {
        ParamKind::HicksHenne => Parameterization::HicksHenne(match &cfg.peaks {
            Some(peaks) => {
                let bumps = [Side::Upper, Side::Lower]
                    .into_iter()
                    .flat_map(|side| peaks.iter().map(move |&peak| Bump { peak, side }))
                    .collect();
                HicksHenneParam::new(s, bumps, cfg.exponent)?
            }
            None => HicksHenneParam::uniform(s, cfg.per_side, cfg.exponent)?,
        }),
        ParamKind::Ffd => {
            let axis = match cfg.axis {
                AxisConfig::X => Axis::X,
                AxisConfig::Y => Axis::Y,
            };
            Parameterization::Ffd(FfdParam::around(s, cfg.nx, cfg.ny, cfg.margin, axis)?)
        }
        ParamKind::NonlinearRadial => {
            let basis = match cfg.basis {
                BasisKind::Fourier => AngularBasis::Fourier(cfg.modes),
                BasisKind::Nodal => AngularBasis::Nodal,
            };
            Parameterization::NonlinearRadial(NonlinearRadialParam::new(s, center, basis, cfg.alpha)?)
        }
    })
}

fn initial_design(cfg: &ParamConfig, param: &Parameterization, center: [f64; 2]) -> Result<Vec<f64>> {
    let n = param.n_params();
    Ok(match &cfg.initial {
        InitialDesign::Reference(_) => vec![0.0; n],
        InitialDesign::Values(v) => {
            if v.len() != n {
                bail!("parameterization.initial: expected {n} values, got {}", v.len());
            }
            v.clone()
        }
        InitialDesign::Modes(m) => param
            .baseline()
            .nodes()
            .iter()
            .map(|x| {
                let t = (x[1] - center[1]).atan2(x[0] - center[0]);
                m.radial_modes.iter().map(|[k, a, b]| a * (k * t).cos() + b * (k * t).sin()).sum()
            })
            .collect(),
    })
}

impl Scenario {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let pr = &cfg.problem;
        let surface = SurfaceMesh::unit_circle(pr.n_s, 1.0)?;
        let (volume, deformer) = build_volume(&surface, pr.layers, pr.outer_radius)?;
        let param = parameterization(&cfg.parameterization, &surface, pr.center)?;
        let p0 = initial_design(&cfg.parameterization, &param, pr.center)?;
        let solver = SolverOptions {
            tol: pr.solver_tol,
            max_iter: pr.solver_max_iter,
        };
        let design = Design::new(&param, &deformer)?;
        let area_target = match &pr.area_target {
            None => None,
            Some(ValueOrReference::Value(a)) => Some(*a),
            Some(ValueOrReference::Reference(Reference::Initial)) => {
                let m = design.mesh(&p0).context("initial design")?;
                Some(signed_area(&m[..DIM * pr.n_s]))
            }
            Some(ValueOrReference::Reference(_)) => Some(surface.signed_area()?),
        };
        let mut problem = AnnulusBenchmark::new(
            &volume,
            BenchmarkConfig {
                coupling: pr.coupling,
                omega: pr.omega,
                source: match pr.source {
                    SourceConfig::Gaussian { center, width } => Source::Gaussian { center, width },
                    SourceConfig::Linear { gradient, offset } => Source::Linear { gradient, offset },
                    SourceConfig::Constant { value } => Source::Constant(value),
                },
                gamma: pr.gamma,
                target: match &pr.target {
                    ValueOrReference::Value(t) => t.clone(),
                    ValueOrReference::Reference(_) => Vec::new(),
                },
                area_target,
                radius_min: pr.radius_min,
                center: pr.center,
            },
        )?;
        if pr.target == ValueOrReference::Reference(Reference::Baseline) {
            let u = solve_state(&problem, &volume.coords(), None, &solver).context("baseline state")?;
            problem.set_target(u.value[..pr.n_s].to_vec())?;
        }
        Ok(Self {
            surface,
            volume,
            deformer,
            param,
            problem,
            p0,
            solver,
        })
    }

    pub fn design(&self) -> RunDesign<'_> {
        Design::new(&self.param, &self.deformer).expect("dimensions checked at build")
    }

    pub fn weights(cfg: &RunConfig) -> SmoothingWeights {
        let s = &cfg.smoothing;
        SmoothingWeights {
            identity_as_matrix: s.identity_as_matrix,
            ..SmoothingWeights::new(s.eps1, s.eps2, s.eps3)
        }
    }

    pub fn hessian(&self, cfg: &RunConfig) -> HessianModel<'_> {
        let op = &cfg.optimizer;
        match op.hessian {
            HessianKind::Sobolev => HessianModel::Sobolev {
                weights: Self::weights(cfg),
                domain: match cfg.smoothing.formulation {
                    FormulationConfig::Surface => OperatorDomain::Surface,
                    FormulationConfig::Volume => OperatorDomain::Volume(&self.volume),
                },
            },
            HessianKind::Identity => HessianModel::Identity(op.identity_scale),
            HessianKind::FiniteDifference => HessianModel::FiniteDifference { h: op.fd_step },
        }
    }

    fn regularization(cfg: &RunConfig) -> Regularization {
        match cfg.optimizer.regularization {
            RegularizationConfig::Fixed(c) => Regularization::Fixed(c),
            RegularizationConfig::Auto(_) => Regularization::Auto,
        }
    }

    pub fn sqp_options(&self, cfg: &RunConfig) -> SqpOptions {
        let op = &cfg.optimizer;
        SqpOptions {
            tol: op.tol,
            max_iter: op.max_iter,
            solver: self.solver,
            step_cap: op.max_design_update,
            regularization: Self::regularization(cfg),
            warm_start: op.warm_start,
        }
    }

    pub fn oneshot_config(&self, cfg: &RunConfig) -> OneShotConfig<'_> {
        let op = &cfg.optimizer;
        let mut os = OneShotConfig::new(self.hessian(cfg));
        os.inner_steps = op.inner_steps;
        os.max_design_update = op.max_design_update.unwrap_or(os.max_design_update);
        os.outer_iters = op.max_iter;
        os.tol = op.tol;
        os.adjoint_carryover = op.adjoint_carryover;
        os.solver = self.solver;
        os.regularization = Self::regularization(cfg);
        os.divergence_factor = op.divergence_factor;
        os
    }
}
