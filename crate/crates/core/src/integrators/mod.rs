//! One-step maps for the eight fully-discrete schemes.

pub mod linear_implicit;
pub mod msfd;
pub mod srk;
pub mod tableau;

pub use linear_implicit::LinearImplicit;
pub use msfd::{step_msfd, MultiSymState};
pub use srk::{RkForm, RungeKutta, StageSolverOptions};
pub use tableau::{gauss_legendre, make_parametric_tableau, ButcherTableau, ParametricGaussSpec};

use crate::error::Result;
use crate::grid::{FieldState, Grid1D, PhysicsParams, SchemeConfig, SchemeKind};
use crate::noise::NoiseIncrement;
use crate::spatial::{build_operator, SpatialOperator};

/// Any of the schemes, ready to step.
#[derive(Debug, Clone)]
pub enum Stepper {
    Linear(LinearImplicit),
    RungeKutta(RungeKutta),
}

impl Stepper {
    pub fn step(&self, state: &FieldState, inc: &NoiseIncrement) -> Result<FieldState> {
        match self {
            Stepper::Linear(s) => s.step(state, inc),
            Stepper::RungeKutta(s) => s.step(state, inc),
        }
    }

    pub fn operator(&self) -> &SpatialOperator {
        match self {
            Stepper::Linear(s) => s.operator(),
            Stepper::RungeKutta(s) => s.operator(),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            Stepper::Linear(s) => s.dt(),
            Stepper::RungeKutta(s) => s.dt(),
        }
    }
}

/// Tableau requested by a scheme configuration.
pub fn tableau_for(cfg: &SchemeConfig) -> Result<ButcherTableau> {
    make_parametric_tableau(&ParametricGaussSpec {
        stages: cfg.stages,
        alpha: cfg.alpha.clone(),
    })
}

/// Builds the stepper for `cfg` with time step `dt` (which may differ from
/// `cfg.dt` in refinement studies). `params` must already be in the
/// scheme's representation (see [`LinearImplicit::new`]).
pub fn build_stepper(cfg: &SchemeConfig, grid: &Grid1D, params: &PhysicsParams, dt: f64) -> Result<Stepper> {
    let op = build_operator(cfg.scheme.spatial(), grid);
    build_stepper_with(cfg, op, params, dt)
}

/// As [`build_stepper`], reusing an assembled operator.
pub fn build_stepper_with(
    cfg: &SchemeConfig,
    op: SpatialOperator,
    params: &PhysicsParams,
    dt: f64,
) -> Result<Stepper> {
    match cfg.scheme {
        SchemeKind::FdSrk | SchemeKind::Msfd => {
            let form = if cfg.scheme == SchemeKind::Msfd {
                RkForm::MultiSymplectic
            } else {
                RkForm::Symplectic
            };
            let opts = StageSolverOptions {
                tol: cfg.fp_tol,
                max_iter: cfg.fp_max_iter,
                literal_mixed_index: cfg.literal_mixed_index && cfg.scheme == SchemeKind::Msfd,
            };
            Ok(Stepper::RungeKutta(RungeKutta::new(
                form,
                op,
                params.clone(),
                dt,
                tableau_for(cfg)?,
                opts,
            )?))
        }
        kind => Ok(Stepper::Linear(LinearImplicit::new(
            kind,
            op,
            params.clone(),
            dt,
            cfg.noise_coupling,
        )?)),
    }
}
