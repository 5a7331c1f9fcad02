//! Ensembles of independent paths and fixed-path refinement studies.
//!
//! Samples run in parallel, but every aggregate is a sequential fold over
//! the sample index, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::diagnostics::{charge, coupling, energy};
use crate::error::{Result, SkgsError};
use crate::grid::{eval_initial, steps_for, FieldState, Grid1D, InitialData, PhysicsParams, SchemeConfig, SpatialKind};
use crate::integrators::{build_stepper_with, Stepper};
use crate::noise::{aggregate, sample_path, sample_seed, NoiseIncrement};
use crate::spatial::{build_operator, SpatialOperator};

/// Spatial profile of a noise term.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseProfile {
    /// `sin(π (x - a)/(b - a))`.
    Sine,
    /// Values at the interior nodes.
    Nodal(Vec<f64>),
}

impl NoiseProfile {
    /// Profile in the representation the operator works in: nodal samples,
    /// or the L2 projection for FEM (nodal data is read as its interpolant,
    /// which the projection leaves unchanged).
    pub fn resolve(&self, op: &SpatialOperator) -> Result<Vec<f64>> {
        let g = op.grid();
        match self {
            NoiseProfile::Nodal(v) => {
                if v.len() != g.interior_len() {
                    return Err(SkgsError::param(
                        "noise.eta",
                        format!("expected {} values, got {}", g.interior_len(), v.len()),
                    ));
                }
                Ok(v.clone())
            }
            NoiseProfile::Sine if op.kind() == SpatialKind::Fem => {
                let (a, len) = (g.a(), g.length());
                op.project_l2(|x| (std::f64::consts::PI * (x - a) / len).sin())
            }
            NoiseProfile::Sine => Ok(g.fundamental_sine()),
        }
    }
}

/// Amplitudes and profiles before they are bound to an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub c1: f64,
    pub c2: f64,
    pub eta1: NoiseProfile,
    pub eta2: NoiseProfile,
}

impl NoiseSpec {
    pub fn sine(c1: f64, c2: f64) -> Self {
        NoiseSpec {
            c1,
            c2,
            eta1: NoiseProfile::Sine,
            eta2: NoiseProfile::Sine,
        }
    }

    pub fn params_for(&self, op: &SpatialOperator) -> Result<PhysicsParams> {
        PhysicsParams::new(self.c1, self.c2, self.eta1.resolve(op)?, self.eta2.resolve(op)?)
    }
}

/// Everything needed to simulate one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid1D,
    pub scheme: SchemeConfig,
    pub noise: NoiseSpec,
    pub initial: InitialData,
}

/// Assembled operator, bound parameters and initial state for a problem.
#[derive(Debug, Clone)]
pub struct Setup {
    pub op: SpatialOperator,
    pub params: PhysicsParams,
    pub initial: FieldState,
}

impl ProblemSpec {
    pub fn setup(&self) -> Result<Setup> {
        self.scheme.validate()?;
        let op = build_operator(self.scheme.scheme.spatial(), &self.grid);
        let params = self.noise.params_for(&op)?;
        let initial = eval_initial(&self.initial, &self.grid)?;
        Ok(Setup { op, params, initial })
    }

    pub fn stepper(&self, setup: &Setup, dt: f64) -> Result<Stepper> {
        build_stepper_with(&self.scheme, setup.op.clone(), &setup.params, dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub problem: ProblemSpec,
    pub samples: usize,
    pub master_seed: u64,
    pub record_stride: usize,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(SkgsError::param("ensemble.samples", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(SkgsError::param("ensemble.record_stride", "must be at least 1"));
        }
        self.problem.scheme.validate()
    }
}

/// Per-step ensemble mean and standard error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Recorded diagnostics of one path or an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionRecord {
    pub samples: usize,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub charge: SeriesStats,
    pub energy: SeriesStats,
    /// `⟨U^n, η1²⟩` at the recorded steps.
    pub coupling: SeriesStats,
    /// `Σ_{i<n} ⟨U^i, η1²⟩ dt`, accumulated at every step.
    pub cumulative_coupling: SeriesStats,
    /// Per-path `H^n - H^0 - rate t_n - 4 C1² Σ_{i<n} ⟨U^i, η1²⟩ dt`.
    pub energy_residual: SeriesStats,
}

/// Raw values of one path at the recorded steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub charge: Vec<f64>,
    pub energy: Vec<f64>,
    pub coupling: Vec<f64>,
    pub cumulative_coupling: Vec<f64>,
    pub energy_residual: Vec<f64>,
    pub final_state: FieldState,
}

/// Steps `0, stride, 2 stride, …` plus the final step.
pub fn recorded_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=n_steps).step_by(stride.max(1)).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

/// Runs one path through `incs`, recording at the given steps.
pub fn run_path(
    stepper: &Stepper,
    params: &PhysicsParams,
    initial: &FieldState,
    incs: &[NoiseIncrement],
    record_at: &[usize],
) -> Result<PathRecord> {
    let op = stepper.operator();
    let dt = stepper.dt();
    let rate = crate::diagnostics::energy_drift_rate(params, op);
    let c1sq = params.c1 * params.c1;
    let cap = record_at.len();
    let mut rec = PathRecord {
        charge: Vec::with_capacity(cap),
        energy: Vec::with_capacity(cap),
        coupling: Vec::with_capacity(cap),
        cumulative_coupling: Vec::with_capacity(cap),
        energy_residual: Vec::with_capacity(cap),
        final_state: initial.clone(),
    };
    let mut state = initial.clone();
    let h0 = energy(&state, op);
    let mut cum = 0.0;
    let mut next = 0;
    for n in 0..=incs.len() {
        let cpl = coupling(&state, op, &params.eta1);
        if next < record_at.len() && record_at[next] == n {
            let h = energy(&state, op);
            rec.charge.push(charge(&state, op));
            rec.energy.push(h);
            rec.coupling.push(cpl);
            rec.cumulative_coupling.push(cum);
            rec.energy_residual.push(h - h0 - rate * n as f64 * dt - 4.0 * c1sq * cum);
            next += 1;
        }
        if n == incs.len() {
            break;
        }
        cum += cpl * dt;
        state = stepper.step(&state, &incs[n]).map_err(|e| SkgsError::Sample {
            sample: 0,
            step: n + 1,
            source: Box::new(e),
        })?;
    }
    rec.final_state = state;
    Ok(rec)
}

/// Welford accumulator over a vector of series.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(len: usize) -> Self {
        Welford {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let k = self.n as f64;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / k;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    fn finish(self) -> SeriesStats {
        let n = self.n as f64;
        let stderr = self
            .m2
            .iter()
            .map(|m2| {
                if self.n < 2 {
                    0.0
                } else {
                    (m2 / (n - 1.0)).sqrt() / n.sqrt()
                }
            })
            .collect();
        SeriesStats {
            mean: self.mean,
            stderr,
        }
    }
}

/// Runs `f` on a pool of `threads` workers (or the global pool for `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(SkgsError::param("threads", "must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| SkgsError::Usage(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

const CHUNK: usize = 64;

/// Runs the ensemble and returns per-step means and standard errors.
pub fn run_ensemble(spec: &EnsembleSpec, threads: Option<usize>) -> Result<EvolutionRecord> {
    spec.validate()?;
    let problem = &spec.problem;
    let setup = problem.setup()?;
    let dt = problem.scheme.dt;
    let n_steps = problem.scheme.n_steps()?;
    let stepper = problem.stepper(&setup, dt)?;
    let steps = recorded_steps(n_steps, spec.record_stride);
    let len = steps.len();
    let mut acc: Vec<Welford> = (0..5).map(|_| Welford::new(len)).collect();

    with_threads(threads, || -> Result<()> {
        let mut start = 0;
        while start < spec.samples {
            let end = (start + CHUNK).min(spec.samples);
            let chunk: Vec<Result<PathRecord>> = (start..end)
                .into_par_iter()
                .map(|j| {
                    let path = sample_path(sample_seed(spec.master_seed, j as u64), dt, n_steps)?;
                    run_path(&stepper, &setup.params, &setup.initial, &path.increments, &steps).map_err(|e| {
                        match e {
                            SkgsError::Sample { step, source, .. } => SkgsError::Sample { sample: j, step, source },
                            other => other,
                        }
                    })
                })
                .collect();
            for rec in chunk {
                let rec = rec?;
                acc[0].push(&rec.charge);
                acc[1].push(&rec.energy);
                acc[2].push(&rec.coupling);
                acc[3].push(&rec.cumulative_coupling);
                acc[4].push(&rec.energy_residual);
            }
            start = end;
        }
        Ok(())
    })??;

    let mut it = acc.into_iter().map(Welford::finish);
    Ok(EvolutionRecord {
        samples: spec.samples,
        times: steps.iter().map(|&n| n as f64 * dt).collect(),
        steps,
        charge: it.next().unwrap(),
        energy: it.next().unwrap(),
        coupling: it.next().unwrap(),
        cumulative_coupling: it.next().unwrap(),
        energy_residual: it.next().unwrap(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub problem: ProblemSpec,
    /// Strictly descending coarse steps.
    pub dt_list: Vec<f64>,
    pub reference_dt: f64,
    pub samples: usize,
    pub master_seed: u64,
}

impl ConvergenceSpec {
    /// Returns `(reference step count, aggregation factor per dt)`.
    pub fn validate(&self) -> Result<(usize, Vec<usize>)> {
        if self.samples == 0 {
            return Err(SkgsError::param("convergence.samples", "must be at least 1"));
        }
        if self.dt_list.is_empty() {
            return Err(SkgsError::param("convergence.dt_list", "must not be empty"));
        }
        if self.dt_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(SkgsError::param("convergence.dt_list", "must be strictly descending"));
        }
        let t = self.problem.scheme.t_final;
        let n_ref = steps_for(t, self.reference_dt)?;
        let mut factors = Vec::with_capacity(self.dt_list.len());
        for &dt in &self.dt_list {
            let k = (dt / self.reference_dt).round();
            if k < 1.0 || (k * self.reference_dt - dt).abs() > 1e-12 * dt {
                return Err(SkgsError::param(
                    "convergence.dt_list",
                    format!("dt = {dt} is not a multiple of reference_dt = {}", self.reference_dt),
                ));
            }
            let k = k as usize;
            if n_ref % k != 0 {
                return Err(SkgsError::param(
                    "convergence.dt_list",
                    format!("t_final is not a whole number of steps of {dt}"),
                ));
            }
            factors.push(k);
        }
        Ok((n_ref, factors))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub dt: Vec<f64>,
    pub rms_error: Vec<f64>,
    /// Least-squares slope of `log rms` against `log dt`; `None` with fewer
    /// than two positive errors.
    pub slope: Option<f64>,
    pub samples: usize,
}

/// `h Σ` over the four fields of the squared difference.
pub fn squared_distance(a: &FieldState, b: &FieldState, grid: &Grid1D) -> f64 {
    grid.h()
        * a.fields()
            .iter()
            .zip(b.fields())
            .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)))
            .sum::<f64>()
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Mean-square error of each coarse step against the same scheme at
/// `reference_dt`, all runs of a sample driven by one Brownian path.
pub fn run_convergence(spec: &ConvergenceSpec, threads: Option<usize>) -> Result<ConvergenceTable> {
    let (n_ref, factors) = spec.validate()?;
    let problem = &spec.problem;
    let setup = problem.setup()?;
    let reference = problem.stepper(&setup, spec.reference_dt)?;
    let coarse: Vec<Stepper> = spec
        .dt_list
        .iter()
        .map(|&dt| problem.stepper(&setup, dt))
        .collect::<Result<_>>()?;
    let grid = &problem.grid;
    let mut sums = vec![0.0; spec.dt_list.len()];

    with_threads(threads, || -> Result<()> {
        let mut start = 0;
        while start < spec.samples {
            let end = (start + CHUNK).min(spec.samples);
            let chunk: Vec<Result<Vec<f64>>> = (start..end)
                .into_par_iter()
                .map(|j| {
                    let tag = |e: SkgsError| match e {
                        SkgsError::Sample { step, source, .. } => SkgsError::Sample { sample: j, step, source },
                        other => other,
                    };
                    let path = sample_path(sample_seed(spec.master_seed, j as u64), spec.reference_dt, n_ref)?;
                    let last = [n_ref];
                    let xr = run_path(&reference, &setup.params, &setup.initial, &path.increments, &last)
                        .map_err(tag)?
                        .final_state;
                    factors
                        .iter()
                        .zip(&coarse)
                        .map(|(&k, st)| {
                            let incs = aggregate(&path, k)?;
                            let xc = run_path(st, &setup.params, &setup.initial, &incs, &[incs.len()])
                                .map_err(tag)?
                                .final_state;
                            Ok(squared_distance(&xc, &xr, grid))
                        })
                        .collect()
                })
                .collect();
            for errs in chunk {
                for (s, e) in sums.iter_mut().zip(errs?) {
                    *s += e;
                }
            }
            start = end;
        }
        Ok(())
    })??;

    let rms: Vec<f64> = sums.iter().map(|s| (s / spec.samples as f64).sqrt()).collect();
    Ok(ConvergenceTable {
        slope: log_log_slope(&spec.dt_list, &rms),
        dt: spec.dt_list.clone(),
        rms_error: rms,
        samples: spec.samples,
    })
}
