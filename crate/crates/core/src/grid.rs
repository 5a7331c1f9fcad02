//! Domain geometry, solution state, physical parameters and scheme
//! configuration shared by every other module.
//!
//! The state follows the real-variable form of the system: `phi = p + i q`,
//! the meson field `u` and `v = u_t / 2`. Only interior nodes
//! `x_i = a + i h`, `i = 1..M-1`, are stored; the homogeneous Dirichlet
//! boundary values are implicit zeros.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SkgsError};

/// Uniform partition of `[a, b]` into `cells` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    cells: usize,
    h: f64,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(SkgsError::param("grid", "endpoints must be finite"));
        }
        if b <= a {
            return Err(SkgsError::param("grid.b", format!("need b > a, got a = {a}, b = {b}")));
        }
        if cells < 2 {
            return Err(SkgsError::param("grid.cells", format!("need at least 2 cells, got {cells}")));
        }
        Ok(Grid1D {
            a,
            b,
            cells,
            h: (b - a) / cells as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Number of interior nodes, `M - 1`.
    pub fn interior_len(&self) -> usize {
        self.cells - 1
    }

    /// Coordinate of node `i` (`0..=M`), measured from the nearer endpoint.
    pub fn node(&self, i: usize) -> f64 {
        if 2 * i <= self.cells {
            self.a + i as f64 * self.h
        } else {
            self.b - (self.cells - i) as f64 * self.h
        }
    }

    /// Interior node coordinates `x_1..x_{M-1}`.
    pub fn interior_nodes(&self) -> Vec<f64> {
        (1..self.cells).map(|i| self.node(i)).collect()
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (1..self.cells).map(|i| f(self.node(i))).collect()
    }

    /// `sin(pi (x - a) / (b - a))`, the default noise profile.
    pub fn fundamental_sine(&self) -> Vec<f64> {
        let (a, len) = (self.a, self.length());
        self.sample(|x| (PI * (x - a) / len).sin())
    }
}

/// Builds a grid, rejecting `cells < 2` and `b <= a`.
pub fn make_grid(a: f64, b: f64, cells: usize) -> Result<Grid1D> {
    Grid1D::new(a, b, cells)
}

/// Interior nodal values of `p, q, u, v` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        FieldState {
            p: vec![0.0; n],
            q: vec![0.0; n],
            u: vec![0.0; n],
            v: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.iter().all(|x| x.is_finite()))
    }

    pub fn fields(&self) -> [&[f64]; 4] {
        [&self.p, &self.q, &self.u, &self.v]
    }

    /// `u_t = 2 v`, the quantity reported to users.
    pub fn u_t(&self) -> Vec<f64> {
        self.v.iter().map(|v| 2.0 * v).collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if [self.p.len(), self.q.len(), self.u.len(), self.v.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(SkgsError::param(
                "state",
                format!("all fields must have length {n}"),
            ));
        }
        Ok(())
    }
}

/// Noise amplitudes and spatial profiles sampled at the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsParams {
    pub c1: f64,
    pub c2: f64,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
}

impl PhysicsParams {
    pub fn new(c1: f64, c2: f64, eta1: Vec<f64>, eta2: Vec<f64>) -> Result<Self> {
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(SkgsError::param("noise", "amplitudes must be finite"));
        }
        if eta1.len() != eta2.len() {
            return Err(SkgsError::param("noise", "eta1 and eta2 lengths differ"));
        }
        if eta1.iter().chain(&eta2).any(|x| !x.is_finite()) {
            return Err(SkgsError::param("noise", "profiles must be finite"));
        }
        Ok(PhysicsParams { c1, c2, eta1, eta2 })
    }

    /// Both profiles equal to `sin(pi (x - a) / (b - a))`.
    pub fn with_sine_profiles(grid: &Grid1D, c1: f64, c2: f64) -> Result<Self> {
        let eta = grid.fundamental_sine();
        Self::new(c1, c2, eta.clone(), eta)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.eta1.len() != n {
            return Err(SkgsError::param(
                "noise",
                format!("profiles have length {}, grid has {n} interior nodes", self.eta1.len()),
            ));
        }
        Ok(())
    }
}

/// The eight fully-discrete schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "CFD-I")]
    CfdI,
    #[serde(rename = "CFD-II")]
    CfdII,
    #[serde(rename = "SPS-I")]
    SpsI,
    #[serde(rename = "SPS-II")]
    SpsII,
    #[serde(rename = "FEM-I")]
    FemI,
    #[serde(rename = "FEM-II")]
    FemII,
    #[serde(rename = "FD-SRK")]
    FdSrk,
    #[serde(rename = "MSFD")]
    Msfd,
}

/// Which spatial discretization a scheme is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpatialKind {
    CentralDiff,
    SineSpectral,
    Fem,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 8] = [
        SchemeKind::CfdI,
        SchemeKind::CfdII,
        SchemeKind::SpsI,
        SchemeKind::SpsII,
        SchemeKind::FemI,
        SchemeKind::FemII,
        SchemeKind::FdSrk,
        SchemeKind::Msfd,
    ];

    /// The six linearly implicit schemes with proven averaged evolution laws.
    pub const EVOLUTION_LAW_FAMILY: [SchemeKind; 6] = [
        SchemeKind::CfdI,
        SchemeKind::CfdII,
        SchemeKind::SpsI,
        SchemeKind::SpsII,
        SchemeKind::FemI,
        SchemeKind::FemII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::CfdI => "CFD-I",
            SchemeKind::CfdII => "CFD-II",
            SchemeKind::SpsI => "SPS-I",
            SchemeKind::SpsII => "SPS-II",
            SchemeKind::FemI => "FEM-I",
            SchemeKind::FemII => "FEM-II",
            SchemeKind::FdSrk => "FD-SRK",
            SchemeKind::Msfd => "MSFD",
        }
    }

    pub fn spatial(self) -> SpatialKind {
        match self {
            SchemeKind::CfdI | SchemeKind::CfdII | SchemeKind::FdSrk | SchemeKind::Msfd => {
                SpatialKind::CentralDiff
            }
            SchemeKind::SpsI | SchemeKind::SpsII => SpatialKind::SineSpectral,
            SchemeKind::FemI | SchemeKind::FemII => SpatialKind::Fem,
        }
    }

    /// Midpoint (`-II`) variant of the linearly implicit family.
    pub fn is_midpoint(self) -> bool {
        matches!(self, SchemeKind::CfdII | SchemeKind::SpsII | SchemeKind::FemII)
    }

    pub fn is_runge_kutta(self) -> bool {
        matches!(self, SchemeKind::FdSrk | SchemeKind::Msfd)
    }

    pub fn has_evolution_laws(self) -> bool {
        !self.is_runge_kutta()
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = SkgsError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| SkgsError::param("scheme", format!("unknown scheme `{s}`")))
    }
}

/// How the noise-dependent correction enters the `v` update of the
/// linearly implicit schemes.
///
/// `Splitting` is the explicit-kick-then-conservative-step form, whose
/// deterministic substep conserves charge and energy per path. `Paper`
/// uses `dt * C1^2 eta1^2` where the splitting form has
/// `C1^2 eta1^2 (dB0^2 + dB1^2) / 2`; both agree in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseCoupling {
    Paper,
    #[default]
    Splitting,
}

/// Scheme selection and time-stepping controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub t_final: f64,
    /// Parameters of the parametric Gauss family, length `stages - 1`
    /// (missing entries are zero).
    pub alpha: Vec<f64>,
    pub stages: usize,
    pub noise_coupling: NoiseCoupling,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// MSFD only: use the end-of-step `U^n` in the momentum stage product.
    pub literal_mixed_index: bool,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, dt: f64, t_final: f64) -> Self {
        SchemeConfig {
            scheme,
            dt,
            t_final,
            alpha: vec![0.001],
            stages: 2,
            noise_coupling: NoiseCoupling::Splitting,
            fp_tol: 1e-12,
            fp_max_iter: 200,
            literal_mixed_index: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SkgsError::param("scheme.dt", "must be positive"));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(SkgsError::param("scheme.t_final", "must be positive"));
        }
        if self.dt > self.t_final {
            return Err(SkgsError::param("scheme.dt", "must not exceed t_final"));
        }
        if self.stages == 0 {
            return Err(SkgsError::param("scheme.stages", "must be at least 1"));
        }
        if self.alpha.len() > self.stages.saturating_sub(1) {
            return Err(SkgsError::param(
                "scheme.alpha",
                format!("at most stages - 1 = {} parameters", self.stages - 1),
            ));
        }
        if !(self.fp_tol.is_finite() && self.fp_tol > 0.0) {
            return Err(SkgsError::param("scheme.fp_tol", "must be positive"));
        }
        if self.fp_max_iter == 0 {
            return Err(SkgsError::param("scheme.fp_max_iter", "must be at least 1"));
        }
        if self.literal_mixed_index && self.scheme != SchemeKind::Msfd {
            return Err(SkgsError::param("scheme.literal_mixed_index", "only applies to MSFD"));
        }
        self.n_steps().map(|_| ())
    }

    /// `N = T / dt`, rejecting horizons that are not a whole number of steps.
    pub fn n_steps(&self) -> Result<usize> {
        steps_for(self.t_final, self.dt)
    }
}

/// Number of steps of size `dt` in `[0, t_final]`, or an error when the
/// ratio is not an integer up to rounding.
pub fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    let ratio = t_final / dt;
    let n = ratio.round();
    if n < 1.0 || ((n * dt) - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(SkgsError::param(
            "scheme.dt",
            format!("t_final = {t_final} is not a whole number of steps of {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Initial data for `(phi, u, u_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// The sech^2 travelling-wave family with speed parameter `theta`.
    Soliton { theta: f64 },
    /// `phi = 0`, `u = 0`, `u_t = 1`.
    ZeroWithUnitVelocity,
    Custom {
        p: Vec<f64>,
        q: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
    },
}

/// Evaluates initial data at the interior nodes.
pub fn eval_initial(data: &InitialData, grid: &Grid1D) -> Result<FieldState> {
    let n = grid.interior_len();
    match data {
        InitialData::Soliton { theta } => {
            let theta = *theta;
            if !(theta.abs() < 1.0) {
                return Err(SkgsError::param(
                    "initial.theta",
                    format!("need |theta| < 1, got {theta}"),
                ));
            }
            let one_m = 1.0 - theta * theta;
            let width = one_m.sqrt();
            let amp_phi = 3.0 * 2f64.sqrt() / (4.0 * width);
            let amp_u = 3.0 / (4.0 * one_m);
            let amp_ut = 3.0 * theta / (4.0 * one_m * width);
            let mut state = FieldState::zeros(n);
            for (k, x) in grid.interior_nodes().into_iter().enumerate() {
                let z = x / (2.0 * width);
                let sech2 = 1.0 / z.cosh().powi(2);
                let (s, c) = (theta * x).sin_cos();
                state.p[k] = amp_phi * sech2 * c;
                state.q[k] = amp_phi * sech2 * s;
                state.u[k] = amp_u * sech2;
                state.v[k] = 0.5 * amp_ut * sech2 * z.tanh();
            }
            Ok(state)
        }
        InitialData::ZeroWithUnitVelocity => {
            let mut state = FieldState::zeros(n);
            state.v.iter_mut().for_each(|v| *v = 0.5);
            Ok(state)
        }
        InitialData::Custom { p, q, u, v } => {
            let state = FieldState {
                p: p.clone(),
                q: q.clone(),
                u: u.clone(),
                v: v.clone(),
                t: 0.0,
            };
            state.check_len(n)?;
            if !state.is_finite() {
                return Err(SkgsError::param("initial", "custom data must be finite"));
            }
            Ok(state)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_four_cells() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.interior_nodes(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn symmetric_domain() {
        let g = make_grid(-15.0, 15.0, 240).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.interior_len(), 239);
        let x = g.interior_nodes();
        assert!((x[0] - g.a() - g.h()).abs() <= 2.0 * f64::EPSILON * 15.0);
        assert!((g.b() - x[238] - g.h()).abs() <= 2.0 * f64::EPSILON * 15.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(make_grid(0.0, 1.0, 1).is_err());
        assert!(make_grid(1.0, 1.0, 4).is_err());
        assert!(make_grid(2.0, 1.0, 4).is_err());
    }

    #[test]
    fn zero_with_unit_velocity() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let s = eval_initial(&InitialData::ZeroWithUnitVelocity, &g).unwrap();
        assert!(s.p.iter().chain(&s.q).chain(&s.u).all(|&x| x == 0.0));
        assert!(s.v.iter().all(|&x| x == 0.5));
        assert!(s.u_t().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn soliton_at_origin() {
        let g = make_grid(-1.0, 1.0, 2).unwrap();
        let s = eval_initial(&InitialData::Soliton { theta: 0.3 }, &g).unwrap();
        assert!((s.u[0] - 3.0 / (4.0 * 0.91)).abs() < 1e-15);
        assert_eq!(s.v[0], 0.0);
        let s0 = eval_initial(&InitialData::Soliton { theta: 0.0 }, &g).unwrap();
        assert_eq!(s0.q[0], 0.0);
    }

    #[test]
    fn soliton_rejects_superluminal_theta() {
        let g = make_grid(-1.0, 1.0, 4).unwrap();
        assert!(eval_initial(&InitialData::Soliton { theta: 1.0 }, &g).is_err());
        assert!(eval_initial(&InitialData::Soliton { theta: -1.5 }, &g).is_err());
    }

    #[test]
    fn soliton_decays_away_from_centre() {
        for cells in [120, 256] {
            let g = make_grid(-15.0, 15.0, cells).unwrap();
            let s = eval_initial(&InitialData::Soliton { theta: 0.3 }, &g).unwrap();
            let tail = g
                .interior_nodes()
                .iter()
                .zip(&s.u)
                .filter(|(x, _)| x.abs() >= 10.0)
                .map(|(_, u)| u.abs())
                .fold(0.0, f64::max);
            assert!(tail < 1e-3, "tail {tail}");
        }
    }

    #[test]
    fn initial_data_is_deterministic() {
        let g = make_grid(-15.0, 15.0, 64).unwrap();
        let d = InitialData::Soliton { theta: 0.3 };
        assert_eq!(eval_initial(&d, &g).unwrap(), eval_initial(&d, &g).unwrap());
    }

    #[test]
    fn step_count_must_divide() {
        assert_eq!(steps_for(50.0, 25.0 / 256.0).unwrap(), 512);
        assert_eq!(steps_for(1.0, 0.1).unwrap(), 10);
        assert!(steps_for(1.0, 0.3).is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert_eq!("cfd_ii".parse::<SchemeKind>().unwrap(), SchemeKind::CfdII);
        assert!("RK4".parse::<SchemeKind>().is_err());
    }
}
