//! Septuple state of the multi-symplectic scheme.
//!
//! The nodal fields `p, q, u, r` live on the interior nodes. The derivative
//! fields `f, g, w` live on the `M` cells between consecutive nodes (ghost
//! nodes included), `f_i = (p_{i+1} - p_i)/h` for `i = 0..M-1`. Taking the
//! divergence back to the nodes gives exactly the central-difference
//! Laplacian, which is what makes the discrete wedge sum telescope.

use crate::error::{Result, SkgsError};
use crate::grid::{FieldState, Grid1D};
use crate::integrators::srk::{RkForm, RungeKutta};
use crate::noise::NoiseIncrement;
use crate::spatial::forward_diff_cells;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSymState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    /// `r ≈ u_t = 2v`.
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl MultiSymState {
    /// Builds the septuple with the closure relations satisfied exactly.
    pub fn from_field(state: &FieldState, grid: &Grid1D) -> Self {
        MultiSymState {
            f: forward_diff_cells(grid, &state.p),
            g: forward_diff_cells(grid, &state.q),
            w: forward_diff_cells(grid, &state.u),
            p: state.p.clone(),
            q: state.q.clone(),
            u: state.u.clone(),
            r: state.v.iter().map(|v| 2.0 * v).collect(),
            t: state.t,
        }
    }

    pub fn to_field(&self) -> FieldState {
        FieldState {
            p: self.p.clone(),
            q: self.q.clone(),
            u: self.u.clone(),
            v: self.r.iter().map(|r| 0.5 * r).collect(),
            t: self.t,
        }
    }

    /// `max |δ_x p - f|, |δ_x q - g|, |δ_x u - w|` over all cells.
    pub fn closure_residual(&self, grid: &Grid1D) -> f64 {
        [(&self.p, &self.f), (&self.q, &self.g), (&self.u, &self.w)]
            .iter()
            .flat_map(|(x, d)| {
                forward_diff_cells(grid, x)
                    .into_iter()
                    .zip(d.iter())
                    .map(|(a, b)| (a - b).abs())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }
}

/// One MSFD step on the septuple. The derivative fields of the result are
/// rebuilt from the nodal ones, so the closure relations hold exactly.
pub fn step_msfd(rk: &RungeKutta, ms: &MultiSymState, inc: &NoiseIncrement) -> Result<MultiSymState> {
    if rk.form() != RkForm::MultiSymplectic {
        return Err(SkgsError::Usage("step_msfd needs the multi-symplectic form".into()));
    }
    let next = rk.step(&ms.to_field(), inc)?;
    Ok(MultiSymState::from_field(&next, rk.operator().grid()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn round_trip_and_closure() {
        let g = make_grid(0.0, 1.0, 5).unwrap();
        let s = FieldState {
            p: vec![1.0, 2.0, 3.0, 4.0],
            q: vec![0.5; 4],
            u: vec![-1.0, 0.0, 1.0, 0.0],
            v: vec![0.25; 4],
            t: 0.3,
        };
        let ms = MultiSymState::from_field(&s, &g);
        assert_eq!(ms.f.len(), 5);
        assert_eq!(ms.f[0], 5.0);
        assert_eq!(ms.f[4], -20.0);
        assert_eq!(ms.closure_residual(&g), 0.0);
        assert_eq!(ms.to_field(), s);
    }

    #[test]
    fn step_keeps_closure() {
        use crate::grid::PhysicsParams;
        use crate::integrators::tableau::{make_parametric_tableau, ParametricGaussSpec};
        use crate::integrators::StageSolverOptions;
        use crate::spatial::build_central_diff;
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let params = PhysicsParams::with_sine_profiles(&g, 1.0, 1.0).unwrap();
        let tab = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![0.0] }).unwrap();
        let rk = RungeKutta::new(
            RkForm::MultiSymplectic,
            build_central_diff(&g),
            params,
            0.01,
            tab,
            StageSolverOptions::default(),
        )
        .unwrap();
        let mut s = FieldState::zeros(7);
        s.p = g.fundamental_sine();
        let ms = MultiSymState::from_field(&s, &g);
        let next = step_msfd(&rk, &ms, &NoiseIncrement::new(0.1, -0.05, 0.02)).unwrap();
        assert!(next.closure_residual(&g) <= 1e-11);
        assert!((next.t - 0.01).abs() < 1e-15);
    }
}
