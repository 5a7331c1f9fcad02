//! Discrete charge and energy, their averaged evolution laws, and the
//! wedge functionals used to check (multi-)symplecticity.

use crate::error::{Result, SkgsError};
use crate::grid::{FieldState, Grid1D, PhysicsParams, SpatialKind};
use crate::linalg::dot;
use crate::noise::mix64;
use crate::spatial::{weighted_mass, SpatialOperator};

/// `‖P‖² + ‖Q‖²` in the operator's inner product (`h Σ` or mass matrix).
pub fn charge(state: &FieldState, op: &SpatialOperator) -> f64 {
    op.inner(&state.p, &state.p) + op.inner(&state.q, &state.q)
}

/// `h Σ (P_i² + Q_i²)`.
pub fn nodal_charge(state: &FieldState, grid: &Grid1D) -> f64 {
    grid.h() * (dot(&state.p, &state.p) + dot(&state.q, &state.q))
}

/// The discrete Hamiltonian matched to the operator:
/// `2⟨U, P² + Q²⟩ - ‖U‖² - 4‖V‖² + ⟨U, AU⟩ + 2⟨P, AP⟩ + 2⟨Q, AQ⟩`,
/// with P1 pairings for FEM.
pub fn energy(state: &FieldState, op: &SpatialOperator) -> f64 {
    let cubic = match op.kind() {
        SpatialKind::Fem => {
            let n = weighted_mass(op.grid(), &state.u);
            2.0 * (dot(&state.p, &n.mul_vec(&state.p)) + dot(&state.q, &n.mul_vec(&state.q)))
        }
        _ => {
            let h = op.grid().h();
            2.0 * h
                * state
                    .u
                    .iter()
                    .zip(&state.p)
                    .zip(&state.q)
                    .map(|((u, p), q)| u * (p * p + q * q))
                    .sum::<f64>()
        }
    };
    cubic - op.inner(&state.u, &state.u) - 4.0 * op.inner(&state.v, &state.v)
        + op.quadratic_form(&state.u)
        + 2.0 * op.quadratic_form(&state.p)
        + 2.0 * op.quadratic_form(&state.q)
}

/// `⟨U, η1·η1⟩_h`, or `η1ᵀ N(U) η1` for FEM.
pub fn coupling(state: &FieldState, op: &SpatialOperator, eta1: &[f64]) -> f64 {
    match op.kind() {
        SpatialKind::Fem => dot(eta1, &weighted_mass(op.grid(), &state.u).mul_vec(eta1)),
        _ => {
            op.grid().h()
                * state
                    .u
                    .iter()
                    .zip(eta1)
                    .map(|(u, e)| u * e * e)
                    .sum::<f64>()
        }
    }
}

/// Growth rate `2 C1² ‖η1‖²` of the averaged charge.
pub fn charge_slope(params: &PhysicsParams, op: &SpatialOperator) -> f64 {
    2.0 * params.c1 * params.c1 * op.inner(&params.eta1, &params.eta1)
}

/// `N⁰ + 2 C1² ‖η1‖² n dt`.
pub fn charge_law_reference(n: usize, charge0: f64, params: &PhysicsParams, op: &SpatialOperator, dt: f64) -> f64 {
    charge0 + charge_slope(params, op) * n as f64 * dt
}

/// Deterministic drift rate of the averaged energy,
/// `-C2² Q2 + 4 C1² Q̃1`, with `Q2 = ‖η2‖²` and `Q̃1 = ⟨η1, A η1⟩`.
pub fn energy_drift_rate(params: &PhysicsParams, op: &SpatialOperator) -> f64 {
    let q2 = op.inner(&params.eta2, &params.eta2);
    let q1 = op.quadratic_form(&params.eta1);
    -params.c2 * params.c2 * q2 + 4.0 * params.c1 * params.c1 * q1
}

/// Right-hand side of the averaged energy law at times `times`, given the
/// mean initial energy and the mean cumulative coupling integrals
/// `Σ_{i<n} E⟨U^i, η1²⟩ dt` at the same times.
pub fn energy_law_reference(
    energy0: f64,
    times: &[f64],
    mean_cumulative_coupling: &[f64],
    params: &PhysicsParams,
    op: &SpatialOperator,
) -> Result<Vec<f64>> {
    if times.len() != mean_cumulative_coupling.len() {
        return Err(SkgsError::Usage("coupling series does not match the time grid".into()));
    }
    let rate = energy_drift_rate(params, op);
    let c1sq = params.c1 * params.c1;
    Ok(times
        .iter()
        .zip(mean_cumulative_coupling)
        .map(|(t, c)| energy0 + rate * t + 4.0 * c1sq * c)
        .collect())
}

/// Two tangent vectors `(dP, dQ, dU, dV)` at the same base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPair {
    pub first: FieldState,
    pub second: FieldState,
}

impl TangentPair {
    pub fn zeros(n: usize) -> Self {
        TangentPair {
            first: FieldState::zeros(n),
            second: FieldState::zeros(n),
        }
    }

    /// Entries uniform in `[-1, 1)`, keyed by `seed`.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut k = 0u64;
        let mut next = || {
            k += 1;
            let bits = mix64(seed ^ mix64(k));
            2.0 * ((bits >> 11) as f64 / (1u64 << 53) as f64) - 1.0
        };
        let mut one = || {
            let mut s = FieldState::zeros(n);
            for f in [&mut s.p, &mut s.q, &mut s.u, &mut s.v] {
                f.iter_mut().for_each(|x| *x = next());
            }
            s
        };
        let first = one();
        let second = one();
        TangentPair { first, second }
    }

    pub fn swapped(&self) -> Self {
        TangentPair {
            first: self.second.clone(),
            second: self.first.clone(),
        }
    }
}

fn wedge(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    // Σ (a_i d_i - c_i b_i): the pairing of (a, b) with (c, d).
    a.iter()
        .zip(d)
        .zip(c.iter().zip(b))
        .map(|((a, d), (c, b))| a * d - c * b)
        .sum()
}

/// `h Σ (dq¹dp² - dq²dp¹ + dv¹du² - dv²du¹)`.
pub fn symplectic_form(pair: &TangentPair, grid: &Grid1D) -> f64 {
    let (x, y) = (&pair.first, &pair.second);
    grid.h() * (wedge(&x.q, &x.p, &y.q, &y.p) + wedge(&x.v, &x.u, &y.v, &y.u))
}

/// `h Σ (2 dQ∧dP + dR∧dU)` with `dR = 2 dV`.
pub fn multisymplectic_form(pair: &TangentPair, grid: &Grid1D) -> f64 {
    let (x, y) = (&pair.first, &pair.second);
    // dR∧dU = 2 dV∧dU
    2.0 * grid.h() * (wedge(&x.q, &x.p, &y.q, &y.p) + wedge(&x.v, &x.u, &y.v, &y.u))
}

/// `Σ_i (2dQ¹∧dP¹ + dR¹∧dU¹ - 2dQ⁰∧dP⁰ - dR⁰∧dU⁰)_i / dt`.
pub fn multisymplectic_residual(before: &TangentPair, after: &TangentPair, grid: &Grid1D, dt: f64) -> f64 {
    (multisymplectic_form(after, grid) - multisymplectic_form(before, grid)) / (grid.h() * dt)
}
