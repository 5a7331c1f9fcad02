//! Linearly implicit charge/energy schemes: CFD, SPS and FEM in space,
//! each with the modified finite-difference (`-I`) or midpoint (`-II`)
//! time discretization.
//!
//! A step is an explicit noise kick followed by a deterministic substep
//! made of two linear solves: first the `(U, V)` block, then the `(P, Q)`
//! block written as one complex system in `P + iQ`. All three spatial
//! discretizations share the same algebra once written with a mass matrix
//! `Mass` (identity outside FEM), a Laplacian `Lap` (`A`, `Ã` or `-K`) and
//! a coupling matrix `W(w)` (`diag(w)` or the P1 weighted mass `N(w)`).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SkgsError};
use crate::grid::{FieldState, NoiseCoupling, PhysicsParams, SchemeKind, SpatialKind};
use crate::linalg::{LdlFactor, SymTridiag};
use crate::noise::NoiseIncrement;
use crate::spatial::{weighted_mass, SpatialOperator};

/// Spectral `(P, Q)` systems at most this large are always solved densely.
const SPS_DENSE_MAX: usize = 64;
/// Contraction bound above which the spectral iteration is not attempted.
const SPS_CONTRACTION_MAX: f64 = 0.25;
const SPS_MAX_ITER: usize = 200;

#[derive(Debug, Clone)]
enum UvSolver {
    Tridiag(LdlFactor<f64>),
    /// Per-mode reciprocal of the diagonalized matrix.
    Spectral(Vec<f64>),
}

/// One of CFD-I/II, SPS-I/II, FEM-I/II.
#[derive(Debug, Clone)]
pub struct LinearImplicit {
    kind: SchemeKind,
    op: SpatialOperator,
    params: PhysicsParams,
    dt: f64,
    coupling: NoiseCoupling,
    /// Weight of the `P² + Q²` forcing in the `V` update.
    cf: f64,
    uv: UvSolver,
    /// Forcing built from `eta1` alone (`eta1²` or `N(eta1) eta1`).
    eta_forcing: Vec<f64>,
}

impl LinearImplicit {
    /// `params` must live in the same representation as the state: nodal
    /// values for CFD/SPS, P1 coefficients (already projected) for FEM.
    pub fn new(
        kind: SchemeKind,
        op: SpatialOperator,
        params: PhysicsParams,
        dt: f64,
        coupling: NoiseCoupling,
    ) -> Result<Self> {
        if kind.is_runge_kutta() {
            return Err(SkgsError::Usage(format!("{kind} is not a linearly implicit scheme")));
        }
        if op.kind() != kind.spatial() {
            return Err(SkgsError::Usage(format!(
                "{kind} needs the {:?} operator, got {:?}",
                kind.spatial(),
                op.kind()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SkgsError::param("scheme.dt", "must be positive"));
        }
        params.check_len(op.len())?;
        let q = 0.25 * dt * dt;
        let uv = match op.kind() {
            SpatialKind::CentralDiff => {
                let a = op.tridiag().expect("central difference is tridiagonal");
                // I - q (A - I)
                let m = SymTridiag::new(
                    a.diag.iter().map(|d| 1.0 - q * (d - 1.0)).collect(),
                    a.off.iter().map(|o| -q * o).collect(),
                );
                UvSolver::Tridiag(m.factor(dt)?)
            }
            SpatialKind::Fem => {
                let (k, mass) = op.fem_pair().expect("fem pair");
                // M - q (-K - M) = M + q (K + M)
                let m = mass.axpy(q, &k.axpy(1.0, mass));
                UvSolver::Tridiag(m.factor(dt)?)
            }
            SpatialKind::SineSpectral => {
                let lam = op.sine_eigenvalues().expect("spectral eigenvalues");
                UvSolver::Spectral(lam.iter().map(|l| 1.0 / (1.0 - q * (l - 1.0))).collect())
            }
        };
        let cf = if kind.is_midpoint() { 0.25 } else { 0.5 };
        let eta_forcing = forcing_of(&op, &params.eta1, &params.eta1);
        Ok(LinearImplicit {
            kind,
            op,
            params,
            dt,
            coupling,
            cf,
            uv,
            eta_forcing,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn operator(&self) -> &SpatialOperator {
        &self.op
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Explicit kick: `P += C1 eta1 dB1`, `Q -= C1 eta1 dB0`,
    /// `V += C2 eta2 dB2 / 2`; `U` and `t` unchanged.
    pub fn noise_substep(&self, state: &FieldState, inc: &NoiseIncrement) -> FieldState {
        let p = &self.params;
        let mut s = state.clone();
        for i in 0..s.len() {
            s.p[i] += p.c1 * p.eta1[i] * inc.db1;
            s.q[i] -= p.c1 * p.eta1[i] * inc.db0;
            s.v[i] += 0.5 * p.c2 * p.eta2[i] * inc.db2;
        }
        s
    }

    /// Deterministic substep from the kicked state. `inc` only matters for
    /// the `Paper` coupling, whose `V` forcing swaps the realized
    /// `C1² eta1² (dB0² + dB1²)` for its mean `2 dt C1² eta1²`.
    pub fn conservative_substep(&self, bar: &FieldState, inc: &NoiseIncrement) -> Result<FieldState> {
        let dt = self.dt;
        let n = bar.len();
        let mut f = forcing_of(&self.op, &bar.p, &bar.q);
        if self.coupling == NoiseCoupling::Paper {
            let c1sq = self.params.c1 * self.params.c1;
            let shift = c1sq * (2.0 * dt - inc.db0 * inc.db0 - inc.db1 * inc.db1);
            f.iter_mut().zip(&self.eta_forcing).for_each(|(f, e)| *f += shift * e);
        }

        // (U, V) block
        let q = 0.25 * dt * dt;
        let mu = mass_mul(&self.op, &bar.u);
        let lu = lap_mul(&self.op, &bar.u);
        let mv = mass_mul(&self.op, &bar.v);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| mu[i] + q * (lu[i] - mu[i]) + 2.0 * dt * mv[i] + dt * dt * self.cf * f[i])
            .collect();
        match &self.uv {
            UvSolver::Tridiag(fac) => fac.solve_in_place(&mut rhs),
            UvSolver::Spectral(inv) => {
                let dst = self.op.sine_transform();
                let mut c = dst.apply(&rhs);
                c.iter_mut().zip(inv).for_each(|(c, d)| *c *= d);
                rhs = dst.apply(&c);
            }
        }
        let u1 = rhs;
        let v1: Vec<f64> = (0..n).map(|i| (u1[i] - bar.u[i]) / dt - bar.v[i]).collect();

        // (P, Q) block
        let w: Vec<f64> = if self.kind.is_midpoint() {
            u1.iter().zip(&bar.u).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            u1.clone()
        };
        let (p1, q1) = self.solve_phi(&bar.p, &bar.q, &w)?;

        Ok(FieldState {
            p: p1,
            q: q1,
            u: u1,
            v: v1,
            t: bar.t + dt,
        })
    }

    pub fn step(&self, state: &FieldState, inc: &NoiseIncrement) -> Result<FieldState> {
        let bar = self.noise_substep(state, inc);
        let next = self.conservative_substep(&bar, inc)?;
        if !next.is_finite() {
            return Err(SkgsError::SingularSystem {
                dt: self.dt,
                condition: f64::INFINITY,
            });
        }
        Ok(next)
    }

    /// Solves `(Mass - iτB) φ¹ = (Mass + iτB) φ̄` with `B = Lap + W(w)`.
    fn solve_phi(&self, p: &[f64], q: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let tau = 0.5 * self.dt;
        let bp = b_mul(&self.op, w, p);
        let bq = b_mul(&self.op, w, q);
        let mp = mass_mul(&self.op, p);
        let mq = mass_mul(&self.op, q);
        let rhs: Vec<Complex64> = (0..p.len())
            .map(|i| Complex64::new(mp[i] - tau * bq[i], mq[i] + tau * bp[i]))
            .collect();
        let i_tau = Complex64::new(0.0, tau);
        let phi = match self.op.kind() {
            SpatialKind::CentralDiff => {
                let a = self.op.tridiag().expect("tridiagonal");
                let m = SymTridiag::new(
                    a.diag
                        .iter()
                        .zip(w)
                        .map(|(d, wi)| Complex64::new(1.0, 0.0) - i_tau * (d + wi))
                        .collect(),
                    a.off.iter().map(|o| -i_tau * *o).collect(),
                );
                m.factor(self.dt)?.solve(&rhs)
            }
            SpatialKind::Fem => {
                let (k, mass) = self.op.fem_pair().expect("fem pair");
                let nw = weighted_mass(self.op.grid(), w);
                // Mass - iτ(-K + N(w))
                let to_c = |t: &SymTridiag<f64>| {
                    SymTridiag::new(
                        t.diag.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                        t.off.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
                    )
                };
                let b = nw.axpy(-1.0, k);
                let m = to_c(mass).axpy(-i_tau, &to_c(&b));
                m.factor(self.dt)?.solve(&rhs)
            }
            SpatialKind::SineSpectral => self.solve_phi_spectral(rhs, w)?,
        };
        Ok((phi.iter().map(|z| z.re).collect(), phi.iter().map(|z| z.im).collect()))
    }

    fn solve_phi_spectral(&self, rhs: Vec<Complex64>, w: &[f64]) -> Result<Vec<Complex64>> {
        let tau = 0.5 * self.dt;
        let n = rhs.len();
        let (wmin, wmax) = w
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let centre = 0.5 * (wmin + wmax);
        let contraction = tau * 0.5 * (wmax - wmin);
        if n > SPS_DENSE_MAX && contraction <= SPS_CONTRACTION_MAX {
            if let Some(phi) = self.spectral_iteration(&rhs, w, centre) {
                return Ok(phi);
            }
        }
        let a = self.op.dense().expect("dense spectral matrix");
        let i_tau = Complex64::new(0.0, tau);
        let mut m = DMatrix::<Complex64>::from_fn(n, n, |i, j| -i_tau * a[i * n + j]);
        for i in 0..n {
            m[(i, i)] += Complex64::new(1.0, 0.0) - i_tau * w[i];
        }
        let lu = m.lu();
        lu.solve(&nalgebra::DVector::from_vec(rhs))
            .map(|x| x.data.into())
            .ok_or(SkgsError::SingularSystem {
                dt: self.dt,
                condition: f64::INFINITY,
            })
    }

    /// Fixed-point iteration preconditioned by the sine-diagonal part
    /// `I - iτ(Ã + c I)`. Returns `None` if it stalls.
    fn spectral_iteration(&self, rhs: &[Complex64], w: &[f64], c: f64) -> Option<Vec<Complex64>> {
        let tau = 0.5 * self.dt;
        let dst = self.op.sine_transform();
        let lam = self.op.sine_eigenvalues()?;
        let inv: Vec<Complex64> = lam
            .iter()
            .map(|l| Complex64::new(1.0, 0.0) / Complex64::new(1.0, -tau * (l + c)))
            .collect();
        let precond = |x: &mut Vec<Complex64>| {
            dst.apply_complex(x);
            x.iter_mut().zip(&inv).for_each(|(x, d)| *x *= d);
            dst.apply_complex(x);
        };
        let mut phi = rhs.to_vec();
        precond(&mut phi);
        let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for _ in 0..SPS_MAX_ITER {
            let mut next: Vec<Complex64> = rhs
                .iter()
                .zip(&phi)
                .zip(w)
                .map(|((r, p), wi)| r + Complex64::new(0.0, tau * (wi - c)) * p)
                .collect();
            precond(&mut next);
            let delta = next
                .iter()
                .zip(&phi)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            phi = next;
            if delta <= 4.0 * f64::EPSILON * scale {
                return Some(phi);
            }
        }
        None
    }
}

fn mass_mul(op: &SpatialOperator, x: &[f64]) -> Vec<f64> {
    match op.fem_pair() {
        Some((_, m)) => m.mul_vec(x),
        None => x.to_vec(),
    }
}

fn lap_mul(op: &SpatialOperator, x: &[f64]) -> Vec<f64> {
    match op.kind() {
        SpatialKind::Fem => {
            let (k, _) = op.fem_pair().expect("fem pair");
            k.mul_vec(x).into_iter().map(|v| -v).collect()
        }
        SpatialKind::SineSpectral if x.len() > SPS_DENSE_MAX => op.apply_fast(x),
        _ => op.apply(x),
    }
}

/// `(Lap + W(w)) x`.
fn b_mul(op: &SpatialOperator, w: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = lap_mul(op, x);
    match op.kind() {
        SpatialKind::Fem => {
            let nw = weighted_mass(op.grid(), w).mul_vec(x);
            y.iter_mut().zip(nw).for_each(|(y, v)| *y += v);
        }
        _ => y.iter_mut().zip(w).zip(x).for_each(|((y, w), x)| *y += w * x),
    }
    y
}

/// `P² + Q²` nodewise, or its P1 load `N(P)P + N(Q)Q`.
pub(crate) fn forcing_of(op: &SpatialOperator, p: &[f64], q: &[f64]) -> Vec<f64> {
    match op.kind() {
        SpatialKind::Fem => {
            let g = op.grid();
            let mut f = weighted_mass(g, p).mul_vec(p);
            let fq = weighted_mass(g, q).mul_vec(q);
            f.iter_mut().zip(fq).for_each(|(a, b)| *a += b);
            f
        }
        _ => p.iter().zip(q).map(|(a, b)| a * a + b * b).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{eval_initial, make_grid, InitialData};
    use crate::spatial::build_operator;

    fn scheme(kind: SchemeKind, cells: usize, dt: f64, c: f64) -> (LinearImplicit, FieldState) {
        let g = make_grid(-15.0, 15.0, cells).unwrap();
        let op = build_operator(kind.spatial(), &g);
        let params = PhysicsParams::with_sine_profiles(&g, c, c).unwrap();
        let s0 = eval_initial(&InitialData::Soliton { theta: 0.3 }, &g).unwrap();
        (LinearImplicit::new(kind, op, params, dt, NoiseCoupling::Splitting).unwrap(), s0)
    }

    #[test]
    fn zero_state_is_fixed_without_noise() {
        for kind in SchemeKind::EVOLUTION_LAW_FAMILY {
            let (s, st) = scheme(kind, 32, 0.1, 0.0);
            let z = FieldState::zeros(st.len());
            let out = s.step(&z, &NoiseIncrement::new(0.3, -0.2, 0.5)).unwrap();
            assert!(out.fields().iter().all(|f| f.iter().all(|&x| x == 0.0)), "{kind}");
            assert!((out.t - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn spectral_iteration_matches_dense() {
        let (s, st) = scheme(SchemeKind::SpsI, 128, 0.125, 1.0);
        let rhs: Vec<Complex64> = st.p.iter().zip(&st.q).map(|(&a, &b)| Complex64::new(a, b)).collect();
        let (lo, hi) = st.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let it = s.spectral_iteration(&rhs, &st.u, 0.5 * (lo + hi)).unwrap();
        // dense path
        let n = rhs.len();
        let a = s.op.dense().unwrap();
        let i_tau = Complex64::new(0.0, 0.0625);
        let mut m = DMatrix::<Complex64>::from_fn(n, n, |i, j| -i_tau * a[i * n + j]);
        for i in 0..n {
            m[(i, i)] += Complex64::new(1.0, 0.0) - i_tau * st.u[i];
        }
        let d = m.lu().solve(&nalgebra::DVector::from_vec(rhs)).unwrap();
        let err = it.iter().zip(d.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn rejects_mismatched_operator() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let op = build_operator(SpatialKind::Fem, &g);
        let params = PhysicsParams::with_sine_profiles(&g, 1.0, 1.0).unwrap();
        assert!(LinearImplicit::new(SchemeKind::CfdI, op, params, 0.1, NoiseCoupling::Splitting).is_err());
    }
}
