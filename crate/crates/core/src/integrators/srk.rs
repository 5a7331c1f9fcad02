//! Symplectic Runge-Kutta stepping for FD-SRK and MSFD.
//!
//! Both schemes are one stage system in the variables `(P, Q, U, W)`:
//!
//! ```text
//! P' = -(γ A Q + U Q)           + C1 η1 dB1
//! Q' =   γ A P + U P            - C1 η1 dB0
//! W' =   κ (A U - U + P² + Q²)  + κ C2 η2 dB2
//! U' =   W / κ
//! ```
//!
//! FD-SRK uses `γ = κ = 1/2` (so `W = V`), MSFD uses `γ = κ = 1` (so
//! `W = R = 2V`). The noise enters every stage weighted by the row sums of
//! the tableau.
//!
//! Stages are found by fixed-point iteration on the nonlinear terms only;
//! the linear part is inverted exactly in the sine basis, where `A` is
//! diagonal. This keeps the iteration contractive when `dt ‖A‖` is large.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SkgsError};
use crate::grid::{FieldState, PhysicsParams, SpatialKind};
use crate::integrators::tableau::ButcherTableau;
use crate::noise::NoiseIncrement;
use crate::spatial::{backward_diff_cells, forward_diff_cells, SpatialOperator};

/// Which of the two Runge-Kutta schemes a [`RungeKutta`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkForm {
    /// FD-SRK: central differences, half-weighted Laplacian.
    Symplectic,
    /// MSFD: the box-type difference system with auxiliary derivatives.
    MultiSymplectic,
}

impl RkForm {
    fn gamma(self) -> f64 {
        match self {
            RkForm::Symplectic => 0.5,
            RkForm::MultiSymplectic => 1.0,
        }
    }

    fn kappa(self) -> f64 {
        self.gamma()
    }
}

/// Options for the stage solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSolverOptions {
    /// Bound on the max-norm update between sweeps, relative to
    /// `max(1, max|stage|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// MSFD only: the momentum stages use the end-of-step `U`.
    pub literal_mixed_index: bool,
}

impl Default for StageSolverOptions {
    fn default() -> Self {
        StageSolverOptions {
            tol: 1e-12,
            max_iter: 200,
            literal_mixed_index: false,
        }
    }
}

/// Stage values, each field stored as `s` consecutive blocks of length `n`.
#[derive(Debug, Clone)]
struct Stages {
    p: Vec<f64>,
    q: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

impl Stages {
    fn repeat(y: &Stages1, s: usize) -> Stages {
        Stages {
            p: y.p.repeat(s),
            q: y.q.repeat(s),
            u: y.u.repeat(s),
            w: y.w.repeat(s),
        }
    }

    fn max_diff(&self, o: &Stages) -> f64 {
        [(&self.p, &o.p), (&self.q, &o.q), (&self.u, &o.u), (&self.w, &o.w)]
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, |m, d| if d.is_nan() { f64::NAN } else { m.max(d) })
    }

    fn max_abs(&self) -> f64 {
        [&self.p, &self.q, &self.u, &self.w]
            .iter()
            .flat_map(|a| a.iter().map(|x| x.abs()))
            .fold(0.0, f64::max)
    }
}

/// A single point `(P, Q, U, W)`.
#[derive(Debug, Clone)]
struct Stages1 {
    p: Vec<f64>,
    q: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RungeKutta {
    form: RkForm,
    op: SpatialOperator,
    params: PhysicsParams,
    tab: ButcherTableau,
    row_sums: Vec<f64>,
    dt: f64,
    opts: StageSolverOptions,
    /// Per sine mode, row-major inverse of `I - iγλ dt a` (`s x s`).
    phi_inv: Vec<Complex64>,
    /// Per sine mode, row-major inverse of the `(U, W)` block (`2s x 2s`).
    uw_inv: Vec<f64>,
}

impl RungeKutta {
    pub fn new(
        form: RkForm,
        op: SpatialOperator,
        params: PhysicsParams,
        dt: f64,
        tab: ButcherTableau,
        opts: StageSolverOptions,
    ) -> Result<Self> {
        if op.kind() != SpatialKind::CentralDiff {
            return Err(SkgsError::Usage("Runge-Kutta schemes run on central differences".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SkgsError::param("scheme.dt", "must be positive"));
        }
        if !(opts.tol.is_finite() && opts.tol > 0.0) || opts.max_iter == 0 {
            return Err(SkgsError::param("scheme.fp_tol", "tolerance and iteration cap must be positive"));
        }
        if opts.literal_mixed_index && form != RkForm::MultiSymplectic {
            return Err(SkgsError::Usage("literal mixed index applies to MSFD only".into()));
        }
        tab.validate()?;
        params.check_len(op.len())?;
        let s = tab.stages();
        let lam = op.sine_eigenvalues().expect("central difference eigenvalues");
        let (gamma, kappa) = (form.gamma(), form.kappa());
        let mut phi_inv = Vec::with_capacity(lam.len() * s * s);
        let mut uw_inv = Vec::with_capacity(lam.len() * 4 * s * s);
        for &l in &lam {
            let m = DMatrix::<Complex64>::from_fn(s, s, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                Complex64::new(id, -gamma * l * dt * tab.a[i][j])
            });
            let inv = m.try_inverse().ok_or(SkgsError::SingularSystem {
                dt,
                condition: f64::INFINITY,
            })?;
            for i in 0..s {
                for j in 0..s {
                    phi_inv.push(inv[(i, j)]);
                }
            }
            let m = DMatrix::<f64>::from_fn(2 * s, 2 * s, |i, j| {
                let id = if i == j { 1.0 } else { 0.0 };
                match (i < s, j < s) {
                    (true, false) => -dt / kappa * tab.a[i][j - s],
                    (false, true) => -dt * kappa * (l - 1.0) * tab.a[i - s][j],
                    _ => id,
                }
            });
            let inv = m.try_inverse().ok_or(SkgsError::SingularSystem {
                dt,
                condition: f64::INFINITY,
            })?;
            for i in 0..2 * s {
                for j in 0..2 * s {
                    uw_inv.push(inv[(i, j)]);
                }
            }
        }
        let row_sums = tab.row_sums();
        Ok(RungeKutta {
            form,
            op,
            params,
            tab,
            row_sums,
            dt,
            opts,
            phi_inv,
            uw_inv,
        })
    }

    pub fn form(&self) -> RkForm {
        self.form
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tab
    }

    pub fn operator(&self) -> &SpatialOperator {
        &self.op
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `W = 2κ V`.
    fn w_scale(&self) -> f64 {
        2.0 * self.form.kappa()
    }

    fn lap(&self, x: &[f64]) -> Vec<f64> {
        match self.form {
            RkForm::Symplectic => self.op.apply(x),
            RkForm::MultiSymplectic => {
                let g = self.op.grid();
                backward_diff_cells(g, &forward_diff_cells(g, x))
            }
        }
    }

    fn to_internal(&self, s: &FieldState) -> Stages1 {
        let c = self.w_scale();
        Stages1 {
            p: s.p.clone(),
            q: s.q.clone(),
            u: s.u.clone(),
            w: s.v.iter().map(|v| c * v).collect(),
        }
    }

    fn to_state(&self, y: Stages1, t: f64) -> FieldState {
        let c = self.w_scale();
        FieldState {
            p: y.p,
            q: y.q,
            u: y.u,
            v: y.w.into_iter().map(|w| w / c).collect(),
            t,
        }
    }

    fn noise(&self, inc: &NoiseIncrement) -> Stages1 {
        let p = &self.params;
        let kappa = self.form.kappa();
        Stages1 {
            p: p.eta1.iter().map(|e| p.c1 * e * inc.db1).collect(),
            q: p.eta1.iter().map(|e| -p.c1 * e * inc.db0).collect(),
            u: vec![0.0; p.eta1.len()],
            w: p.eta2.iter().map(|e| kappa * p.c2 * e * inc.db2).collect(),
        }
    }

    /// `U` at the end of the step implied by the current stage `W`.
    fn final_u(&self, u0: &[f64], st: &Stages) -> Vec<f64> {
        let n = u0.len();
        let k = self.form.kappa();
        let mut u = u0.to_vec();
        for (m, b) in self.tab.b.iter().enumerate() {
            for i in 0..n {
                u[i] += self.dt * b * st.w[m * n + i] / k;
            }
        }
        u
    }

    /// Applies `(I - dt a⊗L)⁻¹` to stage right-hand sides.
    fn precond(&self, r: Stages) -> Stages {
        let s = self.tab.stages();
        let n = self.op.len();
        let dst = self.op.sine_transform();
        let mut phi: Vec<Vec<Complex64>> = Vec::with_capacity(s);
        let mut uw: Vec<Vec<Complex64>> = Vec::with_capacity(s);
        for m in 0..s {
            let blk = m * n..(m + 1) * n;
            let mut a: Vec<Complex64> = r.p[blk.clone()]
                .iter()
                .zip(&r.q[blk.clone()])
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect();
            dst.apply_complex(&mut a);
            phi.push(a);
            let mut b: Vec<Complex64> = r.u[blk.clone()]
                .iter()
                .zip(&r.w[blk])
                .map(|(&x, &y)| Complex64::new(x, y))
                .collect();
            dst.apply_complex(&mut b);
            uw.push(b);
        }
        let mut phi_out = vec![vec![Complex64::new(0.0, 0.0); n]; s];
        let mut uw_out = vec![vec![Complex64::new(0.0, 0.0); n]; s];
        let s2 = 2 * s;
        let mut rhs = vec![0.0; s2];
        for j in 0..n {
            let pinv = &self.phi_inv[j * s * s..(j + 1) * s * s];
            for i in 0..s {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..s {
                    acc += pinv[i * s + k] * phi[k][j];
                }
                phi_out[i][j] = acc;
            }
            for k in 0..s {
                rhs[k] = uw[k][j].re;
                rhs[s + k] = uw[k][j].im;
            }
            let winv = &self.uw_inv[j * s2 * s2..(j + 1) * s2 * s2];
            for i in 0..s {
                let mut su = 0.0;
                let mut sw = 0.0;
                for k in 0..s2 {
                    su += winv[i * s2 + k] * rhs[k];
                    sw += winv[(s + i) * s2 + k] * rhs[k];
                }
                uw_out[i][j] = Complex64::new(su, sw);
            }
        }
        let mut out = Stages {
            p: Vec::with_capacity(s * n),
            q: Vec::with_capacity(s * n),
            u: Vec::with_capacity(s * n),
            w: Vec::with_capacity(s * n),
        };
        for m in 0..s {
            dst.apply_complex(&mut phi_out[m]);
            dst.apply_complex(&mut uw_out[m]);
            out.p.extend(phi_out[m].iter().map(|z| z.re));
            out.q.extend(phi_out[m].iter().map(|z| z.im));
            out.u.extend(uw_out[m].iter().map(|z| z.re));
            out.w.extend(uw_out[m].iter().map(|z| z.im));
        }
        out
    }

    /// Stage right-hand side `y0 + c ξ + dt (a⊗I) N(Y)`.
    fn stage_rhs(&self, y0: &Stages1, xi: &Stages1, st: &Stages) -> Stages {
        let s = self.tab.stages();
        let n = y0.p.len();
        let k = self.form.kappa();
        let uf = if self.opts.literal_mixed_index {
            Some(self.final_u(&y0.u, st))
        } else {
            None
        };
        let mut r = Stages {
            p: Vec::with_capacity(s * n),
            q: Vec::with_capacity(s * n),
            u: Vec::with_capacity(s * n),
            w: Vec::with_capacity(s * n),
        };
        for m in 0..s {
            let c = self.row_sums[m];
            for i in 0..n {
                let (mut np, mut nq, mut nw) = (0.0, 0.0, 0.0);
                for l in 0..s {
                    let a = self.tab.a[m][l];
                    if a == 0.0 {
                        continue;
                    }
                    let j = l * n + i;
                    let (p, q, u) = (st.p[j], st.q[j], st.u[j]);
                    let up = uf.as_ref().map_or(u, |uf| uf[i]);
                    np -= a * up * q;
                    nq += a * u * p;
                    nw += a * k * (p * p + q * q);
                }
                r.p.push(y0.p[i] + c * xi.p[i] + self.dt * np);
                r.q.push(y0.q[i] + c * xi.q[i] + self.dt * nq);
                r.u.push(y0.u[i] + c * xi.u[i]);
                r.w.push(y0.w[i] + c * xi.w[i] + self.dt * nw);
            }
        }
        r
    }

    fn solve_stages(&self, y0: &Stages1, xi: &Stages1) -> Result<Stages> {
        let s = self.tab.stages();
        let mut st = Stages::repeat(y0, s);
        let mut last = f64::INFINITY;
        let mut growth = 0;
        for _ in 0..self.opts.max_iter {
            let next = self.precond(self.stage_rhs(y0, xi, &st));
            let delta = next.max_diff(&st);
            st = next;
            if !delta.is_finite() {
                return Err(SkgsError::NonConvergence {
                    iterations: self.opts.max_iter,
                    residual: delta,
                });
            }
            if delta <= self.opts.tol * st.max_abs().max(1.0) {
                return Ok(st);
            }
            growth = if delta > last { growth + 1 } else { 0 };
            if growth >= 5 {
                return Err(SkgsError::NonConvergence {
                    iterations: self.opts.max_iter,
                    residual: delta,
                });
            }
            last = delta;
        }
        Err(SkgsError::NonConvergence {
            iterations: self.opts.max_iter,
            residual: last,
        })
    }

    /// `y0 + ξ + dt Σ b_m F(Y^m)` with stage-consistent products.
    fn update(&self, y0: &Stages1, xi: &Stages1, st: &Stages) -> Stages1 {
        let n = y0.p.len();
        let (gamma, kappa) = (self.form.gamma(), self.form.kappa());
        let mut y = Stages1 {
            p: y0.p.iter().zip(&xi.p).map(|(a, b)| a + b).collect(),
            q: y0.q.iter().zip(&xi.q).map(|(a, b)| a + b).collect(),
            u: y0.u.clone(),
            w: y0.w.iter().zip(&xi.w).map(|(a, b)| a + b).collect(),
        };
        for (m, &b) in self.tab.b.iter().enumerate() {
            let blk = m * n..(m + 1) * n;
            let (p, q, u, w) = (&st.p[blk.clone()], &st.q[blk.clone()], &st.u[blk.clone()], &st.w[blk]);
            let (ap, aq, au) = (self.lap(p), self.lap(q), self.lap(u));
            let h = self.dt * b;
            for i in 0..n {
                y.p[i] -= h * (gamma * aq[i] + u[i] * q[i]);
                y.q[i] += h * (gamma * ap[i] + u[i] * p[i]);
                y.w[i] += h * kappa * (au[i] - u[i] + p[i] * p[i] + q[i] * q[i]);
                y.u[i] += h * w[i] / kappa;
            }
        }
        y
    }

    pub fn step(&self, state: &FieldState, inc: &NoiseIncrement) -> Result<FieldState> {
        self.step_with_tangents(state, inc, &mut [])
    }

    /// Advances `state` and pushes each tangent through the exact
    /// derivative of the step map. Tangents are `(dP, dQ, dU, dV)`.
    pub fn step_with_tangents(
        &self,
        state: &FieldState,
        inc: &NoiseIncrement,
        tangents: &mut [FieldState],
    ) -> Result<FieldState> {
        if !tangents.is_empty() && self.opts.literal_mixed_index {
            return Err(SkgsError::Usage(
                "tangent propagation is not available with the literal mixed index".into(),
            ));
        }
        state.check_len(self.op.len())?;
        let y0 = self.to_internal(state);
        let xi = self.noise(inc);
        let st = self.solve_stages(&y0, &xi)?;
        for d in tangents.iter_mut() {
            *d = self.propagate(d, &st)?;
        }
        let y1 = self.update(&y0, &xi, &st);
        Ok(self.to_state(y1, state.t + self.dt))
    }

    /// Linearized stage solve about converged stages `st`.
    fn propagate(&self, d: &FieldState, st: &Stages) -> Result<FieldState> {
        let s = self.tab.stages();
        let n = self.op.len();
        let k = self.form.kappa();
        let d0 = self.to_internal(d);
        let mut ds = Stages::repeat(&d0, s);
        let rhs = |ds: &Stages| {
            let mut r = Stages {
                p: Vec::with_capacity(s * n),
                q: Vec::with_capacity(s * n),
                u: Vec::with_capacity(s * n),
                w: Vec::with_capacity(s * n),
            };
            for m in 0..s {
                for i in 0..n {
                    let (mut np, mut nq, mut nw) = (0.0, 0.0, 0.0);
                    for l in 0..s {
                        let a = self.tab.a[m][l];
                        let j = l * n + i;
                        let (p, q, u) = (st.p[j], st.q[j], st.u[j]);
                        let (dp, dq, du) = (ds.p[j], ds.q[j], ds.u[j]);
                        np -= a * (du * q + u * dq);
                        nq += a * (du * p + u * dp);
                        nw += a * 2.0 * k * (p * dp + q * dq);
                    }
                    r.p.push(d0.p[i] + self.dt * np);
                    r.q.push(d0.q[i] + self.dt * nq);
                    r.u.push(d0.u[i]);
                    r.w.push(d0.w[i] + self.dt * nw);
                }
            }
            r
        };
        let scale = ds.max_abs().max(f64::MIN_POSITIVE);
        let mut last = f64::INFINITY;
        let mut stalls = 0;
        for _ in 0..self.opts.max_iter {
            let next = self.precond(rhs(&ds));
            let delta = next.max_diff(&ds);
            ds = next;
            if !delta.is_finite() {
                return Err(SkgsError::NonConvergence {
                    iterations: self.opts.max_iter,
                    residual: delta,
                });
            }
            if delta <= 2.0 * f64::EPSILON * scale {
                break;
            }
            // Rounding floor reached: further sweeps only shuffle the last bits.
            stalls = if delta >= 0.5 * last { stalls + 1 } else { 0 };
            if stalls >= 3 && delta <= 1e-12 * scale {
                break;
            }
            last = delta;
        }
        // Linearized update: same as `update` with products differentiated
        // and the additive noise dropped.
        let gamma = self.form.gamma();
        let mut y = Stages1 {
            p: d0.p.clone(),
            q: d0.q.clone(),
            u: d0.u.clone(),
            w: d0.w.clone(),
        };
        for (m, &b) in self.tab.b.iter().enumerate() {
            let blk = m * n..(m + 1) * n;
            let (dp, dq, du, dw) = (&ds.p[blk.clone()], &ds.q[blk.clone()], &ds.u[blk.clone()], &ds.w[blk.clone()]);
            let (p, q, u) = (&st.p[blk.clone()], &st.q[blk.clone()], &st.u[blk]);
            let (adp, adq, adu) = (self.lap(dp), self.lap(dq), self.lap(du));
            let h = self.dt * b;
            for i in 0..n {
                y.p[i] -= h * (gamma * adq[i] + du[i] * q[i] + u[i] * dq[i]);
                y.q[i] += h * (gamma * adp[i] + du[i] * p[i] + u[i] * dp[i]);
                y.w[i] += h * k * (adu[i] - du[i] + 2.0 * (p[i] * dp[i] + q[i] * dq[i]));
                y.u[i] += h * dw[i] / k;
            }
        }
        Ok(self.to_state(y, d.t))
    }
}
