//! Spatial discretizations of `d^2/dx^2` with homogeneous Dirichlet data:
//! the central-difference matrix `A`, the sine pseudo-spectral matrix `Ã`,
//! and the P1 finite-element pair (stiffness `K`, mass `M`).

use std::f64::consts::PI;

use crate::dst::SineTransform;
use crate::error::{Result, SkgsError};
use crate::grid::{Grid1D, SpatialKind};
use crate::linalg::{dense_mul, dot, LdlFactor, SymTridiag};

#[derive(Debug, Clone)]
enum Repr {
    Tridiag(SymTridiag<f64>),
    Dense(Vec<f64>),
    Fem {
        stiffness: SymTridiag<f64>,
        mass: SymTridiag<f64>,
        mass_factor: LdlFactor<f64>,
    },
}

/// One assembled spatial operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    kind: SpatialKind,
    grid: Grid1D,
    repr: Repr,
    dst: SineTransform,
}

pub fn build_central_diff(grid: &Grid1D) -> SpatialOperator {
    let n = grid.interior_len();
    let ih2 = 1.0 / (grid.h() * grid.h());
    SpatialOperator {
        kind: SpatialKind::CentralDiff,
        grid: grid.clone(),
        repr: Repr::Tridiag(SymTridiag::constant(n, -2.0 * ih2, ih2)),
        dst: SineTransform::new(grid.cells()),
    }
}

pub fn build_sine_spectral(grid: &Grid1D) -> SpatialOperator {
    let m = grid.cells();
    let n = m - 1;
    let mu = PI / grid.length();
    let h = grid.h();
    let mu2 = mu * mu;
    let csc2 = |arg: f64| {
        let s = arg.sin();
        1.0 / (s * s)
    };
    let mut a = vec![0.0; n * n];
    for i in 1..m {
        for j in 1..m {
            let v = if i == j {
                -mu2 / 6.0 - (m * m) as f64 * mu2 / 3.0 + 0.5 * mu2 * csc2(i as f64 * mu * h)
            } else {
                // (i - j) and (i + j) stay strictly inside (0, 2M), so both
                // half-angles lie in (0, pi) and the cosecants are finite.
                assert!(i + j < 2 * m && i.abs_diff(j) % (2 * m) != 0);
                let sign = if (i + j + 1) % 2 == 0 { 1.0 } else { -1.0 };
                let d = i.abs_diff(j) as f64;
                let s = (i + j) as f64;
                sign * 0.5 * mu2 * (csc2(0.5 * mu * d * h) - csc2(0.5 * mu * s * h))
            };
            a[(i - 1) * n + (j - 1)] = v;
        }
    }
    SpatialOperator {
        kind: SpatialKind::SineSpectral,
        grid: grid.clone(),
        repr: Repr::Dense(a),
        dst: SineTransform::new(m),
    }
}

pub fn build_fem(grid: &Grid1D) -> SpatialOperator {
    let n = grid.interior_len();
    let h = grid.h();
    let stiffness = SymTridiag::constant(n, 2.0 / h, -1.0 / h);
    let mass = SymTridiag::constant(n, 4.0 * h / 6.0, h / 6.0);
    let mass_factor = mass.factor(0.0).expect("P1 mass matrix is positive definite");
    SpatialOperator {
        kind: SpatialKind::Fem,
        grid: grid.clone(),
        repr: Repr::Fem {
            stiffness,
            mass,
            mass_factor,
        },
        dst: SineTransform::new(grid.cells()),
    }
}

pub fn build_operator(kind: SpatialKind, grid: &Grid1D) -> SpatialOperator {
    match kind {
        SpatialKind::CentralDiff => build_central_diff(grid),
        SpatialKind::SineSpectral => build_sine_spectral(grid),
        SpatialKind::Fem => build_fem(grid),
    }
}

impl SpatialOperator {
    pub fn kind(&self) -> SpatialKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.interior_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sine_transform(&self) -> &SineTransform {
        &self.dst
    }

    /// Action of the discrete second derivative. For FEM this is
    /// `A_h x = -M^{-1} K x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Tridiag(t) => t.mul_vec(x),
            Repr::Dense(a) => dense_mul(a, self.len(), x),
            Repr::Fem {
                stiffness,
                mass_factor,
                ..
            } => {
                let mut y = stiffness.mul_vec(x);
                y.iter_mut().for_each(|v| *v = -*v);
                mass_factor.solve_in_place(&mut y);
                y
            }
        }
    }

    /// Same as [`apply`](Self::apply) but through the sine transform when
    /// the operator is diagonal in the sine basis.
    pub fn apply_fast(&self, x: &[f64]) -> Vec<f64> {
        match self.sine_eigenvalues() {
            Some(lam) => {
                let mut c = self.dst.apply(x);
                c.iter_mut().zip(&lam).for_each(|(c, l)| *c *= l);
                self.dst.apply(&c)
            }
            None => self.apply(x),
        }
    }

    /// Eigenvalues in the sine basis, indexed by mode `1..M-1`. `None` for
    /// FEM, whose generalized eigenproblem is not exposed here.
    pub fn sine_eigenvalues(&self) -> Option<Vec<f64>> {
        let m = self.grid.cells();
        match self.kind {
            SpatialKind::CentralDiff => {
                let h2 = self.grid.h() * self.grid.h();
                Some(
                    (1..m)
                        .map(|k| {
                            let s = (k as f64 * PI / (2 * m) as f64).sin();
                            -4.0 * s * s / h2
                        })
                        .collect(),
                )
            }
            SpatialKind::SineSpectral => {
                let mu = PI / self.grid.length();
                Some((1..m).map(|k| -(k as f64 * mu).powi(2)).collect())
            }
            SpatialKind::Fem => None,
        }
    }

    /// Row-major dense matrix of the operator action.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.len();
        match &self.repr {
            Repr::Dense(a) => a.clone(),
            _ => {
                let mut out = vec![0.0; n * n];
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    let col = self.apply(&e);
                    for i in 0..n {
                        out[i * n + j] = col[i];
                    }
                    e[j] = 0.0;
                }
                out
            }
        }
    }

    pub fn tridiag(&self) -> Option<&SymTridiag<f64>> {
        match &self.repr {
            Repr::Tridiag(t) => Some(t),
            _ => None,
        }
    }

    pub fn dense(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Dense(a) => Some(a),
            _ => None,
        }
    }

    /// `(K, M)` for the FEM operator.
    pub fn fem_pair(&self) -> Option<(&SymTridiag<f64>, &SymTridiag<f64>)> {
        match &self.repr {
            Repr::Fem {
                stiffness, mass, ..
            } => Some((stiffness, mass)),
            _ => None,
        }
    }

    pub(crate) fn mass_solve(&self, rhs: &mut [f64]) {
        if let Repr::Fem { mass_factor, .. } = &self.repr {
            mass_factor.solve_in_place(rhs);
        }
    }

    /// Natural inner product: `h sum x_i y_i`, or `x^T M y` for FEM.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.repr {
            Repr::Fem { mass, .. } => dot(x, &mass.mul_vec(y)),
            _ => self.grid.h() * dot(x, y),
        }
    }

    /// `<x, A x>` in the natural inner product (`-x^T K x` for FEM).
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        match &self.repr {
            Repr::Fem { stiffness, .. } => -dot(x, &stiffness.mul_vec(x)),
            _ => self.grid.h() * dot(x, &self.apply(x)),
        }
    }

    /// L2 projection onto the P1 space, load vector by two-point Gauss
    /// quadrature per element.
    pub fn project_l2(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if self.kind != SpatialKind::Fem {
            return Err(SkgsError::Usage("L2 projection needs the FEM operator".into()));
        }
        let mut load = fem_load(&self.grid, f);
        self.mass_solve(&mut load);
        Ok(load)
    }
}

/// `b_j = ∫ f φ_j dx` with two Gauss points per element.
pub fn fem_load(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let m = grid.cells();
    let h = grid.h();
    let g = 0.5 / 3f64.sqrt();
    let mut load = vec![0.0; m - 1];
    for e in 0..m {
        let (xl, xr) = (grid.node(e), grid.node(e + 1));
        let mid = 0.5 * (xl + xr);
        for s in [-g, g] {
            let x = mid + s * (xr - xl);
            let w = 0.5 * h * f(x);
            // right basis value at the point is 1/2 + s
            let phi_r = 0.5 + s;
            if e >= 1 {
                load[e - 1] += w * (1.0 - phi_r);
            }
            if e + 1 < m {
                load[e] += w * phi_r;
            }
        }
    }
    load
}

/// P1 weighted mass `N(w)_jk = ∫ w_h φ_j φ_k dx` for a nodal field `w`
/// with zero boundary values.
pub fn weighted_mass(grid: &Grid1D, w: &[f64]) -> SymTridiag<f64> {
    let n = w.len();
    let c = grid.h() / 12.0;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            w[i as usize]
        }
    };
    let diag = (0..n as isize)
        .map(|j| c * (at(j - 1) + 6.0 * at(j) + at(j + 1)))
        .collect();
    let off = (0..n.saturating_sub(1))
        .map(|j| c * (w[j] + w[j + 1]))
        .collect();
    SymTridiag::new(diag, off)
}

/// `(δ_x v)_i = (v_{i+1} - v_i)/h` on interior nodes with `v_M = 0`.
pub fn forward_diff(grid: &Grid1D, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let ih = 1.0 / grid.h();
    (0..n)
        .map(|i| (if i + 1 < n { v[i + 1] } else { 0.0 } - v[i]) * ih)
        .collect()
}

/// `(δ_x⁻ w)_i = (w_i - w_{i-1})/h` with `w_0 = 0`; adjoint partner of
/// [`forward_diff`].
pub fn backward_diff(grid: &Grid1D, w: &[f64]) -> Vec<f64> {
    let ih = 1.0 / grid.h();
    (0..w.len())
        .map(|i| (w[i] - if i > 0 { w[i - 1] } else { 0.0 }) * ih)
        .collect()
}

/// Forward difference onto the `M` cell midpoints: entry `i` is
/// `(v_{i+1} - v_i)/h` for `i = 0..M-1`, with both ghosts zero.
pub fn forward_diff_cells(grid: &Grid1D, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let ih = 1.0 / grid.h();
    let at = |i: usize| if i == 0 || i > n { 0.0 } else { v[i - 1] };
    (0..=n).map(|i| (at(i + 1) - at(i)) * ih).collect()
}

/// Difference from the `M` cell values back to the interior nodes:
/// entry `i` is `(F_i - F_{i-1})/h`. Composed with
/// [`forward_diff_cells`] it reproduces the central-difference Laplacian.
pub fn backward_diff_cells(grid: &Grid1D, f: &[f64]) -> Vec<f64> {
    let ih = 1.0 / grid.h();
    (1..f.len()).map(|i| (f[i] - f[i - 1]) * ih).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::linalg::max_abs_diff;

    #[test]
    fn central_diff_unit_interval() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        let a = build_central_diff(&g);
        let t = a.tridiag().unwrap();
        assert!(t.diag.iter().all(|&d| d == -32.0));
        assert!(t.off.iter().all(|&o| o == 16.0));
        assert_eq!(a.apply(&[1.0, 1.0, 1.0]), vec![-16.0, 0.0, -16.0]);
    }

    #[test]
    fn spectral_two_cells() {
        let g = make_grid(0.0, 1.0, 2).unwrap();
        let a = build_sine_spectral(&g);
        assert!((a.dense().unwrap()[0] + PI * PI).abs() < 1e-12);
    }

    #[test]
    fn spectral_matches_fast_path() {
        let g = make_grid(-3.0, 2.0, 20).unwrap();
        let a = build_sine_spectral(&g);
        let x: Vec<f64> = (0..19).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
        let slow = a.apply(&x);
        let fast = a.apply_fast(&x);
        let scale = slow.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_abs_diff(&slow, &fast) <= 1e-10 * scale);
    }

    #[test]
    fn central_diff_eigenvalues_match_fast_path() {
        let g = make_grid(0.0, 2.0, 16).unwrap();
        let a = build_central_diff(&g);
        let x: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        assert!(max_abs_diff(&a.apply(&x), &a.apply_fast(&x)) < 1e-10);
    }

    #[test]
    fn fem_unit_interval() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        let op = build_fem(&g);
        let (k, m) = op.fem_pair().unwrap();
        assert!(k.diag.iter().all(|&d| d == 8.0));
        assert!(k.off.iter().all(|&o| o == -4.0));
        assert!(m.diag.iter().all(|&d| (d - 1.0 / 6.0).abs() < 1e-16));
        assert!(m.off.iter().all(|&o| (o - 1.0 / 24.0).abs() < 1e-16));
        let e = [1.0, 0.0, 0.0];
        assert!(dot(&e, &k.mul_vec(&e)) > 0.0);
    }

    #[test]
    fn weighted_mass_constant_weight_is_mass() {
        let g = make_grid(0.0, 1.0, 6).unwrap();
        // Interior weight 1 still drops to 0 at the boundary, so compare
        // against hand-integrated entries.
        let n = weighted_mass(&g, &[1.0; 5]);
        let h = g.h();
        assert!((n.diag[2] - 8.0 * h / 12.0).abs() < 1e-15);
        assert!((n.diag[0] - 7.0 * h / 12.0).abs() < 1e-15);
        assert!((n.off[1] - 2.0 * h / 12.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_mass_matches_quadrature() {
        // ∫ w φ_j φ_k computed with 3-point Gauss (exact for cubics).
        let g = make_grid(0.0, 1.0, 5).unwrap();
        let w = [0.3, -1.0, 2.0, 0.7];
        let hat = |j: usize, x: f64| (1.0 - ((x - g.node(j)) / g.h()).abs()).max(0.0);
        let wh = |x: f64| (1..5).map(|j| w[j - 1] * hat(j, x)).sum::<f64>();
        let pts = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
        let integral = |j: usize, k: usize| {
            let mut s = 0.0;
            for e in 0..5 {
                let mid = 0.5 * (g.node(e) + g.node(e + 1));
                for (p, wt) in pts {
                    let x = mid + 0.5 * g.h() * p;
                    s += 0.5 * g.h() * wt * wh(x) * hat(j, x) * hat(k, x);
                }
            }
            s
        };
        let n = weighted_mass(&g, &w);
        for j in 1..5 {
            assert!((n.diag[j - 1] - integral(j, j)).abs() < 1e-14);
            if j < 4 {
                assert!((n.off[j - 1] - integral(j, j + 1)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn forward_diff_hand_value() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert_eq!(forward_diff(&g, &[1.0, 1.0, 1.0]), vec![0.0, 0.0, -4.0]);
        assert_eq!(forward_diff(&g, &[0.0; 3]), vec![0.0; 3]);
    }

    #[test]
    fn cell_differences_compose_to_laplacian() {
        let g = make_grid(0.0, 1.0, 9).unwrap();
        let v: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).sin()).collect();
        let lap = backward_diff_cells(&g, &forward_diff_cells(&g, &v));
        assert!(max_abs_diff(&lap, &build_central_diff(&g).apply(&v)) < 1e-10);
    }

    #[test]
    fn project_requires_fem() {
        let g = make_grid(0.0, 1.0, 4).unwrap();
        assert!(build_central_diff(&g).project_l2(|x| x).is_err());
        assert_eq!(build_fem(&g).project_l2(|_| 0.0).unwrap(), vec![0.0; 3]);
    }
}
