//! Butcher tableaus, including the parametric Gauss family
//! `A(α) = l X_s(α) l⁻¹`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SkgsError};

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `max |b_i a_ij + b_j a_ji - b_i b_j|`.
    pub fn symplectic_defect(&self) -> f64 {
        let s = self.stages();
        let mut worst = 0.0f64;
        for i in 0..s {
            for j in 0..s {
                let r = self.b[i] * self.a[i][j] + self.b[j] * self.a[j][i] - self.b[i] * self.b[j];
                worst = worst.max(r.abs());
            }
        }
        worst
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.a.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if s == 0 || self.a.len() != s || self.a.iter().any(|r| r.len() != s) || self.c.len() != s {
            return Err(SkgsError::param("tableau", "inconsistent shapes"));
        }
        if (self.b.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(SkgsError::param("tableau", "weights must sum to 1"));
        }
        if self.symplectic_defect() > 1e-12 {
            return Err(SkgsError::param(
                "tableau",
                format!("not symplectic (defect {:e})", self.symplectic_defect()),
            ));
        }
        Ok(())
    }
}

/// Stage count and free parameters of the parametric Gauss family.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricGaussSpec {
    pub stages: usize,
    /// `α_1..α_{s-1}`; missing trailing entries are zero.
    pub alpha: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, ascending.
pub fn gauss_legendre(s: usize) -> (Vec<f64>, Vec<f64>) {
    match s {
        1 => (vec![0.5], vec![1.0]),
        2 => {
            let d = 3f64.sqrt() / 6.0;
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        3 => {
            let d = 15f64.sqrt() / 10.0;
            (vec![0.5 - d, 0.5, 0.5 + d], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
        }
        _ => {
            // Golub-Welsch on the Legendre Jacobi matrix.
            let jac = DMatrix::from_fn(s, s, |i, j| {
                if i.abs_diff(j) == 1 {
                    let k = i.max(j) as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(jac);
            let mut pairs: Vec<(f64, f64)> = (0..s)
                .map(|k| (0.5 * (eig.eigenvalues[k] + 1.0), eig.eigenvectors[(0, k)].powi(2)))
                .collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            pairs.into_iter().unzip()
        }
    }
}

/// Shifted Legendre polynomial of degree `k` on `[0, 1]`, normalized in L².
fn shifted_legendre(k: usize, t: f64) -> f64 {
    let x = 2.0 * t - 1.0;
    let (mut p0, mut p1) = (1.0, x);
    let pk = match k {
        0 => 1.0,
        1 => x,
        _ => {
            for n in 1..k {
                let n = n as f64;
                let p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    (2.0 * k as f64 + 1.0).sqrt() * pk
}

pub fn make_parametric_tableau(spec: &ParametricGaussSpec) -> Result<ButcherTableau> {
    let s = spec.stages;
    if s == 0 {
        return Err(SkgsError::param("scheme.stages", "must be at least 1"));
    }
    if spec.alpha.len() > s - 1 {
        return Err(SkgsError::param(
            "scheme.alpha",
            format!("{} parameters given for {s} stages", spec.alpha.len()),
        ));
    }
    if spec.alpha.iter().any(|a| !a.is_finite()) {
        return Err(SkgsError::param("scheme.alpha", "must be finite"));
    }
    let (c, b) = gauss_legendre(s);
    let mut x = DMatrix::<f64>::zeros(s, s);
    x[(0, 0)] = 0.5;
    for k in 1..s {
        let kf = k as f64;
        let xi = 1.0 / (2.0 * ((2.0 * kf + 1.0) * (2.0 * kf - 1.0)).sqrt());
        let v = xi + spec.alpha.get(k - 1).copied().unwrap_or(0.0);
        x[(k - 1, k)] = -v;
        x[(k, k - 1)] = v;
    }
    let l = DMatrix::from_fn(s, s, |i, j| shifted_legendre(j, c[i]));
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| SkgsError::param("tableau", "Legendre basis matrix is singular"))?;
    let a = &l * x * l_inv;
    let tab = ButcherTableau {
        a: (0..s).map(|i| (0..s).map(|j| a[(i, j)]).collect()).collect(),
        b,
        c,
    };
    tab.validate()?;
    Ok(tab)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_stage_gauss() {
        let t = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![0.0] }).unwrap();
        let d = 3f64.sqrt() / 6.0;
        let want = [[0.25, 0.25 - d], [0.25 + d, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.a[i][j] - want[i][j]).abs() <= 4.0 * f64::EPSILON, "{i}{j}");
            }
        }
        assert_eq!(t.b, vec![0.5, 0.5]);
    }

    #[test]
    fn two_stage_alpha_shift() {
        let alpha = 0.1;
        let t = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![alpha] }).unwrap();
        let d = 3f64.sqrt() / 6.0;
        assert!((t.a[0][1] - (0.25 - d - alpha)).abs() < 1e-15);
        assert!((t.a[1][0] - (0.25 + d + alpha)).abs() < 1e-15);
        assert!((t.a[0][0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_stage_is_midpoint() {
        let t = make_parametric_tableau(&ParametricGaussSpec { stages: 1, alpha: vec![] }).unwrap();
        assert_eq!(t.a, vec![vec![0.5]]);
        assert_eq!(t.b, vec![1.0]);
    }

    #[test]
    fn golub_welsch_matches_closed_form() {
        // Re-derive the 3-point rule numerically and compare.
        let s = 3;
        let jac = DMatrix::from_fn(s, s, |i, j| {
            if i.abs_diff(j) == 1 {
                let k = i.max(j) as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jac);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().map(|e| 0.5 * (e + 1.0)).collect();
        nodes.sort_by(f64::total_cmp);
        let (c, _) = gauss_legendre(3);
        for (a, b) in nodes.iter().zip(&c) {
            assert!((a - b).abs() < 1e-14);
        }
        let (c5, b5) = gauss_legendre(5);
        assert!((b5.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // exact for degree 9
        let q: f64 = c5.iter().zip(&b5).map(|(x, w)| w * x.powi(9)).sum();
        assert!((q - 0.1).abs() < 1e-14);
    }

    #[test]
    fn rejects_too_many_parameters() {
        assert!(make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![0.0, 1.0] }).is_err());
        assert!(make_parametric_tableau(&ParametricGaussSpec { stages: 0, alpha: vec![] }).is_err());
    }
}
