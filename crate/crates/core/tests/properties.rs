use proptest::prelude::*;
use skgs_core::diagnostics::{charge, symplectic_form, TangentPair};
use skgs_core::grid::{eval_initial, make_grid, FieldState, InitialData};
use skgs_core::integrators::{gauss_legendre, make_parametric_tableau, ParametricGaussSpec};
use skgs_core::spatial::build_central_diff;

/// Collocation tableau `a_ij = ∫_0^{c_i} L_j(t) dt` with Lagrange basis
/// `L_j` on the nodes `c`, integrated exactly by expanding the polynomial.
fn collocation(c: &[f64]) -> Vec<Vec<f64>> {
    let s = c.len();
    let mut a = vec![vec![0.0; s]; s];
    for j in 0..s {
        // Monomial coefficients of L_j.
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for (m, &cm) in c.iter().enumerate() {
            if m == j {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (k, &p) in poly.iter().enumerate() {
                next[k] -= cm * p;
                next[k + 1] += p;
            }
            poly = next;
            denom *= c[j] - cm;
        }
        for i in 0..s {
            a[i][j] = poly
                .iter()
                .enumerate()
                .map(|(k, p)| p * c[i].powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum::<f64>()
                / denom;
        }
    }
    a
}

#[test]
fn gauss_tableaus_match_collocation() {
    for s in 1..=5 {
        let tab = make_parametric_tableau(&ParametricGaussSpec { stages: s, alpha: vec![] }).unwrap();
        let want = collocation(&tab.c);
        for i in 0..s {
            for j in 0..s {
                assert!((tab.a[i][j] - want[i][j]).abs() <= 1e-12, "s = {s}");
            }
        }
    }
}

#[test]
fn closed_form_two_stage() {
    let r = 3f64.sqrt() / 6.0;
    let t = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![0.0] }).unwrap();
    let want = [[0.25, 0.25 - r], [0.25 + r, 0.25]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((t.a[i][j] - want[i][j]).abs() <= 4.0 * f64::EPSILON);
        }
    }
    assert_eq!(t.b, vec![0.5, 0.5]);
    assert_eq!(gauss_legendre(2).0, t.c);
}

#[test]
fn symplectic_identity_on_the_listed_parameters() {
    for s in 1..=3 {
        for alpha in [-1.0, -0.1, 0.0, 0.001, 0.1, 1.0] {
            let t = make_parametric_tableau(&ParametricGaussSpec { stages: s, alpha: vec![alpha; s - 1] }).unwrap();
            assert!(t.symplectic_defect() <= 1e-12, "s = {s}, alpha = {alpha}");
        }
    }
}

proptest! {
    #[test]
    fn any_parameters_give_symplectic_tableaus(s in 1usize..6, alpha in prop::collection::vec(-2.0f64..2.0, 5)) {
        let t = make_parametric_tableau(&ParametricGaussSpec { stages: s, alpha: alpha[..s - 1].to_vec() }).unwrap();
        prop_assert!(t.symplectic_defect() <= 1e-11);
        prop_assert!((t.b.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
        t.validate().unwrap();
    }

    #[test]
    fn two_stage_cross_term_cancels(alpha in -5.0f64..5.0) {
        let t = make_parametric_tableau(&ParametricGaussSpec { stages: 2, alpha: vec![alpha] }).unwrap();
        let r = t.b[0] * t.a[0][1] + t.b[1] * t.a[1][0] - t.b[0] * t.b[1];
        prop_assert!(r.abs() <= 1e-14 * (1.0 + alpha.abs()));
    }

    #[test]
    fn wedge_is_bilinear_and_antisymmetric(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = make_grid(0.0, 1.0, 12).unwrap();
        let x = TangentPair::random(11, s1);
        let y = TangentPair::random(11, s2);
        let comb = |p: &FieldState, q: &FieldState| {
            let mut r = p.clone();
            for (rf, (pf, qf)) in [&mut r.p, &mut r.q, &mut r.u, &mut r.v].into_iter().zip(
                [(&p.p, &q.p), (&p.q, &q.q), (&p.u, &q.u), (&p.v, &q.v)]) {
                for i in 0..rf.len() {
                    rf[i] = a * pf[i] + b * qf[i];
                }
            }
            r
        };
        let mixed = TangentPair { first: comb(&x.first, &y.first), second: x.second.clone() };
        let lhs = symplectic_form(&mixed, &g);
        let rhs = a * symplectic_form(&x, &g) + b * symplectic_form(&TangentPair { first: y.first.clone(), second: x.second.clone() }, &g);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        prop_assert_eq!(symplectic_form(&x.swapped(), &g), -symplectic_form(&x, &g));
    }

    #[test]
    fn charge_is_a_nonnegative_quadratic(seed in any::<u64>(), k in -4.0f64..4.0) {
        let g = make_grid(0.0, 1.0, 10).unwrap();
        let op = build_central_diff(&g);
        let s = TangentPair::random(9, seed).first;
        let scaled = FieldState { p: s.p.iter().map(|x| k * x).collect(), q: s.q.iter().map(|x| k * x).collect(), ..s.clone() };
        prop_assert!(charge(&s, &op) >= 0.0);
        prop_assert!((charge(&scaled, &op) - k * k * charge(&s, &op)).abs() <= 1e-12 * (1.0 + charge(&scaled, &op)));
    }

    #[test]
    fn initial_data_is_pure(theta in -0.95f64..0.95, m in 2usize..200) {
        let g = make_grid(-15.0, 15.0, m).unwrap();
        let a = eval_initial(&InitialData::Soliton { theta }, &g).unwrap();
        let b = eval_initial(&InitialData::Soliton { theta }, &g).unwrap();
        prop_assert_eq!(a, b);
    }
}
