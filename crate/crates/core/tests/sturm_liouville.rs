mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use minsphere::sturm_liouville::{
    count_negative, degeneracy_instant, eigenvalue, frobenius_solution, instants, jacobi_boundary_solution,
    projective_angle, SLCoefficients, DEFAULT_ORDER, DEFAULT_THETA_F,
};
use minsphere::{Parity, Semiaxes};
use proptest::prelude::*;

fn sa(a: f64, b: f64, d: f64) -> Semiaxes {
    Semiaxes::new(a, b, d).unwrap()
}

fn lam(s: &Semiaxes, parity: Parity, n: usize) -> f64 {
    eigenvalue(s, parity, n, None).unwrap().lambda_n
}

#[test]
fn taylor_polynomial_reproduces_closed_form() {
    let c = SLCoefficients::new(sa(2.0, 1.3, 0.8));
    let t = c.taylor_pq_at_one(64).unwrap();
    for z in [0.99, 0.9, 0.8] {
        let x = z - 1.0;
        let p: f64 = t.p.iter().rev().fold(0.0, |acc, v| acc * x + v);
        let q: f64 = t.q.iter().rev().fold(0.0, |acc, v| acc * x + v);
        let (pe, qe) = c.eval_pq(z);
        assert!((p - pe).abs() < 1e-12 * pe.abs().max(1.0), "p at {z}");
        assert!((q - qe).abs() < 1e-12 * qe.abs().max(1.0), "q at {z}");
    }
}

#[test]
fn taylor_coefficients_match_one_sided_differences() {
    let c = SLCoefficients::new(sa(2.0, 1.0, 1.0));
    let t = c.taylor_pq_at_one(16).unwrap();
    let h = 1e-3;
    let p = |k: usize| c.eval_pq(1.0 - k as f64 * h).0;
    // backward differences of order 8 for the first derivative
    let w = [761.0 / 280.0, -8.0, 14.0, -56.0 / 3.0, 35.0 / 2.0, -56.0 / 5.0, 14.0 / 3.0, -8.0 / 7.0, 1.0 / 8.0];
    let d1: f64 = w.iter().enumerate().map(|(k, wk)| wk * p(k)).sum::<f64>() / h;
    assert!((d1 - t.p[1]).abs() < 1e-6 * t.p[1].abs());
    let q = |k: usize| c.eval_pq(1.0 - k as f64 * h).1;
    let dq: f64 = w.iter().enumerate().map(|(k, wk)| wk * q(k)).sum::<f64>() / h;
    assert!((dq - t.q[1]).abs() < 1e-6 * t.q[1].abs());
}

#[test]
fn projective_angle_at_eigenvalues() {
    let s = sa(2.0, 1.0, 1.0);
    for n in 0..3 {
        let odd = projective_angle(&s, lam(&s, Parity::Odd, n)).unwrap();
        assert!(odd.min(PI - odd) < 1e-8, "odd n={n}: {odd}");
        let even = projective_angle(&s, lam(&s, Parity::Even, n)).unwrap();
        assert!((even - FRAC_PI_2).abs() < 1e-8, "even n={n}: {even}");
    }
}

#[test]
fn projective_angle_turns_clockwise() {
    let s = sa(2.0, 1.0, 1.0);
    for i in 0..50 {
        let l = -30.0 + 2.0 * i as f64;
        let t0 = projective_angle(&s, l).unwrap();
        let t1 = projective_angle(&s, l + 0.1).unwrap();
        let turn = (t0 - t1).rem_euclid(PI);
        assert!(turn > 0.0 && turn < FRAC_PI_2, "λ = {l}: {t0} -> {t1}");
    }
}

#[test]
fn round_sphere_ground_states() {
    let s = sa(1.0, 1.0, 1.0);
    assert!(lam(&s, Parity::Odd, 0).abs() < 1e-9);
    assert!(lam(&s, Parity::Even, 0) < 0.0);
    let u = frobenius_solution(&s, 0.0, DEFAULT_ORDER, DEFAULT_THETA_F).unwrap();
    let zs: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    for (z, (v, _)) in zs.iter().zip(u.eval_many(&zs).unwrap()) {
        assert!((v - z).abs() < 1e-8);
    }
}

#[test]
fn eigenvalues_match_difference_oracle() {
    let s = sa(2.0, 1.0, 1.0);
    for (parity, n) in [(Parity::Even, 0), (Parity::Odd, 0), (Parity::Even, 1)] {
        let l = lam(&s, parity, n);
        let o = common::fd_oracle(2.0, 1.0, 1.0, parity, n);
        assert!((l - o).abs() < 1e-5 * o.abs(), "{parity} {n}: {l} vs {o}");
    }
}

#[test]
fn negative_counts() {
    assert_eq!(count_negative(&sa(0.9, 1.0, 1.0), Parity::Odd).unwrap(), 0);
    for a in [0.5, 1.0, 2.0, 5.0] {
        assert!(count_negative(&sa(a, 1.0, 1.0), Parity::Even).unwrap() >= 1);
    }
    for parity in [Parity::Even, Parity::Odd] {
        let c = count_negative(&sa(6.0, 1.0, 1.0), parity).unwrap();
        assert_eq!(c, common::fd_count_negative(6.0, 1.0, 1.0, parity), "{parity}");
    }
}

#[test]
fn first_odd_instant_is_d() {
    for (b, d) in [(1.0, 1.0), (0.7, 1.3), (2.0, 0.5)] {
        let a = degeneracy_instant(b, d, Parity::Odd, 0, (0.8 * d, 1.2 * d)).unwrap();
        assert!((a - d).abs() < 1e-8, "(b, d) = ({b}, {d}): {a}");
    }
}

#[test]
fn instant_sequence_b_equals_d() {
    let inst = instants(1.0, 1.0, 6).unwrap();
    assert_eq!(inst.len(), 6);
    assert!((inst[0].a_m - 1.0).abs() < 1e-8);
    assert!(inst.windows(2).all(|w| w[0].a_m < w[1].a_m));
    for i in &inst {
        assert_eq!(i.parity, Parity::of_m(i.m));
        assert!(i.a_m / i.m as f64 <= 2.5);
    }
    // even instant n = 1 is isolated by the oracle between d and a_1^odd
    let a2 = inst[1].a_m;
    assert!(a2 > 1.0 && a2 < inst[2].a_m);
    let below = common::fd_count_negative(a2 - 1e-3, 1.0, 1.0, Parity::Even);
    let above = common::fd_count_negative(a2 + 1e-3, 1.0, 1.0, Parity::Even);
    assert_eq!((below, above), (1, 2));
    assert_eq!(instants(1.0, 1.0, 1).unwrap().len(), 1);
}

#[test]
fn boundary_jacobi_field_at_first_even_instant() {
    let a2 = instants(1.0, 1.0, 2).unwrap()[1].a_m;
    let v = jacobi_boundary_solution(&sa(a2, 1.0, 1.0)).unwrap();
    assert!(v.du0.abs() < 1e-8);
    let v = jacobi_boundary_solution(&sa(1.0, 1.0, 1.0)).unwrap();
    assert!(v.u0.abs() < 1e-12 && (v.du0 - 1.0).abs() < 1e-10);
}

#[test]
fn boundary_value_changes_sign_across_odd_instants() {
    let inst = instants(1.0, 1.0, 5).unwrap();
    for i in inst.iter().filter(|i| i.parity == Parity::Odd) {
        let lo = jacobi_boundary_solution(&sa(i.a_m - 1e-3, 1.0, 1.0)).unwrap().u0;
        let hi = jacobi_boundary_solution(&sa(i.a_m + 1e-3, 1.0, 1.0)).unwrap().u0;
        assert!(lo * hi < 0.0, "a_{} = {}", i.m, i.a_m);
    }
}

#[test]
fn negative_count_steps_at_each_instant() {
    for i in instants(1.0, 1.0, 5).unwrap() {
        let below = count_negative(&sa(i.a_m - 1e-4, 1.0, 1.0), i.parity).unwrap();
        let above = count_negative(&sa(i.a_m + 1e-4, 1.0, 1.0), i.parity).unwrap();
        assert_eq!(above, below + 1, "a_{}", i.m);
    }
}

#[test]
fn eigenfunctions_have_n_zeros() {
    let s = sa(3.0, 1.3, 0.8);
    for parity in [Parity::Even, Parity::Odd] {
        for n in 0..4 {
            assert_eq!(eigenvalue(&s, parity, n, None).unwrap().eigen_zero_count, n);
        }
    }
}

#[test]
fn nearly_degenerate_ground_states() {
    // even and odd ground states differ by about 1e-10 at a = 4
    let s = sa(4.0, 1.0, 1.0);
    let e = eigenvalue(&s, Parity::Even, 0, None).unwrap();
    let o = eigenvalue(&s, Parity::Odd, 0, None).unwrap();
    assert_eq!((e.eigen_zero_count, o.eigen_zero_count), (0, 0));
    assert!(e.lambda_n <= o.lambda_n && o.lambda_n - e.lambda_n < 1e-6);
}

/// Residual of −(p u′)′ + (q − λp) u, with (p u′)′ from fourth-order
/// differences at h and h/2 combined by one Richardson pass.
fn ode_residual(s: &Semiaxes, l: f64) -> f64 {
    let u = frobenius_solution(s, l, DEFAULT_ORDER, DEFAULT_THETA_F).unwrap();
    let c = SLCoefficients::new(*s);
    let diff = |z: f64, h: f64| {
        let zs = [z - 2.0 * h, z - h, z + h, z + 2.0 * h];
        let v = u.eval_many(&zs).unwrap();
        (v[0].1 - 8.0 * v[1].1 + 8.0 * v[2].1 - v[3].1) / (12.0 * h)
    };
    let h = 1e-3;
    let mut worst = 0.0f64;
    for i in 1..=20 {
        let z = 0.04 * i as f64 - 0.02;
        let dw = (16.0 * diff(z, 0.5 * h) - diff(z, h)) / 15.0;
        let (p, q) = c.eval_pq(z);
        let u_z = u.eval_many(&[z]).unwrap()[0].0;
        let r = -dw + (q - l * p) * u_z;
        let scale = dw.abs() + ((q - l * p) * u_z).abs() + 1e-300;
        worst = worst.max(r.abs() / scale);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn frobenius_solves_the_equation(a in 0.5f64..5.0, b in 0.5f64..2.0, d in 0.5f64..2.0, l in -20.0f64..40.0) {
        let s = sa(a, b, d);
        let u = frobenius_solution(&s, l, DEFAULT_ORDER, DEFAULT_THETA_F).unwrap();
        prop_assert!((d * d * u.coeffs[1] - a * a * u.coeffs[0]).abs() < 1e-12 * a * a);
        prop_assert!(ode_residual(&s, l) < 1e-8);
    }

    #[test]
    fn eigenvalues_decrease_in_a(a in 0.6f64..6.0, n in 0usize..3, odd in any::<bool>()) {
        let parity = if odd { Parity::Odd } else { Parity::Even };
        prop_assert!(lam(&sa(a + 0.2, 1.0, 1.0), parity, n) < lam(&sa(a, 1.0, 1.0), parity, n));
    }

    #[test]
    fn eigenvalues_increase_in_d(d in 0.5f64..2.0, n in 0usize..3, odd in any::<bool>()) {
        let parity = if odd { Parity::Odd } else { Parity::Even };
        prop_assert!(lam(&sa(2.0, 1.0, d + 0.1), parity, n) > lam(&sa(2.0, 1.0, d), parity, n));
    }

    #[test]
    fn spectra_intertwine(a in 0.5f64..8.0, b in 0.5f64..2.0, d in 0.5f64..2.0) {
        let s = sa(a, b, d);
        let e0 = lam(&s, Parity::Even, 0);
        let o0 = lam(&s, Parity::Odd, 0);
        let e1 = lam(&s, Parity::Even, 1);
        let o1 = lam(&s, Parity::Odd, 1);
        prop_assert!(e0 < o0 && o0 < e1 && e1 < o1, "{e0} {o0} {e1} {o1}");
        prop_assert!(e0 < 0.0);
    }
}
