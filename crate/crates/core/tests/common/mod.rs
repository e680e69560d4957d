//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use minsphere::Parity;

fn pq(a: f64, b: f64, d: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let dd = a * a * (1.0 - z2) + b * b * z2;
    let p = (1.0 - z2) / dd.sqrt();
    let q = -a * a * (a * a * (1.0 - z2) + b * b * (1.0 + z2)) / (d * d * dd * dd.sqrt());
    (p, q)
}

/// Tridiagonal matrix of B⁻¹A for the flux-form discretization of
/// −(p u′)′ + q u = λ p u on a uniform grid of step 1/n, with the
/// boundary row a² v = d² v′ (one-sided second order) at z = 1 eliminated.
fn fd_matrix(a: f64, b: f64, d: f64, parity: Parity, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = 1.0 / n as f64;
    let p = |z: f64| pq(a, b, d, z).0;
    let first = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    // nodes first..n-1; v_n = al v_{n-1} + be v_{n-2}
    let den = 2.0 * h * a * a - 3.0 * d * d;
    let (al, be) = (-4.0 * d * d / den, d * d / den);
    let m = n - first;
    let (mut lo, mut di, mut up) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let i = k + first;
        let z = i as f64 * h;
        let (pz, qz) = pq(a, b, d, z);
        let (pl, pr) = (p(z - 0.5 * h), p(z + 0.5 * h));
        let mut c_self = (pl + pr) / (h * h) + qz;
        let mut c_left = -pl / (h * h);
        let c_right = -pr / (h * h);
        if i == 0 {
            // u'(0) = 0 by a mirror ghost node
            c_self = 2.0 * pr / (h * h) + qz;
            di[k] = c_self / pz;
            up[k] = 2.0 * c_right / pz;
            continue;
        }
        if i == n - 1 {
            c_self += c_right * al;
            c_left += c_right * be;
            di[k] = c_self / pz;
            lo[k] = c_left / pz;
            continue;
        }
        di[k] = c_self / pz;
        lo[k] = c_left / pz;
        up[k] = c_right / pz;
    }
    (lo, di, up)
}

/// Number of eigenvalues below x (Sturm sequence of a sign-symmetrizable
/// tridiagonal matrix).
fn count_below(lo: &[f64], di: &[f64], up: &[f64], x: f64) -> usize {
    let mut cnt = 0;
    let mut q = 1.0;
    for k in 0..di.len() {
        let off = if k == 0 { 0.0 } else { lo[k] * up[k - 1] };
        q = di[k] - x - off / q;
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            cnt += 1;
        }
    }
    cnt
}

fn fd_eigenvalue(a: f64, b: f64, d: f64, parity: Parity, idx: usize, n: usize) -> f64 {
    let (lo, di, up) = fd_matrix(a, b, d, parity, n);
    let mut r = 0.0f64;
    for k in 0..di.len() {
        r = r.max(di[k].abs() + lo[k].abs() + up[k].abs());
    }
    let (mut x0, mut x1) = (-r, r);
    for _ in 0..200 {
        let mid = 0.5 * (x0 + x1);
        if count_below(&lo, &di, &up, mid) > idx {
            x1 = mid;
        } else {
            x0 = mid;
        }
    }
    0.5 * (x0 + x1)
}

/// λ_idx from the finite-difference oracle at h ∈ {1/800, 1/1600, 1/3200}
/// with two Richardson passes (orders 2 then 3).
pub fn fd_oracle(a: f64, b: f64, d: f64, parity: Parity, idx: usize) -> f64 {
    let l: Vec<f64> = [800, 1600, 3200].iter().map(|&n| fd_eigenvalue(a, b, d, parity, idx, n)).collect();
    let r1 = l[1] + (l[1] - l[0]) / 3.0;
    let r2 = l[2] + (l[2] - l[1]) / 3.0;
    r2 + (r2 - r1) / 7.0
}

/// Two-level (h ∈ {1e-2, 5e-3}) second-order Richardson value.
pub fn fd_oracle_coarse(a: f64, b: f64, d: f64, parity: Parity, idx: usize) -> f64 {
    let l0 = fd_eigenvalue(a, b, d, parity, idx, 100);
    let l1 = fd_eigenvalue(a, b, d, parity, idx, 200);
    l1 + (l1 - l0) / 3.0
}

/// Raw grid values for convergence diagnostics.
pub fn fd_levels(a: f64, b: f64, d: f64, parity: Parity, idx: usize, ns: &[usize]) -> Vec<f64> {
    ns.iter().map(|&n| fd_eigenvalue(a, b, d, parity, idx, n)).collect()
}

/// Number of negative eigenvalues of the finest oracle grid.
pub fn fd_count_negative(a: f64, b: f64, d: f64, parity: Parity) -> usize {
    let (lo, di, up) = fd_matrix(a, b, d, parity, 3200);
    count_below(&lo, &di, &up, 0.0)
}
