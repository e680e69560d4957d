//! Singular Sturm–Liouville problems −(p u′)′ + q u = λ p u on (0, 1).
//!
//! p(z) = (1−z²)/√D, q(z) = −a²(a²(1−z²) + b²(1+z²))/(d² D^{3/2}) with
//! D = a²(1−z²) + b²z². The endpoint z = 1 is regular singular with a double
//! indicial root 0; the bounded solution is built as a power series there and
//! continued to z = 0 by Runge–Kutta on (u, p·u′). Even problems impose
//! u′(0) = 0, odd ones u(0) = 0.
//!
//! Eigenvalues are indexed with the continuous Prüfer phase
//! Φ(λ) = π/2 − ϑ(0), where ϑ is the angle of (p u′, u) tracked from z = 1
//! (ϑ = π/2) to z = 0. Φ increases with λ; λ_n^even solves Φ = nπ and
//! λ_n^odd solves Φ = nπ + π/2.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Semiaxes;
use crate::numerics::ode::{Dopri5, OdeOptions};
use crate::numerics::{quad, roots};
use crate::Parity;

pub const DEFAULT_ORDER: usize = 96;
pub const DEFAULT_THETA_F: f64 = 0.5;
const MAX_ORDER: usize = 512;

/// p_a and q_a with their Taylor data at z = 1.
#[derive(Debug, Clone, Copy)]
pub struct SLCoefficients {
    pub semiaxes: Semiaxes,
}

/// Taylor coefficients in powers of (z − 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPQ {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Convergence radius estimate R_a (∞ when a = b).
    pub radius: f64,
}

impl TaylorPQ {
    /// Bound on the truncated tail at distance x from z = 1, from the last
    /// coefficient and geometric decay at rate x/R.
    pub fn tail_bound(&self, x: f64) -> f64 {
        let n = self.p.len() - 1;
        let ratio = if self.radius.is_finite() { x / self.radius } else { 0.0 };
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        let last = self.p[n].abs().max(self.q[n].abs()) * x.powi(n as i32);
        last * ratio / (1.0 - ratio)
    }
}

impl SLCoefficients {
    pub fn new(semiaxes: Semiaxes) -> Self {
        SLCoefficients { semiaxes }
    }

    /// Closed-form (p, q); even in z.
    pub fn eval_pq(&self, z: f64) -> (f64, f64) {
        let Semiaxes { a, b, d } = self.semiaxes;
        let z2 = z * z;
        let dd = a * a * (1.0 - z2) + b * b * z2;
        let sd = dd.sqrt();
        let p = (1.0 - z2) / sd;
        let q = -a * a * (a * a * (1.0 - z2) + b * b * (1.0 + z2)) / (d * d * dd * sd);
        (p, q)
    }

    /// R_a = max(a,b)/√|a²−b²| − 1.
    pub fn radius(&self) -> f64 {
        let Semiaxes { a, b, .. } = self.semiaxes;
        let e = (a * a - b * b).abs();
        if e == 0.0 {
            f64::INFINITY
        } else {
            a.max(b) / e.sqrt() - 1.0
        }
    }

    /// Taylor coefficients of p and q in the variable x = 1 − z.
    fn series_x(&self, order: usize) -> (Vec<f64>, Vec<f64>) {
        let Semiaxes { a, b, d } = self.semiaxes;
        let e = a * a - b * b;
        // D(x) = b² + e(2x − x²)
        let f = [b * b, 2.0 * e, -e];
        let g = power_series(&f, -0.5, order + 1);
        let h = power_series(&f, -1.5, order + 1);
        let mut p = vec![0.0; order + 1];
        let mut q = vec![0.0; order + 1];
        let c = [2.0 * b * b, 2.0 * e, -e];
        let k = -a * a / (d * d);
        for n in 0..=order {
            // w(x) = 2x − x²
            let mut s = 0.0;
            if n >= 1 {
                s += 2.0 * g[n - 1];
            }
            if n >= 2 {
                s -= g[n - 2];
            }
            p[n] = s;
            let mut t = c[0] * h[n];
            if n >= 1 {
                t += c[1] * h[n - 1];
            }
            if n >= 2 {
                t += c[2] * h[n - 2];
            }
            q[n] = k * t;
        }
        (p, q)
    }

    pub fn taylor_pq_at_one(&self, order: usize) -> Result<TaylorPQ> {
        if order < 4 {
            return Err(Error::Domain(format!("Taylor order {order} below 4")));
        }
        if order > MAX_ORDER {
            return Err(Error::OrderTooLarge(order));
        }
        let (px, qx) = self.series_x(order);
        let sgn = |n: usize| if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(TaylorPQ {
            p: px.iter().enumerate().map(|(n, v)| sgn(n) * v).collect(),
            q: qx.iter().enumerate().map(|(n, v)| sgn(n) * v).collect(),
            radius: self.radius(),
        })
    }
}

/// Coefficients of f(x)^alpha for a polynomial f with f[0] > 0.
fn power_series(f: &[f64], alpha: f64, n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n + 1];
    g[0] = f[0].powf(alpha);
    for m in 1..=n {
        let mut s = 0.0;
        for k in 1..=m.min(f.len() - 1) {
            s += ((alpha + 1.0) * k as f64 - m as f64) * f[k] * g[m - k];
        }
        g[m] = s / (m as f64 * f[0]);
    }
    g
}

/// The bounded solution u_{a,λ} normalized by u(1) = `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusSolution {
    pub semiaxes: Semiaxes,
    pub lambda: f64,
    /// û_n, coefficients in powers of (z − 1), û_0 = scale.
    pub coeffs: Vec<f64>,
    pub theta_f: f64,
    /// Handoff point z* = 1 − θ_f·min(R_a, 1).
    pub z_star: f64,
    pub u0: f64,
    pub du0: f64,
    /// Sign changes of u on the open interval (0, 1).
    pub zero_count: usize,
    /// Continuous Prüfer phase Φ(λ).
    pub phase: f64,
    /// |−(pu′)′ + (q−λp)u| at z*, relative to |q u| there.
    pub series_residual: f64,
}

fn ode_opts() -> OdeOptions {
    OdeOptions { rtol: 1e-13, atol: 1e-300, ..Default::default() }
}

impl FrobeniusSolution {
    /// Series coefficients c_n in x = 1 − z (unscaled, c_0 = 1).
    fn c_x(&self, n: usize) -> f64 {
        let s = if n % 2 == 0 { 1.0 } else { -1.0 };
        s * self.coeffs[n] / self.coeffs[0]
    }

    fn scale(&self) -> f64 {
        self.coeffs[0]
    }

    /// (u, p·u′) from the series at z ≥ z*.
    fn series_eval(&self, coef: &SLCoefficients, z: f64) -> (f64, f64) {
        let x = 1.0 - z;
        let mut u = 0.0;
        let mut ux = 0.0;
        for n in (0..self.coeffs.len()).rev() {
            u = u * x + self.c_x(n);
            if n >= 1 {
                ux = ux * x + n as f64 * self.c_x(n);
            }
        }
        let (p, _) = coef.eval_pq(z);
        (self.scale() * u, -self.scale() * p * ux)
    }

    /// (u(z), p(z)u′(z)) at the requested points.
    pub fn eval_many(&self, zs: &[f64]) -> Result<Vec<(f64, f64)>> {
        let coef = SLCoefficients::new(self.semiaxes);
        let mut order: Vec<usize> = (0..zs.len()).collect();
        order.sort_by(|&i, &j| zs[j].total_cmp(&zs[i]));
        let mut out = vec![(0.0, 0.0); zs.len()];
        let start = self.series_eval(&coef, self.z_star);
        let lambda = self.lambda;
        let rhs = move |z: f64, y: &[f64; 2]| {
            let (p, q) = coef.eval_pq(z);
            [y[1] / p, (q - lambda * p) * y[0]]
        };
        let mut st = Dopri5::new(rhs, self.z_star, [start.0, start.1], -1.0, ode_opts());
        for i in order {
            let z = zs[i];
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Domain(format!("z = {z} outside [0, 1]")));
            }
            if z >= self.z_star {
                out[i] = self.series_eval(&coef, z);
                continue;
            }
            while st.t > z {
                st.step(Some(z))?;
            }
            out[i] = (st.y[0], st.y[1]);
        }
        Ok(out)
    }

    /// ∫₀¹ p u² dz, the normalizer for the L²(p) normalization.
    pub fn weighted_l2_norm_sq(&self) -> Result<f64> {
        let coef = SLCoefficients::new(self.semiaxes);
        let tail = quad::integrate(
            |z| {
                let (u, _) = self.series_eval(&coef, z);
                coef.eval_pq(z).0 * u * u
            },
            self.z_star,
            1.0,
            1e-14,
            1e-12,
        )?
        .value;
        let start = self.series_eval(&coef, self.z_star);
        let lambda = self.lambda;
        let rhs = move |z: f64, y: &[f64; 3]| {
            let (p, q) = coef.eval_pq(z);
            [y[1] / p, (q - lambda * p) * y[0], -p * y[0] * y[0]]
        };
        let y = crate::numerics::ode::integrate_to(rhs, self.z_star, [start.0, start.1, 0.0], 0.0, ode_opts(), |_, _| {})?;
        Ok(tail + y[2])
    }

    /// Multiply the solution by k (u(1) = k afterwards).
    pub fn scaled(mut self, k: f64) -> Self {
        for c in &mut self.coeffs {
            *c *= k;
        }
        self.u0 *= k;
        self.du0 *= k;
        self
    }
}

/// Frobenius series at z = 1 plus RK continuation to z = 0.
pub fn frobenius_solution(sa: &Semiaxes, lambda: f64, order: usize, theta_f: f64) -> Result<FrobeniusSolution> {
    if !(theta_f > 0.0 && theta_f < 1.0) {
        return Err(Error::Domain(format!("theta_f = {theta_f} outside (0, 1)")));
    }
    let coef = SLCoefficients::new(*sa);
    if order > MAX_ORDER {
        return Err(Error::OrderTooLarge(order));
    }
    let order = order.max(4);
    let (px, qx) = coef.series_x(order + 1);
    // c_n in x = 1 − z: P1 n² c_n = −n Σ_{k=2}^{n} P_k (n+1−k) c_{n+1−k} + Σ_{i<n} (Q−λP)_{n−1−i} c_i
    let ql: Vec<f64> = qx.iter().zip(&px).map(|(q, p)| q - lambda * p).collect();
    let mut c = vec![0.0; order + 1];
    c[0] = 1.0;
    for n in 1..=order {
        let mut s = 0.0;
        for k in 2..=n {
            s -= n as f64 * px[k] * (n + 1 - k) as f64 * c[n + 1 - k];
        }
        for i in 0..n {
            s += ql[n - 1 - i] * c[i];
        }
        c[n] = s / (px[1] * (n * n) as f64);
    }
    let x_star = theta_f * coef.radius().min(1.0);
    let z_star = 1.0 - x_star;

    // Tail check from the last two terms.
    let t1 = (c[order] * x_star.powi(order as i32)).abs();
    let t2 = (c[order - 1] * x_star.powi(order as i32 - 1)).abs();
    let mut u_star = 0.0;
    let mut ux = 0.0;
    let mut uxx = 0.0;
    for n in (0..=order).rev() {
        u_star = u_star * x_star + c[n];
        if n >= 1 {
            ux = ux * x_star + n as f64 * c[n];
        }
        if n >= 2 {
            uxx = uxx * x_star + (n * (n - 1)) as f64 * c[n];
        }
    }
    let size = c.iter().enumerate().map(|(n, v)| (v * x_star.powi(n as i32)).abs()).fold(0.0, f64::max);
    let bound = t1.max(t2) * 2.0;
    if bound > 1e-12 * size.max(1.0) {
        return Err(Error::TailNotConverged { order, bound });
    }
    let mut pv = 0.0;
    let mut pvx = 0.0;
    for n in (0..=order).rev() {
        pv = pv * x_star + px[n];
        if n >= 1 {
            pvx = pvx * x_star + n as f64 * px[n];
        }
    }
    let (_, qv) = coef.eval_pq(z_star);
    // In x: −(P u_x)_x + (q − λp) u = 0
    let res = (-(pvx * ux + pv * uxx) + (qv - lambda * pv) * u_star).abs();
    let series_residual = res / ((qv - lambda * pv).abs() * u_star.abs()).max(1e-300);

    let w_star = -pv * ux;
    let rhs = move |z: f64, y: &[f64; 2]| {
        let (p, q) = coef.eval_pq(z);
        [y[1] / p, (q - lambda * p) * y[0]]
    };

    // Sign tracking on the series segment.
    let mut changes_all = 0usize;
    let mut last_sign = 1.0f64;
    let mut count_sign = |v: f64, changes: &mut usize| {
        if v != 0.0 && v.signum() != last_sign {
            *changes += 1;
            last_sign = v.signum();
        }
    };
    const SERIES_SAMPLES: usize = 64;
    for i in 1..=SERIES_SAMPLES {
        let x = x_star * i as f64 / SERIES_SAMPLES as f64;
        let mut u = 0.0;
        for n in (0..=order).rev() {
            u = u * x + c[n];
        }
        count_sign(u, &mut changes_all);
    }

    let mut st = Dopri5::new(rhs, z_star, [u_star, w_star], -1.0, ode_opts());
    let mut log_scale = 0.0f64;
    let mut max_u = u_star.abs();
    let mut interior_changes_before_end = changes_all;
    // largest |u| since the last sign change on the RK segment
    let mut tail_max = f64::INFINITY;
    while st.t > 0.0 {
        st.step(Some(0.0))?;
        let y = st.y;
        if st.t > 0.0 {
            let before = changes_all;
            count_sign(y[0], &mut changes_all);
            interior_changes_before_end = changes_all;
            if changes_all > before {
                tail_max = 0.0;
            }
        }
        max_u = max_u.max(y[0].abs());
        tail_max = tail_max.max(y[0].abs());
        let nrm = y[0].abs().max(y[1].abs());
        if nrm > 1e100 {
            st.set_state([y[0] * 1e-100, y[1] * 1e-100]);
            log_scale += 100.0;
            max_u *= 1e-100;
            tail_max *= 1e-100;
        }
    }
    let (u_end, w_end) = (st.y[0], st.y[1]);
    // Final sample z = 0: counts for the phase; counts as an interior zero
    // only when u(0) is clearly nonzero.
    let before = changes_all;
    count_sign(u_end, &mut changes_all);
    let zero_count = if changes_all > before && u_end.abs() > 1e-9 * max_u {
        changes_all
    } else if interior_changes_before_end > 0 && tail_max <= 1e-9 * max_u {
        // a change inside a negligible tail is the endpoint zero, not an interior one
        interior_changes_before_end - 1
    } else {
        interior_changes_before_end
    };
    let n = changes_all as f64;
    let flip = if changes_all % 2 == 0 { 1.0 } else { -1.0 };
    let ang = (flip * u_end).atan2(flip * w_end);
    let phase = FRAC_PI_2 + n * PI - ang;

    let (p0, _) = coef.eval_pq(0.0);
    let factor = 10f64.powf(log_scale);
    let coeffs = c.iter().enumerate().map(|(n, v)| if n % 2 == 0 { *v } else { -*v }).collect();
    Ok(FrobeniusSolution {
        semiaxes: *sa,
        lambda,
        coeffs,
        theta_f,
        z_star,
        u0: u_end * factor,
        du0: w_end / p0 * factor,
        zero_count,
        phase,
        series_residual,
    })
}

fn frob(sa: &Semiaxes, lambda: f64) -> Result<FrobeniusSolution> {
    frobenius_solution(sa, lambda, DEFAULT_ORDER, DEFAULT_THETA_F)
}

/// Continuous Prüfer phase Φ(λ), increasing in λ.
pub fn prufer_phase(sa: &Semiaxes, lambda: f64) -> Result<f64> {
    Ok(frob(sa, lambda)?.phase)
}

/// Projective angle of (p(0)u′(0), u(0)) in [0, π).
pub fn projective_angle(sa: &Semiaxes, lambda: f64) -> Result<f64> {
    let s = frob(sa, lambda)?;
    let (p0, _) = SLCoefficients::new(*sa).eval_pq(0.0);
    let t = s.u0.atan2(p0 * s.du0).rem_euclid(PI);
    Ok(if t >= PI { 0.0 } else { t })
}

fn target_phase(parity: Parity, n: usize) -> f64 {
    match parity {
        Parity::Even => n as f64 * PI,
        Parity::Odd => n as f64 * PI + FRAC_PI_2,
    }
}

/// Eigenvalue record λ_n with the zero count of its eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRecord {
    pub parity: Parity,
    pub n: usize,
    pub lambda_n: f64,
    pub eigen_zero_count: usize,
}

/// λ_min = min q / max p − 1, the starting lower end of eigenvalue scans.
pub fn lambda_floor(sa: &Semiaxes) -> f64 {
    let coef = SLCoefficients::new(*sa);
    let q0 = coef.eval_pq(0.0).1;
    let q1 = coef.eval_pq(1.0).1;
    q0.min(q1) * sa.a - 1.0
}

/// λ_n^parity by solving Φ(λ) = target. `window` is an initial bracket,
/// expanded by doubling up to 40 times.
pub fn eigenvalue(sa: &Semiaxes, parity: Parity, n: usize, window: Option<(f64, f64)>) -> Result<SpectralRecord> {
    let target = target_phase(parity, n);
    let g = |l: f64| -> Result<f64> { Ok(prufer_phase(sa, l)? - target) };
    let (mut lo, mut hi) = window.unwrap_or((lambda_floor(sa), lambda_floor(sa).abs().max(1.0)));
    if hi <= lo {
        hi = lo + 1.0;
    }
    let mut k = 0;
    while g(lo)? >= 0.0 {
        let w = (hi - lo).max(1.0);
        hi = lo;
        lo -= 2.0 * w;
        k += 1;
        if k > 40 {
            return Err(Error::BracketFailure(k));
        }
    }
    while g(hi)? <= 0.0 {
        let w = (hi - lo).max(1.0);
        lo = hi;
        hi += 2.0 * w;
        k += 1;
        if k > 40 {
            return Err(Error::BracketFailure(k));
        }
    }
    let mut err = None;
    let lam = roots::brent(
        |l| match g(l) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13 * (1.0 + lo.abs().max(hi.abs())),
    );
    if let Some(e) = err {
        return Err(e);
    }
    let lam = lam?;
    let zc = settled_zero_count(parity, target, lam, 1.0 + lam.abs(), |l| frob(sa, l))?;
    if zc != n {
        return Err(Error::ZeroCountMismatch { expected: n, found: zc });
    }
    Ok(SpectralRecord { parity, n, lambda_n: lam, eigen_zero_count: zc })
}

/// Zero count of the eigenfunction at a root x of Φ = target. For odd
/// targets a zero enters through z = 0 as Φ passes the target, so the count
/// is read just below the root, where Φ < target.
fn settled_zero_count(
    parity: Parity,
    target: f64,
    x: f64,
    scale: f64,
    f: impl Fn(f64) -> Result<FrobeniusSolution>,
) -> Result<usize> {
    let mut s = f(x)?;
    if parity == Parity::Odd {
        let mut dx = 1e-14 * scale;
        for _ in 0..60 {
            if s.phase < target {
                break;
            }
            s = f(x - dx)?;
            dx *= 2.0;
        }
    }
    Ok(s.zero_count)
}

/// Number of negative eigenvalues of the given parity.
pub fn count_negative(sa: &Semiaxes, parity: Parity) -> Result<usize> {
    let phi = prufer_phase(sa, 0.0)?;
    let shifted = match parity {
        Parity::Even => phi,
        Parity::Odd => phi - FRAC_PI_2,
    };
    Ok(if shifted <= 0.0 { 0 } else { (shifted / PI).ceil() as usize })
}

/// d·u_{a,0}: the boundary Jacobi field of the planar sphere.
pub fn jacobi_boundary_solution(sa: &Semiaxes) -> Result<FrobeniusSolution> {
    Ok(frob(sa, 0.0)?.scaled(sa.d))
}

/// a ↦ Φ_a(0) − target, whose roots are the degeneracy instants.
fn instant_function(b: f64, d: f64, parity: Parity, n: usize, a: f64) -> Result<f64> {
    let sa = Semiaxes::new(a, b, d)?;
    Ok(prufer_phase(&sa, 0.0)? - target_phase(parity, n))
}

/// a_n^parity inside `bracket`.
pub fn degeneracy_instant(b: f64, d: f64, parity: Parity, n: usize, bracket: (f64, f64)) -> Result<f64> {
    let (lo, hi) = bracket;
    let glo = instant_function(b, d, parity, n, lo)?;
    let ghi = instant_function(b, d, parity, n, hi)?;
    if glo * ghi > 0.0 {
        return Err(Error::NoSignChange { lo, hi });
    }
    if ghi - glo > PI {
        let count = ((ghi - glo) / PI).ceil() as usize;
        return Err(Error::MultipleRoots { lo, hi, count });
    }
    let mut err = None;
    let a = roots::brent(
        |a| match instant_function(b, d, parity, n, a) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13 * hi,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let a = a?;
    let zc = settled_zero_count(parity, target_phase(parity, n), a, a, |a| frob(&Semiaxes::new(a, b, d)?, 0.0))?;
    if zc != n {
        return Err(Error::ZeroCountMismatch { expected: n, found: zc });
    }
    Ok(a)
}

/// One entry of the merged instant sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instant {
    pub m: usize,
    pub parity: Parity,
    pub n: usize,
    pub a_m: f64,
}

/// a_1 < a_2 < … < a_{m_max}, with a_{2n} = a_n^even and a_{2n+1} = a_n^odd.
///
/// Φ_a(0) increases with a, so the instants are the successive crossings of
/// the levels π/2, π, 3π/2, …; they are bracketed by an upward scan in a.
pub fn instants(b: f64, d: f64, m_max: usize) -> Result<Vec<Instant>> {
    if m_max == 0 {
        return Err(Error::Domain("m_max must be at least 1".into()));
    }
    let step = 0.05 * d;
    let n_top = m_max / 2 + 1;
    let a_cap = (16.0 * (n_top * n_top) as f64 * d * d + b * b).sqrt() + 4.0 * d;
    let mut out = Vec::with_capacity(m_max);
    let mut a_lo = 0.5 * d;
    let mut phi_lo = prufer_phase(&Semiaxes::new(a_lo, b, d)?, 0.0)?;
    for m in 1..=m_max {
        let parity = Parity::of_m(m);
        let n = Parity::n_of_m(m);
        let target = target_phase(parity, n);
        let mut a_hi = a_lo;
        let mut phi_hi = phi_lo;
        while phi_hi <= target {
            a_lo = a_hi;
            a_hi += step;
            if a_hi > a_cap {
                return Err(Error::SeedRootNotFound { m, reason: format!("no instant below growth cap {a_cap}") });
            }
            phi_hi = prufer_phase(&Semiaxes::new(a_hi, b, d)?, 0.0)?;
        }
        let a = degeneracy_instant(b, d, parity, n, (a_lo, a_hi)).map_err(|e| match e {
            Error::SeedRootNotFound { .. } => e,
            other => Error::SeedRootNotFound { m, reason: other.to_string() },
        })?;
        out.push(Instant { m, parity, n, a_m: a });
        a_lo = a;
        phi_lo = prufer_phase(&Semiaxes::new(a, b, d)?, 0.0)?.min(target);
    }
    Ok(out)
}
