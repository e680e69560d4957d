//! Orbit space Ω_a of the ellipsoid E(a,b,b,d) under the rotation of the
//! (x2, x3)-plane.
//!
//! Ω_a is the upper half of the ellipsoid x1²/a² + r²/b² + x4²/d² = 1 in
//! (x1, r, x4)-space, r ≥ 0, with the induced metric ǧ. Minimal spheres
//! correspond to geodesics of V²ǧ with V = 2πr. The interior chart is the
//! projection to (x1, x4).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad;

/// Semiaxes (a, b, d) of E(a,b,b,d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Semiaxes {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl Semiaxes {
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && d > 0.0) || !a.is_finite() || !b.is_finite() || !d.is_finite() {
            return Err(Error::Domain(format!("semiaxes must be positive and finite, got ({a}, {b}, {d})")));
        }
        Ok(Semiaxes { a, b, d })
    }

    /// True when |a - b| < tol, where the Heun reduction degenerates.
    pub fn is_confluent(&self, tol: f64) -> bool {
        (self.a - self.b).abs() < tol
    }

    pub fn min_bd(&self) -> f64 {
        self.b.min(self.d)
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        Semiaxes::new(a, self.b, self.d)
    }
}

/// A point (x1, r, x4) of the quotient surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub x1: f64,
    pub r: f64,
    pub x4: f64,
}

impl OrbitPoint {
    /// x1²/a² + r²/b² + x4²/d² − 1.
    pub fn constraint_residual(&self, sa: &Semiaxes) -> f64 {
        let (a, b, d) = (sa.a, sa.b, sa.d);
        self.x1 * self.x1 / (a * a) + self.r * self.r / (b * b) + self.x4 * self.x4 / (d * d) - 1.0
    }
}

/// Interior chart coordinates (x1, x4).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x1: f64,
    pub x4: f64,
}

impl ChartPoint {
    pub fn new(x1: f64, x4: f64) -> Self {
        ChartPoint { x1, x4 }
    }

    /// The level function w = 1 − x1²/a² − x4²/d², so that r = b·√w.
    pub fn level(&self, sa: &Semiaxes) -> f64 {
        1.0 - self.x1 * self.x1 / (sa.a * sa.a) - self.x4 * self.x4 / (sa.d * sa.d)
    }

    pub fn is_interior(&self, sa: &Semiaxes) -> bool {
        self.level(sa) > 0.0
    }
}

/// β(s) = (a cos s, 0, d sin s).
pub fn boundary_point(sa: &Semiaxes, s: f64) -> OrbitPoint {
    OrbitPoint { x1: sa.a * s.cos(), r: 0.0, x4: sa.d * s.sin() }
}

pub fn orbit_from_chart(sa: &Semiaxes, p: ChartPoint) -> Result<OrbitPoint> {
    let w = p.level(sa);
    if w < 0.0 {
        return Err(Error::Domain(format!("chart point ({}, {}) outside the boundary ellipse", p.x1, p.x4)));
    }
    Ok(OrbitPoint { x1: p.x1, r: sa.b * w.sqrt(), x4: p.x4 })
}

/// Quotient metric in the (x1, x4) chart with first derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricData {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    /// Orbital volume factor V = 2πr.
    pub v: f64,
    /// (∂V/∂x1, ∂V/∂x4).
    pub dv: [f64; 2],
    /// dg[c][k] = ∂g_c/∂x_k for c ∈ (g11, g12, g22), k ∈ (x1, x4).
    pub dg: [[f64; 2]; 3],
}

/// Derivatives of r(x1, x4) = b√w up to third order, index 0 = x1, 1 = x4.
#[derive(Debug, Clone, Copy)]
struct RJet {
    r: f64,
    d1: [f64; 2],
    d2: [[f64; 2]; 2],
    d3: [[[f64; 2]; 2]; 2],
}

fn r_jet(sa: &Semiaxes, p: ChartPoint) -> Result<RJet> {
    let w = p.level(sa);
    if !(w > 0.0) {
        return Err(Error::Domain(format!("chart point ({}, {}) is not interior", p.x1, p.x4)));
    }
    let b = sa.b;
    let wi = [-2.0 * p.x1 / (sa.a * sa.a), -2.0 * p.x4 / (sa.d * sa.d)];
    let wij = [[-2.0 / (sa.a * sa.a), 0.0], [0.0, -2.0 / (sa.d * sa.d)]];
    let sw = w.sqrt();
    let w32 = w * sw;
    let w52 = w32 * w;
    let mut d1 = [0.0; 2];
    let mut d2 = [[0.0; 2]; 2];
    let mut d3 = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        d1[i] = b * wi[i] / (2.0 * sw);
        for j in 0..2 {
            d2[i][j] = b * (wij[i][j] / (2.0 * sw) - wi[i] * wi[j] / (4.0 * w32));
            for k in 0..2 {
                d3[i][j][k] = b
                    * (-(wij[i][j] * wi[k] + wij[i][k] * wi[j] + wij[j][k] * wi[i]) / (4.0 * w32)
                        + 3.0 * wi[i] * wi[j] * wi[k] / (8.0 * w52));
            }
        }
    }
    Ok(RJet { r: b * sw, d1, d2, d3 })
}

pub fn chart_metric(sa: &Semiaxes, p: ChartPoint) -> Result<MetricData> {
    let j = r_jet(sa, p)?;
    let (r1, r4) = (j.d1[0], j.d1[1]);
    let mut dg = [[0.0; 2]; 3];
    for k in 0..2 {
        dg[0][k] = 2.0 * r1 * j.d2[0][k];
        dg[1][k] = j.d2[0][k] * r4 + r1 * j.d2[1][k];
        dg[2][k] = 2.0 * r4 * j.d2[1][k];
    }
    Ok(MetricData {
        g11: 1.0 + r1 * r1,
        g12: r1 * r4,
        g22: 1.0 + r4 * r4,
        v: 2.0 * PI * j.r,
        dv: [2.0 * PI * r1, 2.0 * PI * r4],
        dg,
    })
}

/// Ric(n̄) of E(a,b,b,d) along the planar sphere x4 = 0, as a function of x1.
pub fn ricci_normal(sa: &Semiaxes, x1: f64) -> Result<f64> {
    if x1.abs() > sa.a {
        return Err(Error::Domain(format!("|x1| = {} exceeds a = {}", x1.abs(), sa.a)));
    }
    let (a2, b2, d2) = (sa.a * sa.a, sa.b * sa.b, sa.d * sa.d);
    let t = x1 * x1 / a2;
    let den = a2 * (1.0 - t) + b2 * t;
    Ok(a2 * (a2 * (1.0 - t) + b2 * (1.0 + t)) / (d2 * den * den))
}

/// Gaussian curvature of the quotient surface (an ellipsoid in R³).
pub fn gauss_curvature_quotient(sa: &Semiaxes, p: OrbitPoint) -> f64 {
    let (a2, b2, d2) = (sa.a * sa.a, sa.b * sa.b, sa.d * sa.d);
    let s = p.x1 * p.x1 / (a2 * a2) + p.r * p.r / (b2 * b2) + p.x4 * p.x4 / (d2 * d2);
    1.0 / (a2 * b2 * d2 * s * s)
}

/// How the second derivatives of the conformal metric are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondDerivatives {
    ClosedForm,
    /// Sixth-order central differences of the closed-form first derivatives.
    FiniteDifference,
}

/// Gaussian curvature of V²ǧ with a flag for points close to the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub value: f64,
    /// Set when V < 1e-4: the value is dominated by the 1/V² factor.
    pub low_precision: bool,
}

/// Components (E, F, G) of V²ǧ and their derivatives.
struct ConformalJet {
    g: [f64; 3],
    d1: [[f64; 2]; 3],
    d2: [[[f64; 2]; 2]; 3],
}

fn conformal_first(sa: &Semiaxes, p: ChartPoint) -> Result<([f64; 3], [[f64; 2]; 3])> {
    let m = chart_metric(sa, p)?;
    let g = [m.g11, m.g12, m.g22];
    let v2 = m.v * m.v;
    let mut big = [0.0; 3];
    let mut d1 = [[0.0; 2]; 3];
    for c in 0..3 {
        big[c] = v2 * g[c];
        for k in 0..2 {
            d1[c][k] = 2.0 * m.v * m.dv[k] * g[c] + v2 * m.dg[c][k];
        }
    }
    Ok((big, d1))
}

fn conformal_jet(sa: &Semiaxes, p: ChartPoint, how: SecondDerivatives) -> Result<ConformalJet> {
    let (g, d1) = conformal_first(sa, p)?;
    let mut d2 = [[[0.0; 2]; 2]; 3];
    match how {
        SecondDerivatives::ClosedForm => {
            let j = r_jet(sa, p)?;
            let m = chart_metric(sa, p)?;
            let gs = [m.g11, m.g12, m.g22];
            let (r1, r4) = (j.d1[0], j.d1[1]);
            let tp = 2.0 * PI;
            let v = tp * j.r;
            for k in 0..2 {
                for l in 0..2 {
                    let ddg = [
                        2.0 * (j.d2[0][k] * j.d2[0][l] + r1 * j.d3[0][k][l]),
                        j.d3[0][k][l] * r4 + j.d2[0][k] * j.d2[1][l] + j.d2[0][l] * j.d2[1][k] + r1 * j.d3[1][k][l],
                        2.0 * (j.d2[1][k] * j.d2[1][l] + r4 * j.d3[1][k][l]),
                    ];
                    let vk = tp * j.d1[k];
                    let vl = tp * j.d1[l];
                    let vkl = tp * j.d2[k][l];
                    for c in 0..3 {
                        d2[c][k][l] = 2.0 * (vk * vl + v * vkl) * gs[c]
                            + 2.0 * v * (vk * m.dg[c][l] + vl * m.dg[c][k])
                            + v * v * ddg[c];
                    }
                }
            }
        }
        SecondDerivatives::FiniteDifference => {
            let hs = [1e-4 * sa.a, 1e-4 * sa.d];
            const W: [f64; 3] = [45.0, -9.0, 1.0];
            for l in 0..2 {
                let mut acc = [[0.0; 2]; 3];
                for (n, wn) in W.iter().enumerate() {
                    let off = (n + 1) as f64 * hs[l];
                    let shift = |sgn: f64| {
                        let mut q = p;
                        if l == 0 {
                            q.x1 += sgn * off;
                        } else {
                            q.x4 += sgn * off;
                        }
                        q
                    };
                    let (_, dp) = conformal_first(sa, shift(1.0))?;
                    let (_, dm) = conformal_first(sa, shift(-1.0))?;
                    for c in 0..3 {
                        for k in 0..2 {
                            acc[c][k] += wn * (dp[c][k] - dm[c][k]);
                        }
                    }
                }
                for c in 0..3 {
                    for k in 0..2 {
                        d2[c][k][l] = acc[c][k] / (60.0 * hs[l]);
                    }
                }
            }
        }
    }
    Ok(ConformalJet { g, d1, d2 })
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian curvature of (Ω_a, V²ǧ) at an interior chart point, by the
/// Brioschi formula.
pub fn gauss_curvature_conformal(sa: &Semiaxes, p: ChartPoint, how: SecondDerivatives) -> Result<Curvature> {
    let j = conformal_jet(sa, p, how)?;
    let [e, f, g] = j.g;
    let (eu, ev) = (j.d1[0][0], j.d1[0][1]);
    let (fu, fv) = (j.d1[1][0], j.d1[1][1]);
    let (gu, gv) = (j.d1[2][0], j.d1[2][1]);
    let evv = j.d2[0][1][1];
    let fuv = 0.5 * (j.d2[1][0][1] + j.d2[1][1][0]);
    let guu = j.d2[2][0][0];
    let m1 = [
        [-0.5 * evv + fuv - 0.5 * guu, 0.5 * eu, fu - 0.5 * ev],
        [fv - 0.5 * gu, e, f],
        [0.5 * gv, f, g],
    ];
    let m2 = [[0.0, 0.5 * ev, 0.5 * gu], [0.5 * ev, e, f], [0.5 * gu, f, g]];
    let den = e * g - f * f;
    let v = 2.0 * PI * orbit_from_chart(sa, p)?.r;
    Ok(Curvature { value: (det3(m1) - det3(m2)) / (den * den), low_precision: v < 1e-4 })
}

/// Sample of a profile curve for Pappus integration: ǧ-arclength, r and dr/dρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub rho: f64,
    pub r: f64,
    pub dr: f64,
}

/// Area ∫ 2πr dρ of the surface of revolution over a sampled profile
/// (the V²ǧ-length of the profile), composite Hermite-cubic rule.
///
/// The error estimate compares with the same rule on every other sample;
/// it must stay below `tol`.
pub fn pappus_area(profile: &[ProfileSample], tol: f64) -> Result<f64> {
    if profile.len() < 2 {
        return Ok(0.0);
    }
    let fine = hermite_sum(profile.iter());
    let est = if profile.len() >= 3 {
        let mut coarse: Vec<ProfileSample> = profile.iter().step_by(2).copied().collect();
        if (profile.len() - 1) % 2 == 1 {
            coarse.push(*profile.last().unwrap());
        }
        (fine - hermite_sum(coarse.iter())).abs() / 15.0
    } else {
        let p = &profile[..2];
        let h = p[1].rho - p[0].rho;
        (fine - 2.0 * PI * h * 0.5 * (p[0].r + p[1].r)).abs()
    };
    if est > tol {
        return Err(Error::Quadrature { estimate: est, tol });
    }
    Ok(fine)
}

fn hermite_sum<'a>(it: impl Iterator<Item = &'a ProfileSample>) -> f64 {
    let v: Vec<&ProfileSample> = it.collect();
    let mut s = 0.0;
    for w in v.windows(2) {
        let h = w[1].rho - w[0].rho;
        s += 0.5 * h * (w[0].r + w[1].r) + h * h * (w[0].dr - w[1].dr) / 12.0;
    }
    2.0 * PI * s
}

/// Profile of γ_ver = {x1 = 0}: the meridian (0, b cos v, d sin v),
/// sampled at `n` + 1 uniformly spaced v with ǧ-arclength by quadrature.
pub fn gamma_ver_profile(b: f64, d: f64, n: usize) -> Result<Vec<ProfileSample>> {
    let speed = |v: f64| (b * b * v.sin().powi(2) + d * d * v.cos().powi(2)).sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut rho = 0.0;
    let mut prev = -PI / 2.0;
    for i in 0..=n {
        let v = -PI / 2.0 + PI * i as f64 / n as f64;
        rho += quad::integrate(speed, prev, v, 1e-14, 1e-14)?.value;
        prev = v;
        out.push(ProfileSample { rho, r: b * v.cos(), dr: -b * v.sin() / speed(v) });
    }
    Ok(out)
}

/// Pappus area of γ_ver by adaptive quadrature of 2π b cos v · |β'(v)|.
pub fn gamma_ver_area(b: f64, d: f64) -> Result<f64> {
    let f = |v: f64| 2.0 * PI * b * v.cos() * (b * b * v.sin().powi(2) + d * d * v.cos().powi(2)).sqrt();
    Ok(quad::integrate(f, -PI / 2.0, PI / 2.0, 1e-10, 1e-10)?.value)
}

/// The constant 4πb²d/3 quoted for the limit sphere in the literature on
/// this problem; it is the enclosed volume, not the area (kept for reports).
pub fn quoted_limit_constant(b: f64, d: f64) -> f64 {
    4.0 * PI * b * b * d / 3.0
}
