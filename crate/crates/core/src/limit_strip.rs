//! The a → ∞ model strip Ω_∞ = R × (−L, L) with metric η(y)²(dx² + dy²).
//!
//! y is ǧ-arclength along the meridian (0, b cos v, d sin v), so
//! y(v) = ∫₀^v √(d² cos² ξ + b² sin² ξ) dξ and η(y) = 2πb cos v(y).
//! Geodesics conserve the Clairaut quantity η cos θ, θ the angle with the
//! x-axis.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ode::{dp5_step, Dopri5, OdeOptions};
use crate::numerics::quad;
use crate::numerics::roots::brent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripMetric {
    pub b: f64,
    pub d: f64,
    /// Half-width L = y(π/2).
    pub l: f64,
}

impl StripMetric {
    pub fn new(b: f64, d: f64) -> Result<Self> {
        if !(b > 0.0 && d > 0.0 && b.is_finite() && d.is_finite()) {
            return Err(Error::Domain(format!("strip needs b, d > 0 (got {b}, {d})")));
        }
        let l = y_integral(b, d, FRAC_PI_2)?;
        Ok(StripMetric { b, d, l })
    }

    fn speed(&self, v: f64) -> f64 {
        speed(self.b, self.d, v)
    }

    pub fn y_of_v(&self, v: f64) -> Result<f64> {
        y_of_v(self.b, self.d, v)
    }

    pub fn v_of_y(&self, y: f64) -> Result<f64> {
        if !(y.abs() <= self.l) {
            return Err(Error::Domain(format!("|y| = {} exceeds L = {}", y.abs(), self.l)));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let (sg, y) = (y.signum(), y.abs());
        let mut v = brent(|v| y_integral(self.b, self.d, v).unwrap_or(f64::NAN) - y, 0.0, FRAC_PI_2, 1e-9)?;
        for _ in 0..3 {
            let r = y_integral(self.b, self.d, v)? - y;
            v = (v - r / self.speed(v)).clamp(0.0, FRAC_PI_2);
        }
        Ok(sg * v)
    }

    /// η(y) = 2πb cos v(y).
    pub fn eta(&self, y: f64) -> Result<f64> {
        Ok(2.0 * PI * self.b * self.v_of_y(y)?.cos())
    }

    pub fn eta_max(&self) -> f64 {
        2.0 * PI * self.b
    }
}

fn speed(b: f64, d: f64, v: f64) -> f64 {
    let (s, c) = v.sin_cos();
    (d * d * c * c + b * b * s * s).sqrt()
}

fn y_integral(b: f64, d: f64, v: f64) -> Result<f64> {
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(quad::integrate(|x| speed(b, d, x), 0.0, v, 1e-14, 1e-14)?.value)
}

/// y(v) for v ∈ [−π/2, π/2].
pub fn y_of_v(b: f64, d: f64, v: f64) -> Result<f64> {
    if !(v.abs() <= FRAC_PI_2) {
        return Err(Error::Domain(format!("v = {v} outside [-pi/2, pi/2]")));
    }
    y_integral(b, d, v)
}

/// Inverse of [`y_of_v`].
pub fn v_of_y(b: f64, d: f64, y: f64) -> Result<f64> {
    StripMetric::new(b, d)?.v_of_y(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicClass {
    Vertical,
    Horizontal,
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGeodesic {
    pub c: f64,
    /// Turning height with η(w) = |C| (0 for horizontal, L for vertical).
    pub w: f64,
    /// Turning height in the v variable.
    pub v_w: f64,
    /// Δ(C); `None` unless oscillating.
    pub period: Option<f64>,
    pub class: GeodesicClass,
}

/// Trichotomy of strip geodesics by their Clairaut constant.
pub fn classify(strip: &StripMetric, c: f64) -> Result<StripGeodesic> {
    let cm = strip.eta_max();
    if !(c.abs() <= cm * (1.0 + 1e-15)) {
        return Err(Error::Domain(format!("|C| = {} exceeds 2 pi b = {cm}", c.abs())));
    }
    if c == 0.0 {
        return Ok(StripGeodesic { c, w: strip.l, v_w: FRAC_PI_2, period: None, class: GeodesicClass::Vertical });
    }
    if c.abs() >= cm {
        return Ok(StripGeodesic { c, w: 0.0, v_w: 0.0, period: None, class: GeodesicClass::Horizontal });
    }
    let v_w = (c.abs() / cm).acos();
    Ok(StripGeodesic {
        c,
        w: strip.y_of_v(v_w)?,
        v_w,
        period: Some(period(strip, c)?),
        class: GeodesicClass::Oscillating,
    })
}

/// Δ(c) = 2 ∫_{−w}^{w} |c| / √(η² − c²) dy, written in v and then in τ
/// with v = v_w sin τ so the endpoint singularities cancel.
pub fn period(strip: &StripMetric, c: f64) -> Result<f64> {
    let cm = strip.eta_max();
    if !(c != 0.0 && c.abs() < cm) {
        return Err(Error::Domain(format!("period needs 0 < |c| < 2 pi b (got {c})")));
    }
    let ca = c.abs();
    let v_w = (ca / cm).acos();
    let f = |tau: f64| {
        let st = tau.sin();
        let half = 0.5 * (FRAC_PI_2 - tau);
        let one_minus = 2.0 * half.sin().powi(2);
        let one_plus = 2.0 * half.cos().powi(2);
        let den = ((v_w * one_minus).sin() * (v_w * one_plus).sin()).sqrt();
        if den == 0.0 {
            return 0.0;
        }
        ca * strip.speed(v_w * st) * v_w * tau.cos() / (cm * den)
    };
    let q = quad::integrate(f, -FRAC_PI_2, FRAC_PI_2, 1e-12, 1e-12)?;
    if q.error > 1e-10 {
        return Err(Error::Quadrature { estimate: q.error, tol: 1e-10 });
    }
    Ok(2.0 * q.value)
}

/// (1 + m/2) Δ(C): x-confinement for strip geodesics with at most m axis
/// crossings.
pub fn bounded_crossing_box(strip: &StripMetric, c: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    Ok((1.0 + m as f64 / 2.0) * period(strip, c)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    /// ǧ-arclength.
    pub sigma: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub x: f64,
    pub y: f64,
    /// +1 at an upper turn, −1 at a lower turn.
    pub side: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripPath {
    pub samples: Vec<StripSample>,
    pub turning_points: Vec<TurningPoint>,
    /// Largest |η cos θ − C| along the path.
    pub clairaut_drift: f64,
    /// Whether the path stopped near the strip edge before `length`.
    pub reached_edge: bool,
}

impl StripPath {
    /// x-advance between consecutive upper turning points.
    pub fn measured_periods(&self) -> Vec<f64> {
        let ups: Vec<f64> = self.turning_points.iter().filter(|t| t.side > 0).map(|t| t.x).collect();
        ups.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Unit-speed strip geodesic from (x0, 0) with Clairaut constant C, in the
/// state (x, v, θ): x' = cos θ, v' = sin θ / Y(v), θ' = −cos θ tan v / Y(v).
pub fn integrate_strip_geodesic(strip: &StripMetric, c: f64, x0: f64, length: f64) -> Result<StripPath> {
    let cm = strip.eta_max();
    if !(c.abs() < cm) {
        return Err(Error::Domain(format!("|C| = {} must be below 2 pi b", c.abs())));
    }
    if !(length > 0.0) {
        return Err(Error::Domain("length must be positive".into()));
    }
    let (b, d) = (strip.b, strip.d);
    let f = move |_: f64, s: &[f64; 3]| {
        let y = speed(b, d, s[1]);
        let (st, ct) = s[2].sin_cos();
        [ct, st / y, -ct * s[1].tan() / y]
    };
    let theta0 = if c == 0.0 { FRAC_PI_2 } else { (c / cm).acos() };
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, h_init: 1e-3, h_max: 0.05 * strip.l, max_steps: 2_000_000, ..Default::default() };
    let edge = FRAC_PI_2 - 1e-6;
    let mut st = Dopri5::new(f, 0.0, [x0, 0.0, theta0], 1.0, opts);
    let mut samples = vec![StripSample { sigma: 0.0, x: x0, y: 0.0, v: 0.0, theta: theta0 }];
    let mut turning_points = Vec::new();
    let mut drift = 0.0f64;
    let mut reached_edge = false;
    let clairaut = |s: &[f64; 3]| cm * s[1].cos() * s[2].cos();
    while st.t < length {
        let start = st.step(Some(length))?;
        let y = st.y;
        if y[1].abs() >= edge {
            reached_edge = true;
            break;
        }
        let s0 = start.y[2].sin();
        let s1 = y[2].sin();
        if s0 != 0.0 && s0.signum() != s1.signum() {
            let rhs = st.rhs();
            let g = |th: f64| dp5_step(rhs, start.t, &start.y, &start.k1, th * start.h).0[2].sin();
            let th = brent(g, 0.0, 1.0, 1e-15)?;
            let (yt, _, _) = dp5_step(rhs, start.t, &start.y, &start.k1, th * start.h);
            turning_points.push(TurningPoint { x: yt[0], y: strip.y_of_v(yt[1])?, side: if s0 > 0.0 { 1 } else { -1 } });
        }
        drift = drift.max((clairaut(&y) - c).abs());
        samples.push(StripSample { sigma: st.t, x: y[0], y: f64::NAN, v: y[1], theta: y[2] });
    }
    for s in samples.iter_mut() {
        s.y = strip.y_of_v(s.v)?;
    }
    Ok(StripPath { samples, turning_points, clairaut_drift: drift, reached_edge })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub c_over_max: f64,
    pub w: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
}

/// Period table over c/(2πb) ∈ `grid`.
pub fn period_table(strip: &StripMetric, grid: &[f64]) -> Result<Vec<PeriodRow>> {
    grid.iter()
        .map(|&k| {
            let g = classify(strip, k * strip.eta_max())?;
            let delta = g.period.ok_or_else(|| Error::Domain(format!("c/(2 pi b) = {k} is not oscillating")))?;
            Ok(PeriodRow { c_over_max: k, w: g.w, delta })
        })
        .collect()
}

/// Log-spaced grid of n points in [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}
