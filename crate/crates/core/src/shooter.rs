//! Boundary-orthogonal geodesic shots in the orbit space.
//!
//! Geodesics of V²ǧ are integrated in ǧ-arclength on the quotient surface
//! x1²/a² + r²/b² + x4²/d² = 1, embedded in R³ with coordinates (x1, r, x4).
//! The state is (position, unit tangent, accumulated area ∫2πr dρ).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gauss_curvature_quotient, pappus_area, ChartPoint, OrbitPoint, ProfileSample, Semiaxes};
use crate::numerics::ode::{dp5_step, Dopri5, OdeOptions};
use crate::numerics::roots::brent;
use crate::Parity;

/// Launch angle s with u = π/2 − |s| carried separately, so that shots with
/// |s| extremely close to π/2 keep full relative precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchAngle {
    pub s: f64,
    pub u: f64,
}

impl LaunchAngle {
    pub fn from_s(s: f64) -> Self {
        LaunchAngle { s, u: FRAC_PI_2 - s.abs() }
    }

    /// s = π/2 − u.
    pub fn from_u(u: f64) -> Self {
        LaunchAngle { s: FRAC_PI_2 - u, u }
    }

    /// s = atan(e^t).
    pub fn from_log_tan(t: f64) -> Self {
        LaunchAngle { s: t.exp().atan(), u: (-t).exp().atan() }
    }

    /// t = ln tan |s|.
    pub fn log_tan(&self) -> f64 {
        if self.s.abs() <= FRAC_PI_4 {
            self.s.abs().tan().ln()
        } else {
            -self.u.tan().ln()
        }
    }

    pub fn cos_s(&self) -> f64 {
        if self.s.abs() > FRAC_PI_4 {
            self.u.sin()
        } else {
            self.s.cos()
        }
    }

    pub fn sin_s(&self) -> f64 {
        if self.s.abs() > FRAC_PI_4 {
            self.u.cos().copysign(self.s)
        } else {
            self.s.sin()
        }
    }

    /// The angle −s.
    pub fn mirrored(&self) -> Self {
        LaunchAngle { s: -self.s, u: self.u }
    }

    fn abs(&self) -> Self {
        LaunchAngle { s: self.s.abs(), u: self.u }
    }
}

impl From<f64> for LaunchAngle {
    fn from(s: f64) -> Self {
        LaunchAngle::from_s(s)
    }
}

/// Point of a geodesic with its ǧ-unit tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentState {
    pub point: ChartPoint,
    pub r: f64,
    /// Unit tangent in (x1, r, x4) components.
    pub tangent: [f64; 3],
    /// Angle of the tangent in the orthonormalized chart frame (∂1, ∂4).
    pub theta: f64,
    pub rho: f64,
    /// ǧ-arclength from the previous sample, kept separately because neck
    /// scales fall far below ulp(rho).
    pub drho: f64,
}

impl TangentState {
    /// State at an interior chart point with chart angle `theta`.
    pub fn from_chart(sa: &Semiaxes, p: ChartPoint, theta: f64, rho: f64) -> Result<Self> {
        let o = crate::geometry::orbit_from_chart(sa, p)?;
        if o.r <= 0.0 {
            return Err(Error::Domain("chart point on the boundary".into()));
        }
        let (e1, e2) = chart_frame(sa, o.x1, o.r, o.x4);
        let (c, s) = (theta.cos(), theta.sin());
        let t = [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]];
        Ok(TangentState { point: p, r: o.r, tangent: t, theta, rho, drho: 0.0 })
    }

    pub fn orbit(&self) -> OrbitPoint {
        OrbitPoint { x1: self.point.x1, r: self.r, x4: self.point.x4 }
    }

    /// Same point, opposite direction.
    pub fn reversed(&self) -> Self {
        let t = self.tangent;
        let tangent = [-t[0], -t[1], -t[2]];
        TangentState { tangent, theta: wrap(self.theta + PI), ..*self }
    }
}

/// Integration settings for shots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShooterConfig {
    /// ǧ-offset of the launch point from the boundary.
    pub eps_launch: f64,
    pub rk_abs_tol: f64,
    pub rk_rel_tol: f64,
    /// Radius below which the path counts as having reached the boundary.
    pub r_min: f64,
    pub length_max: f64,
    /// Radius below which the path is inside a neck (turns, collars).
    pub neck_radius: f64,
    pub max_steps: usize,
}

impl ShooterConfig {
    pub fn new(sa: &Semiaxes) -> Self {
        ShooterConfig {
            eps_launch: 1e-3 * sa.min_bd(),
            rk_abs_tol: 1e-300,
            rk_rel_tol: 1e-11,
            r_min: 1e-200,
            length_max: 10.0 * (sa.a + sa.b + sa.d),
            neck_radius: 0.05 * sa.min_bd(),
            max_steps: 400_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol_ok = |t: f64| t > 0.0 && t <= 1e-3;
        if !(self.eps_launch > 0.0 && self.r_min > 0.0 && self.length_max > 0.0 && self.neck_radius > 0.0) {
            return Err(Error::Domain("shooter lengths must be positive".into()));
        }
        if !tol_ok(self.rk_abs_tol) || !tol_ok(self.rk_rel_tol) {
            return Err(Error::Domain("integrator tolerances must lie in (0, 1e-3]".into()));
        }
        Ok(())
    }

    /// Same settings with both integrator tolerances scaled by `k`.
    pub fn with_tolerance_scale(&self, k: f64) -> Self {
        ShooterConfig { rk_abs_tol: self.rk_abs_tol * k, rk_rel_tol: self.rk_rel_tol * k, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    CrossedVer,
    BoundaryArrival,
    Budget,
    Length,
}

/// Result of one shot from β(s) to the first crossing of γ_ver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotOutcome {
    pub angle: LaunchAngle,
    pub crossing_point: ChartPoint,
    pub crossing_tangent: TangentState,
    /// ǧ-arclength from β(s) to the crossing.
    pub crossing_rho: f64,
    pub f_even: f64,
    pub f_odd: f64,
    pub z_count: usize,
    /// ∫ 2πr dρ from β(s) to the crossing.
    pub half_area: f64,
    pub path: Vec<TangentState>,
    pub termination: Termination,
}

/// A sampled geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub samples: Vec<TangentState>,
    /// V²ǧ-length (area of the surface of revolution).
    pub area: f64,
    pub turn_count: usize,
    /// Total crossings of γ_hor; `None` when the path lies on γ_hor.
    pub hor_crossings: Option<usize>,
    pub termination: Termination,
}

/// Which events stop [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Events {
    pub stop_at_ver: bool,
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Surface {
    ia2: f64,
    ib2: f64,
    id2: f64,
}

impl Surface {
    fn new(sa: &Semiaxes) -> Self {
        Surface { ia2: 1.0 / (sa.a * sa.a), ib2: 1.0 / (sa.b * sa.b), id2: 1.0 / (sa.d * sa.d) }
    }

    /// Half the gradient of the level function.
    fn grad(&self, p: &[f64]) -> [f64; 3] {
        [p[0] * self.ia2, p[1] * self.ib2, p[2] * self.id2]
    }

    fn normal(&self, p: &[f64]) -> [f64; 3] {
        let g = self.grad(p);
        let n = norm(&g);
        [g[0] / n, g[1] / n, g[2] / n]
    }

    fn rhs(&self, y: &[f64; 7]) -> [f64; 7] {
        let r = y[1];
        if !(r > 0.0) {
            return [f64::NAN; 7];
        }
        let g = self.grad(y);
        let gn = norm(&g);
        let n = [g[0] / gn, g[1] / gn, g[2] / gn];
        let t = [y[3], y[4], y[5]];
        let kn = (t[0] * t[0] * self.ia2 + t[1] * t[1] * self.ib2 + t[2] * t[2] * self.id2) / gn;
        let nu = cross(&n, &t);
        let kg = nu[1] / r;
        [
            t[0],
            t[1],
            t[2],
            -kn * n[0] + kg * nu[0],
            -kn * n[1] + kg * nu[1],
            -kn * n[2] + kg * nu[2],
            2.0 * PI * r,
        ]
    }

    /// Newton step back onto the surface, then tangent projection.
    fn project(&self, y: &mut [f64; 7]) {
        let g = self.grad(y);
        let f = y[0] * g[0] + y[1] * g[1] + y[2] * g[2] - 1.0;
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        for i in 0..3 {
            y[i] -= 0.5 * f * g[i] / g2;
        }
        let n = self.normal(y);
        let tn = y[3] * n[0] + y[4] * n[1] + y[5] * n[2];
        let mut t = [y[3] - tn * n[0], y[4] - tn * n[1], y[5] - tn * n[2]];
        let tl = norm(&t);
        for c in t.iter_mut() {
            *c /= tl;
        }
        y[3..6].copy_from_slice(&t);
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn wrap(t: f64) -> f64 {
    let mut t = t % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Orthonormal frame from ∂1 = (1, r1, 0), ∂4 = (0, r4, 1), computed from
/// r-scaled vectors so nothing overflows near the boundary.
fn chart_frame(sa: &Semiaxes, x1: f64, r: f64, x4: f64) -> ([f64; 3], [f64; 3]) {
    let b2 = sa.b * sa.b;
    let r1 = -b2 * x1 / (sa.a * sa.a);
    let r4 = -b2 * x4 / (sa.d * sa.d);
    let d1 = [r, r1, 0.0];
    let n1 = norm(&d1);
    let e1 = [d1[0] / n1, d1[1] / n1, 0.0];
    let d4 = [0.0, r4, r];
    let p = dot(&d4, &e1);
    let w = [d4[0] - p * e1[0], d4[1] - p * e1[1], d4[2] - p * e1[2]];
    let nw = norm(&w);
    (e1, [w[0] / nw, w[1] / nw, w[2] / nw])
}

fn chart_theta(sa: &Semiaxes, y: &[f64]) -> f64 {
    let (e1, e2) = chart_frame(sa, y[0], y[1], y[2]);
    let t = [y[3], y[4], y[5]];
    dot(&t, &e2).atan2(dot(&t, &e1))
}

fn state_of(sa: &Semiaxes, y: &[f64; 7], rho: f64, drho: f64) -> TangentState {
    TangentState {
        point: ChartPoint { x1: y[0], x4: y[2] },
        r: y[1],
        tangent: [y[3], y[4], y[5]],
        theta: chart_theta(sa, y),
        rho,
        drho,
    }
}

fn state_vector(st: &TangentState, area: f64) -> [f64; 7] {
    let t = st.tangent;
    [st.point.x1, st.r, st.point.x4, t[0], t[1], t[2], area]
}

/// ǧ-geodesic-curvature forcing ∂ log V / ∂ν, ν the leftward unit normal.
pub fn curvature_forcing(sa: &Semiaxes, state: &TangentState) -> f64 {
    let surf = Surface::new(sa);
    let p = [state.point.x1, state.r, state.point.x4];
    let n = surf.normal(&p);
    let nc = [-n[0], -n[1], -n[2]];
    let nu = cross(&nc, &state.tangent);
    nu[1] / state.r
}

/// Exact launch for s ≥ 0: the inward ellipse-normal displacement solving
/// the surface constraint at r = eps, with its exact tangent.
/// Returns the state vector (area of the launch cap included) and ρ offset.
fn launch_vector(sa: &Semiaxes, angle: LaunchAngle, eps: f64) -> Result<([f64; 7], f64)> {
    let (c, s) = (angle.cos_s(), angle.sin_s());
    let (a, b, d) = (sa.a, sa.b, sa.d);
    let x0 = [a * c, d * s];
    let m = (c * c / (a * a) + s * s / (d * d)).sqrt();
    let n = [c / a / m, s / d / m];
    let qa = n[0] * n[0] / (a * a) + n[1] * n[1] / (d * d);
    let qb = -2.0 * m;
    let qc = eps * eps / (b * b);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return Err(Error::Domain(format!("launch offset {eps} too large")));
    }
    let t = 2.0 * qc / (-qb + disc.sqrt());
    let dt = 2.0 * eps / (b * b * (-qb - 2.0 * qa * t));
    let v = [-dt * n[0], 1.0, -dt * n[1]];
    let vn = norm(&v);
    let k = 1.0 / (b * b * m);
    let rho0 = eps + k * k * eps.powi(3) / 6.0;
    let cap = PI * eps * eps * (1.0 + k * k * eps * eps / 4.0);
    Ok(([x0[0] - t * n[0], eps, x0[1] - t * n[1], v[0] / vn, v[1] / vn, v[2] / vn, cap], rho0))
}

fn mirror_x4(st: &TangentState) -> TangentState {
    let t = st.tangent;
    TangentState {
        point: ChartPoint { x1: st.point.x1, x4: -st.point.x4 },
        tangent: [t[0], t[1], -t[2]],
        theta: -st.theta,
        ..*st
    }
}

/// Launch state at ǧ-offset `eps` from β(s), pointing into Ω_a.
pub fn launch(sa: &Semiaxes, angle: impl Into<LaunchAngle>, eps: f64) -> Result<TangentState> {
    let angle = angle.into();
    check_angle(&angle)?;
    if !(eps > 0.0 && eps <= 0.05 * sa.min_bd()) {
        return Err(Error::Domain(format!("launch offset {eps} outside (0, 0.05 min(b,d)]")));
    }
    let (y, rho0) = launch_vector(sa, angle.abs(), eps)?;
    let st = state_of(sa, &y, rho0, 0.0);
    Ok(if angle.s < 0.0 { mirror_x4(&st) } else { st })
}

fn check_angle(angle: &LaunchAngle) -> Result<()> {
    if !(angle.u > 0.0 && angle.u <= FRAC_PI_2) {
        return Err(Error::Domain(format!("launch angle {} outside (-pi/2, pi/2)", angle.s)));
    }
    Ok(())
}

struct Trace {
    ys: Vec<[f64; 7]>,
    rhos: Vec<f64>,
    steps: Vec<f64>,
    termination: Termination,
}

impl Trace {
    fn samples(&self, sa: &Semiaxes) -> Vec<TangentState> {
        (0..self.ys.len()).map(|i| state_of(sa, &self.ys[i], self.rhos[i], self.steps[i])).collect()
    }
}

fn run(sa: &Semiaxes, cfg: &ShooterConfig, rho0: f64, y0: [f64; 7], ev: Events) -> Result<Trace> {
    cfg.validate()?;
    let surf = Surface::new(sa);
    let scale = sa.min_bd().min(sa.a);
    let opts = OdeOptions {
        rtol: cfg.rk_rel_tol,
        atol: cfg.rk_abs_tol,
        h_init: (0.1 * y0[1]).min(1e-2 * scale),
        h_max: 0.25 * scale,
        h_min: 1e-290,
        max_steps: cfg.max_steps,
    };
    let mut y0 = y0;
    surf.project(&mut y0);
    let f = move |_: f64, y: &[f64; 7]| surf.rhs(y);
    let mut st = Dopri5::new(f, rho0, y0, 1.0, opts);
    let mut ys = vec![y0];
    let mut rhos = vec![rho0];
    let mut steps = vec![0.0];
    let rho_stop = ev.length.map(|l| rho0 + l);
    let termination = loop {
        if rho_stop.is_some_and(|e| st.t >= e) {
            break Termination::Length;
        }
        if st.t - rho0 > cfg.length_max {
            break Termination::Budget;
        }
        let start = match st.step(rho_stop) {
            Ok(s) => s,
            Err(Error::StepUnderflow { .. }) => break Termination::BoundaryArrival,
            Err(Error::TooManySteps(_)) => break Termination::Budget,
            Err(e) => return Err(e),
        };
        let mut y = st.y;
        surf.project(&mut y);
        st.set_state(y);
        if y[1] <= cfg.r_min {
            ys.push(y);
            rhos.push(st.t);
            steps.push(start.h);
            break Termination::BoundaryArrival;
        }
        if ev.stop_at_ver && start.y[0] > 0.0 && y[0] <= 0.0 {
            let rhs = st.rhs();
            let x1_at = |th: f64| dp5_step(rhs, start.t, &start.y, &start.k1, th * start.h).0[0];
            let th = if y[0] == 0.0 { 1.0 } else { brent(x1_at, 0.0, 1.0, 1e-15)? };
            let (mut yc, _, _) = dp5_step(rhs, start.t, &start.y, &start.k1, th * start.h);
            surf.project(&mut yc);
            yc[0] = 0.0;
            ys.push(yc);
            rhos.push(start.t + th * start.h);
            steps.push(th * start.h);
            break Termination::CrossedVer;
        }
        ys.push(y);
        rhos.push(st.t);
        steps.push(start.h);
    };
    Ok(Trace { ys, rhos, steps, termination })
}

/// Integrate from an arbitrary interior state. The area counts from `state`.
pub fn integrate(sa: &Semiaxes, state: &TangentState, cfg: &ShooterConfig, events: Events) -> Result<GeodesicPath> {
    let y0 = state_vector(state, 0.0);
    let tr = run(sa, cfg, state.rho, y0, events)?;
    let samples: Vec<TangentState> = tr.samples(sa);
    let turn_count = count_turns(&samples, cfg.neck_radius);
    Ok(GeodesicPath {
        area: tr.ys.last().map_or(0.0, |y| y[6]),
        samples,
        turn_count,
        hor_crossings: None,
        termination: tr.termination,
    })
}

/// Shot from β(s) to the first crossing of γ_ver.
///
/// f_odd is x4 at the crossing and f_even = −⟨T, e_ver⟩ with e_ver the unit
/// tangent of γ_ver toward increasing x4. z_count counts x4 sign changes
/// before the crossing; a change that stays within 1e-7·d of x4 = 0 up to
/// the crossing belongs to the crossing itself and is not counted.
pub fn shoot_to_ver(sa: &Semiaxes, angle: impl Into<LaunchAngle>, cfg: &ShooterConfig) -> Result<ShotOutcome> {
    let angle = angle.into();
    check_angle(&angle)?;
    let pos = angle.abs();
    let (y0, rho0) = launch_vector(sa, pos, cfg.eps_launch)?;
    let tr = run(sa, cfg, rho0, y0, Events { stop_at_ver: true, length: None })?;
    match tr.termination {
        Termination::CrossedVer => {}
        Termination::BoundaryArrival => {
            return Err(Error::BoundaryArrival { rho: *tr.rhos.last().unwrap() });
        }
        _ => return Err(Error::NoCrossing { budget: cfg.length_max }),
    }
    let yc = *tr.ys.last().unwrap();
    let rho_c = *tr.rhos.last().unwrap();
    let max_x1 = tr.ys.iter().fold(0.0f64, |m, y| m.max(y[0].abs()));
    if yc[3].abs() < 1e-10 * max_x1 / sa.min_bd() {
        return Err(Error::TangentialCrossing { slope: yc[3] });
    }
    let (b, d) = (sa.b, sa.d);
    let ev = [0.0, -b * yc[2] / d, d * yc[1] / b];
    let evn = norm(&ev);
    let f_even = -(yc[4] * ev[1] + yc[5] * ev[2]) / evn;
    let f_odd = yc[2];
    let z_count = count_x4_changes(&tr.ys, 1e-7 * d);

    let mut path: Vec<TangentState> = tr.samples(sa);
    let mut out = ShotOutcome {
        angle,
        crossing_point: ChartPoint { x1: 0.0, x4: f_odd },
        crossing_tangent: *path.last().unwrap(),
        crossing_rho: rho_c,
        f_even,
        f_odd,
        z_count,
        half_area: yc[6],
        path: Vec::new(),
        termination: Termination::CrossedVer,
    };
    if angle.s < 0.0 {
        for p in path.iter_mut() {
            *p = mirror_x4(p);
        }
        out.crossing_point.x4 = -f_odd;
        out.crossing_tangent = mirror_x4(&out.crossing_tangent);
        out.f_odd = -f_odd;
        out.f_even = -f_even;
    }
    out.path = path;
    Ok(out)
}

fn count_x4_changes(ys: &[[f64; 7]], thresh: f64) -> usize {
    let mut count = 0;
    let mut last_sign = 0.0;
    let mut since_change_max = f64::INFINITY;
    for y in ys {
        let x = y[2];
        if x != 0.0 {
            let sg = x.signum();
            if last_sign != 0.0 && sg != last_sign {
                count += 1;
                since_change_max = 0.0;
            }
            last_sign = sg;
        }
        since_change_max = since_change_max.max(x.abs());
    }
    if count > 0 && since_change_max <= thresh {
        count -= 1;
    }
    count
}

fn count_turns(samples: &[TangentState], neck: f64) -> usize {
    let n = samples.len();
    let mut turns = 0;
    let mut i = 0;
    while i < n {
        if samples[i].r < neck {
            let start = i;
            while i < n && samples[i].r < neck {
                i += 1;
            }
            if start > 0 && i < n {
                turns += 1;
            }
        } else {
            i += 1;
        }
    }
    turns
}

/// Full free-boundary geodesic from a half shot solving f_parity = 0,
/// completed by τ_ver (even) or τ_ver∘τ_hor (odd).
pub fn full_geodesic(
    sa: &Semiaxes,
    angle: impl Into<LaunchAngle>,
    parity: Parity,
    cfg: &ShooterConfig,
    tol: f64,
) -> Result<GeodesicPath> {
    let angle = angle.into();
    let shot = shoot_to_ver(sa, angle, cfg)?;
    let res = match parity {
        Parity::Even => shot.f_even,
        Parity::Odd => shot.f_odd,
    };
    if !(res.abs() < tol) {
        return Err(Error::NotASolution { residual: res, tol });
    }
    let half = &shot.path;
    let rho_c = shot.crossing_rho;
    let mut samples = half.clone();
    for (i, st) in half[..half.len() - 1].iter().enumerate().rev() {
        let t = st.tangent;
        let (x4, tangent) = match parity {
            Parity::Even => (st.point.x4, [t[0], -t[1], -t[2]]),
            Parity::Odd => (-st.point.x4, [t[0], -t[1], t[2]]),
        };
        let y = [-st.point.x1, st.r, x4, tangent[0], tangent[1], tangent[2], 0.0];
        samples.push(state_of(sa, &y, 2.0 * rho_c - st.rho, half[i + 1].drho));
    }
    let (cap_vec, _) = launch_vector(sa, angle.abs(), cfg.eps_launch)?;
    let cap = cap_vec[6];
    let profile: Vec<ProfileSample> =
        samples.iter().map(|s| ProfileSample { rho: s.rho, r: s.r, dr: s.tangent[1] }).collect();
    let body = pappus_area(&profile, 1e-6 * 2.0 * shot.half_area)?;
    let hor_crossings = if angle.s == 0.0 {
        None
    } else {
        Some(match parity {
            Parity::Even => 2 * shot.z_count,
            Parity::Odd => 2 * shot.z_count + 1,
        })
    };
    Ok(GeodesicPath {
        turn_count: count_turns(&samples, cfg.neck_radius),
        samples,
        area: body + 2.0 * cap,
        hor_crossings,
        termination: Termination::CrossedVer,
    })
}

/// Morse index of a full free-boundary geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub index: usize,
    /// Recount on the mesh with every other node removed.
    pub index_coarse: usize,
    /// Fraction of the ǧ-length spent in the launch collars r < eps_launch.
    pub collar_fraction: f64,
    pub precision_warning: bool,
}

impl IndexReport {
    pub fn is_stable(&self) -> bool {
        self.index == self.index_coarse
    }
}

/// Index of Q(ψ) = ∫ (V ψ'² + W ψ²) dρ over the path, with
/// W = 2π(−K r − (νᵀHν/|∇F|) N_r − 2ν_r²/r) and natural end conditions,
/// discretized by P1 elements on the path samples.
pub fn equivariant_index(sa: &Semiaxes, path: &GeodesicPath, cfg: &ShooterConfig) -> Result<IndexReport> {
    let nodes: Vec<&TangentState> =
        path.samples.iter().enumerate().filter(|(i, s)| *i == 0 || s.drho > 0.0).map(|(_, s)| s).collect();
    if nodes.len() < 3 {
        return Err(Error::Domain("path too short for an index count".into()));
    }
    let surf = Surface::new(sa);
    // (ρ-step from the previous node, V, W)
    let hvw: Vec<(f64, f64, f64)> = nodes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = [s.point.x1, s.r, s.point.x4];
            let g = surf.grad(&p);
            let gn = norm(&g);
            let n = [g[0] / gn, g[1] / gn, g[2] / gn];
            let nu = cross(&n, &s.tangent);
            let kh = (nu[0] * nu[0] * surf.ia2 + nu[1] * nu[1] * surf.ib2 + nu[2] * nu[2] * surf.id2) / gn;
            let k = gauss_curvature_quotient(sa, s.orbit());
            let w = 2.0 * PI * (-k * s.r - kh * n[1] - 2.0 * nu[1] * nu[1] / s.r);
            (if i == 0 { 0.0 } else { s.drho }, 2.0 * PI * s.r, w)
        })
        .collect();
    let index = negative_pivots(&hvw);
    let mut coarse: Vec<(f64, f64, f64)> = vec![hvw[0]];
    let mut acc = 0.0;
    for (i, x) in hvw.iter().enumerate().skip(1) {
        acc += x.0;
        if i % 2 == 0 || i == hvw.len() - 1 {
            coarse.push((acc, x.1, x.2));
            acc = 0.0;
        }
    }
    let index_coarse = negative_pivots(&coarse);
    let mut total = 0.0;
    let mut collar = 0.0;
    for w in nodes.windows(2) {
        total += w[1].drho;
        if w[0].r < cfg.eps_launch && w[1].r < cfg.eps_launch {
            collar += w[1].drho;
        }
    }
    let collar_fraction = collar / total;
    Ok(IndexReport { index, index_coarse, collar_fraction, precision_warning: collar_fraction > 0.1 })
}

/// Negative pivots of the tridiagonal P1 matrix for ∫ V ψ'² + W ψ²
/// (V linear per element, W lumped). Entries are (h from previous node, V, W).
fn negative_pivots(hvw: &[(f64, f64, f64)]) -> usize {
    let n = hvw.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let h = hvw[i + 1].0;
        let k = 0.5 * (hvw[i].1 + hvw[i + 1].1) / h;
        diag[i] += k + 0.5 * h * hvw[i].2;
        diag[i + 1] += k + 0.5 * h * hvw[i + 1].2;
        off[i] = -k;
    }
    let mut count = 0;
    let mut piv = diag[0];
    for i in 0..n {
        if i > 0 {
            piv = diag[i] - off[i - 1] * off[i - 1] / piv;
        }
        if piv == 0.0 {
            piv = f64::MIN_POSITIVE * diag[i].abs().max(1.0);
        }
        if piv < 0.0 {
            count += 1;
        }
    }
    count
}

/// One row of a path dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub rho: f64,
    pub x1: f64,
    pub x4: f64,
    pub r: f64,
    pub theta: f64,
    pub kappa: f64,
}

pub fn path_rows(sa: &Semiaxes, samples: &[TangentState]) -> Vec<PathRow> {
    samples
        .iter()
        .map(|s| PathRow {
            rho: s.rho,
            x1: s.point.x1,
            x4: s.point.x4,
            r: s.r,
            theta: s.theta,
            kappa: curvature_forcing(sa, s),
        })
        .collect()
}

/// Spread of the Clairaut quantity V·T1 over the part of a path with
/// |x1| ≤ `window`.
pub fn clairaut_drift(samples: &[TangentState], window: f64) -> Option<f64> {
    let vals: Vec<f64> = samples
        .iter()
        .filter(|s| s.point.x1.abs() <= window)
        .map(|s| 2.0 * PI * s.r * s.tangent[0])
        .collect();
    if vals.is_empty() {
        return None;
    }
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some(hi - lo)
}

/// Crossing data at eps, eps/2, eps/4 and the observed convergence order
/// of the crossing point (x4 and the crossing arclength).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchConvergence {
    pub eps: f64,
    pub x4: [f64; 3],
    pub rho: [f64; 3],
    /// Difference of the two second-order Richardson extrapolations of x4.
    pub richardson_gap: f64,
    pub order: f64,
}

pub fn launch_convergence(sa: &Semiaxes, angle: impl Into<LaunchAngle>, cfg: &ShooterConfig) -> Result<LaunchConvergence> {
    let angle = angle.into();
    let mut x4 = [0.0; 3];
    let mut rho = [0.0; 3];
    for (k, e) in [1.0, 0.5, 0.25].iter().enumerate() {
        let c = ShooterConfig { eps_launch: cfg.eps_launch * e, ..*cfg };
        let shot = shoot_to_ver(sa, angle, &c)?;
        x4[k] = shot.f_odd;
        rho[k] = shot.crossing_rho;
    }
    let r1 = (4.0 * x4[1] - x4[0]) / 3.0;
    let r2 = (4.0 * x4[2] - x4[1]) / 3.0;
    let d1 = (x4[0] - x4[1]).abs();
    let d2 = (x4[1] - x4[2]).abs();
    let order = if d1 > 0.0 && d2 > 0.0 { (d1 / d2).log2() } else { f64::INFINITY };
    Ok(LaunchConvergence { eps: cfg.eps_launch, x4, rho, richardson_gap: (r1 - r2).abs(), order })
}
