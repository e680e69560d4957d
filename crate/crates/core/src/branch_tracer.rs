//! Continuation of the bifurcation branches B_m in the (a, s) strip and the
//! census of distinct free-boundary geodesics at fixed a.
//!
//! Branches are traced in (a, t) with t = ln tan s: beyond a few units of a
//! the branch angles approach π/2 faster than exponentially.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Semiaxes;
use crate::numerics::roots::brent;
use crate::shooter::{self, equivariant_index, full_geodesic, shoot_to_ver, LaunchAngle, ShooterConfig, ShotOutcome};
use crate::sturm_liouville::instants;
use crate::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub a: f64,
    pub s: f64,
    /// π/2 − s at full precision.
    pub u: f64,
    /// ln tan s.
    pub t: f64,
    pub z_count: usize,
    /// Area of the full surface, 2·(half-path area).
    pub area: f64,
    pub residual: f64,
    pub turn_count: usize,
}

impl BranchPoint {
    pub fn angle(&self) -> LaunchAngle {
        LaunchAngle { s: self.s, u: self.u }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub m: usize,
    pub parity: Parity,
    pub b: f64,
    pub d: f64,
    pub points: Vec<BranchPoint>,
    /// The degeneracy instant a_m the branch issues from.
    pub seed: f64,
    /// Indices of points where da/dσ changed sign.
    pub folds: Vec<usize>,
}

impl Branch {
    pub fn semiaxes(&self, a: f64) -> Result<Semiaxes> {
        Semiaxes::new(a, self.b, self.d)
    }

    pub fn z_count(&self) -> usize {
        self.m / 2
    }
}

/// Pseudo-arclength step control in the (a, t) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub grow: f64,
    pub grow_after: usize,
    /// Corrector target for |f_parity|.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { initial: 0.05, min: 1e-4, max: 0.5, grow: 1.3, grow_after: 4, newton_tol: 1e-10, max_newton: 8 }
    }
}

/// Seeding and shooter settings for branch work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracerConfig {
    pub s0: f64,
    pub step: StepControl,
    /// Shooter settings; `None` picks [`ShooterConfig::new`] per a.
    pub shooter: Option<ShooterConfig>,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig { s0: 0.01, step: StepControl::default(), shooter: None }
    }
}

impl TracerConfig {
    fn shooter_for(&self, sa: &Semiaxes) -> ShooterConfig {
        match self.shooter {
            Some(c) => ShooterConfig { length_max: c.length_max.max(10.0 * (sa.a + sa.b + sa.d)), ..c },
            None => ShooterConfig::new(sa),
        }
    }
}

fn select(o: &ShotOutcome, parity: Parity) -> f64 {
    match parity {
        Parity::Even => o.f_even,
        Parity::Odd => o.f_odd,
    }
}

struct Problem {
    b: f64,
    d: f64,
    parity: Parity,
    cfg: TracerConfig,
}

impl Problem {
    fn shot(&self, a: f64, angle: LaunchAngle) -> Result<ShotOutcome> {
        let sa = Semiaxes::new(a, self.b, self.d)?;
        shoot_to_ver(&sa, angle, &self.cfg.shooter_for(&sa))
    }

    fn f(&self, a: f64, t: f64) -> Result<f64> {
        Ok(select(&self.shot(a, LaunchAngle::from_log_tan(t))?, self.parity))
    }

    fn point(&self, a: f64, angle: LaunchAngle) -> Result<BranchPoint> {
        let sa = Semiaxes::new(a, self.b, self.d)?;
        let cfg = self.cfg.shooter_for(&sa);
        let o = shoot_to_ver(&sa, angle, &cfg)?;
        Ok(BranchPoint {
            a,
            s: angle.s,
            u: angle.u,
            t: angle.log_tan(),
            z_count: o.z_count,
            area: 2.0 * o.half_area,
            residual: select(&o, self.parity).abs(),
            turn_count: half_path_turns(&o, cfg.neck_radius),
        })
    }

    /// Root of f(·, angle) in a, bracket grown around `guess`.
    fn solve_a(&self, angle: LaunchAngle, guess: f64, width: f64) -> Result<f64> {
        let g = |a: f64| self.shot(a, angle).map(|o| select(&o, self.parity)).unwrap_or(f64::NAN);
        let mut w = width;
        for _ in 0..6 {
            let lo = (guess - w).max(1e-3);
            let hi = guess + w;
            let (flo, fhi) = (g(lo), g(hi));
            if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
                return brent(g, lo, hi, 1e-13);
            }
            w *= 2.0;
        }
        Err(Error::NoSignChange { lo: guess - w, hi: guess + w })
    }

    /// Root of f(a, ·) in t near `guess`.
    fn solve_t(&self, a: f64, guess: f64) -> Result<f64> {
        let g = |t: f64| self.f(a, t).unwrap_or(f64::NAN);
        let f0 = g(guess);
        let mut w = 0.01 * guess.abs().max(1.0);
        for _ in 0..12 {
            for (lo, hi) in [(guess - w, guess), (guess, guess + w)] {
                let (flo, fhi) = if lo == guess { (f0, g(hi)) } else { (g(lo), f0) };
                if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
                    return brent(g, lo, hi, 1e-13);
                }
            }
            w *= 1.6;
        }
        Err(Error::NoSignChange { lo: guess - w, hi: guess + w })
    }
}

/// Turns of the full (reflected) geodesic counted on the half path: neck
/// stretches r < neck_radius away from the launch, including one reaching
/// the crossing.
pub fn half_path_turns(o: &ShotOutcome, neck: f64) -> usize {
    let p = &o.path;
    let mut turns = 0;
    let mut i = 0;
    while i < p.len() {
        if p[i].r < neck {
            let start = i;
            while i < p.len() && p[i].r < neck {
                i += 1;
            }
            if start > 0 {
                turns += 1;
            }
        } else {
            i += 1;
        }
    }
    turns
}

/// Two points of B_m at s₀ and 2s₀ from 1-D solves in a near a_m.
pub fn seed_branch(b: f64, d: f64, m: usize, cfg: &TracerConfig) -> Result<Branch> {
    if m < 2 {
        return Err(Error::SeedRootNotFound { m, reason: "branches start at m = 2".into() });
    }
    let inst = instants(b, d, m)?;
    let a_m = inst.last().ok_or_else(|| Error::SeedRootNotFound { m, reason: "no instant".into() })?.a_m;
    let parity = Parity::of_m(m);
    let pb = Problem { b, d, parity, cfg: *cfg };
    let mut points = Vec::new();
    let mut guess = a_m;
    for s in [cfg.s0, 2.0 * cfg.s0] {
        let angle = LaunchAngle::from_s(s);
        let a = pb
            .solve_a(angle, guess, 0.02 * d)
            .map_err(|e| Error::SeedRootNotFound { m, reason: format!("s = {s}: {e}") })?;
        let p = pb.point(a, angle)?;
        if p.z_count != m / 2 {
            return Err(Error::SeedRootNotFound {
                m,
                reason: format!("z_count {} at s = {s}, expected {}", p.z_count, m / 2),
            });
        }
        guess = a;
        points.push(p);
    }
    Ok(Branch { m, parity, b, d, points, seed: a_m, folds: Vec::new() })
}

/// Pseudo-arclength continuation in (a, t) until a ≥ a_max. An overshooting
/// last point is replaced by the solution at a = a_max exactly.
pub fn continue_branch(branch: &Branch, a_max: f64, cfg: &TracerConfig) -> Result<Branch> {
    if branch.points.len() < 2 {
        return Err(Error::Domain("continuation needs two branch points".into()));
    }
    let ctl = cfg.step;
    let pb = Problem { b: branch.b, d: branch.d, parity: branch.parity, cfg: *cfg };
    let z = branch.z_count();
    let mut out = branch.clone();
    let mut h = ctl.initial;
    let mut successes = 0;
    let n = out.points.len();
    let (p0, p1) = (out.points[n - 2], out.points[n - 1]);
    let mut tau = unit([p1.a - p0.a, p1.t - p0.t]);
    while out.points.last().unwrap().a < a_max {
        let last = *out.points.last().unwrap();
        let x1 = [last.a, last.t];
        let attempt = corrector(&pb, x1, tau, h, &ctl).and_then(|x| {
            let p = pb.point(x[0], LaunchAngle::from_log_tan(x[1]))?;
            if p.z_count != z {
                return Err(Error::ZJump { expected: z, found: p.z_count, a: p.a, s: p.s });
            }
            Ok((x, p))
        });
        match attempt {
            Ok((x, p)) => {
                let new_tau = unit([x[0] - x1[0], x[1] - x1[1]]);
                if new_tau[0] * tau[0] < 0.0 {
                    out.folds.push(out.points.len());
                }
                tau = new_tau;
                out.points.push(p);
                successes += 1;
                if successes >= ctl.grow_after {
                    h = (h * ctl.grow).min(ctl.max);
                    successes = 0;
                }
            }
            Err(e) => {
                successes = 0;
                h *= 0.5;
                if h < ctl.min {
                    return Err(match e {
                        Error::ZJump { .. } => e,
                        _ => Error::StepUnderflow { t: last.a },
                    });
                }
            }
        }
    }
    // land exactly on a_max
    let k = out.points.len();
    if out.points[k - 1].a > a_max {
        let (q0, q1) = (out.points[k - 2], out.points[k - 1]);
        let w = (a_max - q0.a) / (q1.a - q0.a);
        let guess = q0.t + w * (q1.t - q0.t);
        let t = pb.solve_t(a_max, guess)?;
        let p = pb.point(a_max, LaunchAngle::from_log_tan(t))?;
        if p.z_count != z {
            return Err(Error::ZJump { expected: z, found: p.z_count, a: p.a, s: p.s });
        }
        out.points[k - 1] = p;
    }
    Ok(out)
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Newton on (f(a, t), τ·(x − x_pred)) = 0 with a forward-difference
/// Jacobian (steps 1e-6·a and 1e-6).
fn corrector(pb: &Problem, x1: [f64; 2], tau: [f64; 2], h: f64, ctl: &StepControl) -> Result<[f64; 2]> {
    let xp = [x1[0] + h * tau[0], x1[1] + h * tau[1]];
    let mut x = xp;
    for _ in 0..ctl.max_newton {
        let f = pb.f(x[0], x[1])?;
        let da = 1e-6 * x[0];
        let dt = 1e-6;
        let fa = (pb.f(x[0] + da, x[1])? - f) / da;
        let ft = (pb.f(x[0], x[1] + dt)? - f) / dt;
        let g = tau[0] * (x[0] - xp[0]) + tau[1] * (x[1] - xp[1]);
        let det = fa * tau[1] - ft * tau[0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::RootNotConverged);
        }
        let step_a = (f * tau[1] - ft * g) / det;
        let step_t = (fa * g - f * tau[0]) / det;
        x = [x[0] - step_a, x[1] - step_t];
        if x[0] <= 0.0 {
            return Err(Error::RootNotConverged);
        }
        let moved = (x[0] - x1[0]).hypot(x[1] - x1[1]);
        if moved > 2.0 * h {
            return Err(Error::RootNotConverged);
        }
        if step_a.hypot(step_t) < 1e-9 * (1.0 + x[0].abs() + x[1].abs()) {
            let fx = pb.f(x[0], x[1])?;
            if fx.abs() < ctl.newton_tol {
                return Ok(x);
            }
        }
    }
    let fx = pb.f(x[0], x[1])?;
    if fx.abs() < ctl.newton_tol {
        Ok(x)
    } else {
        Err(Error::RootNotConverged)
    }
}

/// Seed and continue B_m up to a_max.
pub fn trace_branch(b: f64, d: f64, m: usize, a_max: f64, cfg: &TracerConfig) -> Result<Branch> {
    let seed = seed_branch(b, d, m, cfg)?;
    continue_branch(&seed, a_max, cfg)
}

/// Trace several branches concurrently.
pub fn trace_branches(b: f64, d: f64, ms: &[usize], a_max: f64, cfg: &TracerConfig) -> Vec<Result<Branch>> {
    ms.par_iter().map(|&m| trace_branch(b, d, m, a_max, cfg)).collect()
}

/// Large-a diagnostics of a branch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotics {
    pub a: f64,
    /// sup |x1| over the full geodesic outside the neck collars r < neck radius.
    pub sup_x1_deviation: f64,
    /// Area over m times the Pappus area of γ_ver.
    pub area_ratio: f64,
    pub turn_count: usize,
    pub index: usize,
    pub index_stable: bool,
}

/// Diagnostics at the stored point of `branch` closest to `a`.
pub fn asymptotics(branch: &Branch, a: f64, cfg: &TracerConfig) -> Result<Asymptotics> {
    let p = branch
        .points
        .iter()
        .min_by(|x, y| (x.a - a).abs().total_cmp(&(y.a - a).abs()))
        .ok_or_else(|| Error::Domain("empty branch".into()))?;
    let sa = branch.semiaxes(p.a)?;
    let scfg = cfg.shooter_for(&sa);
    let path = full_geodesic(&sa, p.angle(), branch.parity, &scfg, 1e-7)?;
    let sup = path
        .samples
        .iter()
        .filter(|s| s.r >= scfg.neck_radius)
        .fold(0.0f64, |acc, s| acc.max(s.point.x1.abs()));
    let limit = crate::geometry::gamma_ver_area(branch.b, branch.d)?;
    let ix = equivariant_index(&sa, &path, &scfg)?;
    Ok(Asymptotics {
        a: p.a,
        sup_x1_deviation: sup,
        area_ratio: path.area / (branch.m as f64 * limit),
        turn_count: path.turn_count,
        index: ix.index,
        index_stable: ix.is_stable(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub s: f64,
    pub t: f64,
    pub m: usize,
    pub parity: Parity,
    pub z_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub a: f64,
    pub count: usize,
    pub witnesses: Vec<Witness>,
}

/// Census grid in t = ln tan s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
}

impl Default for CensusGrid {
    fn default() -> Self {
        CensusGrid { t_min: (5e-3f64).tan().ln(), t_max: 40.0, n: 400 }
    }
}

impl CensusGrid {
    /// Grid with every interval halved (contains the current nodes).
    pub fn refined(&self) -> Self {
        CensusGrid { n: 2 * self.n - 1, ..*self }
    }

    fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.t_min + (self.t_max - self.t_min) * i as f64 / (self.n - 1) as f64).collect()
    }
}

/// Distinct m ≥ 2 with a solution of f_even = 0 or f_odd = 0 at this a.
/// Each witness is a refined, verified root (|f| < 1e-8); m = 2z for even
/// and 2z + 1 for odd solutions.
pub fn census(b: f64, d: f64, a: f64, grid: &CensusGrid) -> Result<Census> {
    let sa = Semiaxes::new(a, b, d)?;
    census_with_config(b, d, a, grid, &ShooterConfig::new(&sa))
}

/// [`census`] with explicit shooter settings.
pub fn census_with_config(b: f64, d: f64, a: f64, grid: &CensusGrid, cfg: &ShooterConfig) -> Result<Census> {
    if !(a > d) {
        return Err(Error::Domain(format!("census needs a > d (a = {a}, d = {d})")));
    }
    if grid.n < 2 || !(grid.t_min < grid.t_max) {
        return Err(Error::Domain(format!("census grid needs n >= 2 and t_min < t_max (got {grid:?})")));
    }
    let sa = Semiaxes::new(a, b, d)?;
    cfg.validate()?;
    let nodes = grid.nodes();
    let shots: Vec<Option<(f64, f64)>> = nodes
        .par_iter()
        .map(|&t| shoot_to_ver(&sa, LaunchAngle::from_log_tan(t), cfg).ok().map(|o| (o.f_even, o.f_odd)))
        .collect();
    let mut brackets = Vec::new();
    for i in 0..nodes.len() - 1 {
        if let (Some(l), Some(r)) = (shots[i], shots[i + 1]) {
            if l.0 * r.0 <= 0.0 && l.0 != r.0 {
                brackets.push((Parity::Even, nodes[i], nodes[i + 1]));
            }
            if l.1 * r.1 <= 0.0 && l.1 != r.1 {
                brackets.push((Parity::Odd, nodes[i], nodes[i + 1]));
            }
        }
    }
    let found: Vec<Witness> = brackets
        .par_iter()
        .filter_map(|&(parity, lo, hi)| {
            let g = |t: f64| {
                shoot_to_ver(&sa, LaunchAngle::from_log_tan(t), cfg).map(|o| select(&o, parity)).unwrap_or(f64::NAN)
            };
            let t = brent(g, lo, hi, 1e-13).ok()?;
            let angle = LaunchAngle::from_log_tan(t);
            let o = shoot_to_ver(&sa, angle, cfg).ok()?;
            if select(&o, parity).abs() >= 1e-8 {
                return None;
            }
            let m = match parity {
                Parity::Even => 2 * o.z_count,
                Parity::Odd => 2 * o.z_count + 1,
            };
            Some(Witness { s: angle.s, t, m, parity, z_count: o.z_count })
        })
        .collect();
    let mut witnesses: Vec<Witness> = Vec::new();
    for w in found.into_iter().filter(|w| w.m >= 2) {
        if !witnesses.iter().any(|x| x.m == w.m) {
            witnesses.push(w);
        }
    }
    witnesses.sort_by_key(|w| w.m);
    Ok(Census { a, count: witnesses.len(), witnesses })
}

/// One row of a branch dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub m: usize,
    pub parity: Parity,
    pub a: f64,
    pub s: f64,
    pub z_count: usize,
    pub area: f64,
    pub residual: f64,
    pub turn_count: usize,
}

pub fn branch_rows(branch: &Branch) -> Vec<BranchRow> {
    branch
        .points
        .iter()
        .map(|p| BranchRow {
            m: branch.m,
            parity: branch.parity,
            a: p.a,
            s: p.s,
            z_count: p.z_count,
            area: p.area,
            residual: p.residual,
            turn_count: p.turn_count,
        })
        .collect()
}

/// Mirror check: shot at (a, −s) has f_parity of the same magnitude.
pub fn mirror_residual(branch: &Branch, p: &BranchPoint, cfg: &TracerConfig) -> Result<f64> {
    let sa = branch.semiaxes(p.a)?;
    let o = shooter::shoot_to_ver(&sa, p.angle().mirrored(), &cfg.shooter_for(&sa))?;
    Ok(select(&o, branch.parity).abs())
}
