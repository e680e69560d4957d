//! Degeneracy instants from a Heun continued fraction.
//!
//! With x = z², the λ = 0 Jacobi equation becomes Heun's equation with
//! singular points 0, 1, ζ = a²/(a²−b²), ∞. Bounded solutions at both ends
//! exist iff q equals the continued fraction
//!
//!   q = ζγP₁ / (Q₁ + q − R₁P₂ / (Q₂ + q − R₂P₃ / …)),
//!   P_j = (j−1+α)(j−1+β), Q_j = j((j−1+γ)(1+ζ) + ζδ + ε), R_j = ζ(j+1)(j+γ).
//!
//! q depends on a, so instants are roots of residual(a) = q − CF(q).
//! The fraction converges for |ζ| > 1, i.e. a > b/√2, a ≠ b.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Semiaxes;
use crate::numerics::roots;
use crate::sturm_liouville;
use crate::Parity;

pub const CONFLUENT_TOL: f64 = 1e-8;
const MAX_DEPTH: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunParams {
    pub zeta: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

fn check_confluent(sa: &Semiaxes) -> Result<()> {
    if sa.is_confluent(CONFLUENT_TOL) {
        return Err(Error::ConfluentCase { a: sa.a, b: sa.b });
    }
    Ok(())
}

impl HeunParams {
    /// Parameters from the substitution x = z² in the λ = 0 equation
    /// (v = H for even, v = z·H for odd).
    ///
    /// κ = a/(2d), δ = 1, ε = 5/2; even: γ = 1/2, α, β = 3/2 ± κ;
    /// odd: γ = 3/2, α, β = 2 ± κ.
    /// q = −a²(a²+b²)/(4d²(a²−b²)) + 3/4 (even) or + ζ/2 + 2 (odd).
    pub fn from_semiaxes(sa: &Semiaxes, parity: Parity) -> Result<Self> {
        check_confluent(sa)?;
        let Semiaxes { a, b, d } = *sa;
        let e = a * a - b * b;
        let zeta = a * a / e;
        let kappa = a / (2.0 * d);
        let q0 = -a * a * (a * a + b * b) / (4.0 * d * d * e);
        let (gamma, mid, q) = match parity {
            Parity::Even => (0.5, 1.5, q0 + 0.75),
            Parity::Odd => (1.5, 2.0, q0 + 0.5 * zeta + 2.0),
        };
        let alpha = mid + kappa;
        let beta = mid - kappa;
        let delta = 1.0;
        Ok(HeunParams { zeta, q, alpha, beta, gamma, delta, epsilon: alpha + beta - gamma - delta + 1.0 })
    }

    /// The parameter table as usually quoted (δ = d², α and β built from
    /// √(4a² + (d²−1)²)); it agrees with [`HeunParams::from_semiaxes`] only for d = 1.
    pub fn literal(sa: &Semiaxes, parity: Parity) -> Result<Self> {
        check_confluent(sa)?;
        let Semiaxes { a, b, d } = *sa;
        let (a2, b2, d2) = (a * a, b * b, d * d);
        let e = a2 - b2;
        let s = (4.0 * a2 + (d2 - 1.0).powi(2)).sqrt();
        let (q, alpha, beta, gamma) = match parity {
            Parity::Even => (
                (a2 * (d2 - b2 + 2.0) - b2 * (d2 + 2.0) - a2 * a2) / (4.0 * e),
                (3.0 * d2 + 3.0 + s) / 4.0,
                (3.0 * d2 + 3.0 - s) / 4.0,
                0.5,
            ),
            Parity::Odd => (
                (a2 * (4.0 * d2 - b2 + 6.0) - 2.0 * b2 * (d2 + 3.0) - a2 * a2) / (4.0 * e),
                (3.0 * d2 + 5.0 + s) / 4.0,
                (3.0 * d2 + 5.0 - s) / 4.0,
                1.5,
            ),
        };
        Ok(HeunParams { zeta: a2 / e, q, alpha, beta, gamma, delta: d2, epsilon: alpha + beta - gamma - d2 + 1.0 })
    }

    pub fn p(&self, j: usize) -> f64 {
        let j = j as f64;
        (j - 1.0 + self.alpha) * (j - 1.0 + self.beta)
    }

    pub fn qj(&self, j: usize) -> f64 {
        let j = j as f64;
        j * ((j - 1.0 + self.gamma) * (1.0 + self.zeta) + self.zeta * self.delta + self.epsilon)
    }

    pub fn r(&self, j: usize) -> f64 {
        let j = j as f64;
        self.zeta * (j + 1.0) * (j + self.gamma)
    }
}

/// The continued fraction truncated at `depth` (zero tail), by backward
/// recurrence t_j = P_j / (Q_j + q − R_j t_{j+1}); value ζγ t₁.
pub fn cf_eval(hp: &HeunParams, depth: usize) -> Result<f64> {
    if depth < 8 {
        return Err(Error::Domain(format!("continued fraction depth {depth} below 8")));
    }
    let mut t = 0.0;
    for j in (1..=depth).rev() {
        let den = hp.qj(j) + hp.q - hp.r(j) * t;
        if den.abs() < 1e-300 {
            return Err(Error::PoleHit { level: j });
        }
        t = hp.p(j) / den;
    }
    Ok(hp.zeta * hp.gamma * t)
}

/// Continued fraction with depth doubling from 64 until two successive
/// values agree to 1e-12 (relative to max(1, |value|)).
pub fn cf_adaptive(hp: &HeunParams) -> Result<(f64, usize)> {
    if hp.zeta.abs() <= 1.0 {
        return Err(Error::OutsideCfDomain { zeta_abs: hp.zeta.abs() });
    }
    let mut depth = 64;
    let mut prev = cf_eval(hp, depth)?;
    loop {
        let next_depth = depth * 2;
        let v = cf_eval(hp, next_depth)?;
        let change = (v - prev).abs();
        if change <= 1e-12 * v.abs().max(1.0) {
            return Ok((v, next_depth));
        }
        if next_depth >= MAX_DEPTH {
            return Err(Error::DepthExhausted { depth: next_depth, change });
        }
        prev = v;
        depth = next_depth;
    }
}

/// q(a) − CF(q(a); a).
pub fn residual(b: f64, d: f64, parity: Parity, a: f64) -> Result<f64> {
    let hp = HeunParams::from_semiaxes(&Semiaxes::new(a, b, d)?, parity)?;
    Ok(hp.q - cf_adaptive(&hp)?.0)
}

fn is_pole_not_root(b: f64, d: f64, parity: Parity, a: f64, r: f64) -> bool {
    let q = HeunParams::from_semiaxes(&Semiaxes { a, b, d }, parity).map(|h| h.q).unwrap_or(1.0);
    !(r.abs() < 1e-6 * (1.0 + q.abs()))
}

/// Roots of the residual in each bracket. A sign change through a pole of
/// the fraction is reported as `PoleHit`.
pub fn heun_instants(b: f64, d: f64, parity: Parity, brackets: &[(f64, f64)]) -> Vec<Result<f64>> {
    brackets
        .par_iter()
        .map(|&(lo, hi)| {
            if lo < b && hi > b {
                return Err(Error::ConfluentCase { a: b, b });
            }
            let f = |a: f64| residual(b, d, parity, a);
            let (flo, fhi) = (f(lo)?, f(hi)?);
            if flo * fhi > 0.0 {
                return Err(Error::NoSignChange { lo, hi });
            }
            let mut err = None;
            let root = roots::brent(
                |a| match f(a) {
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
            let root = root?;
            let r = f(root)?;
            if is_pole_not_root(b, d, parity, root, r) {
                return Err(Error::PoleHit { level: 1 });
            }
            Ok(root)
        })
        .collect()
}

/// All CF roots of one parity on [lo, hi], from a scan with step 0.02 that
/// skips |a − b| < δ and the divergent range a ≤ b/√2.
pub fn scan_roots(b: f64, d: f64, parity: Parity, lo: f64, hi: f64, delta: f64) -> Vec<f64> {
    let lo = lo.max(b / std::f64::consts::SQRT_2 * (1.0 + 1e-6));
    let step = 0.02;
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&a| if (a - b).abs() < delta { None } else { residual(b, d, parity, a).ok() })
        .collect();
    let mut brackets = vec![];
    for i in 0..n {
        if let (Some(f0), Some(f1)) = (vals[i], vals[i + 1]) {
            if f0 * f1 <= 0.0 && !(grid[i] < b && grid[i + 1] > b) {
                brackets.push((grid[i], grid[i + 1]));
            }
        }
    }
    heun_instants(b, d, parity, &brackets).into_iter().filter_map(|r| r.ok()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub m: usize,
    pub a_sl: f64,
    pub a_cf: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedRoot {
    pub parity: Parity,
    pub a: f64,
}

/// An SL instant without a CF partner because the fraction is not defined
/// there; the SL value stands alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlOnly {
    pub m: usize,
    pub a_sl: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub pairs: Vec<Pair>,
    pub unmatched_cf: Vec<UnmatchedRoot>,
    pub skipped_near_confluent: Vec<SlOnly>,
    pub skipped_outside_domain: Vec<SlOnly>,
    pub max_diff: f64,
}

/// Pair the SL instants a_1..a_{m_max} with CF roots of matching parity.
pub fn crosscheck(b: f64, d: f64, m_max: usize) -> Result<CrosscheckReport> {
    const DELTA: f64 = 1e-3;
    let inst = sturm_liouville::instants(b, d, m_max)?;
    let hi = inst.last().map(|i| i.a_m).unwrap_or(d) + 0.5;
    let lo = 0.05 * d.min(b);
    let mut cf_even = scan_roots(b, d, Parity::Even, lo, hi, DELTA);
    let mut cf_odd = scan_roots(b, d, Parity::Odd, lo, hi, DELTA);
    let mut rep = CrosscheckReport {
        pairs: vec![],
        unmatched_cf: vec![],
        skipped_near_confluent: vec![],
        skipped_outside_domain: vec![],
        max_diff: 0.0,
    };
    for i in &inst {
        if (i.a_m - b).abs() < DELTA {
            rep.skipped_near_confluent.push(SlOnly { m: i.m, a_sl: i.a_m, reason: "a = b: confluent".into() });
            continue;
        }
        if i.a_m <= b / std::f64::consts::SQRT_2 {
            rep.skipped_outside_domain.push(SlOnly { m: i.m, a_sl: i.a_m, reason: "|zeta| <= 1: fraction diverges".into() });
            continue;
        }
        let pool = match i.parity {
            Parity::Even => &mut cf_even,
            Parity::Odd => &mut cf_odd,
        };
        let best = pool
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - i.a_m).abs().total_cmp(&(y.1 - i.a_m).abs()))
            .map(|(k, v)| (k, *v));
        if let Some((k, a_cf)) = best {
            if (a_cf - i.a_m).abs() < 0.01 {
                pool.remove(k);
                let diff = (a_cf - i.a_m).abs();
                rep.max_diff = rep.max_diff.max(diff);
                rep.pairs.push(Pair { m: i.m, a_sl: i.a_m, a_cf, diff });
                continue;
            }
        }
        rep.max_diff = f64::INFINITY;
        rep.pairs.push(Pair { m: i.m, a_sl: i.a_m, a_cf: f64::NAN, diff: f64::INFINITY });
    }
    for a in cf_even {
        rep.unmatched_cf.push(UnmatchedRoot { parity: Parity::Even, a });
    }
    for a in cf_odd {
        rep.unmatched_cf.push(UnmatchedRoot { parity: Parity::Odd, a });
    }
    rep.unmatched_cf.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(rep)
}
