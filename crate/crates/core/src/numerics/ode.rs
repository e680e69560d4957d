//! Dormand–Prince 5(4) with per-component relative error control.
//!
//! The stepper exposes single accepted steps so that callers can inspect the
//! state between steps, project it back onto a constraint manifold and locate
//! events by re-stepping from the last accepted state with a shorter step.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step (signed direction is taken from the caller); 0 picks one.
    pub h_init: f64,
    pub h_max: f64,
    /// Steps shorter than this are reported as underflow.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-11, atol: 1e-300, h_init: 0.0, h_max: f64::INFINITY, h_min: 1e-290, max_steps: 1_000_000 }
    }
}

/// One explicit DP5 step from (t, y) with slope k1 = f(t, y).
/// Returns the fifth-order solution, its slope and the embedded error vector.
pub fn dp5_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    let k2 = f(t + C2 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let k3 = f(t + C3 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let k4 = f(t + C4 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let k5 = f(t + C5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let k6 = f(t + h, &tmp);
    let mut y5 = [0.0; N];
    for i in 0..N {
        y5[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    let k7 = f(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, k7, err)
}

/// Snapshot of the stepper before an accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepStart<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub k1: [f64; N],
    pub h: f64,
}

/// Adaptive DP5(4) stepper. `dir` fixes the integration direction.
pub struct Dopri5<const N: usize, F> {
    f: F,
    pub t: f64,
    // Kahan compensation for t: autonomous problems may take steps far
    // below ulp(t).
    t_lo: f64,
    pub y: [f64; N],
    k1: [f64; N],
    h: f64,
    opts: OdeOptions,
    pub steps: usize,
    pub rejected: usize,
}

impl<const N: usize, F> Dopri5<N, F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(f: F, t0: f64, y0: [f64; N], dir: f64, opts: OdeOptions) -> Self {
        let k1 = f(t0, &y0);
        let h = if opts.h_init != 0.0 {
            opts.h_init.abs()
        } else {
            initial_step(&y0, &k1, &opts)
        };
        let h = h.min(opts.h_max) * dir.signum();
        Dopri5 { f, t: t0, t_lo: 0.0, y: y0, k1, h, opts, steps: 0, rejected: 0 }
    }

    pub fn rhs(&self) -> &F {
        &self.f
    }

    /// Signed size of the next attempted step.
    pub fn next_step(&self) -> f64 {
        self.h
    }

    /// Replace the current state (e.g. after projection) and refresh the slope.
    pub fn set_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.k1 = (self.f)(self.t, &self.y);
    }

    /// Take one accepted step, never stepping past `t_stop` (if given).
    pub fn step(&mut self, t_stop: Option<f64>) -> Result<StepStart<N>> {
        if self.steps >= self.opts.max_steps {
            return Err(Error::TooManySteps(self.opts.max_steps));
        }
        let mut h = self.h;
        let mut last_fail = false;
        loop {
            let mut clipped = false;
            if let Some(ts) = t_stop {
                if (self.t + h - ts) * h.signum() > 0.0 {
                    h = ts - self.t;
                    clipped = true;
                }
            }
            if h.abs() < self.opts.h_min || h == 0.0 {
                return Err(Error::StepUnderflow { t: self.t });
            }
            let (y5, k7, err) = dp5_step(&self.f, self.t, &self.y, &self.k1, h);
            let mut en = 0.0f64;
            let mut finite = true;
            for i in 0..N {
                if !y5[i].is_finite() || !k7[i].is_finite() {
                    finite = false;
                    break;
                }
                let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(y5[i].abs());
                en = en.max(err[i].abs() / sc);
            }
            if !finite || en.is_nan() {
                h *= 0.25;
                last_fail = true;
                self.rejected += 1;
                continue;
            }
            if en <= 1.0 {
                let start = StepStart { t: self.t, y: self.y, k1: self.k1, h };
                if clipped {
                    self.t = t_stop.unwrap();
                    self.t_lo = 0.0;
                } else {
                    let yk = h - self.t_lo;
                    let tk = self.t + yk;
                    self.t_lo = (tk - self.t) - yk;
                    self.t = tk;
                }
                self.y = y5;
                self.k1 = k7;
                self.steps += 1;
                let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                let fac = if last_fail { fac.min(1.0) } else { fac };
                let hn = if clipped { self.h.abs().max(h.abs()) } else { h.abs() * fac };
                self.h = hn.min(self.opts.h_max) * h.signum();
                return Ok(start);
            }
            h *= (0.9 * en.powf(-0.2)).clamp(0.1, 0.9);
            last_fail = true;
            self.rejected += 1;
        }
    }
}

fn initial_step<const N: usize>(y: &[f64; N], f: &[f64; N], o: &OdeOptions) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..N {
        let sc = o.atol + o.rtol * y[i].abs();
        d0 = d0.max(y[i].abs() / sc);
        d1 = d1.max(f[i].abs() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(o.h_max).max(1e-12)
}

/// Integrate from t0 to t1, calling `observe` after every accepted step.
pub fn integrate_to<const N: usize, F, O>(f: F, t0: f64, y0: [f64; N], t1: f64, opts: OdeOptions, mut observe: O) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    if t0 == t1 {
        return Ok(y0);
    }
    let mut st = Dopri5::new(f, t0, y0, t1 - t0, opts);
    while st.t != t1 {
        st.step(Some(t1))?;
        observe(st.t, &st.y);
    }
    Ok(st.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let y = integrate_to(f, 0.0, [0.0, 1.0], 10.0, opts, |_, _| {}).unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-10);
        assert!((y[1] - 10f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn fifth_order_convergence() {
        let f = |t: f64, y: &[f64; 1]| [y[0] * t.cos()];
        let exact = (1f64).sin().exp();
        let k1 = f(0.0, &[1.0]);
        let mut errs = vec![];
        for n in [8usize, 16] {
            let h = 1.0 / n as f64;
            let (mut t, mut y, mut k) = (0.0, [1.0], k1);
            for _ in 0..n {
                let (y5, k7, _) = dp5_step(&f, t, &y, &k, h);
                y = y5;
                k = k7;
                t += h;
            }
            errs.push((y[0] - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 4.6 && order < 5.6, "order {order}");
    }

    #[test]
    fn backward_integration() {
        let f = |_t: f64, y: &[f64; 1]| [y[0]];
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let y = integrate_to(f, 1.0, [1f64.exp()], 0.0, opts, |_, _| {}).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-11);
    }
}
