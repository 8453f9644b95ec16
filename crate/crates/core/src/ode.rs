//! Adaptive Dormand–Prince 5(4) integration of complex vector ODEs.

use crate::error::{Error, Result};
use crate::matrix::C64;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, max_step: 1e-2, min_step: 1e-14 }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stateful stepper; keeps its step-size estimate between calls so a
/// trajectory can be advanced from one output time to the next.
pub struct Dopri5 {
    opts: OdeOptions,
    h: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(opts: OdeOptions) -> Self {
        Self { opts, h: None, accepted: 0, rejected: 0 }
    }

    /// Integrates y' = f(t, y) from t0 to t1 (t1 > t0 or t1 < t0).
    pub fn advance<F>(&mut self, f: &mut F, t0: f64, y0: &[C64], t1: f64) -> Result<Vec<C64>>
    where
        F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    {
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let span = (t1 - t0).abs();
        if span == 0.0 {
            return Ok(y0.to_vec());
        }
        let dim = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = f(t, &y)?;
        let mut h = self.h.unwrap_or_else(|| self.initial_step(&y, &k1)).min(self.opts.max_step);
        let mut stages: Vec<Vec<C64>> = vec![Vec::new(); 7];
        let mut tmp = vec![C64::new(0.0, 0.0); dim];
        loop {
            let remaining = (t1 - t).abs();
            if remaining <= 1e-15 * span.max(1.0) {
                break;
            }
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let hs = dir * step;
            stages[0] = k1.clone();
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (r, st) in stages.iter().enumerate().take(s) {
                        if A[s][r] != 0.0 {
                            acc += st[i] * (hs * A[s][r]);
                        }
                    }
                    tmp[i] = acc;
                }
                stages[s] = f(t + C[s] * hs, &tmp)?;
            }
            // Stage 7 was evaluated at the 5th-order solution (FSAL).
            let ynew = tmp.clone();
            let mut err = 0.0;
            for i in 0..dim {
                let mut e = C64::new(0.0, 0.0);
                for (s, st) in stages.iter().enumerate() {
                    if E[s] != 0.0 {
                        e += st[i] * E[s];
                    }
                }
                let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(ynew[i].norm());
                err += (e.norm() * step / sc).powi(2);
            }
            let err = (err / dim as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                self.rejected += 1;
                if h < self.opts.min_step {
                    return Err(Error::StepFailure(t));
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t1 } else { t + hs };
                y = ynew;
                k1 = stages[6].clone();
                self.accepted += 1;
                if !last || factor < 1.0 {
                    h = (step * factor).min(self.opts.max_step);
                }
            } else {
                self.rejected += 1;
                h = step * factor.min(1.0);
                if h < self.opts.min_step {
                    return Err(Error::StepFailure(t));
                }
            }
        }
        self.h = Some(h);
        Ok(y)
    }

    fn initial_step(&self, y: &[C64], f0: &[C64]) -> f64 {
        let d0 = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let d1 = f0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(self.opts.max_step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_exponential() {
        let lam = C64::new(-0.3, 2.0);
        let mut f = |_t: f64, y: &[C64]| Ok(vec![y[0] * lam]);
        let mut s = Dopri5::new(OdeOptions { rtol: 1e-11, atol: 1e-13, max_step: 0.1, min_step: 1e-14 });
        let y = s.advance(&mut f, 0.0, &[C64::new(1.0, 0.0)], 3.0).unwrap();
        assert!((y[0] - (lam * 3.0).exp()).norm() < 1e-9);
        let back = s.advance(&mut f, 3.0, &y, 0.0).unwrap();
        assert!((back[0] - 1.0).norm() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence_on_polynomial() {
        // y' = 5t⁴ is integrated exactly by a 5th-order method.
        let mut f = |t: f64, _y: &[C64]| Ok(vec![C64::new(5.0 * t.powi(4), 0.0)]);
        let mut s = Dopri5::new(OdeOptions { max_step: 0.5, ..Default::default() });
        let y = s.advance(&mut f, 0.0, &[C64::new(0.0, 0.0)], 2.0).unwrap();
        assert!((y[0].re - 32.0).abs() < 1e-10);
    }

    #[test]
    fn failing_rhs_propagates() {
        let mut f = |t: f64, y: &[C64]| if t > 0.5 { Err(Error::StratumExit(t)) } else { Ok(y.to_vec()) };
        let mut s = Dopri5::new(OdeOptions::default());
        assert!(matches!(s.advance(&mut f, 0.0, &[C64::new(1.0, 0.0)], 1.0), Err(Error::StratumExit(_))));
    }
}
