//! Adaptive Dormand–Prince 5(4) integrator for small autonomous systems.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Abort once any component exceeds this in magnitude.
    pub blow_up: f64,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 10_000_000,
            blow_up: 1e6,
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` and returns the state at every
    /// time in `outputs` (ascending, all ≥ `t0`).
    pub fn solve<const N: usize>(
        &self,
        mut f: impl FnMut(f64, &[f64; N]) -> [f64; N],
        t0: f64,
        y0: [f64; N],
        outputs: &[f64],
    ) -> Result<Vec<[f64; N]>> {
        let mut t = t0;
        let mut y = y0;
        let mut out = Vec::with_capacity(outputs.len());
        let mut h = 1e-3;
        let mut k = [[0.0; N]; 7];
        k[0] = f(t, &y);
        let mut steps = 0;
        for &target in outputs {
            if target < t {
                return Err(Error::InvalidArgument("output times must be ascending".into()));
            }
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::InvalidState(format!("step limit reached at t = {t}")));
                }
                let last = t + h >= target;
                let step = if last { target - t } else { h };
                for s in 1..7 {
                    let mut ys = y;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        for i in 0..N {
                            ys[i] += step * A[s][j] * kj[i];
                        }
                    }
                    k[s] = f(t + C[s] * step, &ys);
                }
                let mut y5 = y;
                let mut err = 0.0f64;
                for i in 0..N {
                    let (mut d5, mut d4) = (0.0, 0.0);
                    for s in 0..7 {
                        d5 += B5[s] * k[s][i];
                        d4 += B4[s] * k[s][i];
                    }
                    y5[i] += step * d5;
                    let sc = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                    err = err.max((step * (d5 - d4) / sc).abs());
                }
                if !err.is_finite() {
                    return Err(Error::BlowUpDetected {
                        interval: steps,
                        max_abs: f64::INFINITY,
                    });
                }
                if err <= 1.0 {
                    t = if last { target } else { t + step };
                    y = y5;
                    // first-same-as-last: the seventh stage is f at the new point
                    k[0] = k[6];
                    let m = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if m > self.blow_up {
                        return Err(Error::BlowUpDetected {
                            interval: steps,
                            max_abs: m,
                        });
                    }
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !(last && err <= 1.0) {
                    h = step * fac;
                }
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::InvalidState(format!("step size underflow at t = {t}")));
                }
            }
            out.push(y);
        }
        Ok(out)
    }
}
