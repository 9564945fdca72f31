//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-10, atol: 1e-12, h_min: 1e-14, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus the embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    /// Advances `y` from `t0` to exactly `t1`. `h` carries the step-size
    /// guess in and the last accepted proposal out, so consecutive calls
    /// continue smoothly. `check` runs after every accepted step.
    pub fn advance<const N: usize, F, C, E>(
        &self,
        f: &F,
        t0: f64,
        y: [f64; N],
        t1: f64,
        h: &mut f64,
        mut check: C,
    ) -> Result<[f64; N], E>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        C: FnMut(f64, &[f64; N]) -> Result<(), E>,
        E: From<OdeError>,
    {
        let mut t = t0;
        let mut y = y;
        let mut k1 = f(t, &y);
        let mut steps = 0usize;
        while t < t1 {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps(self.max_steps).into());
            }
            steps += 1;
            let remaining = t1 - t;
            let mut step = h.min(self.h_max).min(remaining);
            let last = step >= remaining;
            if last {
                step = remaining;
            }
            if step < self.h_min * t1.abs().max(1.0) && !last {
                return Err(OdeError::StepUnderflow { t, h: step }.into());
            }
            let k2 = f(t + C2 * step, &axpy(&y, step, &[(A21, &k1)]));
            let k3 = f(t + C3 * step, &axpy(&y, step, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * step, &axpy(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * step, &axpy(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + step, &axpy(&y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = axpy(&y, step, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let t_new = if last { t1 } else { t + step };
            let k7 = f(t_new, &y_new);

            let mut err = 0.0_f64;
            for i in 0..N {
                let e = step * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                if step <= self.h_min * t1.abs().max(1.0) {
                    return Err(OdeError::NonFinite(t).into());
                }
                *h = 0.1 * step;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = t_new;
                y = y_new;
                k1 = k7;
                check(t, &y)?;
                if !last {
                    *h = step * factor;
                }
            } else {
                *h = step * factor.min(1.0);
                if *h < self.h_min * t1.abs().max(1.0) {
                    return Err(OdeError::StepUnderflow { t, h: *h }.into());
                }
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let solver = Dopri5::default();
        let mut h = 1e-3;
        let y =
            solver.advance::<1, _, _, OdeError>(&|_, y| [-0.7 * y[0]], 0.0, [2.0], 5.0, &mut h, |_, _| Ok(())).unwrap();
        assert!((y[0] - 2.0 * (-3.5f64).exp()).abs() < 1e-10);

        let mut h = 1e-3;
        let y = solver
            .advance::<2, _, _, OdeError>(&|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 20.0, &mut h, |_, _| Ok(()))
            .unwrap();
        assert!((y[0] - 20f64.cos()).abs() < 1e-8 && (y[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        let solver = Dopri5::default();
        let mut h = 1e-3;
        let r = solver.advance::<1, _, _, OdeError>(&|_, y| [y[0] * y[0]], 0.0, [1.0], 2.0, &mut h, |_, _| Ok(()));
        assert!(r.is_err());
    }
}
