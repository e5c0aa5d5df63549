// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand–Prince 5(4) integration of autonomous linear or
//! nonlinear systems `y' = f(y)`, sampled at prescribed output times.
//!
//! Runge–Kutta updates are linear combinations of right-hand-side
//! evaluations, so any linear invariant of `f` (trace, particle number) is
//! conserved up to roundoff regardless of the tolerance.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait OdeScalar: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    const ZERO: Self = 0.0;
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0 && atol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerances must be positive (rtol={rtol}, atol={atol})")));
        }
        Ok(Self { rtol, atol })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince coefficients
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
// b - b*, the embedded 4th-order error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(y)` from `times[0]` through each later entry of `times`,
/// calling `observe(index, t, y)` at every output time (including the first).
/// `f(y, dy)` must overwrite `dy`.
pub fn integrate<T, F, O>(y0: &[T], times: &[f64], tol: Tolerance, mut f: F, mut observe: O) -> Result<OdeStats>
where
    T: OdeScalar,
    F: FnMut(&[T], &mut [T]),
    O: FnMut(usize, f64, &mut [T]) -> Result<()>,
{
    check_grid(times)?;
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();
    observe(0, times[0], &mut y)?;
    if times.len() == 1 {
        return Ok(stats);
    }

    let mut k1 = vec![T::ZERO; n];
    let mut k2 = vec![T::ZERO; n];
    let mut k3 = vec![T::ZERO; n];
    let mut k4 = vec![T::ZERO; n];
    let mut k5 = vec![T::ZERO; n];
    let mut k6 = vec![T::ZERO; n];
    let mut k7 = vec![T::ZERO; n];
    let mut stage = vec![T::ZERO; n];
    let mut y_new = vec![T::ZERO; n];

    f(&y, &mut k1);
    stats.evaluations += 1;

    let mut t = times[0];
    let mut h = initial_step(&y, &k1, tol, times[times.len() - 1] - t);
    let mut prev_err: f64 = 1.0;

    for (idx, &t_out) in times.iter().enumerate().skip(1) {
        while t < t_out {
            let mut step = h.min(t_out - t);
            // land exactly on the output time instead of leaving a sliver
            let last = t + step >= t_out || t_out - (t + step) < 1e-12 * t_out.abs().max(1.0);
            if last {
                step = t_out - t;
            }
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::Evolution { t, reason: format!("step size underflow (h = {step:e})") });
            }

            for i in 0..n {
                stage[i] = y[i] + k1[i] * (step * A21);
            }
            f(&stage, &mut k2);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * step;
            }
            f(&stage, &mut k3);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * step;
            }
            f(&stage, &mut k4);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * step;
            }
            f(&stage, &mut k5);
            for i in 0..n {
                stage[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * step;
            }
            f(&stage, &mut k6);
            for i in 0..n {
                y_new[i] = y[i] + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * step;
            }
            f(&y_new, &mut k7);
            stats.evaluations += 6;

            let mut acc = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
                let scale = tol.atol + tol.rtol * y[i].magnitude().max(y_new[i].magnitude());
                let r = e.magnitude() / scale;
                acc += r * r;
            }
            let err = (acc / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Evolution { t, reason: "non-finite error estimate".into() });
            }

            if err <= 1.0 {
                t = if last { t_out } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                stats.accepted += 1;
                // PI controller (Hairer & Wanner, beta = 0.04)
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * prev_err.powf(0.04);
                h = step * fac.clamp(0.2, 5.0);
                prev_err = err.max(1e-4);
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        observe(idx, t, &mut y)?;
        // the observer may have modified y (e.g. projection); refresh the FSAL slope
        f(&y, &mut k1);
        stats.evaluations += 1;
    }
    Ok(stats)
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidParameter("non-finite time in grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn initial_step<T: OdeScalar>(y: &[T], dy: &[T], tol: Tolerance, span: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (a, b) in y.iter().zip(dy) {
        let sc = tol.atol + tol.rtol * a.magnitude();
        d0 += (a.magnitude() / sc).powi(2);
        d1 += (b.magnitude() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-12 * span)
}
