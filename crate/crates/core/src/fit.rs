// SPDX-License-Identifier: Apache-2.0

//! Scaling fits on transport traces and extreme points of the disorder walk.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::CumulativeWalk;
use crate::transport::TransportTrace;

pub const MIN_FIT_POINTS: usize = 10;
/// Share of the boundary-clean points, counted from the end, used by default.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// OLS standard error of the exponent.
    pub exponent_stderr: f64,
    pub window: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinaiFit {
    /// Least-squares slope of `d2` against `(ln t)^4`.
    pub slope: f64,
    pub intercept: f64,
    /// Goodness of the `(ln t)^4` line.
    pub linear_r_squared: f64,
    /// `d2 ∝ (ln t)^alpha`.
    pub alpha: ScalingFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    NCm,
    /// `|n_cm|`, for drifting traces.
    AbsNCm,
    D2,
}

impl Field {
    pub fn values<'a>(&self, trace: &'a TransportTrace) -> Vec<f64> {
        match self {
            Field::NCm => trace.n_cm.clone(),
            Field::AbsNCm => trace.n_cm.iter().map(|x| x.abs()).collect(),
            Field::D2 => trace.d2.clone(),
        }
    }
}

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    slope_stderr: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_stderr = if x.len() > 2 { (ss_res / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Line { slope, intercept, r_squared, slope_stderr }
}

fn check_window(t: &[f64], y: &[f64]) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::Shape { expected: format!("{}", t.len()), actual: format!("{}", y.len()) });
    }
    if t.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientRange(format!("{} points in window, need {MIN_FIT_POINTS}", t.len())));
    }
    Ok(())
}

/// Straight line through `(ln t, ln y)`.
pub fn fit_power(t: &[f64], y: &[f64]) -> Result<ScalingFit> {
    check_window(t, y)?;
    if let Some((a, b)) = t.iter().zip(y).find(|(a, b)| !(**a > 0.0 && **b > 0.0)) {
        return Err(Error::FitDomain(format!("log-log fit needs positive data (t = {a}, y = {b})")));
    }
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let line = least_squares(&lx, &ly);
    Ok(ScalingFit {
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
        exponent_stderr: line.slope_stderr,
        window: [t[0], t[t.len() - 1]],
        points: t.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope t + intercept`.
pub fn fit_linear(t: &[f64], y: &[f64]) -> Result<LinearFit> {
    check_window(t, y)?;
    let line = least_squares(t, y);
    Ok(LinearFit { slope: line.slope, intercept: line.intercept, r_squared: line.r_squared, slope_stderr: line.slope_stderr, points: t.len() })
}

/// `(ln t)^4` line and the free exponent in `y ∝ (ln t)^alpha`. The window must
/// span at least two decades with `t > 1`.
pub fn fit_sinai(t: &[f64], y: &[f64]) -> Result<SinaiFit> {
    check_window(t, y)?;
    if !(t[0] > 1.0) {
        return Err(Error::FitDomain(format!("ln ln t needs t > 1 (window starts at {})", t[0])));
    }
    let span = (t[t.len() - 1] / t[0]).log10();
    if span < 2.0 - 1e-9 {
        return Err(Error::InsufficientRange(format!("window spans {span:.2} decades, need 2")));
    }
    let l4: Vec<f64> = t.iter().map(|v| v.ln().powi(4)).collect();
    let line = least_squares(&l4, y);
    let lnln: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let alpha = fit_power(&lnln, y).map(|mut f| {
        f.window = [t[0], t[t.len() - 1]];
        f
    })?;
    Ok(SinaiFit { slope: line.slope, intercept: line.intercept, linear_r_squared: line.r_squared, alpha })
}

/// Index range of the last `DEFAULT_WINDOW_FRACTION` of the boundary-clean
/// points with `t > 0`.
pub fn default_window(trace: &TransportTrace) -> std::ops::Range<usize> {
    let clean = trace.clean_len();
    let first = trace.times[..clean].iter().position(|&t| t > 0.0).unwrap_or(clean);
    let usable = clean - first;
    let take = (DEFAULT_WINDOW_FRACTION * usable as f64).round() as usize;
    clean - take..clean
}

/// Indices with `lo <= t <= hi`, cut at the boundary-clean length.
pub fn time_window(trace: &TransportTrace, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let clean = trace.clean_len();
    let start = trace.times[..clean].iter().position(|&t| t >= lo).unwrap_or(clean);
    let end = trace.times[..clean].iter().rposition(|&t| t <= hi).map_or(start, |i| i + 1);
    start..end.max(start)
}

/// Power-law fit of one observable; `window` defaults to `default_window`.
pub fn fit_trace(trace: &TransportTrace, field: Field, window: Option<std::ops::Range<usize>>) -> Result<ScalingFit> {
    let w = window.unwrap_or_else(|| default_window(trace));
    if w.end > trace.clean_len() {
        return Err(Error::InsufficientRange("window extends past the boundary-clean region".into()));
    }
    let y = field.values(trace);
    fit_power(&trace.times[w.clone()], &y[w])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkExtremes {
    /// 1-based sites attaining the minimum, ascending.
    pub argmin: Vec<usize>,
    pub argmax: Vec<usize>,
    pub min: f64,
    pub max: f64,
}

/// Global minimizers and maximizers of `X_n`. Values within a relative
/// `1e-12` count as ties.
pub fn walk_extremes(walk: &CumulativeWalk) -> WalkExtremes {
    let x = walk.values();
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    WalkExtremes {
        argmin: (0..x.len()).filter(|&i| tie(x[i], min)).map(|i| i + 1).collect(),
        argmax: (0..x.len()).filter(|&i| tie(x[i], max)).map(|i| i + 1).collect(),
        min,
        max,
    }
}
