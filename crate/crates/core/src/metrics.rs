// SPDX-License-Identifier: Apache-2.0

//! Scalar summaries of how a site distribution (or the 2D eigenmode profile)
//! is localized.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// Entries above `-NEGATIVE_SLACK` are accepted and treated as zero when negative.
pub const NEGATIVE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalizationMetrics {
    /// Weighted mean of the 1-based site label.
    pub center_of_mass: f64,
    pub inverse_participation_ratio: f64,
    /// Weight fraction in the first `ceil(f L)` sites.
    pub corner_mass_first: f64,
    /// Weight fraction in the last `ceil(f L)` sites.
    pub corner_mass_last: f64,
}

fn clean_weights(w: &[f64]) -> Result<(Vec<f64>, f64)> {
    if w.is_empty() {
        return Err(Error::UndefinedMetric("empty weight vector".into()));
    }
    let mut out = Vec::with_capacity(w.len());
    for &x in w {
        if !(x >= -NEGATIVE_SLACK) {
            return Err(Error::Domain(format!("negative weight {x:e}")));
        }
        out.push(x.max(0.0));
    }
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric("all weights are zero".into()));
    }
    Ok((out, total))
}

fn corner_width(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64).ceil() as usize).clamp(1, len)
}

pub fn center_of_mass(w: &[f64]) -> Result<f64> {
    let (w, total) = clean_weights(w)?;
    Ok(w.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum::<f64>() / total)
}

pub fn inverse_participation_ratio(w: &[f64]) -> Result<f64> {
    let (w, total) = clean_weights(w)?;
    Ok(w.iter().map(|x| x * x).sum::<f64>() / (total * total))
}

/// Weight fractions in the first and last `ceil(fraction * L)` sites.
pub fn corner_mass(w: &[f64], fraction: f64) -> Result<(f64, f64)> {
    let (w, total) = clean_weights(w)?;
    let k = corner_width(w.len(), fraction);
    let first = w[..k].iter().sum::<f64>() / total;
    let last = w[w.len() - k..].iter().sum::<f64>() / total;
    Ok((first, last))
}

pub fn localization_metrics(w: &[f64], fraction: f64) -> Result<LocalizationMetrics> {
    let (first, last) = corner_mass(w, fraction)?;
    Ok(LocalizationMetrics {
        center_of_mass: center_of_mass(w)?,
        inverse_participation_ratio: inverse_participation_ratio(w)?,
        corner_mass_first: first,
        corner_mass_last: last,
    })
}

/// Corner masses of a 2D profile, ordered `(1,1), (1,L), (L,1), (L,L)`: the
/// fraction of total weight in each `k x k` corner block with `k = ceil(f L)`.
pub fn profile_corner_mass(profile: &Array2<f64>, fraction: f64) -> Result<[f64; 4]> {
    let (rows, cols) = profile.dim();
    let (flat, total) = clean_weights(profile.as_slice().ok_or_else(|| Error::Domain("non-contiguous profile".into()))?)?;
    let kr = corner_width(rows, fraction);
    let kc = corner_width(cols, fraction);
    let block = |r0: usize, c0: usize| -> f64 {
        let mut s = 0.0;
        for r in r0..r0 + kr {
            for c in c0..c0 + kc {
                s += flat[r * cols + c];
            }
        }
        s / total
    };
    Ok([block(0, 0), block(0, cols - kc), block(rows - kr, 0), block(rows - kr, cols - kc)])
}
