// SPDX-License-Identifier: Apache-2.0

//! Time grids, transport moments and the boundary guard shared by every
//! propagator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sites from each edge watched by the boundary guard.
pub const EDGE_SITES: usize = 3;
/// Edge population above which a trace is boundary-contaminated.
pub const EDGE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimeGrid {
    /// `points` equally spaced times in `[0, t_max]`.
    Linear { t_max: f64, points: usize },
    /// `t = 0` followed by geometric times from `t_min` to `t_max`.
    Logarithmic { t_min: f64, t_max: f64, per_decade: usize },
}

impl TimeGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        match *self {
            TimeGrid::Linear { t_max, points } => {
                if !(t_max > 0.0) || points < 2 {
                    return Err(Error::InvalidParameter(format!("linear grid needs t_max > 0 and >= 2 points (got {t_max}, {points})")));
                }
                let dt = t_max / (points - 1) as f64;
                Ok((0..points).map(|i| if i + 1 == points { t_max } else { i as f64 * dt }).collect())
            }
            TimeGrid::Logarithmic { t_min, t_max, per_decade } => {
                if !(t_min > 0.0 && t_max > t_min) || per_decade == 0 {
                    return Err(Error::InvalidParameter(format!("log grid needs 0 < t_min < t_max (got {t_min}, {t_max})")));
                }
                let decades = (t_max / t_min).log10();
                let n = (decades * per_decade as f64).round().max(1.0) as usize;
                let mut out = Vec::with_capacity(n + 2);
                out.push(0.0);
                for i in 0..=n {
                    out.push(if i == n { t_max } else { t_min * 10f64.powf(i as f64 / per_decade as f64) });
                }
                Ok(out)
            }
        }
    }
}

/// Displacement moments of a site distribution relative to the 1-based
/// starting site `n0`: `(n_cm, d2)` with `n_cm = sum (n - n0) w_n` and
/// `d2 = sum (n - n0 - n_cm)^2 w_n`, computed on the normalized weights.
pub fn moments(weights: &[f64], n0: usize) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let offset = |i: usize| (i + 1) as f64 - n0 as f64;
    let n_cm = weights.iter().enumerate().map(|(i, w)| offset(i) * w).sum::<f64>() / total;
    let d2 = weights.iter().enumerate().map(|(i, w)| (offset(i) - n_cm).powi(2) * w).sum::<f64>() / total;
    (n_cm, d2)
}

/// Population within `EDGE_SITES` of either end.
pub fn edge_population(weights: &[f64]) -> f64 {
    let l = weights.len();
    let k = EDGE_SITES.min(l);
    let left: f64 = weights[..k].iter().sum();
    let right: f64 = weights[l.saturating_sub(k).max(k)..].iter().sum();
    left + right
}

/// Transport observables of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportTrace {
    pub times: Vec<f64>,
    pub n_cm: Vec<f64>,
    pub d2: Vec<f64>,
    /// Snapshots of the site distribution, one per time, when recorded.
    pub populations: Option<Vec<Vec<f64>>>,
    /// 1-based initial site.
    pub n0: usize,
    /// Index of the first time at which the edge population exceeded
    /// `EDGE_THRESHOLD`.
    pub first_contaminated: Option<usize>,
}

impl TransportTrace {
    pub fn new(n0: usize, record_populations: bool) -> Self {
        Self { times: vec![], n_cm: vec![], d2: vec![], populations: record_populations.then(Vec::new), n0, first_contaminated: None }
    }

    /// Append the observables for `weights` at time `t`.
    pub fn record(&mut self, t: f64, weights: &[f64]) {
        let (n_cm, d2) = moments(weights, self.n0);
        if self.first_contaminated.is_none() && edge_population(weights) > EDGE_THRESHOLD {
            self.first_contaminated = Some(self.times.len());
        }
        self.times.push(t);
        self.n_cm.push(n_cm);
        self.d2.push(d2.max(0.0));
        if let Some(p) = self.populations.as_mut() {
            p.push(weights.to_vec());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of leading points free of boundary contamination.
    pub fn clean_len(&self) -> usize {
        self.first_contaminated.unwrap_or(self.times.len())
    }

    pub fn is_contaminated(&self) -> bool {
        self.first_contaminated.is_some()
    }
}

/// 1-based middle site `(L + 1) / 2` (rounded down for even `L`).
pub fn center_site(sites: usize) -> usize {
    (sites + 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_grid() {
        let g = TimeGrid::Linear { t_max: 2.0, points: 5 }.times().unwrap();
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn log_grid_has_twenty_points_per_decade() {
        let g = TimeGrid::Logarithmic { t_min: 1.0, t_max: 1e3, per_decade: 20 }.times().unwrap();
        assert_eq!(g.len(), 62);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 1.0);
        assert_eq!(*g.last().unwrap(), 1e3);
        assert!((g[21] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn delta_moments_vanish() {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        assert_eq!(moments(&w, 5), (0.0, 0.0));
        let mut tr = TransportTrace::new(5, false);
        tr.record(0.0, &w);
        assert_eq!((tr.n_cm[0], tr.d2[0]), (0.0, 0.0));
        assert!(!tr.is_contaminated());
    }

    #[test]
    fn two_point_moments() {
        let w = [0.5, 0.0, 0.5];
        let (m, d) = moments(&w, 2);
        assert_eq!(m, 0.0);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn guard_trips_on_edge_weight() {
        let mut tr = TransportTrace::new(5, true);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        tr.record(0.0, &w);
        w[4] = 0.998;
        w[8] = 0.002;
        tr.record(1.0, &w);
        assert_eq!(tr.first_contaminated, Some(1));
        assert_eq!(tr.clean_len(), 1);
        assert_eq!(tr.populations.as_ref().unwrap().len(), 2);
    }
}
