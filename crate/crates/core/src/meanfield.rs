// SPDX-License-Identifier: Apache-2.0

//! Mean-field occupation dynamics with density-dependent hopping:
//!
//! `dn_l/dt = Ĵ^L_l n_{l+1} + Ĵ^R_{l-1} n_{l-1} - (J^R_l + J^L_{l-1}) n_l`,
//! `Ĵ^L_l = J^L_l + (J^L_l - J^R_l) n_l`, `Ĵ^R_l = J^R_l + (J^R_l - J^L_l) n_{l+1}`.
//!
//! Evaluated bond by bond: the net flux from `l+1` into `l` is
//! `J^L n_{l+1} - J^R n_l + (J^L - J^R) n_l n_{l+1}`, which makes
//! conservation of `sum n_l` exact up to roundoff.

use serde::Serialize;

use crate::classical::{ClassicalPropagator, PopulationVector};
use crate::error::{Error, Result};
use crate::lattice::{HoppingRates, LatticeModel};
use crate::ode::{self, Tolerance};

/// Occupations below this count as a positivity failure.
pub const POSITIVITY_SLACK: f64 = 1e-10;
/// Maximum relative drift of the total occupation.
pub const CONSERVATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationVector(pub Vec<f64>);

impl OccupationVector {
    /// `n_total` times a normalized profile.
    pub fn scaled(profile: &PopulationVector, n_total: f64) -> Result<Self> {
        if !(n_total > 0.0) {
            return Err(Error::InvalidParameter(format!("total occupation must be positive (got {n_total})")));
        }
        Ok(Self(profile.0.iter().map(|p| p * n_total).collect()))
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

fn check_occupations(n: &[f64]) -> Result<()> {
    match n.iter().position(|&x| x < -POSITIVITY_SLACK || !x.is_finite()) {
        Some(i) => Err(Error::Domain(format!("occupation n_{} = {:e} is negative", i + 1, n[i]))),
        None => Ok(()),
    }
}

fn apply(rates: &HoppingRates, n: &[f64], dn: &mut [f64]) {
    dn.fill(0.0);
    for b in 0..n.len() - 1 {
        let (jl, jr) = (rates.left[b], rates.right[b]);
        let flux = jl * n[b + 1] - jr * n[b] + (jl - jr) * n[b] * n[b + 1];
        dn[b] += flux;
        dn[b + 1] -= flux;
    }
}

pub fn meanfield_rhs(rates: &HoppingRates, n: &OccupationVector) -> Result<Vec<f64>> {
    if n.0.len() != rates.sites() {
        return Err(Error::Shape { expected: format!("{}", rates.sites()), actual: format!("{}", n.0.len()) });
    }
    check_occupations(&n.0)?;
    let mut dn = vec![0.0; n.0.len()];
    apply(rates, &n.0, &mut dn);
    Ok(dn)
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanFieldRun {
    pub times: Vec<f64>,
    pub occupations: Vec<Vec<f64>>,
    /// Largest `|N(t) - N(0)| / N(0)`.
    pub total_drift: f64,
    pub min_occupation: f64,
}

pub fn meanfield_evolve(model: &LatticeModel, n0: &OccupationVector, times: &[f64], tol: Tolerance) -> Result<MeanFieldRun> {
    let rates = model.rates();
    if n0.0.len() != model.sites() {
        return Err(Error::Shape { expected: format!("{}", model.sites()), actual: format!("{}", n0.0.len()) });
    }
    check_occupations(&n0.0)?;
    let total0 = n0.total();
    let mut run = MeanFieldRun { times: vec![], occupations: vec![], total_drift: 0.0, min_occupation: f64::INFINITY };
    ode::integrate(
        &n0.0,
        times,
        tol,
        |n, dn| apply(&rates, n, dn),
        |_, t, n| {
            let total: f64 = n.iter().sum();
            let drift = if total0 > 0.0 { (total - total0).abs() / total0 } else { total.abs() };
            let min = n.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -POSITIVITY_SLACK {
                return Err(Error::Evolution { t, reason: format!("occupation fell to {min:e}") });
            }
            if drift > CONSERVATION_TOL {
                return Err(Error::Evolution { t, reason: format!("total occupation drifted by {drift:e}") });
            }
            run.total_drift = run.total_drift.max(drift);
            run.min_occupation = run.min_occupation.min(min);
            run.times.push(t);
            run.occupations.push(n.to_vec());
            Ok(())
        },
    )?;
    Ok(run)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiluteComparison {
    pub n_total: f64,
    /// `max_{t, l} |n_l(t) / N - P_l(t)|`.
    pub max_deviation: f64,
    pub total_drift: f64,
}

/// Compare `n(t) / N` started from `N * p0` with the master equation from
/// `p0` on the same grid.
pub fn dilute_comparison(model: &LatticeModel, p0: &PopulationVector, n_total: f64, times: &[f64], rtol: f64) -> Result<DiluteComparison> {
    let start = OccupationVector::scaled(p0, n_total)?;
    let tol = Tolerance::new(rtol, rtol * 1e-3 * n_total)?;
    let mf = meanfield_evolve(model, &start, times, tol)?;
    let n0 = p0.0.iter().enumerate().fold(0, |best, (i, &p)| if p > p0.0[best] { i } else { best }) + 1;
    let cl = ClassicalPropagator::for_model(model)?.propagate(p0, times, n0, true)?;
    let pops = cl.trace.populations.expect("recorded");
    let mut worst: f64 = 0.0;
    for (n, p) in mf.occupations.iter().zip(&pops) {
        for (a, b) in n.iter().zip(p) {
            worst = worst.max((a / n_total - b).abs());
        }
    }
    Ok(DiluteComparison { n_total, max_deviation: worst, total_drift: mf.total_drift })
}
