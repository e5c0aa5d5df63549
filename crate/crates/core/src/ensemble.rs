// SPDX-License-Identifier: Apache-2.0

//! Disorder averages. Realizations may run in parallel, but every reduction
//! walks them in realization-index order so means are bit-reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{ClassicalPropagator, PopulationVector, PropagationMethod};
use crate::dynamics::{evolve, initial_state};
use crate::error::{Error, Result};
use crate::lattice::{Disorder, LatticeModel, ModelConfig};
use crate::ode::Tolerance;
use crate::transport::{center_site, TimeGrid, TransportTrace};

/// How boundary-contaminated realizations enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationPolicy {
    /// Keep every realization; the clean window ends where the first one
    /// touches an edge.
    #[default]
    Truncate,
    /// Drop contaminated realizations entirely. Fewer than half surviving is
    /// an error.
    Exclude,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EnsembleOptions {
    pub policy: ContaminationPolicy,
    /// Drop realizations whose propagation fails instead of aborting.
    pub skip_failures: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleTrace {
    pub times: Vec<f64>,
    pub n_cm: Vec<f64>,
    pub d2: Vec<f64>,
    pub stderr_n_cm: Vec<f64>,
    pub stderr_d2: Vec<f64>,
    /// Mean of `sum (n - n0)^2 w_n = d2 + n_cm^2`, the spread about the start.
    pub msd: Vec<f64>,
    pub seed: u64,
    /// Realization indices that entered the mean, ascending.
    pub included: Vec<u64>,
    /// Realizations dropped for boundary contamination.
    pub contaminated: Vec<u64>,
    /// Realizations dropped after a propagation failure, with the reason.
    pub failed: Vec<(u64, String)>,
    /// Leading points free of boundary contamination in every included run.
    pub clean_len: usize,
}

impl EnsembleTrace {
    pub fn realizations(&self) -> usize {
        self.included.len()
    }

    /// View of the mean as a single trace (no population snapshots).
    pub fn mean_trace(&self, n0: usize) -> TransportTrace {
        TransportTrace {
            times: self.times.clone(),
            n_cm: self.n_cm.clone(),
            d2: self.d2.clone(),
            populations: None,
            n0,
            first_contaminated: (self.clean_len < self.times.len()).then_some(self.clean_len),
        }
    }
}

/// Run `run(realization)` for `0..realizations` and average the traces.
pub fn run_ensemble<F>(seed: u64, realizations: usize, options: EnsembleOptions, run: F) -> Result<EnsembleTrace>
where
    F: Fn(u64) -> Result<TransportTrace> + Sync,
{
    if realizations == 0 {
        return Err(Error::InvalidParameter("at least one realization is required".into()));
    }
    let results: Vec<Result<TransportTrace>> = (0..realizations as u64).into_par_iter().map(&run).collect();
    let mut traces = Vec::with_capacity(realizations);
    let mut failed = vec![];
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(t) => traces.push((r as u64, t)),
            Err(e) if options.skip_failures => failed.push((r as u64, e.to_string())),
            Err(e) => return Err(Error::ExperimentInvalid(format!("seed {seed}, realization {r}: {e}"))),
        }
    }
    aggregate(seed, traces, failed, options.policy)
}

/// Average traces given in realization order.
pub fn aggregate(seed: u64, traces: Vec<(u64, TransportTrace)>, failed: Vec<(u64, String)>, policy: ContaminationPolicy) -> Result<EnsembleTrace> {
    let attempted = traces.len() + failed.len();
    let Some((_, first)) = traces.first() else {
        return Err(Error::ExperimentInvalid("every realization failed".into()));
    };
    let times = first.times.clone();
    if traces.iter().any(|(_, t)| t.times != times) {
        return Err(Error::Shape { expected: "identical time grids".into(), actual: "mismatched grids".into() });
    }
    let mut contaminated = vec![];
    let kept: Vec<&TransportTrace> = match policy {
        ContaminationPolicy::Truncate => traces.iter().map(|(_, t)| t).collect(),
        ContaminationPolicy::Exclude => {
            let mut kept = vec![];
            for (r, t) in &traces {
                if t.is_contaminated() {
                    contaminated.push(*r);
                } else {
                    kept.push(t);
                }
            }
            if 2 * kept.len() < attempted {
                return Err(Error::ExperimentInvalid(format!("only {} of {attempted} realizations stayed clear of the boundaries", kept.len())));
            }
            kept
        }
    };
    let included: Vec<u64> = traces.iter().map(|(r, _)| *r).filter(|r| !contaminated.contains(r)).collect();
    let (n_cm, stderr_n_cm) = mean_stderr(&kept, |t| &t.n_cm);
    let (d2, stderr_d2) = mean_stderr(&kept, |t| &t.d2);
    let clean_len = kept.iter().map(|t| t.clean_len()).min().unwrap_or(0);
    let mut msd = vec![0.0; times.len()];
    for t in &kept {
        for (k, m) in msd.iter_mut().enumerate() {
            *m += t.d2[k] + t.n_cm[k] * t.n_cm[k];
        }
    }
    msd.iter_mut().for_each(|m| *m /= kept.len() as f64);
    Ok(EnsembleTrace { times, n_cm, d2, stderr_n_cm, stderr_d2, msd, seed, included, contaminated, failed, clean_len })
}

fn mean_stderr<'a>(traces: &[&'a TransportTrace], field: impl Fn(&'a TransportTrace) -> &'a Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let r = traces.len();
    let len = traces.first().map(|t| field(t).len()).unwrap_or(0);
    let mut mean = vec![0.0; len];
    for t in traces {
        for (m, x) in mean.iter_mut().zip(field(t)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r as f64);
    let mut var = vec![0.0; len];
    for t in traces {
        for ((v, x), m) in var.iter_mut().zip(field(t)).zip(&mean) {
            *v += (x - m).powi(2);
        }
    }
    let stderr = if r < 2 { vec![0.0; len] } else { var.iter().map(|v| (v / (r - 1) as f64 / r as f64).sqrt()).collect() };
    (mean, stderr)
}

/// Quantum ensemble from the middle site.
pub fn ensemble_evolve(config: &ModelConfig, times: &[f64], tol: Tolerance, realizations: usize, options: EnsembleOptions) -> Result<EnsembleTrace> {
    let n0 = center_site(config.sites);
    run_ensemble(config.seed, realizations, options, |r| {
        let model = config.build(r)?;
        Ok(evolve(&model, &initial_state(config.sites, n0)?, times, tol)?.trace)
    })
}

/// Classical ensemble from the middle site.
pub fn classical_ensemble(config: &ModelConfig, times: &[f64], realizations: usize, options: EnsembleOptions) -> Result<EnsembleTrace> {
    let n0 = center_site(config.sites);
    run_ensemble(config.seed, realizations, options, |r| {
        let model = config.build(r)?;
        Ok(ClassicalPropagator::for_model(&model)?.propagate(&PopulationVector::localized(config.sites, n0)?, times, n0, false)?.trace)
    })
}

/// Parameters of the globally reciprocal classical ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinaiConfig {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "Q")]
    pub rate: f64,
    pub h: f64,
    pub realizations: usize,
    pub seed: u64,
    pub grid: TimeGrid,
}

impl Default for SinaiConfig {
    fn default() -> Self {
        Self { sites: 401, rate: 1.0, h: 1.0, realizations: 200, seed: 0, grid: TimeGrid::Logarithmic { t_min: 1.0, t_max: 1e6, per_decade: 20 } }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SinaiOutcome {
    pub ensemble: EnsembleTrace,
    pub clamp_count: usize,
    /// Realizations that needed the stepping fallback.
    pub stepped: usize,
}

/// Classical `p = 1/2` ensemble with contaminated realizations excluded.
pub fn sinai_experiment(config: &SinaiConfig) -> Result<SinaiOutcome> {
    let times = config.grid.times()?;
    let n0 = center_site(config.sites);
    let disorder = Disorder::Bernoulli { h: config.h, p: 0.5 };
    let runs: Vec<Result<_>> = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| {
            let model = LatticeModel::new(0.0, config.rate, crate::lattice::AsymmetrySequence::generate(config.sites, disorder, config.seed, r)?)?;
            ClassicalPropagator::for_model(&model)?.propagate(&PopulationVector::localized(config.sites, n0)?, &times, n0, false)
        })
        .collect();
    let mut traces = vec![];
    let (mut clamp_count, mut stepped) = (0, 0);
    for (r, run) in runs.into_iter().enumerate() {
        let run = run.map_err(|e| Error::ExperimentInvalid(format!("seed {}, realization {r}: {e}", config.seed)))?;
        clamp_count += run.clamp_count;
        stepped += usize::from(run.method == PropagationMethod::Stepping);
        traces.push((r as u64, run.trace));
    }
    let ensemble = aggregate(config.seed, traces, vec![], ContaminationPolicy::Exclude)?;
    Ok(SinaiOutcome { ensemble, clamp_count, stepped })
}
