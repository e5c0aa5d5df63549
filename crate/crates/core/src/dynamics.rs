// SPDX-License-Identifier: Apache-2.0

//! Time evolution of the single-particle density matrix and the transport
//! observables read off its diagonal.

use ndarray::Array1;
use ndarray_linalg::{Eig, Solve};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::liouvillian::{DensityMatrix, LiouvillianRhs, Superoperator, C64};
use crate::ode::{self, Tolerance};
use crate::transport::TransportTrace;

/// Largest `L` propagated through the superoperator eigenbasis.
pub const SPECTRAL_SITE_LIMIT: usize = 40;
/// Maximum tolerated `|tr rho - 1|` over a run.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantumMethod {
    Spectral,
    Stepping,
}

#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub trace: TransportTrace,
    pub method: QuantumMethod,
    /// Largest `|tr rho - 1|` seen at an output time.
    pub trace_drift: f64,
    /// Largest `max |rho - rho^dagger|` before symmetrization.
    pub hermiticity_defect: f64,
    pub final_state: DensityMatrix,
}

/// `|n0><n0|`.
pub fn initial_state(sites: usize, n0: usize) -> Result<DensityMatrix> {
    DensityMatrix::localized(sites, n0)
}

/// Evolve `rho0` through `times`, which must start at 0. The initial site for
/// the transport moments is the argmax of the initial populations.
pub fn evolve(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], tol: Tolerance) -> Result<QuantumRun> {
    evolve_inner(model, rho0, times, tol, false)
}

/// `evolve`, keeping a population snapshot at every output time.
pub fn evolve_recording(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], tol: Tolerance) -> Result<QuantumRun> {
    evolve_inner(model, rho0, times, tol, true)
}

fn evolve_inner(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], tol: Tolerance, record: bool) -> Result<QuantumRun> {
    ode::check_grid(times)?;
    if times[0] != 0.0 {
        return Err(Error::InvalidParameter(format!("time grid must start at 0 (got {})", times[0])));
    }
    let l = model.sites();
    if rho0.sites() != l {
        return Err(Error::Shape { expected: format!("{l}x{l}"), actual: format!("{0}x{0}", rho0.sites()) });
    }
    let n0 = start_site(rho0);
    if l <= SPECTRAL_SITE_LIMIT {
        if let Some(run) = evolve_spectral(model, rho0, times, n0, record)? {
            return Ok(run);
        }
    }
    evolve_stepping(model, rho0, times, tol, n0, record)
}

fn start_site(rho: &DensityMatrix) -> usize {
    let p = rho.populations();
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best + 1
}

/// Bookkeeping shared by both integrators at each output time.
struct Recorder {
    sites: usize,
    trace: TransportTrace,
    drift: f64,
    defect: f64,
}

impl Recorder {
    fn new(sites: usize, n0: usize, record: bool) -> Self {
        Self { sites, trace: TransportTrace::new(n0, record), drift: 0.0, defect: 0.0 }
    }

    /// Symmetrize `y` in place and record observables.
    fn observe(&mut self, t: f64, y: &mut [C64]) -> Result<()> {
        let l = self.sites;
        let mut tr = C64::new(0.0, 0.0);
        for n in 0..l {
            tr += y[n * l + n];
            for m in n + 1..l {
                let a = y[n * l + m];
                let b = y[m * l + n];
                self.defect = self.defect.max((a - b.conj()).norm());
                let avg = 0.5 * (a + b.conj());
                y[n * l + m] = avg;
                y[m * l + n] = avg.conj();
            }
            let d = y[n * l + n];
            self.defect = self.defect.max(2.0 * d.im.abs());
            y[n * l + n] = C64::new(d.re, 0.0);
        }
        if !tr.re.is_finite() {
            return Err(Error::Evolution { t, reason: "non-finite density matrix".into() });
        }
        self.drift = self.drift.max((tr - 1.0).norm());
        let pops: Vec<f64> = (0..l).map(|n| y[n * l + n].re).collect();
        self.trace.record(t, &pops);
        Ok(())
    }
}

/// `rho(t) = sum_k r_k e^{lambda_k t} c_k` with `V c = vec(rho0)`. Returns
/// `None` when the eigenbasis is too ill-conditioned to meet `TRACE_TOL`.
fn evolve_spectral(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], n0: usize, record: bool) -> Result<Option<QuantumRun>> {
    let l = model.sites();
    let d = l * l;
    let sop = Superoperator::assemble(model)?;
    let (lambda, v) = sop.matrix().eig().map_err(|e| Error::Eigen(e.to_string()))?;
    let b = Array1::from(rho0.to_vec());
    let c = v.solve(&b).map_err(|e| Error::Solve(e.to_string()))?;
    let back = v.dot(&c);
    let residual = back.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    if !(residual < 1e-10) {
        return Ok(None);
    }

    let mut rec = Recorder::new(l, n0, record);
    let mut y = vec![C64::new(0.0, 0.0); d];
    let mut weights = Array1::<C64>::zeros(d);
    for &t in times {
        if t == 0.0 {
            y.copy_from_slice(&rho0.to_vec());
        } else {
            for k in 0..d {
                weights[k] = (lambda[k] * t).exp() * c[k];
            }
            let out = v.dot(&weights);
            y.copy_from_slice(out.as_slice().expect("contiguous"));
        }
        rec.observe(t, &mut y)?;
        if rec.drift > TRACE_TOL {
            return Ok(None);
        }
    }
    let final_state = DensityMatrix::from_vec(l, &y)?;
    Ok(Some(QuantumRun { trace: rec.trace, method: QuantumMethod::Spectral, trace_drift: rec.drift, hermiticity_defect: rec.defect, final_state }))
}

fn evolve_stepping(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], tol: Tolerance, n0: usize, record: bool) -> Result<QuantumRun> {
    let l = model.sites();
    let rhs = LiouvillianRhs::new(model);
    let mut rec = Recorder::new(l, n0, record);
    let mut last = rho0.to_vec();
    ode::integrate(
        &rho0.to_vec(),
        times,
        tol,
        |y, dy| rhs.apply(y, dy),
        |_, t, y| {
            rec.observe(t, y)?;
            if rec.drift > TRACE_TOL {
                return Err(Error::Evolution { t, reason: format!("trace drift {:e}", rec.drift) });
            }
            last.copy_from_slice(y);
            Ok(())
        },
    )?;
    Ok(QuantumRun {
        trace: rec.trace,
        method: QuantumMethod::Stepping,
        trace_drift: rec.drift,
        hermiticity_defect: rec.defect,
        final_state: DensityMatrix::from_vec(l, &last)?,
    })
}

/// Force the explicit integrator regardless of `L`.
pub fn evolve_stepping_only(model: &LatticeModel, rho0: &DensityMatrix, times: &[f64], tol: Tolerance) -> Result<QuantumRun> {
    ode::check_grid(times)?;
    evolve_stepping(model, rho0, times, tol, start_site(rho0), false)
}
