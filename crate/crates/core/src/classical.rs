// SPDX-License-Identifier: Apache-2.0

//! Purely dissipative limit (`J = 0`): the population master equation
//! `dP/dt = G P`, its detailed-balance steady state, the diagonal similarity
//! to a symmetric matrix, and propagation.
//!
//! Propagation goes through one eigen-decomposition of the symmetric form
//! `W = U^{-1} G U`, `U = diag(e^{-X_n})`. Mapping back through `U` multiplies
//! rounding errors by `e^{X_start - X_n}`, which is astronomically large
//! when the disorder walk has deep valleys. Every spectral evaluation carries
//! a rounding bound; when it exceeds the accuracy budget the run switches to
//! L-stable TR-BDF2 stepping on `G` itself, which needs only tridiagonal
//! solves and conserves probability exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{AsymmetrySequence, CumulativeWalk, HoppingRates, LatticeModel};
use crate::transport::TransportTrace;
use crate::tridiag::{symmetric_tridiagonal_eigen, TridiagonalEigen};

/// Populations below this are roundoff and get clamped; anything lower is
/// reported as a failure of the propagator.
pub const CLAMP_THRESHOLD: f64 = -1e-12;
/// Largest tolerated rounding bound, summed over sites, in the spectral path.
pub const SPECTRAL_ACCURACY: f64 = 1e-10;
/// Maximum tolerated `|sum P - 1|`.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Largest `|W_{n,n+1} - W_{n+1,n}|` accepted when symmetrizing.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Tridiagonal Markov generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    /// `G_{n,n} = -(J_n^R + J_{n-1}^L)`.
    pub diag: Vec<f64>,
    /// `G_{b+1,b} = J_b^R`.
    pub lower: Vec<f64>,
    /// `G_{b,b+1} = J_b^L`.
    pub upper: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn from_rates(rates: &HoppingRates) -> Self {
        let diag = rates.escape_rates().into_iter().map(|g| -g).collect();
        Self { diag, lower: rates.right.clone(), upper: rates.left.clone() }
    }

    pub fn new(model: &LatticeModel) -> Self {
        Self::from_rates(&model.rates())
    }

    pub fn sites(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.lower[col]
        } else if col == row + 1 {
            self.upper[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let l = self.sites();
        ndarray::Array2::from_shape_fn((l, l), |(r, c)| self.get(r, c))
    }

    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        let l = self.sites();
        for n in 0..l {
            let mut v = self.diag[n] * p[n];
            if n > 0 {
                v += self.lower[n - 1] * p[n - 1];
            }
            if n + 1 < l {
                v += self.upper[n] * p[n + 1];
            }
            out[n] = v;
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let l = self.sites();
        (0..l)
            .map(|c| {
                let mut s = self.diag[c];
                if c + 1 < l {
                    s += self.lower[c];
                }
                if c > 0 {
                    s += self.upper[c - 1];
                }
                s
            })
            .collect()
    }

    /// Solve `(I - c G) x = rhs` with the Thomas algorithm. `I - c G` is
    /// column diagonally dominant for `c >= 0`, so no pivoting is needed.
    fn solve_shifted(&self, c: f64, rhs: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let l = self.sites();
        let sub = |n: usize| -c * self.lower[n - 1];
        let sup = |n: usize| -c * self.upper[n];
        let mut denom = 1.0 - c * self.diag[0];
        out[0] = rhs[0] / denom;
        for n in 1..l {
            scratch[n - 1] = sup(n - 1) / denom;
            denom = (1.0 - c * self.diag[n]) - sub(n) * scratch[n - 1];
            out[n] = (rhs[n] - sub(n) * out[n - 1]) / denom;
        }
        for n in (0..l - 1).rev() {
            out[n] -= scratch[n] * out[n + 1];
        }
    }
}

/// Site populations of the classical chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationVector(pub Vec<f64>);

impl PopulationVector {
    pub fn localized(sites: usize, site: usize) -> Result<Self> {
        if site == 0 || site > sites {
            return Err(Error::InvalidParameter(format!("site {site} outside 1..={sites}")));
        }
        let mut p = vec![0.0; sites];
        p[site - 1] = 1.0;
        Ok(Self(p))
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("populations sum to {total}")));
        }
        if let Some(x) = self.0.iter().find(|&&x| x < CLAMP_THRESHOLD) {
            return Err(Error::Domain(format!("negative population {x:e}")));
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Detailed-balance steady state `P_n ∝ e^{-2 X_n}`, evaluated with the
/// largest exponent subtracted.
pub fn steady_state_closed_form(walk: &CumulativeWalk) -> PopulationVector {
    let logw: Vec<f64> = walk.values().iter().map(|x| -2.0 * x).collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = w.iter().sum();
    PopulationVector(w.into_iter().map(|v| v / z).collect())
}

pub fn steady_state_for(seq: &AsymmetrySequence) -> PopulationVector {
    steady_state_closed_form(&seq.walk())
}

/// `W = U^{-1} G U` with `U = diag(e^{-X_n})`.
#[derive(Debug, Clone)]
pub struct SymmetrizedGenerator {
    pub diag: Vec<f64>,
    /// `W_{n,n+1}`, computed from the upper diagonal of `G`.
    pub upper: Vec<f64>,
    /// `W_{n+1,n}`, computed from the lower diagonal of `G`.
    pub lower: Vec<f64>,
    /// `X_n`, the log of the inverse gauge factors.
    pub log_gauge: Vec<f64>,
    generator: GeneratorMatrix,
}

impl SymmetrizedGenerator {
    /// Largest `|W_{n,n+1} - W_{n+1,n}|`.
    pub fn asymmetry(&self) -> f64 {
        self.upper.iter().zip(&self.lower).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn generator(&self) -> &GeneratorMatrix {
        &self.generator
    }

    pub fn sites(&self) -> usize {
        self.diag.len()
    }

    pub fn eigen(&self) -> Result<TridiagonalEigen> {
        let off: Vec<f64> = self.upper.iter().zip(&self.lower).map(|(a, b)| 0.5 * (a + b)).collect();
        symmetric_tridiagonal_eigen(&self.diag, &off)
    }
}

pub fn symmetrize(generator: &GeneratorMatrix, walk: &CumulativeWalk) -> Result<SymmetrizedGenerator> {
    let l = generator.sites();
    if walk.len() != l {
        return Err(Error::Construction(format!("walk has {} sites, generator {l}", walk.len())));
    }
    let x = walk.values();
    // W_{r,c} = e^{X_r} G_{r,c} e^{-X_c}
    let upper: Vec<f64> = (0..l - 1).map(|b| (x[b] - x[b + 1]).exp() * generator.upper[b]).collect();
    let lower: Vec<f64> = (0..l - 1).map(|b| (x[b + 1] - x[b]).exp() * generator.lower[b]).collect();
    let sym = SymmetrizedGenerator { diag: generator.diag.clone(), upper, lower, log_gauge: x.to_vec(), generator: generator.clone() };
    let asym = sym.asymmetry();
    if !(asym <= SYMMETRY_TOL) {
        return Err(Error::Construction(format!("similarity transform is not symmetric (defect {asym:e}); generator and walk disagree")));
    }
    Ok(sym)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationMethod {
    Spectral,
    Stepping,
}

/// A propagated classical trajectory.
#[derive(Debug, Clone)]
pub struct ClassicalRun {
    pub trace: TransportTrace,
    pub method: PropagationMethod,
    /// Entries below `CLAMP_THRESHOLD` set to zero (with renormalization).
    pub clamp_count: usize,
    /// Largest `|sum P - 1|` before renormalization.
    pub normalization_drift: f64,
    /// Largest rounding bound seen in the spectral path (0 when stepping).
    pub spectral_error_bound: f64,
    pub final_populations: Vec<f64>,
}

/// Spectral propagator for one realization.
#[derive(Debug, Clone)]
pub struct ClassicalPropagator {
    symgen: SymmetrizedGenerator,
    eigen: TridiagonalEigen,
}

impl ClassicalPropagator {
    pub fn new(symgen: SymmetrizedGenerator) -> Result<Self> {
        let eigen = symgen.eigen()?;
        Ok(Self { symgen, eigen })
    }

    pub fn for_model(model: &LatticeModel) -> Result<Self> {
        Self::new(symmetrize(&GeneratorMatrix::new(model), &model.walk())?)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn symmetrized(&self) -> &SymmetrizedGenerator {
        &self.symgen
    }

    /// Propagate `p0` through `times` (starting at `times[0]`, which the
    /// caller normally sets to 0). Observables are measured around `n0`.
    pub fn propagate(&self, p0: &PopulationVector, times: &[f64], n0: usize, record_populations: bool) -> Result<ClassicalRun> {
        crate::ode::check_grid(times)?;
        let l = self.symgen.sites();
        if p0.0.len() != l {
            return Err(Error::Shape { expected: format!("{l}"), actual: format!("{}", p0.0.len()) });
        }
        p0.validate()?;
        match self.propagate_spectral(p0, times, n0, record_populations)? {
            Some(run) => Ok(run),
            None => propagate_stepping(&self.symgen.generator, p0, times, n0, record_populations),
        }
    }

    /// Returns `None` when the rounding bound exceeds `SPECTRAL_ACCURACY`.
    fn propagate_spectral(&self, p0: &PopulationVector, times: &[f64], n0: usize, record: bool) -> Result<Option<ClassicalRun>> {
        let l = self.symgen.sites();
        let x = &self.symgen.log_gauge;
        let v = &self.eigen.vectors;
        let lambda = &self.eigen.values;
        let t0 = times[0];

        // c_k = sum_m V_mk e^{X_m - s} P0_m, with s the largest X on the support
        let shift = p0.0.iter().zip(x).filter(|(p, _)| **p != 0.0).map(|(_, x)| *x).fold(f64::NEG_INFINITY, f64::max);
        let mut coef = vec![0.0; l];
        let mut coef_abs = vec![0.0; l];
        for (m, &pm) in p0.0.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            let g = (x[m] - shift).exp() * pm;
            for k in 0..l {
                coef[k] += v[[m, k]] * g;
                coef_abs[k] += v[[m, k]].abs() * g;
            }
        }
        let out_gauge: Vec<f64> = x.iter().map(|xn| (shift - xn).exp()).collect();
        let roundoff = f64::EPSILON * (2 * l + 8) as f64;

        let mut trace = TransportTrace::new(n0, record);
        let mut clamp_count = 0;
        let mut drift: f64 = 0.0;
        let mut worst_bound: f64 = 0.0;
        let mut p = vec![0.0; l];
        let mut decay = vec![0.0; l];
        let mut last = p0.0.clone();
        for &t in times {
            for k in 0..l {
                decay[k] = (lambda[k] * (t - t0)).exp();
            }
            let mut bound = 0.0;
            for n in 0..l {
                let mut s = 0.0;
                let mut s_abs = 0.0;
                for k in 0..l {
                    let vk = v[[n, k]] * decay[k];
                    s += vk * coef[k];
                    s_abs += vk.abs() * coef_abs[k];
                }
                p[n] = out_gauge[n] * s;
                bound += roundoff * out_gauge[n] * s_abs;
            }
            worst_bound = worst_bound.max(bound);
            if !(worst_bound <= SPECTRAL_ACCURACY) {
                return Ok(None);
            }
            if t == t0 {
                p.copy_from_slice(&p0.0);
            }
            let Ok((c, d)) = clamp_and_normalize(&mut p) else {
                return Ok(None);
            };
            clamp_count += c;
            drift = drift.max(d);
            trace.record(t, &p);
            last.copy_from_slice(&p);
        }
        Ok(Some(ClassicalRun {
            trace,
            method: PropagationMethod::Spectral,
            clamp_count,
            normalization_drift: drift,
            spectral_error_bound: worst_bound,
            final_populations: last,
        }))
    }
}

fn clamp_and_normalize(p: &mut [f64]) -> Result<(usize, f64)> {
    let mut clamps = 0;
    for x in p.iter_mut() {
        if *x < 0.0 {
            if *x < CLAMP_THRESHOLD {
                clamps += 1;
            }
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    let drift = (total - 1.0).abs();
    if !(drift <= NORMALIZATION_TOL) {
        return Err(Error::Evolution { t: f64::NAN, reason: format!("normalization drift {drift:e}") });
    }
    for x in p.iter_mut() {
        *x /= total;
    }
    Ok((clamps, drift))
}

const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

/// Relative and absolute tolerances of the stepping fallback.
const STEP_RTOL: f64 = 1e-9;
const STEP_ATOL: f64 = 1e-13;

struct TrBdf2<'a> {
    g: &'a GeneratorMatrix,
    gy: Vec<f64>,
    rhs: Vec<f64>,
    stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> TrBdf2<'a> {
    fn new(g: &'a GeneratorMatrix) -> Self {
        let l = g.sites();
        Self { g, gy: vec![0.0; l], rhs: vec![0.0; l], stage: vec![0.0; l], scratch: vec![0.0; l] }
    }

    /// One TR-BDF2 step of size `h` from `y` into `out`.
    fn step(&mut self, y: &[f64], h: f64, out: &mut [f64]) {
        let gamma = TRBDF2_GAMMA;
        let d = 0.5 * gamma;
        let a = 1.0 / (gamma * (2.0 - gamma));
        let b = (1.0 - gamma).powi(2) / (gamma * (2.0 - gamma));
        self.g.apply(y, &mut self.gy);
        for i in 0..y.len() {
            self.rhs[i] = y[i] + d * h * self.gy[i];
        }
        self.g.solve_shifted(d * h, &self.rhs, &mut self.scratch, &mut self.stage);
        for i in 0..y.len() {
            self.rhs[i] = a * self.stage[i] - b * y[i];
        }
        self.g.solve_shifted(d * h, &self.rhs, &mut self.scratch, out);
    }
}

/// TR-BDF2 with step-doubling error control.
pub fn propagate_stepping(g: &GeneratorMatrix, p0: &PopulationVector, times: &[f64], n0: usize, record: bool) -> Result<ClassicalRun> {
    crate::ode::check_grid(times)?;
    let l = g.sites();
    let mut stepper = TrBdf2::new(g);
    let mut y = p0.0.clone();
    let mut full = vec![0.0; l];
    let mut half = vec![0.0; l];
    let mut two_half = vec![0.0; l];
    let rate_scale = g.diag.iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-300);
    let mut h = 1e-3 / rate_scale;
    let mut t = times[0];

    let mut trace = TransportTrace::new(n0, record);
    let mut clamp_count = 0;
    let mut drift: f64 = 0.0;
    trace.record(t, &y);

    for &t_out in &times[1..] {
        while t < t_out {
            let last = t + h >= t_out * (1.0 - 1e-14);
            let step = if last { t_out - t } else { h };
            stepper.step(&y, step, &mut full);
            stepper.step(&y, 0.5 * step, &mut half);
            stepper.step(&half, 0.5 * step, &mut two_half);
            let mut err: f64 = 0.0;
            for i in 0..l {
                let sc = STEP_ATOL + STEP_RTOL * two_half[i].abs().max(y[i].abs());
                err = err.max((two_half[i] - full[i]).abs() / (3.0 * sc));
            }
            if !err.is_finite() {
                return Err(Error::Evolution { t, reason: "non-finite step error".into() });
            }
            if err <= 1.0 {
                t = if last { t_out } else { t + step };
                std::mem::swap(&mut y, &mut two_half);
                h = step * (0.9 * err.max(1e-6).powf(-1.0 / 3.0)).min(4.0);
            } else {
                h = step * (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Evolution { t, reason: "step size underflow".into() });
                }
            }
        }
        let (c, d) = clamp_and_normalize(&mut y).map_err(|e| match e {
            Error::Evolution { reason, .. } => Error::Evolution { t, reason },
            other => other,
        })?;
        clamp_count += c;
        drift = drift.max(d);
        trace.record(t, &y);
    }
    Ok(ClassicalRun { trace, method: PropagationMethod::Stepping, clamp_count, normalization_drift: drift, spectral_error_bound: 0.0, final_populations: y })
}
