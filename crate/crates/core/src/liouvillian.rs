// SPDX-License-Identifier: Apache-2.0

//! Single-particle sector of the Lindblad generator.
//!
//! The density matrix `rho` is an `L x L` complex matrix on the one-particle
//! basis. As a superoperator it acts on `vec(rho)` with the row-major index
//! `i = n * L + m` for element `rho[n][m]` (0-based), i.e. `(n-1) L + (m-1)`
//! in 1-based site labels.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Default ceiling on `L` for dense `L^2 x L^2` storage (4096 x 4096).
pub const DEFAULT_DENSE_LIMIT: usize = 64;

/// Eigenvalues closer than this to zero count as stationary.
pub const ZERO_MODE_TOL: f64 = 1e-9;

/// Vectorization convention, as written in exported file headers.
pub const VEC_CONVENTION: &str = "vec index i = (n-1)*L + (m-1) for rho[n][m], sites 1..L";

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Array2<C64>);

impl DensityMatrix {
    pub fn new(matrix: Array2<C64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(Error::Shape { expected: "square non-empty matrix".into(), actual: format!("{r}x{c}") });
        }
        Ok(Self(matrix))
    }

    /// `|site><site|` for a 1-based site label.
    pub fn localized(sites: usize, site: usize) -> Result<Self> {
        if site == 0 || site > sites {
            return Err(Error::InvalidParameter(format!("site {site} outside 1..={sites}")));
        }
        let mut m = Array2::zeros((sites, sites));
        m[[site - 1, site - 1]] = C64::new(1.0, 0.0);
        Ok(Self(m))
    }

    pub fn maximally_mixed(sites: usize) -> Self {
        Self(Array2::eye(sites).mapv(|x: f64| C64::new(x / sites as f64, 0.0)))
    }

    /// Reshape a row-major `vec(rho)`.
    pub fn from_vec(sites: usize, v: &[C64]) -> Result<Self> {
        if v.len() != sites * sites {
            return Err(Error::Shape { expected: format!("{}", sites * sites), actual: format!("{}", v.len()) });
        }
        Ok(Self(Array2::from_shape_vec((sites, sites), v.to_vec()).expect("length checked")))
    }

    pub fn sites(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.0
    }

    /// Row-major `vec(rho)`.
    pub fn to_vec(&self) -> Vec<C64> {
        self.0.iter().copied().collect()
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diag().iter().map(|z| z.re).collect()
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    /// `rho <- (rho + rho^dagger) / 2`.
    pub fn hermitize(&mut self) {
        hermitize(&mut self.0);
    }
}

pub(crate) fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]].im = 0.0;
        for j in i + 1..n {
            let avg = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

/// Equation-of-motion right-hand side for the population/coherence equations,
/// with coefficients precomputed from a model.
#[derive(Debug, Clone)]
pub struct LiouvillianRhs {
    sites: usize,
    hopping: f64,
    /// `J^R` of the bond to the left of each site (0 at site 1).
    gain_from_left: Vec<f64>,
    /// `J^L` of the bond to the right of each site (0 at site L).
    gain_from_right: Vec<f64>,
    /// Half the escape rate, `(J_n^R + J_{n-1}^L) / 2`.
    half_escape: Vec<f64>,
}

impl LiouvillianRhs {
    pub fn new(model: &LatticeModel) -> Self {
        let l = model.sites();
        let rates = model.rates();
        let mut gain_from_left = vec![0.0; l];
        let mut gain_from_right = vec![0.0; l];
        for b in 0..l - 1 {
            gain_from_left[b + 1] = rates.right[b];
            gain_from_right[b] = rates.left[b];
        }
        let half_escape = rates.escape_rates().into_iter().map(|g| 0.5 * g).collect();
        Self { sites: l, hopping: model.hopping(), gain_from_left, gain_from_right, half_escape }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// `out = d vec(rho) / dt` for row-major slices of length `L^2`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let l = self.sites;
        debug_assert_eq!(rho.len(), l * l);
        debug_assert_eq!(out.len(), l * l);
        let ij = I * self.hopping;
        for n in 0..l {
            let row = &rho[n * l..(n + 1) * l];
            for m in 0..l {
                // i (rho H - H rho) for the nearest-neighbour H
                let mut rho_h = ZERO;
                if m > 0 {
                    rho_h += row[m - 1];
                }
                if m + 1 < l {
                    rho_h += row[m + 1];
                }
                let mut h_rho = ZERO;
                if n > 0 {
                    h_rho += rho[(n - 1) * l + m];
                }
                if n + 1 < l {
                    h_rho += rho[(n + 1) * l + m];
                }
                let decay = self.half_escape[n] + self.half_escape[m];
                out[n * l + m] = ij * (rho_h - h_rho) - row[m] * decay;
            }
            let mut gain = 0.0;
            if n > 0 {
                gain += self.gain_from_left[n] * rho[(n - 1) * l + n - 1].re;
            }
            if n + 1 < l {
                gain += self.gain_from_right[n] * rho[(n + 1) * l + n + 1].re;
            }
            out[n * l + n] += gain;
        }
    }
}

/// `d rho / dt` for the given model.
pub fn rhs(model: &LatticeModel, rho: &Array2<C64>) -> Result<Array2<C64>> {
    let l = model.sites();
    if rho.dim() != (l, l) {
        return Err(Error::Shape { expected: format!("{l}x{l}"), actual: format!("{:?}", rho.dim()) });
    }
    let flat: Vec<C64> = rho.iter().copied().collect();
    let mut out = vec![ZERO; l * l];
    LiouvillianRhs::new(model).apply(&flat, &mut out);
    Ok(Array2::from_shape_vec((l, l), out).expect("shape"))
}

/// The dense `L^2 x L^2` Liouvillian matrix.
#[derive(Debug, Clone)]
pub struct Superoperator {
    sites: usize,
    matrix: Array2<C64>,
}

/// An incoherent hop `|to><from|` with the given rate.
#[derive(Debug, Clone, Copy)]
struct Jump {
    to: usize,
    from: usize,
    rate: f64,
}

impl Superoperator {
    pub fn assemble(model: &LatticeModel) -> Result<Self> {
        Self::assemble_with_limit(model, DEFAULT_DENSE_LIMIT)
    }

    /// Build from the generic Lindblad form, one term per Hamiltonian entry and
    /// per jump operator, rather than from the component equations.
    pub fn assemble_with_limit(model: &LatticeModel, limit: usize) -> Result<Self> {
        let l = model.sites();
        if l > limit {
            return Err(Error::Capacity { sites: l, limit });
        }
        let d = l * l;
        let idx = |n: usize, m: usize| n * l + m;
        let mut s = Array2::<C64>::zeros((d, d));

        // -i [H, rho]: vec(H rho) = (H (x) 1) vec, vec(rho H) = (1 (x) H^T) vec
        let h = model.hamiltonian_matrix();
        for k in 0..l {
            for q in 0..l {
                let hkq = h[[k, q]];
                if hkq == 0.0 {
                    continue;
                }
                for j in 0..l {
                    // (H rho)[k][j] += H[k][q] rho[q][j]
                    s[[idx(k, j), idx(q, j)]] += -I * hkq;
                    // (rho H)[j][q] += rho[j][k] H[k][q]
                    s[[idx(j, q), idx(j, k)]] += I * hkq;
                }
            }
        }

        let rates = model.rates();
        let mut jumps = Vec::with_capacity(2 * (l - 1));
        for b in 0..l - 1 {
            jumps.push(Jump { to: b + 1, from: b, rate: rates.right[b] });
            jumps.push(Jump { to: b, from: b + 1, rate: rates.left[b] });
        }
        for jump in jumps {
            let g = C64::new(jump.rate, 0.0);
            // L rho L^dagger = rate |to><from| rho |from><to|
            s[[idx(jump.to, jump.to), idx(jump.from, jump.from)]] += g;
            // -1/2 {L^dagger L, rho}, L^dagger L = rate |from><from|
            for j in 0..l {
                s[[idx(jump.from, j), idx(jump.from, j)]] -= g * 0.5;
                s[[idx(j, jump.from), idx(j, jump.from)]] -= g * 0.5;
            }
        }
        Ok(Self { sites: l, matrix: s })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.sites() != self.sites {
            return Err(Error::Shape { expected: format!("{0}x{0}", self.sites), actual: format!("{0}x{0}", rho.sites()) });
        }
        let v = Array1::from(rho.to_vec());
        let out = self.matrix.dot(&v);
        DensityMatrix::from_vec(self.sites, out.as_slice().expect("contiguous"))
    }

    /// Stationary state from `{S v = 0, tr v = 1}`.
    ///
    /// The trace functional is a left null vector of `S`, so one population row
    /// is redundant; it is replaced by the trace constraint.
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let l = self.sites;
        let mut a = self.matrix.clone();
        let replaced = 0;
        a.row_mut(replaced).fill(ZERO);
        for n in 0..l {
            a[[replaced, n * l + n]] = C64::new(1.0, 0.0);
        }
        let mut b = Array1::<C64>::zeros(l * l);
        b[replaced] = C64::new(1.0, 0.0);
        let v = a.solve_into(b).map_err(|e| Error::Solve(e.to_string()))?;
        let mut rho = DensityMatrix::from_vec(l, v.as_slice().expect("contiguous"))?;
        rho.hermitize();
        let residual = self.matrix.dot(&Array1::from(rho.to_vec())).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(residual < ZERO_MODE_TOL) {
            return Err(Error::Solve(format!("stationary residual {residual:e} exceeds {ZERO_MODE_TOL:e}")));
        }
        Ok(rho)
    }

    pub fn spectrum(&self) -> Result<SpectralSummary> {
        let (values, vectors) = self.matrix.eig().map_err(|e| Error::Eigen(e.to_string()))?;
        let zero_modes = values.iter().filter(|z| z.norm() < ZERO_MODE_TOL).count();
        if zero_modes != 1 {
            return Err(Error::DegenerateSteadyState { count: zero_modes, tol: ZERO_MODE_TOL });
        }

        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| spectral_key(values[a]).partial_cmp(&spectral_key(values[b])).expect("finite eigenvalues"));

        let d = values.len();
        let mut sorted_vals = Vec::with_capacity(d);
        let mut sorted_vecs = Array2::<C64>::zeros((d, d));
        for (k, &src) in order.iter().enumerate() {
            sorted_vals.push(values[src]);
            let col = vectors.column(src);
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for (r, z) in col.iter().enumerate() {
                sorted_vecs[[r, k]] = z / norm;
            }
        }
        let steady_state = self.steady_state()?;
        Ok(SpectralSummary { sites: self.sites, eigenvalues: sorted_vals, eigenvectors: sorted_vecs, steady_state })
    }
}

/// Sort key: real part descending, then imaginary part ascending. Real parts
/// are bucketed at 1e-10 so that conjugate pairs tie deterministically.
fn spectral_key(z: C64) -> (f64, f64) {
    (-(z.re * 1e10).round(), z.im)
}

/// Full eigen-decomposition of a superoperator.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    sites: usize,
    /// Sorted by decreasing real part, ties by increasing imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Column `k` is the unit-norm right eigenvector of `eigenvalues[k]`.
    pub eigenvectors: Array2<C64>,
    pub steady_state: DensityMatrix,
}

impl SpectralSummary {
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Right eigenvector `alpha` reshaped to `L x L`.
    pub fn mode(&self, alpha: usize) -> Array2<C64> {
        let l = self.sites;
        let col = self.eigenvectors.column(alpha);
        Array2::from_shape_fn((l, l), |(n, m)| col[n * l + m])
    }

    /// Average modulus of the unit-norm right eigenvectors,
    /// `I[n][m] = (1/L^2) sum_alpha |r_alpha[n][m]|`.
    pub fn eigenmode_profile(&self) -> Array2<f64> {
        let l = self.sites;
        let d = l * l;
        let mut acc = vec![0.0; d];
        for col in self.eigenvectors.columns() {
            for (a, z) in acc.iter_mut().zip(col.iter()) {
                *a += z.norm();
            }
        }
        Array2::from_shape_vec((l, l), acc.into_iter().map(|x| x / d as f64).collect()).expect("shape")
    }

    pub fn zero_mode_count(&self) -> usize {
        self.eigenvalues.iter().filter(|z| z.norm() < ZERO_MODE_TOL).count()
    }
}
