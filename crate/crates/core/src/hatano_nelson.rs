// SPDX-License-Identifier: Apache-2.0

//! Effective non-Hermitian hopping model with random phases on the bonds:
//! `H_{n+1,n} = J + (κ/2) e^{-iθ_n}`, `H_{n,n+1} = J - (κ/2) e^{iθ_n}`,
//! loss `-iκ` on the diagonal, and the correlation dynamics it generates.
//!
//! For `θ_n ∈ {0, π}` the hoppings are real and `J^R J^L = J² - κ²/4 = J_e²`,
//! so the diagonal similarity `e^{-Y_n}` with
//! `Y_n = Σ_{l<n} ½ ln|J^R_l / J^L_l|` turns `H + iκ` into a symmetric
//! matrix with off-diagonals `J_e` (when `κ < 2J`).

use std::f64::consts::PI;

use ndarray::Array2;
use ndarray_linalg::Eig;
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleOptions, EnsembleTrace};
use crate::error::{Error, Result};
use crate::lattice::{AsymmetrySequence, CumulativeWalk, Disorder};
use crate::liouvillian::C64;
use crate::metrics::corner_mass;
use crate::ode::{self, Tolerance};
use crate::transport::{center_site, TransportTrace};

/// Which sites carry the full loss `-iκ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalConvention {
    /// Bulk `-iκ`, the two end sites `-iκ/2` (one adjacent bond each).
    #[default]
    EdgeHalfLoss,
    /// `-iκ` on every site.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub matrix: Array2<C64>,
    pub hopping: f64,
    pub kappa: f64,
    pub theta: Vec<f64>,
    pub convention: DiagonalConvention,
    /// Set when `κ >= 2J`, where `J_e` is imaginary and the gauge argument
    /// no longer applies.
    pub regime_warning: Option<String>,
}

impl EffectiveHamiltonian {
    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    /// `sqrt(J² - κ²/4)`, NaN outside the real-gauge regime.
    pub fn effective_hopping(&self) -> f64 {
        (self.hopping * self.hopping - 0.25 * self.kappa * self.kappa).sqrt()
    }

    pub fn right_hopping(&self) -> Vec<C64> {
        (0..self.sites() - 1).map(|b| self.matrix[[b + 1, b]]).collect()
    }

    pub fn left_hopping(&self) -> Vec<C64> {
        (0..self.sites() - 1).map(|b| self.matrix[[b, b + 1]]).collect()
    }

    /// `Y_n = Σ_{l<n} ½ ln|J^R_l / J^L_l|`, `Y_1 = 0`.
    pub fn gauge_walk(&self) -> Result<CumulativeWalk> {
        let steps: Vec<f64> = self.right_hopping().iter().zip(self.left_hopping()).map(|(r, l)| 0.5 * (r.norm() / l.norm()).ln()).collect();
        if steps.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("a hopping amplitude vanishes; the gauge walk is undefined".into()));
        }
        Ok(AsymmetrySequence::from_values(steps)?.walk())
    }

    /// Eigenvalues sorted by real part, then imaginary part.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        Ok(self.eigen()?.0)
    }

    fn eigen(&self) -> Result<(Vec<C64>, Array2<C64>)> {
        let (vals, vecs) = self.matrix.eig().map_err(|e| Error::Eigen(e.to_string()))?;
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re).then(vals[a].im.total_cmp(&vals[b].im)));
        let l = self.sites();
        let mut sorted = Array2::zeros((l, l));
        for (k, &src) in order.iter().enumerate() {
            let col = vecs.column(src);
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for r in 0..l {
                sorted[[r, k]] = col[r] / norm;
            }
        }
        Ok((order.iter().map(|&i| vals[i]).collect(), sorted))
    }
}

/// Build the effective Hamiltonian. `θ_n` must be 0 or π.
pub fn effective_hamiltonian(sites: usize, hopping: f64, kappa: f64, theta: &[f64], convention: DiagonalConvention) -> Result<EffectiveHamiltonian> {
    if sites < 2 {
        return Err(Error::InvalidLattice(format!("need at least 2 sites (got {sites})")));
    }
    if theta.len() != sites - 1 {
        return Err(Error::Shape { expected: format!("{} bond phases", sites - 1), actual: format!("{}", theta.len()) });
    }
    if !(hopping >= 0.0 && kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("J and κ must be non-negative (got {hopping}, {kappa})")));
    }
    if let Some(t) = theta.iter().find(|t| !(t.abs() < 1e-12 || (*t - PI).abs() < 1e-12)) {
        return Err(Error::InvalidParameter(format!("bond phase {t} is neither 0 nor π")));
    }
    let regime_warning = (kappa >= 2.0 * hopping).then(|| format!("κ = {kappa} >= 2J = {}: effective hopping is imaginary", 2.0 * hopping));
    let mut m = Array2::<C64>::zeros((sites, sites));
    for (b, &th) in theta.iter().enumerate() {
        m[[b + 1, b]] = hopping + 0.5 * kappa * C64::from_polar(1.0, -th);
        m[[b, b + 1]] = hopping - 0.5 * kappa * C64::from_polar(1.0, th);
    }
    for n in 0..sites {
        let edge = n == 0 || n == sites - 1;
        let loss = if edge && convention == DiagonalConvention::EdgeHalfLoss { 0.5 * kappa } else { kappa };
        m[[n, n]] = C64::new(0.0, -loss);
    }
    Ok(EffectiveHamiltonian { matrix: m, hopping, kappa, theta: theta.to_vec(), convention, regime_warning })
}

/// Bond phases: 0 with probability `p`, π otherwise, drawn from the same
/// counter-based streams as the lattice disorder.
pub fn random_phases(sites: usize, p: f64, seed: u64, realization: u64) -> Result<Vec<f64>> {
    let seq = AsymmetrySequence::generate(sites, Disorder::Bernoulli { h: 1.0, p }, seed, realization)?;
    Ok(seq.values().iter().map(|&v| if v > 0.0 { 0.0 } else { PI }).collect())
}

/// `h = ½ ln((J + κ/2) / (J - κ/2))`.
pub fn clean_asymmetry(hopping: f64, kappa: f64) -> f64 {
    0.5 * ((hopping + 0.5 * kappa) / (hopping - 0.5 * kappa)).ln()
}

/// `2 J_e cos(mπ/(L+1)) - iκ`, `m = 1..L`, sorted by real part.
pub fn clean_spectrum(sites: usize, hopping: f64, kappa: f64) -> Vec<C64> {
    let je = (hopping * hopping - 0.25 * kappa * kappa).sqrt();
    let mut v: Vec<C64> = (1..=sites).map(|m| C64::new(2.0 * je * (m as f64 * PI / (sites + 1) as f64).cos(), -kappa)).collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct SkinDiagnostics {
    /// `(1/L) Σ_α |r_α[n]|` over unit-norm right eigenvectors.
    pub profile: Vec<f64>,
    /// Share of the profile in the first and last `⌈0.1 L⌉` sites.
    pub corner_mass: (f64, f64),
    /// 1-based maximizers of the gauge walk `Y_n`, where amplitude piles up.
    pub predicted_sites: Vec<usize>,
}

pub fn skin_diagnostics(h: &EffectiveHamiltonian) -> Result<SkinDiagnostics> {
    let l = h.sites();
    let (_, vecs) = h.eigen()?;
    let profile: Vec<f64> = (0..l).map(|n| vecs.row(n).iter().map(|z| z.norm()).sum::<f64>() / l as f64).collect();
    let corner_mass = corner_mass(&profile, 0.1)?;
    let predicted_sites = crate::fit::walk_extremes(&h.gauge_walk()?).argmax;
    Ok(SkinDiagnostics { profile, corner_mass, predicted_sites })
}

#[derive(Debug, Clone)]
pub struct CorrelationRun {
    /// Moments of `diag(C) / tr C`.
    pub trace: TransportTrace,
    /// `tr C(t)`.
    pub norm: Vec<f64>,
    pub final_state: Array2<C64>,
}

/// `|n0><n0|` as a correlation matrix.
pub fn localized_correlation(sites: usize, n0: usize) -> Result<Array2<C64>> {
    if n0 == 0 || n0 > sites {
        return Err(Error::InvalidParameter(format!("site {n0} outside 1..={sites}")));
    }
    let mut c = Array2::zeros((sites, sites));
    c[[n0 - 1, n0 - 1]] = C64::new(1.0, 0.0);
    Ok(c)
}

/// Integrate `dC/dt = -i (C Hᵀ - H* C)` for `C_{nm} = <a_n† a_m>`. This is
/// `G = ψψ†` evolving under `ψ' = -iHψ`, with `C = Gᵀ`.
///
/// The scalar part `-iκ` of the diagonal is factored out as `e^{-2κt}` so the
/// integrated matrix stays O(1).
pub fn correlation_evolve(h: &EffectiveHamiltonian, c0: &Array2<C64>, times: &[f64], tol: Tolerance) -> Result<CorrelationRun> {
    let l = h.sites();
    if c0.dim() != (l, l) {
        return Err(Error::Shape { expected: format!("{l}x{l}"), actual: format!("{:?}", c0.dim()) });
    }
    let herm = c0.indexed_iter().map(|((r, c), z)| (z - c0[[c, r]].conj()).norm()).fold(0.0, f64::max);
    if herm > 1e-12 {
        return Err(Error::Domain(format!("initial correlation matrix is not Hermitian (defect {herm:e})")));
    }
    ode::check_grid(times)?;
    let diag: Vec<f64> = (0..l).map(|n| c0[[n, n]].re).collect();
    let n0 = diag.iter().enumerate().fold(0, |b, (i, &x)| if x > diag[b] { i } else { b }) + 1;

    // shifted hoppings and diagonal of H + iκ
    let kappa = h.kappa;
    let d: Vec<C64> = (0..l).map(|n| h.matrix[[n, n]] + C64::new(0.0, kappa)).collect();
    let up: Vec<C64> = (0..l - 1).map(|n| h.matrix[[n, n + 1]]).collect();
    let lo: Vec<C64> = (0..l - 1).map(|n| h.matrix[[n + 1, n]]).collect();
    let mi = C64::new(0.0, -1.0);
    let rhs = |y: &[C64], dy: &mut [C64]| {
        for n in 0..l {
            for m in 0..l {
                // (C Hᵀ)_{nm} = Σ_k C_{nk} H_{mk}
                let mut a = y[n * l + m] * d[m];
                if m > 0 {
                    a += y[n * l + m - 1] * lo[m - 1];
                }
                if m + 1 < l {
                    a += y[n * l + m + 1] * up[m];
                }
                // (H* C)_{nm} = Σ_k conj(H_{nk}) C_{km}
                let mut b = d[n].conj() * y[n * l + m];
                if n > 0 {
                    b += lo[n - 1].conj() * y[(n - 1) * l + m];
                }
                if n + 1 < l {
                    b += up[n].conj() * y[(n + 1) * l + m];
                }
                dy[n * l + m] = mi * (a - b);
            }
        }
    };
    let mut trace = TransportTrace::new(n0, false);
    let mut norm = vec![];
    let mut last = vec![];
    let y0: Vec<C64> = c0.iter().copied().collect();
    ode::integrate(&y0, times, tol, rhs, |_, t, y| {
        let pops: Vec<f64> = (0..l).map(|n| y[n * l + n].re).collect();
        let total: f64 = pops.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Evolution { t, reason: format!("correlation trace became {total}") });
        }
        trace.record(t, &pops);
        norm.push(total * (-2.0 * kappa * t).exp());
        last = y.to_vec();
        Ok(())
    })?;
    let scale = (-2.0 * kappa * times[times.len() - 1]).exp();
    let final_state = Array2::from_shape_vec((l, l), last.into_iter().map(|z| z * scale).collect()).expect("shape");
    Ok(CorrelationRun { trace, norm, final_state })
}

/// Parameters of a random-phase transport ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEnsemble {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J")]
    pub hopping: f64,
    pub kappa: f64,
    /// Probability of `θ = 0` on a bond.
    pub p: f64,
    #[serde(default)]
    pub convention: DiagonalConvention,
    pub seed: u64,
}

/// Ensemble of correlation runs started from the central site.
pub fn phase_ensemble(config: &PhaseEnsemble, times: &[f64], tol: Tolerance, realizations: usize, options: EnsembleOptions) -> Result<EnsembleTrace> {
    let l = config.sites;
    let n0 = center_site(l);
    let c0 = localized_correlation(l, n0)?;
    run_ensemble(config.seed, realizations, options, |r| {
        let theta = random_phases(l, config.p, config.seed, r)?;
        let h = effective_hamiltonian(l, config.hopping, config.kappa, &theta, config.convention)?;
        Ok(correlation_evolve(&h, &c0, times, tol)?.trace)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use ndarray_linalg::Solve;

    #[test]
    fn hopping_entries_and_clean_limit() {
        let h = effective_hamiltonian(5, 1.0, 0.6, &[0.0; 4], DiagonalConvention::EdgeHalfLoss).unwrap();
        assert_eq!(h.matrix[[1, 0]], C64::new(1.3, 0.0));
        assert_eq!(h.matrix[[0, 1]], C64::new(0.7, 0.0));
        assert_eq!(h.matrix[[2, 2]], C64::new(0.0, -0.6));
        assert_eq!(h.matrix[[0, 0]], C64::new(0.0, -0.3));
        let flipped = effective_hamiltonian(3, 1.0, 0.6, &[PI, 0.0], DiagonalConvention::Uniform).unwrap();
        assert!((flipped.matrix[[1, 0]] - C64::new(0.7, 0.0)).norm() < 1e-15);
        assert!((flipped.matrix[[0, 1]] - C64::new(1.3, 0.0)).norm() < 1e-15);
        assert!(effective_hamiltonian(3, 1.0, 0.6, &[0.3, 0.0], DiagonalConvention::Uniform).is_err());
        assert!(effective_hamiltonian(3, 1.0, 2.5, &[0.0, 0.0], DiagonalConvention::Uniform).unwrap().regime_warning.is_some());
    }

    #[test]
    fn hermitian_when_lossless() {
        let m = crate::lattice::LatticeModel::new(0.2, 1.0, AsymmetrySequence::generate(7, Disorder::Zero, 0, 0).unwrap()).unwrap();
        let h = effective_hamiltonian(7, 0.2, 0.0, &[0.0; 6], DiagonalConvention::EdgeHalfLoss).unwrap();
        for ((r, c), z) in h.matrix.indexed_iter() {
            assert_eq!(*z, C64::new(m.hamiltonian_matrix()[[r, c]], 0.0));
        }
    }

    #[test]
    fn clean_spectrum_is_exact_with_uniform_loss() {
        let h = effective_hamiltonian(21, 1.0, 0.8, &[0.0; 20], DiagonalConvention::Uniform).unwrap();
        for (a, b) in h.eigenvalues().unwrap().iter().zip(clean_spectrum(21, 1.0, 0.8)) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn gauge_makes_spectrum_real() {
        let theta = random_phases(25, 0.5, 3, 0).unwrap();
        let h = effective_hamiltonian(25, 1.0, 1.2, &theta, DiagonalConvention::Uniform).unwrap();
        let y = h.gauge_walk().unwrap();
        let je = h.effective_hopping();
        for b in 0..24 {
            // W = e^{-Y} H e^{Y}
            let w_up = h.matrix[[b, b + 1]] * (y.values()[b + 1] - y.values()[b]).exp();
            let w_lo = h.matrix[[b + 1, b]] * (y.values()[b] - y.values()[b + 1]).exp();
            assert!((w_up - w_lo).norm() < 1e-12);
            assert!((w_up.norm() - je).abs() < 1e-12);
        }
        for z in h.eigenvalues().unwrap() {
            assert!((z.im + 1.2).abs() < 1e-9);
        }
    }

    #[test]
    fn clean_eigenvectors_are_gauged_standing_waves() {
        let (l, j, k) = (12, 1.0, 0.5);
        let h = effective_hamiltonian(l, j, k, &vec![0.0; l - 1], DiagonalConvention::Uniform).unwrap();
        let hh = clean_asymmetry(j, k);
        let (vals, vecs) = h.eigen().unwrap();
        let je = h.effective_hopping();
        for a in 0..l {
            // cos(mπ/(L+1)) = re λ / 2J_e identifies m
            let m = ((vals[a].re / (2.0 * je)).acos() * (l + 1) as f64 / PI).round();
            let phi: Vec<C64> = (0..l).map(|n| vecs[[n, a]] * (-hh * n as f64).exp()).collect();
            let sine: Vec<f64> = (1..=l).map(|n| (m * n as f64 * PI / (l + 1) as f64).sin()).collect();
            let ratio = phi[0] / sine[0];
            for n in 0..l {
                assert!((phi[n] - ratio * sine[n]).norm() < 1e-10 * ratio.norm());
            }
        }
    }

    #[test]
    fn skin_profile_follows_the_bias() {
        let h = effective_hamiltonian(30, 1.0, 0.8, &[0.0; 29], DiagonalConvention::EdgeHalfLoss).unwrap();
        let s = skin_diagnostics(&h).unwrap();
        assert!(s.corner_mass.1 > 0.5);
        assert_eq!(s.predicted_sites, vec![30]);
        let flat = skin_diagnostics(&effective_hamiltonian(30, 1.0, 0.0, &[0.0; 29], DiagonalConvention::EdgeHalfLoss).unwrap()).unwrap();
        assert!(flat.corner_mass.0 < 0.2 && flat.corner_mass.1 < 0.2);
    }

    #[test]
    fn correlations_match_wavefunction() {
        let l = 9;
        let theta = random_phases(l, 0.5, 1, 2).unwrap();
        let h = effective_hamiltonian(l, 1.0, 0.7, &theta, DiagonalConvention::EdgeHalfLoss).unwrap();
        let t = 1.7;
        let run = correlation_evolve(&h, &localized_correlation(l, 5).unwrap(), &[0.0, t], Tolerance::new(1e-11, 1e-13).unwrap()).unwrap();
        // ψ(t) = V e^{-iΛt} V^{-1} e_5
        let (vals, vecs) = h.matrix.eig().unwrap();
        let mut e = Array1::<C64>::zeros(l);
        e[4] = C64::new(1.0, 0.0);
        let c = vecs.solve(&e).unwrap();
        let w: Array1<C64> = (0..l).map(|k| (C64::new(0.0, -t) * vals[k]).exp() * c[k]).collect();
        let psi = vecs.dot(&w);
        for n in 0..l {
            for m in 0..l {
                let want = psi[n].conj() * psi[m];
                assert!((run.final_state[[n, m]] - want).norm() < 1e-8);
            }
        }
        assert!((run.norm[1] - psi.iter().map(|z| z.norm_sqr()).sum::<f64>()).abs() < 1e-8);
    }

    #[test]
    fn lossless_norm_conserved_and_gauge_norm_decays() {
        let l = 15;
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.4).collect();
        let tol = Tolerance::new(1e-11, 1e-13).unwrap();
        let h0 = effective_hamiltonian(l, 1.0, 0.0, &vec![0.0; l - 1], DiagonalConvention::Uniform).unwrap();
        let run = correlation_evolve(&h0, &localized_correlation(l, 8).unwrap(), &times, tol).unwrap();
        assert!(run.norm.iter().all(|n| (n - 1.0).abs() < 1e-9));
        let k = 0.6;
        let h = effective_hamiltonian(l, 1.0, k, &vec![0.0; l - 1], DiagonalConvention::Uniform).unwrap();
        let y = h.gauge_walk().unwrap();
        let t_end = *times.last().unwrap();
        let run = correlation_evolve(&h, &localized_correlation(l, 8).unwrap(), &times, tol).unwrap();
        let gauged: f64 = (0..l).map(|n| run.final_state[[n, n]].re * (-2.0 * (y.values()[n] - y.values()[7])).exp()).sum();
        assert!((gauged - (-2.0 * k * t_end).exp()).abs() < 1e-9);
    }

    #[test]
    fn clean_phase_ensemble_drifts() {
        let cfg = PhaseEnsemble { sites: 31, hopping: 1.0, kappa: 0.4, p: 1.0, convention: DiagonalConvention::EdgeHalfLoss, seed: 2 };
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let e = phase_ensemble(&cfg, &times, Tolerance::default(), 2, EnsembleOptions::default()).unwrap();
        assert_eq!(e.stderr_n_cm.iter().copied().fold(0.0, f64::max), 0.0);
        assert!(e.n_cm[10].abs() > 0.1);
    }
}
