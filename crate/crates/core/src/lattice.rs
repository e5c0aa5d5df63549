// SPDX-License-Identifier: Apache-2.0

//! Lattice geometry, bond disorder and the derived hopping rates.
//!
//! Sites are stored 0-based (`0..L`); bond `b` joins sites `b` and `b + 1`.
//! Public functions that take or return *site labels* use the physical
//! 1-based numbering `1..=L` and say so.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RealizationStream;

/// Law of the bond asymmetries `h_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Disorder {
    /// `h_b = 0` on every bond.
    Zero,
    /// `h_b = h` on every bond.
    Uniform { h: f64 },
    /// `h_b = +h` with probability `p`, otherwise `-h`, independently per bond.
    Bernoulli { h: f64, p: f64 },
}

impl Disorder {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Disorder::Zero => Ok(()),
            Disorder::Uniform { h } => check_h(h),
            Disorder::Bernoulli { h, p } => {
                check_h(h)?;
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    return Err(Error::InvalidProbability(p));
                }
                Ok(())
            }
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            Disorder::Zero => 0.0,
            Disorder::Uniform { h } | Disorder::Bernoulli { h, .. } => h,
        }
    }
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("asymmetry h = {h} must be finite and >= 0")))
    }
}

/// The bond asymmetries of one realization. This is the only random input of
/// the model; every rate is derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetrySequence {
    values: Vec<f64>,
    /// `None` for sequences supplied explicitly.
    disorder: Option<Disorder>,
    seed: u64,
    realization: u64,
}

impl AsymmetrySequence {
    /// Draw the sequence for a chain of `sites` sites.
    ///
    /// Bond `b` of realization `r` reads word `b` of stream `r` under `seed`,
    /// so the result does not depend on how realizations are scheduled.
    pub fn generate(sites: usize, disorder: Disorder, seed: u64, realization: u64) -> Result<Self> {
        check_sites(sites)?;
        disorder.validate()?;
        let bonds = sites - 1;
        let values = match disorder {
            Disorder::Zero => vec![0.0; bonds],
            Disorder::Uniform { h } => vec![h; bonds],
            Disorder::Bernoulli { h, p } => {
                let mut stream = RealizationStream::new(seed, realization);
                (0..bonds).map(|_| if stream.uniform() < p { h } else { -h }).collect()
            }
        };
        Ok(Self { values, disorder: Some(disorder), seed, realization })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        check_sites(values.len() + 1)?;
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite asymmetry {bad}")));
        }
        Ok(Self { values, disorder: None, seed: 0, realization: 0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sites(&self) -> usize {
        self.values.len() + 1
    }

    pub fn disorder(&self) -> Option<Disorder> {
        self.disorder
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn realization(&self) -> u64 {
        self.realization
    }

    /// The same bonds seen from the other end of the chain with every
    /// asymmetry flipped: `h'_b = -h_{L-2-b}`.
    pub fn mirrored(&self) -> Self {
        let values = self.values.iter().rev().map(|h| -h).collect();
        Self { values, disorder: None, seed: self.seed, realization: self.realization }
    }

    pub fn walk(&self) -> CumulativeWalk {
        CumulativeWalk::from_sequence(self)
    }
}

fn check_sites(sites: usize) -> Result<()> {
    if sites < 2 {
        Err(Error::InvalidLattice(format!("need at least 2 sites, got {sites}")))
    } else {
        Ok(())
    }
}

/// Prefix sums `X_1 = 0`, `X_{n+1} = X_n + h_n` (stored 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeWalk {
    values: Vec<f64>,
}

impl CumulativeWalk {
    pub fn from_sequence(seq: &AsymmetrySequence) -> Self {
        let mut values = Vec::with_capacity(seq.sites());
        let mut x = 0.0;
        values.push(x);
        for &h in seq.values() {
            x += h;
            values.push(x);
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Incoherent hopping rates on the `L - 1` bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingRates {
    /// `J_b^L = Q e^{h_b}`: hop from site `b + 1` to site `b`.
    pub left: Vec<f64>,
    /// `J_b^R = Q e^{-h_b}`: hop from site `b` to site `b + 1`.
    pub right: Vec<f64>,
}

impl HoppingRates {
    pub fn sites(&self) -> usize {
        self.left.len() + 1
    }

    /// Total outgoing rate of each site, `J_n^R + J_{n-1}^L` with the missing
    /// boundary bonds contributing nothing.
    pub fn escape_rates(&self) -> Vec<f64> {
        let l = self.sites();
        (0..l)
            .map(|n| {
                let out_right = if n + 1 < l { self.right[n] } else { 0.0 };
                let out_left = if n > 0 { self.left[n - 1] } else { 0.0 };
                out_right + out_left
            })
            .collect()
    }
}

/// A chain of `L` sites with coherent hopping `J` and incoherent rate scale `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    hopping: f64,
    rate: f64,
    asymmetry: AsymmetrySequence,
}

impl LatticeModel {
    pub fn new(hopping: f64, rate: f64, asymmetry: AsymmetrySequence) -> Result<Self> {
        if !(hopping.is_finite() && hopping >= 0.0) {
            return Err(Error::InvalidParameter(format!("coherent hopping J = {hopping} must be >= 0")));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!("rate scale Q = {rate} must be > 0")));
        }
        Ok(Self { hopping, rate, asymmetry })
    }

    pub fn sites(&self) -> usize {
        self.asymmetry.sites()
    }

    /// Coherent hopping amplitude `J`.
    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    /// Incoherent rate scale `Q`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn asymmetry(&self) -> &AsymmetrySequence {
        &self.asymmetry
    }

    pub fn with_hopping(&self, hopping: f64) -> Result<Self> {
        Self::new(hopping, self.rate, self.asymmetry.clone())
    }

    pub fn rates(&self) -> HoppingRates {
        let q = self.rate;
        let h = self.asymmetry.values();
        HoppingRates { left: h.iter().map(|h| q * h.exp()).collect(), right: h.iter().map(|h| q * (-h).exp()).collect() }
    }

    pub fn walk(&self) -> CumulativeWalk {
        self.asymmetry.walk()
    }

    /// Single-particle matrix of the coherent Hamiltonian: zero diagonal,
    /// `J` on both off-diagonals.
    pub fn hamiltonian_matrix(&self) -> Array2<f64> {
        let l = self.sites();
        let mut h = Array2::zeros((l, l));
        for b in 0..l - 1 {
            h[[b, b + 1]] = self.hopping;
            h[[b + 1, b]] = self.hopping;
        }
        h
    }
}

/// Structured description of a model: the keys `L`, `J`, `Q`, `disorder.*`
/// and `seed` of the text config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J")]
    pub hopping: f64,
    #[serde(rename = "Q")]
    pub rate: f64,
    pub disorder: Disorder,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn build(&self, realization: u64) -> Result<LatticeModel> {
        let seq = AsymmetrySequence::generate(self.sites, self.disorder, self.seed, realization)?;
        LatticeModel::new(self.hopping, self.rate, seq)
    }
}
