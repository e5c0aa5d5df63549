// SPDX-License-Identifier: Apache-2.0

//! Dissipative tight-binding chains with asymmetric incoherent hopping.

pub mod classical;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod hatano_nelson;
pub mod io;
pub mod lattice;
pub mod liouvillian;
pub mod meanfield;
pub mod metrics;
pub mod ode;
pub mod rng;
pub mod transport;
pub mod tridiag;

pub use error::{Error, Result};
