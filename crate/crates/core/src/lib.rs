//! Exact infinite-volume quasi-free dynamics of the harmonic lattice on `Z^d`
//! through its Fourier representation, plus numerical checks of its
//! dispersive decay and light cone.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
mod fft;
pub mod finitevol;
pub mod kernels;
pub mod lattice;
pub mod model;

pub use error::{Error, Result};
pub use kernels::{KernelIndex, KernelTable, QuadratureSpec};
pub use lattice::{LatticeFunction, LatticeSite};
pub use model::{CriticalPoint, ModelParams, TorusPoint};
