//! Mean-field dynamics of bosons on a periodic lattice with Bogoliubov
//! fluctuations and the higher-order excitation hierarchy.
//!
//! Conventions used throughout the crate:
//!
//! * The lattice has `M` sites `x_i = i h`, `h = L / M`.
//! * `CondensateState::phi` stores point values of the condensate with
//!   `h Σ |φ(x)|² = 1`.
//! * Every matrix or tensor kernel is stored in the orthonormal site basis
//!   `e_x = δ_x / √h`, so ladder operators satisfy `[a_x, a†_y] = δ_xy`
//!   and sums over sites carry no extra weights.
//! * Multi-index tensors list output indices first and input indices last.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bogomap;
pub mod coeffs;
pub mod error;
pub mod fock;
pub mod hierarchy;
pub mod integrate;
pub mod kernels;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod sparse;
pub mod wick;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
