//! Locally-balanced informed proposals for Metropolis–Hastings on discrete
//! state spaces.
//!
//! The crate is `no_std` (with `alloc`). IO, wall-clock timing and the
//! command-line front end live in the companion `locbal` crate.

#![no_std]

extern crate alloc;

pub mod balance;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod kernels;
pub mod math;
pub mod recordlinkage;
pub mod rng;
pub mod target;

pub use balance::{BalancingFunction, LinearBound};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, Sampler, Trace};
pub use target::{
    BinaryTarget, DiscreteTarget, IsingTarget, MoveSet, PermState, PermutationTarget,
};
