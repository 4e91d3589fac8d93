// SPDX-License-Identifier: Apache-2.0

//! Quantum Fisher information matrices and Cramér–Rao bounds for networks
//! of quantum sensors.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fisher;
pub mod netspace;
pub mod probes;
pub mod search;

pub use error::{Error, Result};
