//! Measurement toolkit for hypernym bias in classifier training.
//!
//! The crate covers the whole analysis chain without training a network:
//!
//! * [`hierarchy`] parses taxonomy edge files and answers path queries.
//! * [`labelspace`] groups classes into superclasses (taxonomy-derived or
//!   random size-isomorphic controls) and projects prediction logs.
//! * [`metrics`] turns prediction logs into accuracy, relative accuracy,
//!   relative gain and residual error curves, plus confusion matrices.
//! * [`manifold`] measures mutual cover between class feature sets and
//!   compares the resulting distances with taxonomy distances.
//! * [`collapse`] computes neural-collapse statistics in any label space.
//! * [`synth`] generates synthetic trajectories and Monte-Carlo oracles.
//! * [`io`] reads and writes every on-disk artifact.
//! * [`cli`] wires the above into the `hbias` command.

pub mod cli;
pub mod collapse;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod labelspace;
pub mod manifold;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
