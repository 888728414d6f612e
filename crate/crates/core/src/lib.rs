//! Many-shot in-context lead optimization.
//!
//! The crate is organised bottom-up: [`molgraph`] parses SMILES, the
//! property and feature modules turn graphs into numbers, [`qsar`] learns
//! activity from those numbers, and [`campaign`] drives generation rounds
//! through a pluggable [`generation`] backend.

pub mod molgraph;
pub mod properties;
pub mod features;
pub mod stats;
pub mod data;
pub mod qsar;
pub mod generation;
pub mod campaign;
