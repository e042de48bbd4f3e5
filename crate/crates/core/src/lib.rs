//! Quantum repeater chain models: closed-form rates and fidelities for
//! trapped-ion (1G) and all-photonic (APE) chains, a discrete-event simulator
//! for each, and an RGS shape optimiser.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod optimizer;
pub mod params;
pub mod sim_1g;
pub mod sim_ape;
pub mod state;
pub mod stats;
pub mod theory_1g;
pub mod theory_ape;

pub use error::{Error, Result};
pub use params::{ApeParams, ChainTopology, RgsParams, TrappedIonParams};
