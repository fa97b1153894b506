//! Seeded discrete-round network simulator.
//!
//! A [`World`] owns a population of simulated nodes, their keys and a chain.
//! Each call to [`World::run_round`] executes the whole task workflow
//! through the contract state machines and seals one block. Every random
//! choice comes from a per-round, per-purpose ChaCha stream, so runs with
//! the same seed are identical and paired runs share their draws.

pub mod experiments;
pub mod node;
pub mod select;
pub mod world;

use thiserror::Error;

use crate::contracts::ContractError;
use crate::crypto::CryptoError;
use crate::ledger::LedgerError;
use crate::trust::TrustError;

pub use node::{sense, sense_with_draw, NodeKind, NodeProfile, SensorMemory};
pub use select::{select_sensors, Candidate, SelectionScheme};
pub use world::{
    standard_population, CscDefaults, MiningMode, NodeRound, PopulationEntry, RoundReport, RoundScript, SacDefaults,
    World, WorldConfig,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Trust(#[from] TrustError),
}
