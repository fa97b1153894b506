//! Trust-based blockchain for dynamic spectrum access: per-account trust
//! management, Proof of Trust mining, ring-signed anonymous sensing, sealed
//! second-price spectrum auctions and a seeded network simulator.

pub mod consensus;
pub mod contracts;
pub mod crypto;
pub mod hash;
pub mod ids;
pub mod ledger;
pub mod par;
pub mod payload;
pub mod simnet;
pub mod trust;
