//! Simulation and verification toolkit for pairing cellular users (CUs) with
//! device-to-device (D2D) relay pairs.
//!
//! D2D transmitters relay CU uplink traffic and are paid in channel time. Each
//! CU/D2D pair splits the frame by Nash bargaining ([`bargaining`]); the
//! resulting two-sided preferences define a one-to-one matching market
//! ([`matching`]) which is equivalent to a non-cooperative proposal game
//! ([`game`]). CUs do not know their relay rates, so they learn a stable
//! matching by playing the game repeatedly ([`learners`]). The [`harness`]
//! drives whole experiments over random topologies ([`channel`]).

pub mod bargaining;
pub mod channel;
pub mod error;
pub mod game;
pub mod harness;
pub mod instances;
pub mod learners;
pub mod matching;
mod quadrature;
pub mod verify;

pub use error::{Error, Result};
