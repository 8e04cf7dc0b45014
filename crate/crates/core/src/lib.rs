//! Multi-UAV conflict management over simulated position-beaconing radios.
//!
//! The crate is layered bottom-up: [`geometry`] holds positions, separation
//! volumes and layer classifiers; [`channel`] models path loss and reception;
//! [`beacon`] implements the beacon codec and per-drone radio state machines;
//! [`conflict`] runs strategic deconfliction and the tactical separation loop;
//! [`sim`] ties everything into a deterministic fixed-timestep world.

pub mod beacon;
pub mod channel;
pub mod conflict;
pub mod error;
pub mod geometry;
pub mod sim;

pub use error::{Error, Result};
