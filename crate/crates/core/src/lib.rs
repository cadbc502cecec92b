//! Simulation of the SASI ultralightweight RFID authentication protocol and
//! passive attacks on its modular-rotation variant.
//!
//! - [`word96`]: 96-bit words and both rotation definitions.
//! - [`protocol`]: one reader/tag session, nonce generation.
//! - [`sim`]: seeded multi-session simulation of one tag.
//! - [`trace`]: text trace files of eavesdropped sessions.
//! - [`attack`]: detection, residue voting and probability estimation.

pub mod attack;
pub mod protocol;
pub mod sim;
pub mod trace;
pub mod word96;

pub use protocol::{PartyState, RotationVariant, TagIdentity, Transcript};
pub use word96::Word96;
