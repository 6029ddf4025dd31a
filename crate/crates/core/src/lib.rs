//! Two-stage multi-link operation planning for 802.11be networks.

pub mod allocation;
pub mod dcf;
pub mod error;
pub mod harness;
pub mod pairing;
pub mod phy;
pub mod rates;

pub use error::{Error, Result};
