//! Planning and simulation models for flex-grid entanglement distribution.
//!
//! A broadband photon-pair spectrum is carved into energy-matched channels
//! ([`spectrum`]), routed to users through a switch or filter tree
//! ([`hardware`]), turned into singles and coincidence rates or simulated
//! time tags ([`ratemodel`]), assigned to links by an [`allocator`], and
//! checked for state quality by [`tomography`].

pub mod allocator;
pub mod error;
pub mod hardware;
pub mod ratemodel;
pub mod spectrum;
pub mod tomography;

pub use error::{Error, Result};
