//! Multi-queue network-slice admission control with impatient tenants.
//!
//! The crate covers the resource model ([`scenario`], [`region`]), the
//! preference-matrix strategy ([`strategy`]), the multi-queue controller
//! ([`controller`]), single-queue analytics ([`queueing`]), tenant decision
//! rules ([`tenant`]), the embedded Markov chain ([`markov`]), the
//! discrete-event simulator ([`sim`]), distribution fitting ([`stats`]),
//! strategy search ([`search`]) and the evaluation campaigns ([`experiments`]).

pub mod controller;
pub mod error;
pub mod experiments;
pub mod markov;
pub mod queueing;
pub mod region;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod stats;
pub mod strategy;
pub mod tenant;

pub use error::{Error, Result};
pub use region::{enumerate_regions, RegionIndex, SystemState};
pub use scenario::{Scenario, SliceTypeSpec};
pub use strategy::{PreferenceVector, Strategy};
