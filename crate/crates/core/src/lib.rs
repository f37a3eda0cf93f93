//! Stochastic network SEIRS+ epidemic simulator.
//!
//! A country is split into regions of a few thousand nodes. Each region
//! carries a chain of nested contact networks, and the restrictions in force
//! on a day pick which one is active. Regions are coupled by a mean-field
//! mixing term and by imported cases. On top of the simulator sit a
//! two-stage calibration search and a counterfactual scenario engine.

pub mod calibration;
pub mod data;
pub mod epidemic;
pub mod error;
pub mod interventions;
pub mod metapop;
pub mod network;
pub mod output;
pub mod params;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod state;

pub use error::{EpiError, Result};
pub use metapop::{run_simulation, RunOptions, SimulationConfig, SimulationResult};
pub use params::{BehaviorParams, CountryProfile, EpiParams};
pub use policy::{PolicyDay, PolicyTimeline};
pub use state::{NodeFlags, NodeState};
