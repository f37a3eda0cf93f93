//! Decomposition of a country into regions, the daily loop and inter-region
//! coupling.

mod result;
mod simulation;
mod world;

pub use result::{
    mean_std, round_quotas, AggregateDay, ControllerEntry, RegionDay, RunTrace, SimulationResult, Snapshot,
    AGGREGATE_FIELDS,
};
pub use simulation::{run_simulation, simulate_run, RunOptions, SimulationConfig};
pub use world::{
    mixing_expectations, region_sizes, stochastic_round, target_nodes, MixingOrder, World, WorldConfig,
};
