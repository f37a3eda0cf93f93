//! Per-region daily dynamics of the compartmental model.
//!
//! Updates are synchronous: infection pressure is computed from the states at
//! the start of the day, and every node's transition depends only on its own
//! day-start state and that pressure, so the node array can be updated in
//! place without ordering effects.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};
use crate::network::{NetworkSuite, SuiteLevel};
use crate::params::EpiParams;
use crate::rng::SimRng;
use crate::state::{Compartments, NodeFlags, NodeState};

/// One region: its nodes, their flags, its contact suite and its own
/// random stream.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    pub id: usize,
    pub states: Vec<NodeState>,
    pub flags: Vec<NodeFlags>,
    pub suite: NetworkSuite,
    pub rng: SimRng,
    /// Nodes that ever entered E (or were placed past E at a snapshot start).
    pub cum_exposed: u32,
    /// Nodes that ever became symptomatic.
    pub cum_symptomatic: u32,
    pressure: Vec<u32>,
}

impl RegionGraph {
    /// All nodes susceptible.
    pub fn new(id: usize, suite: NetworkSuite, flags: Vec<NodeFlags>, rng: SimRng) -> Result<Self> {
        let n = suite.node_count();
        if flags.len() != n {
            return Err(EpiError::Structural(format!(
                "region {id}: {} flags for {n} nodes",
                flags.len()
            )));
        }
        Ok(Self {
            id,
            states: vec![NodeState::S; n],
            flags,
            suite,
            rng,
            cum_exposed: 0,
            cum_symptomatic: 0,
            pressure: vec![0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn counts(&self) -> Compartments {
        Compartments::from_states(&self.states)
    }

    /// Moves susceptible node `i` to E and books it as an exposure.
    pub(crate) fn expose(&mut self, i: usize) {
        debug_assert_eq!(self.states[i], NodeState::S);
        self.states[i] = NodeState::E;
        self.cum_exposed += 1;
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.states.len();
        if self.suite.node_count() != n || self.flags.len() != n || self.pressure.len() != n {
            return Err(EpiError::Structural(format!(
                "region {}: {} states, {} flags, suite of {} nodes",
                self.id,
                n,
                self.flags.len(),
                self.suite.node_count()
            )));
        }
        Ok(())
    }
}

/// Per-day inputs of [`step_region`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayContext {
    pub level: SuiteLevel,
    pub p_e: f64,
}

/// Transition kinds booked by [`Tally`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    SToE,
    EToSy,
    EToAsy,
    SyToH,
    SyToR,
    AsyToR,
    HToR,
    HToD,
    QsToS,
    QeToE,
    QeToQsy,
    QeToQasy,
    QsyToH,
    QsyToR,
    QasyToR,
}

impl Transition {
    pub const COUNT: usize = 15;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally(pub [u32; Transition::COUNT]);

impl Tally {
    pub fn get(&self, t: Transition) -> u32 {
        self.0[t as usize]
    }

    fn bump(&mut self, t: Transition) {
        self.0[t as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| v as u64).sum()
    }
}

/// Resolves the instantaneous infected state to `Sy` or `Asy`.
///
/// Vaccinated nodes develop symptoms with probability `(1 - v_eff2) * p_sy`.
pub fn resolve_infection_branch<R: Rng + ?Sized>(
    flags: NodeFlags,
    p_sy: f64,
    v_eff2: f64,
    rng: &mut R,
) -> NodeState {
    let p = symptomatic_probability(flags, p_sy, v_eff2);
    if rng.gen::<f64>() < p {
        NodeState::Sy
    } else {
        NodeState::Asy
    }
}

pub fn symptomatic_probability(flags: NodeFlags, p_sy: f64, v_eff2: f64) -> f64 {
    if flags.vaccinated {
        (1.0 - v_eff2) * p_sy
    } else {
        p_sy
    }
}

/// Probability that a susceptible node with `k` infectious neighbours is
/// exposed today.
pub fn exposure_probability(flags: NodeFlags, k: u32, p_e: f64, v_eff1: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let p = if flags.vaccinated {
        (1.0 - v_eff1) * p_e
    } else {
        p_e
    };
    1.0 - (1.0 - p).powi(k as i32)
}

/// Advances one region by one day.
pub fn step_region(region: &mut RegionGraph, day: DayContext, params: &EpiParams) -> Result<Tally> {
    region.check_shape()?;
    let RegionGraph {
        states,
        flags,
        suite,
        rng,
        pressure,
        cum_exposed,
        cum_symptomatic,
        ..
    } = region;

    pressure.iter_mut().for_each(|p| *p = 0);
    if day.p_e > 0.0 {
        for (i, s) in states.iter().enumerate() {
            if s.is_infectious() {
                for &j in suite.neighbors(day.level, i) {
                    if states[j as usize] == NodeState::S {
                        pressure[j as usize] += 1;
                    }
                }
            }
        }
    }

    let mut tally = Tally::default();
    let p = params;
    for i in 0..states.len() {
        let state = states[i];
        let next = match state {
            NodeState::S => {
                let prob = exposure_probability(flags[i], pressure[i], day.p_e, p.v_eff1);
                if prob > 0.0 && rng.gen::<f64>() < prob {
                    tally.bump(Transition::SToE);
                    *cum_exposed += 1;
                    NodeState::E
                } else {
                    state
                }
            }
            NodeState::E => {
                if rng.gen::<f64>() < p.p_i {
                    let s = resolve_infection_branch(flags[i], p.p_sy, p.v_eff2, rng);
                    if s == NodeState::Sy {
                        tally.bump(Transition::EToSy);
                        *cum_symptomatic += 1;
                    } else {
                        tally.bump(Transition::EToAsy);
                    }
                    s
                } else {
                    state
                }
            }
            NodeState::Sy | NodeState::QSy => {
                let u = rng.gen::<f64>();
                let quarantined = state == NodeState::QSy;
                if u < p.p_syh {
                    tally.bump(if quarantined { Transition::QsyToH } else { Transition::SyToH });
                    NodeState::H
                } else if u < p.p_syh + p.p_r {
                    tally.bump(if quarantined { Transition::QsyToR } else { Transition::SyToR });
                    NodeState::R
                } else {
                    state
                }
            }
            NodeState::Asy | NodeState::QAsy => {
                if rng.gen::<f64>() < p.p_r {
                    tally.bump(if state == NodeState::QAsy {
                        Transition::QasyToR
                    } else {
                        Transition::AsyToR
                    });
                    NodeState::R
                } else {
                    state
                }
            }
            NodeState::H => {
                let u = rng.gen::<f64>();
                if u < p.p_hd {
                    tally.bump(Transition::HToD);
                    NodeState::D
                } else if u < p.p_hd + p.p_hr {
                    tally.bump(Transition::HToR);
                    NodeState::R
                } else {
                    state
                }
            }
            NodeState::QS => {
                if rng.gen::<f64>() < p.p_s {
                    tally.bump(Transition::QsToS);
                    NodeState::S
                } else {
                    state
                }
            }
            NodeState::QE => {
                let u = rng.gen::<f64>();
                if u < p.p_s {
                    tally.bump(Transition::QeToE);
                    NodeState::E
                } else if u < p.p_s + p.p_i {
                    let s = resolve_infection_branch(flags[i], p.p_sy, p.v_eff2, rng);
                    if s == NodeState::Sy {
                        tally.bump(Transition::QeToQsy);
                        *cum_symptomatic += 1;
                        NodeState::QSy
                    } else {
                        tally.bump(Transition::QeToQasy);
                        NodeState::QAsy
                    }
                } else {
                    state
                }
            }
            NodeState::R | NodeState::D => state,
        };
        states[i] = next;
    }
    Ok(tally)
}
