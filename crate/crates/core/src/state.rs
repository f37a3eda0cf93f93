//! Compartments and per-node flags.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// Persistent compartment of a node.
///
/// The infected branching state `I` (and its quarantined twin) is never
/// stored: a node entering it is resolved to `Sy`/`Asy` within the same step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeState {
    S = 0,
    E,
    Asy,
    Sy,
    H,
    R,
    D,
    QS,
    QE,
    QAsy,
    QSy,
}

impl NodeState {
    pub const COUNT: usize = 11;

    pub const ALL: [NodeState; Self::COUNT] = [
        NodeState::S,
        NodeState::E,
        NodeState::Asy,
        NodeState::Sy,
        NodeState::H,
        NodeState::R,
        NodeState::D,
        NodeState::QS,
        NodeState::QE,
        NodeState::QAsy,
        NodeState::QSy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeState::S => "S",
            NodeState::E => "E",
            NodeState::Asy => "Asy",
            NodeState::Sy => "Sy",
            NodeState::H => "H",
            NodeState::R => "R",
            NodeState::D => "D",
            NodeState::QS => "Q_S",
            NodeState::QE => "Q_E",
            NodeState::QAsy => "Q_Asy",
            NodeState::QSy => "Q_Sy",
        }
    }

    pub fn is_quarantined(self) -> bool {
        matches!(
            self,
            NodeState::QS | NodeState::QE | NodeState::QAsy | NodeState::QSy
        )
    }

    /// Spreads the disease along graph edges.
    pub fn is_infectious(self) -> bool {
        matches!(self, NodeState::Asy | NodeState::Sy)
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, NodeState::R | NodeState::D)
    }

    /// Quarantined twin, for states that have one.
    pub fn quarantined(self) -> Option<NodeState> {
        match self {
            NodeState::S => Some(NodeState::QS),
            NodeState::E => Some(NodeState::QE),
            NodeState::Asy => Some(NodeState::QAsy),
            NodeState::Sy => Some(NodeState::QSy),
            _ => None,
        }
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFlags {
    pub vaccinated: bool,
    pub child: bool,
}

/// Head-count per compartment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Compartments(pub [u32; NodeState::COUNT]);

impl Compartments {
    pub fn from_states(states: &[NodeState]) -> Self {
        let mut c = Self::default();
        for s in states {
            c[*s] += 1;
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| v as u64).sum()
    }

    /// Non-quarantined infectious nodes.
    pub fn infectious(&self) -> u32 {
        self[NodeState::Asy] + self[NodeState::Sy]
    }

    pub fn add(&mut self, other: &Compartments) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += *b;
        }
    }
}

impl Index<NodeState> for Compartments {
    type Output = u32;
    fn index(&self, s: NodeState) -> &u32 {
        &self.0[s.index()]
    }
}

impl IndexMut<NodeState> for Compartments {
    fn index_mut(&mut self, s: NodeState) -> &mut u32 {
        &mut self.0[s.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_order() {
        for (i, s) in NodeState::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
        }
        assert_eq!(NodeState::QAsy.label(), "Q_Asy");
    }

    #[test]
    fn quarantine_twins() {
        assert_eq!(NodeState::S.quarantined(), Some(NodeState::QS));
        assert_eq!(NodeState::H.quarantined(), None);
        assert!(NodeState::QE.is_quarantined());
        assert!(!NodeState::QSy.is_infectious());
    }

    #[test]
    fn counting() {
        let c = Compartments::from_states(&[NodeState::S, NodeState::S, NodeState::Sy, NodeState::QAsy]);
        assert_eq!(c[NodeState::S], 2);
        assert_eq!(c.infectious(), 1);
        assert_eq!(c.total(), 4);
    }
}
