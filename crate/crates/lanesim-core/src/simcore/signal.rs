//! Static two-phase traffic signals.

use alloc::vec::Vec;

use crate::netgraph::{Direction, EdgeId, NodeId, RoadNetwork};

use super::SimParams;

/// One signal phase: the approaches (edge plus traversal direction toward
/// the node) that get green, and for how long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalPhase {
    pub id: u8,
    pub green: Vec<(EdgeId, Direction)>,
    pub duration_s: u32,
}

/// Fixed-cycle signal at one intersection. Phase 0 serves the east-west
/// approaches, phase 1 the north-south ones; all intersections share the
/// same cycle aligned at t = 0, and exactly one phase is active per tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionSignal {
    pub node: NodeId,
    pub phases: Vec<SignalPhase>,
    cycle_s: u32,
}

impl IntersectionSignal {
    /// Builds the two-phase plan for `node`, grouping approaches by the
    /// dominant axis of the incoming edge.
    pub fn build(net: &RoadNetwork, node: NodeId, params: &SimParams) -> IntersectionSignal {
        let mut horizontal = Vec::new();
        let mut vertical = Vec::new();
        let here = net.node(node).expect("signal node exists");
        for &edge_id in net.incident(node) {
            let edge = net.edge(edge_id).expect("incident edge exists");
            let other = net.node(edge.other(node)).expect("endpoint exists");
            let dx = here.x - other.x;
            let dy = here.y - other.y;
            let approach = (edge_id, edge.direction_from(other.id));
            if dx.abs() >= dy.abs() {
                horizontal.push(approach);
            } else {
                vertical.push(approach);
            }
        }
        let phases = alloc::vec![
            SignalPhase {
                id: 0,
                green: horizontal,
                duration_s: params.phase_duration_s,
            },
            SignalPhase {
                id: 1,
                green: vertical,
                duration_s: params.phase_duration_s,
            },
        ];
        let cycle_s = phases.iter().map(|p| p.duration_s).sum();
        IntersectionSignal {
            node,
            phases,
            cycle_s,
        }
    }

    pub fn cycle_s(&self) -> u32 {
        self.cycle_s
    }

    /// The phase active at time `now_s`.
    pub fn active_phase(&self, now_s: u32) -> &SignalPhase {
        debug_assert!(self.cycle_s > 0);
        let mut pos = now_s % self.cycle_s;
        for phase in &self.phases {
            if pos < phase.duration_s {
                return phase;
            }
            pos -= phase.duration_s;
        }
        unreachable!("phase durations cover the cycle")
    }

    /// Whether the approach `(edge, dir)` has green at `now_s`.
    pub fn is_green(&self, now_s: u32, edge: EdgeId, dir: Direction) -> bool {
        self.active_phase(now_s).green.contains(&(edge, dir))
    }
}
