//! Trip demand: origin-destination records, up-sampling, and per-edge
//! directional demand aggregation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::netgraph::{Direction, EdgeId, NodeId, PathAssignment};

/// A batch of identical vehicles: same origin, destination and departure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trip {
    pub origin: NodeId,
    pub destination: NodeId,
    pub depart_s: u32,
    pub count: u32,
}

impl Trip {
    pub fn new(
        origin: NodeId,
        destination: NodeId,
        depart_s: u32,
        count: u32,
    ) -> Result<Trip, TripError> {
        if origin == destination {
            return Err(TripError::SameEndpoints(origin));
        }
        if count == 0 {
            return Err(TripError::ZeroCount);
        }
        Ok(Trip {
            origin,
            destination,
            depart_s,
            count,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripError {
    SameEndpoints(NodeId),
    ZeroCount,
}

impl fmt::Display for TripError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TripError::SameEndpoints(n) => {
                write!(f, "trip origin and destination are both node {n}")
            }
            TripError::ZeroCount => write!(f, "trip vehicle count must be at least 1"),
        }
    }
}

impl core::error::Error for TripError {}

/// Multiplies every trip's vehicle count by `factor`, leaving everything
/// else untouched. `factor` must be at least 1.
pub fn upsample(trips: &[Trip], factor: u32) -> Vec<Trip> {
    assert!(factor >= 1, "upsample factor must be at least 1");
    trips
        .iter()
        .map(|t| Trip {
            count: t.count * factor,
            ..*t
        })
        .collect()
}

/// Per-edge vehicle counts split by traversal direction, accumulated over
/// one demand window.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DemandTable {
    counts: BTreeMap<EdgeId, (u64, u64)>,
}

impl DemandTable {
    pub fn new() -> DemandTable {
        DemandTable::default()
    }

    /// Adds `count` vehicles following `path` to every edge the path crosses.
    pub fn add_path(&mut self, path: &PathAssignment, count: u64) {
        for step in &path.steps {
            let entry = self.counts.entry(step.edge).or_insert((0, 0));
            match step.dir {
                Direction::Upstream => entry.0 += count,
                Direction::Downstream => entry.1 += count,
            }
        }
    }

    /// `(upstream, downstream)` demand on `edge`; zero when unseen.
    pub fn get(&self, edge: EdgeId) -> (u64, u64) {
        self.counts.get(&edge).copied().unwrap_or((0, 0))
    }

    /// Edges with non-zero demand, in ascending edge-id order.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, (u64, u64))> + '_ {
        self.counts.iter().map(|(&e, &c)| (e, c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total of upstream plus downstream demand over all edges.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&(u, d)| u + d).sum()
    }

    pub fn reset(&mut self) {
        self.counts.clear();
    }
}

/// Aggregates directional demand over a set of `(path, vehicle count)`
/// assignments. The result is independent of input order.
pub fn demand_per_edge<'a, I>(assignments: I) -> DemandTable
where
    I: IntoIterator<Item = (&'a PathAssignment, u64)>,
{
    let mut table = DemandTable::new();
    for (path, count) in assignments {
        table.add_path(path, count);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::PathStep;

    fn path(steps: &[(u32, Direction)]) -> PathAssignment {
        PathAssignment {
            steps: steps
                .iter()
                .map(|&(e, dir)| PathStep {
                    edge: EdgeId(e),
                    dir,
                })
                .collect(),
            freeflow_s: steps.len() as f64,
        }
    }

    #[test]
    fn trip_validation() {
        assert!(Trip::new(NodeId(3), NodeId(7), 60, 2).is_ok());
        assert_eq!(
            Trip::new(NodeId(3), NodeId(3), 60, 2).unwrap_err(),
            TripError::SameEndpoints(NodeId(3))
        );
        assert_eq!(
            Trip::new(NodeId(3), NodeId(7), 60, 0).unwrap_err(),
            TripError::ZeroCount
        );
    }

    #[test]
    fn upsample_identity_and_scaling() {
        let trips = alloc::vec![
            Trip::new(NodeId(0), NodeId(1), 0, 2).unwrap(),
            Trip::new(NodeId(1), NodeId(2), 30, 5).unwrap(),
        ];
        assert_eq!(upsample(&trips, 1), trips);
        let tripled = upsample(&trips, 3);
        assert_eq!(tripled[0].count, 6);
        assert_eq!(tripled[1].count, 15);
        let before: u64 = trips.iter().map(|t| t.count as u64).sum();
        let after: u64 = tripled.iter().map(|t| t.count as u64).sum();
        assert_eq!(after, before * 3);
    }

    #[test]
    fn single_path_counts_once_per_edge() {
        let p = path(&[(1, Direction::Upstream)]);
        let table = demand_per_edge([(&p, 5)]);
        assert_eq!(table.get(EdgeId(1)), (5, 0));
    }

    #[test]
    fn opposite_directions_accumulate_separately() {
        let up = path(&[(1, Direction::Upstream)]);
        let down = path(&[(1, Direction::Downstream)]);
        let table = demand_per_edge([(&up, 5), (&down, 3)]);
        assert_eq!(table.get(EdgeId(1)), (5, 3));
    }

    #[test]
    fn empty_input_gives_empty_table() {
        let table = demand_per_edge(core::iter::empty());
        assert!(table.is_empty());
        assert_eq!(table.get(EdgeId(0)), (0, 0));
    }

    #[test]
    fn totals_match_path_edge_incidences() {
        let a = path(&[(0, Direction::Upstream), (1, Direction::Downstream)]);
        let b = path(&[(1, Direction::Upstream), (2, Direction::Upstream), (3, Direction::Downstream)]);
        let table = demand_per_edge([(&a, 4), (&b, 2)]);
        let incidences = 4 * a.steps.len() as u64 + 2 * b.steps.len() as u64;
        assert_eq!(table.total(), incidences);
    }

    #[test]
    fn aggregation_is_order_independent() {
        let a = path(&[(0, Direction::Upstream), (1, Direction::Downstream)]);
        let b = path(&[(1, Direction::Upstream)]);
        let c = path(&[(0, Direction::Downstream), (1, Direction::Upstream)]);
        let fwd = demand_per_edge([(&a, 1), (&b, 2), (&c, 3)]);
        let rev = demand_per_edge([(&c, 3), (&b, 2), (&a, 1)]);
        assert_eq!(fwd, rev);
    }
}
