//! Road network graph model: nodes, edges with a mutable per-direction lane
//! split, and free-flow shortest-path routing.
//!
//! Edge endpoints are stored normalized as `(lower id, higher id)`. The
//! *upstream* traversal direction always goes from the lower node id to the
//! higher one; *downstream* is the opposite. The total lane count of an edge
//! is immutable; only the split between the two directions changes, and each
//! direction keeps at least one lane.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Identifier of a road intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Identifier of a road segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Traversal direction of an edge relative to node-id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// From the lower node id to the higher one.
    Upstream,
    /// From the higher node id to the lower one.
    Downstream,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Upstream => Direction::Downstream,
            Direction::Downstream => Direction::Upstream,
        }
    }

    /// +1 for upstream, -1 for downstream.
    pub fn sign(self) -> i8 {
        match self {
            Direction::Upstream => 1,
            Direction::Downstream => -1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Upstream => "up",
            Direction::Downstream => "down",
        }
    }
}

/// Which traversal direction gains one lane (the other donates it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LaneShift {
    /// Upstream gains a lane (+1).
    GainUpstream,
    /// Downstream gains a lane (-1).
    GainDownstream,
    /// No change (0).
    Keep,
}

impl LaneShift {
    pub fn sign(self) -> i8 {
        match self {
            LaneShift::GainUpstream => 1,
            LaneShift::GainDownstream => -1,
            LaneShift::Keep => 0,
        }
    }

    pub fn from_sign(sign: i8) -> Option<LaneShift> {
        match sign {
            1 => Some(LaneShift::GainUpstream),
            -1 => Some(LaneShift::GainDownstream),
            0 => Some(LaneShift::Keep),
            _ => None,
        }
    }

    /// The shift that undoes this one.
    pub fn inverse(self) -> LaneShift {
        match self {
            LaneShift::GainUpstream => LaneShift::GainDownstream,
            LaneShift::GainDownstream => LaneShift::GainUpstream,
            LaneShift::Keep => LaneShift::Keep,
        }
    }

    /// The direction that gains a lane, if any.
    pub fn gaining(self) -> Option<Direction> {
        match self {
            LaneShift::GainUpstream => Some(Direction::Upstream),
            LaneShift::GainDownstream => Some(Direction::Downstream),
            LaneShift::Keep => None,
        }
    }
}

/// A single lane reassignment request on one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneChange {
    pub edge: EdgeId,
    pub shift: LaneShift,
}

/// A road intersection. Positions are planar meters, used for signal phase
/// grouping and turn geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

/// A road segment between two intersections.
///
/// `lanes_up + lanes_down == lanes_total` holds at all times; both directions
/// keep at least one lane. The total is immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    id: EdgeId,
    lo: NodeId,
    hi: NodeId,
    lanes_total: u32,
    lanes_up: u32,
    lanes_down: u32,
    length_m: f64,
    freeflow_mps: f64,
}

impl RoadEdge {
    /// Builds an edge, normalizing the endpoints to `(lower, higher)`.
    /// `lanes_up` counts the lanes in the upstream direction.
    pub fn new(
        id: EdgeId,
        a: NodeId,
        b: NodeId,
        lanes_total: u32,
        lanes_up: u32,
        length_m: f64,
        freeflow_mps: f64,
    ) -> Result<RoadEdge, NetworkError> {
        if a == b {
            return Err(NetworkError::SelfLoop(id));
        }
        if lanes_total < 2 || lanes_up < 1 || lanes_up + 1 > lanes_total {
            return Err(NetworkError::LaneSplitInvalid {
                edge: id,
                lanes_total,
                lanes_up,
                lanes_down: lanes_total.saturating_sub(lanes_up),
            });
        }
        if !(length_m > 0.0) || !length_m.is_finite() {
            return Err(NetworkError::NonPositiveLength(id));
        }
        if !(freeflow_mps > 0.0) || !freeflow_mps.is_finite() {
            return Err(NetworkError::NonPositiveSpeed(id));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Ok(RoadEdge {
            id,
            lo,
            hi,
            lanes_total,
            lanes_up,
            lanes_down: lanes_total - lanes_up,
            length_m,
            freeflow_mps,
        })
    }

    pub fn id(&self) -> EdgeId {
        self.id
    }

    /// Endpoints as `(lower id, higher id)`.
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.lo, self.hi)
    }

    pub fn lanes_total(&self) -> u32 {
        self.lanes_total
    }

    pub fn lanes(&self, dir: Direction) -> u32 {
        match dir {
            Direction::Upstream => self.lanes_up,
            Direction::Downstream => self.lanes_down,
        }
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn freeflow_mps(&self) -> f64 {
        self.freeflow_mps
    }

    /// Free-flow traversal time in seconds.
    pub fn freeflow_s(&self) -> f64 {
        self.length_m / self.freeflow_mps
    }

    /// The node a traversal in `dir` ends at.
    pub fn node_toward(&self, dir: Direction) -> NodeId {
        match dir {
            Direction::Upstream => self.hi,
            Direction::Downstream => self.lo,
        }
    }

    /// The node a traversal in `dir` starts from.
    pub fn node_from(&self, dir: Direction) -> NodeId {
        self.node_toward(dir.opposite())
    }

    /// The opposite endpoint of `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if node == self.lo {
            self.hi
        } else {
            self.lo
        }
    }

    /// Traversal direction when leaving `node` over this edge.
    pub fn direction_from(&self, node: NodeId) -> Direction {
        if node == self.lo {
            Direction::Upstream
        } else {
            Direction::Downstream
        }
    }

    fn shift(&mut self, shift: LaneShift) -> Result<(), ChangeRejected> {
        match shift {
            LaneShift::Keep => Ok(()),
            LaneShift::GainUpstream => {
                if self.lanes_down < 2 {
                    return Err(ChangeRejected {
                        edge: self.id,
                        shift,
                    });
                }
                self.lanes_up += 1;
                self.lanes_down -= 1;
                debug_assert_eq!(self.lanes_up + self.lanes_down, self.lanes_total);
                Ok(())
            }
            LaneShift::GainDownstream => {
                if self.lanes_up < 2 {
                    return Err(ChangeRejected {
                        edge: self.id,
                        shift,
                    });
                }
                self.lanes_down += 1;
                self.lanes_up -= 1;
                debug_assert_eq!(self.lanes_up + self.lanes_down, self.lanes_total);
                Ok(())
            }
        }
    }
}

/// One step of a vehicle path: an edge and the direction it is traversed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub edge: EdgeId,
    pub dir: Direction,
}

/// A fixed route: the edge sequence of a shortest path plus its total
/// free-flow travel time in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAssignment {
    pub steps: Vec<PathStep>,
    pub freeflow_s: f64,
}

/// Validation failure while assembling a network.
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkError {
    DuplicateNode(NodeId),
    DuplicateEdge(EdgeId),
    DanglingEndpoint { edge: EdgeId, node: NodeId },
    SelfLoop(EdgeId),
    LaneSplitInvalid {
        edge: EdgeId,
        lanes_total: u32,
        lanes_up: u32,
        lanes_down: u32,
    },
    NonPositiveLength(EdgeId),
    NonPositiveSpeed(EdgeId),
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::DuplicateNode(n) => write!(f, "duplicate node id {n}"),
            NetworkError::DuplicateEdge(e) => write!(f, "duplicate edge id {e}"),
            NetworkError::DanglingEndpoint { edge, node } => {
                write!(f, "edge {edge} references unknown node {node}")
            }
            NetworkError::SelfLoop(e) => write!(f, "edge {e} connects a node to itself"),
            NetworkError::LaneSplitInvalid {
                edge,
                lanes_total,
                lanes_up,
                lanes_down,
            } => write!(
                f,
                "edge {edge} has an invalid lane split: total {lanes_total}, upstream {lanes_up}, downstream {lanes_down} (need total >= 2 and >= 1 per direction, summing to total)"
            ),
            NetworkError::NonPositiveLength(e) => write!(f, "edge {e} has non-positive length"),
            NetworkError::NonPositiveSpeed(e) => {
                write!(f, "edge {e} has non-positive free-flow speed")
            }
        }
    }
}

impl core::error::Error for NetworkError {}

/// A lane change was refused: either the donating direction would drop below
/// one lane, or (at the simulation level) the edge is still clearing a
/// previous change. The caller treats this as a no-op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChangeRejected {
    pub edge: EdgeId,
    pub shift: LaneShift,
}

impl fmt::Display for ChangeRejected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lane change on edge {} rejected", self.edge)
    }
}

impl core::error::Error for ChangeRejected {}

/// Routing failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteError {
    UnknownNode(NodeId),
    Unreachable { origin: NodeId, destination: NodeId },
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::UnknownNode(n) => write!(f, "unknown node id {n}"),
            RouteError::Unreachable {
                origin,
                destination,
            } => write!(f, "no path from node {origin} to node {destination}"),
        }
    }
}

impl core::error::Error for RouteError {}

/// The road network graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: BTreeMap<NodeId, RoadNode>,
    edges: BTreeMap<EdgeId, RoadEdge>,
    adjacency: BTreeMap<NodeId, Vec<EdgeId>>,
}

impl RoadNetwork {
    /// Assembles and validates a network. Empty node/edge lists are allowed.
    pub fn new(nodes: Vec<RoadNode>, edges: Vec<RoadEdge>) -> Result<RoadNetwork, NetworkError> {
        let mut node_map = BTreeMap::new();
        for node in nodes {
            if node_map.insert(node.id, node).is_some() {
                return Err(NetworkError::DuplicateNode(node.id));
            }
        }
        let mut adjacency: BTreeMap<NodeId, Vec<EdgeId>> =
            node_map.keys().map(|&id| (id, Vec::new())).collect();
        let mut edge_map = BTreeMap::new();
        for edge in edges {
            let (lo, hi) = edge.endpoints();
            for node in [lo, hi] {
                if !node_map.contains_key(&node) {
                    return Err(NetworkError::DanglingEndpoint {
                        edge: edge.id,
                        node,
                    });
                }
            }
            let id = edge.id;
            if edge_map.insert(id, edge).is_some() {
                return Err(NetworkError::DuplicateEdge(id));
            }
            adjacency.get_mut(&lo).expect("endpoint checked").push(id);
            adjacency.get_mut(&hi).expect("endpoint checked").push(id);
        }
        for incident in adjacency.values_mut() {
            incident.sort_unstable();
        }
        Ok(RoadNetwork {
            nodes: node_map,
            edges: edge_map,
            adjacency,
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&RoadNode> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&RoadEdge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &RoadNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &RoadEdge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge ids incident to `node`, sorted ascending.
    pub fn incident(&self, node: NodeId) -> &[EdgeId] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Applies a lane reassignment. `Keep` is a no-op. Fails when the
    /// donating direction would drop below one lane; the network is left
    /// untouched in that case.
    pub fn apply_lane_change(&mut self, change: LaneChange) -> Result<(), ChangeRejected> {
        if change.shift == LaneShift::Keep {
            return Ok(());
        }
        let edge = self.edges.get_mut(&change.edge).ok_or(ChangeRejected {
            edge: change.edge,
            shift: change.shift,
        })?;
        edge.shift(change.shift)
    }

    /// Shortest path by free-flow travel time, treating every edge as
    /// traversable in both directions. Ties are broken toward the
    /// lexicographically smallest node-id sequence (then lowest edge ids),
    /// so routing is fully reproducible.
    pub fn shortest_path(
        &self,
        origin: NodeId,
        destination: NodeId,
    ) -> Result<PathAssignment, RouteError> {
        if !self.nodes.contains_key(&origin) {
            return Err(RouteError::UnknownNode(origin));
        }
        if !self.nodes.contains_key(&destination) {
            return Err(RouteError::UnknownNode(destination));
        }
        if origin == destination {
            return Ok(PathAssignment {
                steps: Vec::new(),
                freeflow_s: 0.0,
            });
        }

        let mut settled = BTreeSet::new();
        let mut heap = BinaryHeap::new();
        heap.push(Candidate {
            cost: 0.0,
            nodes: alloc::vec![origin],
            edges: Vec::new(),
        });
        while let Some(candidate) = heap.pop() {
            let at = *candidate.nodes.last().expect("candidate has origin");
            if !settled.insert(at) {
                continue;
            }
            if at == destination {
                let steps = candidate
                    .edges
                    .iter()
                    .zip(candidate.nodes.windows(2))
                    .map(|(&edge, pair)| PathStep {
                        edge,
                        dir: if pair[0] < pair[1] {
                            Direction::Upstream
                        } else {
                            Direction::Downstream
                        },
                    })
                    .collect();
                return Ok(PathAssignment {
                    steps,
                    freeflow_s: candidate.cost,
                });
            }
            for &edge_id in self.incident(at) {
                let edge = &self.edges[&edge_id];
                let next = edge.other(at);
                if settled.contains(&next) {
                    continue;
                }
                let mut nodes = candidate.nodes.clone();
                nodes.push(next);
                let mut edges = candidate.edges.clone();
                edges.push(edge_id);
                heap.push(Candidate {
                    cost: candidate.cost + edge.freeflow_s(),
                    nodes,
                    edges,
                });
            }
        }
        Err(RouteError::Unreachable {
            origin,
            destination,
        })
    }
}

/// Heap entry for routing: ordered so the cheapest cost pops first, with the
/// lexicographically smallest node sequence (then edge sequence) winning ties.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    cost: f64,
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the smallest key pops first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.nodes.cmp(&self.nodes))
            .then_with(|| other.edges.cmp(&self.edges))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
