//! Path dependency graph: how a lane change on one road segment propagates
//! to the segments that active vehicles will traverse later.
//!
//! A vertex stands for one road segment *as traversed in one direction*; the
//! same segment crossed upstream by some vehicles and downstream by others
//! yields two vertices. A directed edge from `a` to `b` records that at least
//! one vehicle crosses `a`'s segment before `b`'s, and carries an impact sign:
//! positive when both crossings run the same way relative to node-id order,
//! negative otherwise.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::netgraph::{Direction, EdgeId, LaneShift, PathStep};

/// Which traversal direction of a segment carries a clearly higher queue
/// load, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Imbalance {
    Upstream,
    Downstream,
    None,
}

/// Queue-share imbalance: a direction is imbalanced when its share of the
/// total queued vehicles on the segment exceeds `p`. Empty segments are
/// balanced by convention.
pub fn imbalance(q_up: u64, q_down: u64, p: f64) -> Imbalance {
    let total = q_up + q_down;
    if total == 0 {
        return Imbalance::None;
    }
    let total = total as f64;
    if q_up as f64 / total > p {
        Imbalance::Upstream
    } else if q_down as f64 / total > p {
        Imbalance::Downstream
    } else {
        Imbalance::None
    }
}

/// Sign relation between a change at the source vertex and the change it
/// induces at the target vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Impact {
    /// Both segments are crossed the same way: the induced change has the
    /// same sign (+1).
    Same,
    /// Crossed opposite ways: the induced change has the opposite sign (-1).
    Opposite,
}

impl Impact {
    pub fn sign(self) -> i8 {
        match self {
            Impact::Same => 1,
            Impact::Opposite => -1,
        }
    }

    /// Impact of a pair of traversal directions: `Same` when equal.
    pub fn of(first: Direction, second: Direction) -> Impact {
        if first == second {
            Impact::Same
        } else {
            Impact::Opposite
        }
    }
}

/// The lane change induced at a downstream vertex: the sign product of the
/// connecting impact and the source change.
pub fn consequential_change(impact: Impact, change: LaneShift) -> LaneShift {
    LaneShift::from_sign(impact.sign() * change.sign()).expect("sign product stays in -1..=1")
}

/// Set of induced-change signs accumulated at a vertex.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConsequentialSet {
    pub gain_upstream: bool,
    pub gain_downstream: bool,
    pub keep: bool,
}

impl ConsequentialSet {
    /// Inserts a change; returns true when it was not present yet.
    pub fn insert(&mut self, change: LaneShift) -> bool {
        let slot = match change {
            LaneShift::GainUpstream => &mut self.gain_upstream,
            LaneShift::GainDownstream => &mut self.gain_downstream,
            LaneShift::Keep => &mut self.keep,
        };
        let fresh = !*slot;
        *slot = true;
        fresh
    }

    pub fn contains(&self, change: LaneShift) -> bool {
        match change {
            LaneShift::GainUpstream => self.gain_upstream,
            LaneShift::GainDownstream => self.gain_downstream,
            LaneShift::Keep => self.keep,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.gain_upstream || self.gain_downstream || self.keep)
    }
}

/// Key of a vertex: the road segment plus the traversal direction it
/// represents.
pub type VertexKey = (EdgeId, Direction);

/// One vertex of the dependency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PdgVertex {
    pub edge: EdgeId,
    pub dir: Direction,
    /// Change requested for the segment; `None` until an agent proposal is
    /// seeded or the evaluation creates one.
    pub proposed: Option<LaneShift>,
    /// Changes induced here by changes elsewhere.
    pub consequential: ConsequentialSet,
    /// Queue imbalance of the segment at build time (already gated by the
    /// persistence window).
    pub imbalance: Imbalance,
    pub lanes_up: u32,
    pub lanes_down: u32,
}

/// Build-time context for one road segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeCtx {
    pub lanes_up: u32,
    pub lanes_down: u32,
    pub imbalance: Imbalance,
}

impl Default for EdgeCtx {
    fn default() -> Self {
        EdgeCtx {
            lanes_up: 1,
            lanes_down: 1,
            imbalance: Imbalance::None,
        }
    }
}

/// The path dependency graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdg {
    vertices: BTreeMap<VertexKey, PdgVertex>,
    out: BTreeMap<VertexKey, Vec<(VertexKey, Impact)>>,
    lookup: usize,
}

impl Pdg {
    /// Builds the graph from the remaining paths of active vehicles. Only
    /// the next `lookup` steps of each path are considered. `ctx` supplies
    /// each segment's lane split and gated imbalance; segments missing from
    /// it get a balanced 1/1 default.
    pub fn build<'a, I>(paths: I, lookup: usize, ctx: &BTreeMap<EdgeId, EdgeCtx>) -> Pdg
    where
        I: IntoIterator<Item = &'a [PathStep]>,
    {
        assert!(lookup >= 1, "lookup distance must be at least 1");
        let mut vertices: BTreeMap<VertexKey, PdgVertex> = BTreeMap::new();
        let mut edge_set: BTreeSet<(VertexKey, VertexKey)> = BTreeSet::new();
        for path in paths {
            let window = &path[..path.len().min(lookup)];
            for step in window {
                vertices.entry((step.edge, step.dir)).or_insert_with(|| {
                    let c = ctx.get(&step.edge).copied().unwrap_or_default();
                    PdgVertex {
                        edge: step.edge,
                        dir: step.dir,
                        proposed: None,
                        consequential: ConsequentialSet::default(),
                        imbalance: c.imbalance,
                        lanes_up: c.lanes_up,
                        lanes_down: c.lanes_down,
                    }
                });
            }
            for (i, first) in window.iter().enumerate() {
                for second in &window[i + 1..] {
                    let a = (first.edge, first.dir);
                    let b = (second.edge, second.dir);
                    if a != b {
                        edge_set.insert((a, b));
                    }
                }
            }
        }
        let mut out: BTreeMap<VertexKey, Vec<(VertexKey, Impact)>> = BTreeMap::new();
        for (a, b) in edge_set {
            out.entry(a).or_default().push((b, Impact::of(a.1, b.1)));
        }
        Pdg {
            vertices,
            out,
            lookup,
        }
    }

    pub fn lookup(&self) -> usize {
        self.lookup
    }

    pub fn vertex(&self, key: VertexKey) -> Option<&PdgVertex> {
        self.vertices.get(&key)
    }

    pub(crate) fn vertex_mut(&mut self, key: VertexKey) -> Option<&mut PdgVertex> {
        self.vertices.get_mut(&key)
    }

    pub fn vertices(&self) -> impl Iterator<Item = (&VertexKey, &PdgVertex)> {
        self.vertices.iter()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Both vertices of `edge`, whichever exist.
    pub fn segment_vertices(&self, edge: EdgeId) -> impl Iterator<Item = VertexKey> + '_ {
        [Direction::Upstream, Direction::Downstream]
            .into_iter()
            .filter(move |&d| self.vertices.contains_key(&(edge, d)))
            .map(move |d| (edge, d))
    }

    /// Out-neighbours of `key` with the impact of the connecting edge,
    /// sorted by target key.
    pub fn neighbors(&self, key: VertexKey) -> &[(VertexKey, Impact)] {
        self.out.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn out_degree(&self, key: VertexKey) -> usize {
        self.neighbors(key).len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.vertices
            .keys()
            .map(|&k| self.out_degree(k))
            .max()
            .unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(Vec::len).sum()
    }

    /// Graphviz dump with impact labels on edges and the proposed change and
    /// imbalance on vertices.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph pdg {\n");
        for (&(edge, dir), v) in &self.vertices {
            let proposed = match v.proposed {
                Some(p) => p.sign(),
                None => 0,
            };
            let _ = writeln!(
                s,
                "  \"e{}_{}\" [label=\"e{} {} ({:+}, {:?})\"];",
                edge,
                dir.label(),
                edge,
                dir.label(),
                proposed,
                v.imbalance
            );
        }
        for (&(edge, dir), targets) in &self.out {
            for &((te, td), impact) in targets {
                let _ = writeln!(
                    s,
                    "  \"e{}_{}\" -> \"e{}_{}\" [label=\"{:+}\"];",
                    edge,
                    dir.label(),
                    te,
                    td.label(),
                    impact.sign()
                );
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Tracks how long each segment's raw imbalance value has persisted, and
/// exposes it only once it has held for a full window. Both the learning
/// agents and the coordinator gate on this, so a flickering imbalance never
/// triggers a change anywhere.
#[derive(Debug, Clone, Default)]
pub struct ImbalanceTracker {
    streaks: BTreeMap<EdgeId, (Imbalance, u32)>,
}

impl ImbalanceTracker {
    pub fn new() -> ImbalanceTracker {
        ImbalanceTracker::default()
    }

    /// Records the raw imbalance of `edge` at time `now_s`. Call once per
    /// tick per edge.
    pub fn record(&mut self, now_s: u32, edge: EdgeId, value: Imbalance) {
        match self.streaks.get_mut(&edge) {
            Some((current, _)) if *current == value => {}
            _ => {
                self.streaks.insert(edge, (value, now_s));
            }
        }
    }

    /// The imbalance of `edge`, or `None` unless the same non-balanced value
    /// has been recorded for at least `window_s` consecutive seconds up to
    /// `now_s`.
    pub fn gated(&self, edge: EdgeId, now_s: u32, window_s: u32) -> Imbalance {
        match self.streaks.get(&edge) {
            Some(&(value, since)) if value != Imbalance::None => {
                if now_s.saturating_sub(since) + 1 >= window_s {
                    value
                } else {
                    Imbalance::None
                }
            }
            _ => Imbalance::None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::PathStep;

    fn steps(seq: &[(u32, Direction)]) -> Vec<PathStep> {
        seq.iter()
            .map(|&(e, dir)| PathStep {
                edge: EdgeId(e),
                dir,
            })
            .collect()
    }

    const UP: Direction = Direction::Upstream;
    const DOWN: Direction = Direction::Downstream;

    #[test]
    fn imbalance_thresholds() {
        assert_eq!(imbalance(70, 30, 0.65), Imbalance::Upstream);
        assert_eq!(imbalance(30, 70, 0.65), Imbalance::Downstream);
        assert_eq!(imbalance(50, 50, 0.65), Imbalance::None);
        assert_eq!(imbalance(13, 13, 0.51), Imbalance::None);
        assert_eq!(imbalance(0, 0, 0.65), Imbalance::None);
        // Share exactly at the threshold does not count as imbalanced.
        assert_eq!(imbalance(65, 35, 0.65), Imbalance::None);
    }

    #[test]
    fn consequential_change_is_the_sign_product() {
        use LaneShift::*;
        assert_eq!(consequential_change(Impact::Same, GainUpstream), GainUpstream);
        assert_eq!(consequential_change(Impact::Same, GainDownstream), GainDownstream);
        assert_eq!(consequential_change(Impact::Same, Keep), Keep);
        assert_eq!(consequential_change(Impact::Opposite, GainUpstream), GainDownstream);
        assert_eq!(consequential_change(Impact::Opposite, GainDownstream), GainUpstream);
        assert_eq!(consequential_change(Impact::Opposite, Keep), Keep);
    }

    #[test]
    fn two_paths_example_graph() {
        // Path alpha crosses A, F, I, J upstream; path beta crosses C
        // upstream then F and H downstream. Segment F is crossed both ways,
        // so it appears twice.
        let (a, c, f, h, i, j) = (0u32, 1u32, 2u32, 3u32, 4u32, 5u32);
        let alpha = steps(&[(a, UP), (f, UP), (i, UP), (j, UP)]);
        let beta = steps(&[(c, UP), (f, DOWN), (h, DOWN)]);
        let pdg = Pdg::build(
            [alpha.as_slice(), beta.as_slice()],
            5,
            &BTreeMap::new(),
        );

        assert_eq!(pdg.vertex_count(), 7);
        assert_eq!(pdg.out_degree((EdgeId(a), UP)), 3);
        assert_eq!(pdg.out_degree((EdgeId(f), UP)), 2);
        assert_eq!(pdg.out_degree((EdgeId(f), DOWN)), 1);

        // All pairs along alpha run the same way.
        for &(from, to) in &[(a, f), (a, i), (a, j), (f, i), (f, j), (i, j)] {
            let impact = pdg
                .neighbors((EdgeId(from), UP))
                .iter()
                .find(|(k, _)| *k == (EdgeId(to), UP))
                .map(|&(_, imp)| imp);
            assert_eq!(impact, Some(Impact::Same));
        }
        // C runs upstream, H downstream: opposite.
        let c_h = pdg
            .neighbors((EdgeId(c), UP))
            .iter()
            .find(|(k, _)| *k == (EdgeId(h), DOWN))
            .map(|&(_, imp)| imp);
        assert_eq!(c_h, Some(Impact::Opposite));
    }

    #[test]
    fn single_segment_path_has_no_edges() {
        let p = steps(&[(7, UP)]);
        let pdg = Pdg::build([p.as_slice()], 5, &BTreeMap::new());
        assert_eq!(pdg.vertex_count(), 1);
        assert_eq!(pdg.edge_count(), 0);
    }

    #[test]
    fn lookup_truncates_paths() {
        let p = steps(&[(0, UP), (1, UP), (2, UP), (3, UP), (4, UP)]);
        let pdg = Pdg::build([p.as_slice()], 2, &BTreeMap::new());
        assert_eq!(pdg.vertex_count(), 2);
        assert_eq!(pdg.edge_count(), 1);
        assert_eq!(pdg.out_degree((EdgeId(0), UP)), 1);
    }

    #[test]
    fn rebuild_is_order_independent() {
        let p1 = steps(&[(0, UP), (1, DOWN), (2, UP)]);
        let p2 = steps(&[(1, UP), (2, UP)]);
        let p3 = steps(&[(2, DOWN), (0, UP)]);
        let ctx = BTreeMap::new();
        let fwd = Pdg::build([p1.as_slice(), p2.as_slice(), p3.as_slice()], 3, &ctx);
        let rev = Pdg::build([p3.as_slice(), p2.as_slice(), p1.as_slice()], 3, &ctx);
        assert_eq!(fwd, rev);
    }

    #[test]
    fn both_relative_orders_give_two_edges() {
        let p1 = steps(&[(0, UP), (1, UP)]);
        let p2 = steps(&[(1, UP), (0, UP)]);
        let pdg = Pdg::build([p1.as_slice(), p2.as_slice()], 2, &BTreeMap::new());
        assert_eq!(pdg.out_degree((EdgeId(0), UP)), 1);
        assert_eq!(pdg.out_degree((EdgeId(1), UP)), 1);
    }

    #[test]
    fn empty_input_builds_empty_graph() {
        let pdg = Pdg::build(core::iter::empty(), 3, &BTreeMap::new());
        assert_eq!(pdg.vertex_count(), 0);
        assert_eq!(pdg.edge_count(), 0);
        assert_eq!(pdg.max_out_degree(), 0);
    }

    #[test]
    fn tracker_gates_on_persistence() {
        let mut tracker = ImbalanceTracker::new();
        let e = EdgeId(0);
        for t in 0..5 {
            tracker.record(t, e, Imbalance::Upstream);
        }
        assert_eq!(tracker.gated(e, 4, 5), Imbalance::Upstream);
        assert_eq!(tracker.gated(e, 4, 6), Imbalance::None);
        // A flicker resets the streak.
        tracker.record(5, e, Imbalance::None);
        tracker.record(6, e, Imbalance::Upstream);
        assert_eq!(tracker.gated(e, 6, 5), Imbalance::None);
        for t in 7..11 {
            tracker.record(t, e, Imbalance::Upstream);
        }
        assert_eq!(tracker.gated(e, 10, 5), Imbalance::Upstream);
        // Balanced values never gate through.
        tracker.record(11, e, Imbalance::None);
        assert_eq!(tracker.gated(e, 11, 1), Imbalance::None);
    }

    #[test]
    fn dot_dump_lists_vertices_and_edges() {
        let p = steps(&[(0, UP), (1, DOWN)]);
        let pdg = Pdg::build([p.as_slice()], 2, &BTreeMap::new());
        let dot = pdg.to_dot();
        assert!(dot.contains("\"e0_up\""));
        assert!(dot.contains("\"e1_down\""));
        assert!(dot.contains("\"e0_up\" -> \"e1_down\""));
        assert!(dot.contains("label=\"-1\""));
    }
}
