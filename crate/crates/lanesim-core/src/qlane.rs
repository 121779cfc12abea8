//! Per-intersection Q-learning: discretized local observations, a tabular
//! action-value store, and imbalance-gated action selection.
//!
//! Each intersection agent keeps one table shared across all its incident
//! edges; the edge identity is not part of the state, so a table trained at
//! one intersection is meaningful at any other.

use alloc::collections::BTreeMap;
use rand_core::RngCore;

use crate::netgraph::LaneShift;
use crate::pdg::Imbalance;

/// Queue-length bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QBin {
    /// Exactly 0.
    Empty,
    /// 1 to 5.
    Low,
    /// 6 to 15.
    Mid,
    /// 16 or more.
    High,
}

impl QBin {
    pub fn of(queue_len: u32) -> QBin {
        match queue_len {
            0 => QBin::Empty,
            1..=5 => QBin::Low,
            6..=15 => QBin::Mid,
            _ => QBin::High,
        }
    }
}

/// Discretized observation for one edge at one intersection: the signal
/// phase plus binned through, turning and outgoing queue lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AgentState {
    pub phase: u8,
    pub through: QBin,
    pub turning: QBin,
    pub outgoing: QBin,
}

/// Bins raw queue lengths into an [`AgentState`].
pub fn discretize(phase: u8, through_q: u32, turning_q: u32, outgoing_q: u32) -> AgentState {
    AgentState {
        phase,
        through: QBin::of(through_q),
        turning: QBin::of(turning_q),
        outgoing: QBin::of(outgoing_q),
    }
}

/// All selectable actions, in tie-break preference order.
pub const ACTIONS: [LaneShift; 3] = [
    LaneShift::Keep,
    LaneShift::GainUpstream,
    LaneShift::GainDownstream,
];

/// Tabular action-value store. Unseen state-action pairs read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: BTreeMap<(AgentState, LaneShift), f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn new(alpha: f64, gamma: f64) -> QTable {
        QTable {
            values: BTreeMap::new(),
            alpha,
            gamma,
        }
    }

    pub fn get(&self, state: AgentState, action: LaneShift) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(0.0)
    }

    /// Largest action value at `state` over all actions.
    pub fn max_value(&self, state: AgentState) -> f64 {
        let mut best = self.get(state, ACTIONS[0]);
        for &a in &ACTIONS[1..] {
            let v = self.get(state, a);
            if v > best {
                best = v;
            }
        }
        best
    }

    /// One value-iteration step:
    /// `Q(s,a) <- (1-alpha)*Q(s,a) + alpha*(r + gamma*max_a' Q(s',a'))`.
    /// Touches exactly the `(state, action)` entry.
    pub fn update(&mut self, state: AgentState, action: LaneShift, reward: f64, next: AgentState) {
        let old = self.get(state, action);
        let target = reward + self.gamma * self.max_value(next);
        let new = (1.0 - self.alpha) * old + self.alpha * target;
        self.values.insert((state, action), new);
    }

    pub fn set(&mut self, state: AgentState, action: LaneShift, value: f64) {
        self.values.insert((state, action), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(AgentState, LaneShift), &f64)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Weight between the waiting-time term and the queue-difference penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub beta: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { beta: 0.5 }
    }
}

/// Reward for one decision interval:
///
/// `R = (1-beta) * (wait_now - wait_next) / max(wait_next, wait_now)
///    - beta * q_diff / capacity`
///
/// The first term is zero when both waits are zero. With `q_diff` no larger
/// than `capacity` the result stays within [-1, 1].
pub fn compute_reward(
    wait_now: f64,
    wait_next: f64,
    q_diff: f64,
    capacity: f64,
    params: RewardParams,
) -> f64 {
    assert!(capacity > 0.0, "capacity must be positive");
    assert!(wait_now >= 0.0 && wait_next >= 0.0, "wait times must be non-negative");
    assert!(q_diff >= 0.0, "queue difference must be non-negative");
    let denom = if wait_now > wait_next { wait_now } else { wait_next };
    let wait_term = if denom == 0.0 {
        0.0
    } else {
        (wait_now - wait_next) / denom
    };
    (1.0 - params.beta) * wait_term - params.beta * (q_diff / capacity)
}

/// Which lane-gaining actions the network currently admits on the edge.
/// `Keep` is always admissible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermittedActions {
    pub gain_upstream: bool,
    pub gain_downstream: bool,
}

impl PermittedActions {
    pub fn all() -> PermittedActions {
        PermittedActions {
            gain_upstream: true,
            gain_downstream: true,
        }
    }

    pub fn keep_only() -> PermittedActions {
        PermittedActions {
            gain_upstream: false,
            gain_downstream: false,
        }
    }

    fn allows(&self, action: LaneShift) -> bool {
        match action {
            LaneShift::Keep => true,
            LaneShift::GainUpstream => self.gain_upstream,
            LaneShift::GainDownstream => self.gain_downstream,
        }
    }
}

/// Epsilon-greedy action choice, gated on imbalance: without a (persistent)
/// queue imbalance the agent always keeps the current configuration. With
/// probability `explore_rate` a uniformly random permitted action is taken;
/// otherwise the permitted action with the highest value wins, ties resolved
/// by the order of [`ACTIONS`] (keep first, then gain-upstream).
pub fn select_action<R: RngCore + ?Sized>(
    table: &QTable,
    state: AgentState,
    imbalance: Imbalance,
    explore_rate: f64,
    permitted: PermittedActions,
    rng: &mut R,
) -> LaneShift {
    if imbalance == Imbalance::None {
        return LaneShift::Keep;
    }
    let candidates: alloc::vec::Vec<LaneShift> = ACTIONS
        .iter()
        .copied()
        .filter(|&a| permitted.allows(a))
        .collect();
    if unit_f64(rng) < explore_rate {
        let idx = (rng.next_u64() % candidates.len() as u64) as usize;
        return candidates[idx];
    }
    let mut best = candidates[0];
    let mut best_value = table.get(state, best);
    for &a in &candidates[1..] {
        let v = table.get(state, a);
        if v > best_value {
            best = a;
            best_value = v;
        }
    }
    best
}

/// Linearly decaying exploration rate: `start` at time 0 down to `end` at
/// `horizon_s`, constant afterwards.
pub fn epsilon_at(now_s: u32, start: f64, end: f64, horizon_s: u32) -> f64 {
    if horizon_s == 0 || now_s >= horizon_s {
        return end;
    }
    let frac = now_s as f64 / horizon_s as f64;
    start + (end - start) * frac
}

/// Uniform draw from [0, 1) with 53 bits of precision.
pub(crate) fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
