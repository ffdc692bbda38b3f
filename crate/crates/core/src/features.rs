//! Plan-cost features for learned recognizers: per-goal cost derivatives
//! along the observed trajectory (exact from a planner, or heuristic-only),
//! differential cost maps over all destinations, image-like channel stacks,
//! and observability truncation.
//!
//! Sign convention everywhere: previous cost minus current cost, so a step
//! toward a goal produces a positive value for that goal.

use std::collections::HashMap;

use thiserror::Error;

use crate::gridworld::{Cell, GridMap, NavProblem, Trajectory};
use crate::planning::{l1, l2, source_costs, CostField, CostModel};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("channel stack supports at most {max} goals, problem has {got}")]
    TooManyGoals { max: usize, got: usize },
}

/// Which derivative a [`FeatureSequence`] holds: exact plan-cost gradients
/// (needs per-goal cost fields) or heuristic deviations (model-free).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Gc,
    Sd,
}

/// Distance function used by the model-free deviation features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeuristicKind {
    L1,
    L2,
}

impl HeuristicKind {
    pub fn eval(&self, a: Cell, b: Cell) -> f64 {
        match self {
            HeuristicKind::L1 => l1(a, b),
            HeuristicKind::L2 => l2(a, b),
        }
    }
}

/// A |G| x T matrix of per-goal cost derivatives, one column per observed
/// move. Row order matches the problem's goal order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub kind: FeatureKind,
    /// values[g][t] is the derivative over the move s_t -> s_{t+1}.
    pub values: Vec<Vec<f64>>,
    /// Entries zeroed because a cost was infinite (unreachable goal under
    /// the recognizer's model). Zero for well-posed problems.
    pub zeroed_entries: usize,
}

impl FeatureSequence {
    pub fn goal_count(&self) -> usize {
        self.values.len()
    }

    pub fn steps(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Column t as a vector over goals, the per-timestep input of the
    /// recurrent recognizers.
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[t]).collect()
    }
}

/// Exact plan-cost gradients: `values[g][t] = c(s_t, g) - c(s_{t+1}, g)`
/// under the cost model the fields were built with. A difference touching
/// an infinite cost is emitted as 0 and counted in `zeroed_entries`.
pub fn gc_features(p: &NavProblem, traj: &Trajectory, fields: &[CostField]) -> FeatureSequence {
    crate::symbolic::check_goal_fields(p, fields);
    let mut zeroed = 0usize;
    let values = fields
        .iter()
        .map(|f| {
            traj.moves()
                .map(|(prev, cur)| {
                    let d = f.cost(prev) - f.cost(cur);
                    if d.is_finite() {
                        d
                    } else {
                        zeroed += 1;
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    FeatureSequence { kind: FeatureKind::Gc, values, zeroed_entries: zeroed }
}

/// Heuristic deviations: like [`gc_features`] but with a closed-form
/// distance instead of planner costs, so no model and no search. The
/// heuristic is exact on obstacle-free lines and degrades gracefully
/// elsewhere, which is the point: it needs nothing from the environment.
pub fn sd_features(p: &NavProblem, traj: &Trajectory, h: HeuristicKind) -> FeatureSequence {
    let values = p
        .goals()
        .iter()
        .map(|g| {
            traj.moves()
                .map(|(prev, cur)| h.eval(prev, *g) - h.eval(cur, *g))
                .collect()
        })
        .collect();
    FeatureSequence { kind: FeatureKind::Sd, values, zeroed_entries: 0 }
}

/// Cost derivative toward every destination at once:
/// `D(q) = c(sPrev, q) - c(sCur, q)` over forward costs from the agent's
/// positions, 0 on blocked or unreachable cells. Row-major height x width.
pub fn differential_cost_map(
    m: &GridMap,
    s_prev: Cell,
    s_cur: Cell,
    model: &CostModel,
) -> Vec<f64> {
    let from_prev = source_costs(m, s_prev, model, None).expect("sPrev must be passable");
    let from_cur = source_costs(m, s_cur, model, None).expect("sCur must be passable");
    from_prev
        .iter()
        .zip(&from_cur)
        .map(|(a, b)| {
            let d = a - b;
            if d.is_finite() {
                d
            } else {
                0.0
            }
        })
        .collect()
}

/// Maximum goal channels in a [`ChannelStack`]; smaller goal sets pad with
/// empty channels.
pub const GOAL_CHANNELS: usize = 5;

/// Channels per frame: obstacle, walkable, agent position, five goal
/// markers, differential cost.
pub const STACK_CHANNELS: usize = 3 + GOAL_CHANNELS + 1;

/// Image-like input for the spatial recognizer: one frame per observed
/// move, each a 9 x height x width tensor (flattened row-major). Static
/// channels repeat across frames; the agent marker tracks s_t and the last
/// channel holds the differential cost map of the move into s_t.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub height: usize,
    pub width: usize,
    /// Each frame has STACK_CHANNELS * height * width values.
    pub frames: Vec<Vec<f64>>,
}

impl ChannelStack {
    pub fn channel<'a>(&'a self, frame: usize, ch: usize) -> &'a [f64] {
        let hw = self.height * self.width;
        &self.frames[frame][ch * hw..(ch + 1) * hw]
    }
}

/// Build the spatial input frames for a trajectory. Frame t covers the
/// move s_t -> s_{t+1}: markers at s_{t+1}, differential map of the move.
pub fn build_channel_stack(
    p: &NavProblem,
    traj: &Trajectory,
    model: &CostModel,
) -> Result<ChannelStack, FeatureError> {
    let goals = p.goals();
    if goals.len() > GOAL_CHANNELS {
        return Err(FeatureError::TooManyGoals { max: GOAL_CHANNELS, got: goals.len() });
    }
    let m = p.map();
    let hw = m.cells();

    let mut terrain = vec![0.0; 2 * hw];
    for i in 0..hw {
        if m.is_passable(m.cell_at(i)) {
            terrain[hw + i] = 1.0;
        } else {
            terrain[i] = 1.0;
        }
    }
    let mut goal_channels = vec![0.0; GOAL_CHANNELS * hw];
    for (gi, g) in goals.iter().enumerate() {
        goal_channels[gi * hw + m.index(*g)] = 1.0;
    }

    // Forward cost fields keyed by trajectory cell; revisits reuse them.
    let mut cost_cache: HashMap<Cell, Vec<f64>> = HashMap::new();
    let mut costs_from = |c: Cell| -> Vec<f64> {
        cost_cache
            .entry(c)
            .or_insert_with(|| source_costs(m, c, model, None).expect("trajectory cells passable"))
            .clone()
    };

    let mut frames = Vec::with_capacity(traj.len() - 1);
    for (prev, cur) in traj.moves() {
        let mut frame = Vec::with_capacity(STACK_CHANNELS * hw);
        frame.extend_from_slice(&terrain);
        let mut agent = vec![0.0; hw];
        agent[m.index(cur)] = 1.0;
        frame.extend_from_slice(&agent);
        frame.extend_from_slice(&goal_channels);
        let from_prev = costs_from(prev);
        let from_cur = costs_from(cur);
        frame.extend(from_prev.iter().zip(&from_cur).map(|(a, b)| {
            let d = a - b;
            if d.is_finite() {
                d
            } else {
                0.0
            }
        }));
        frames.push(frame);
    }
    Ok(ChannelStack { height: m.height(), width: m.width(), frames })
}

/// Keep the first `ceil(rho/100 * len)` cells, never fewer than one.
/// `rho` is a percentage in (0, 100]; 100 is the identity.
pub fn truncate(traj: &Trajectory, rho: f64) -> Trajectory {
    assert!(rho > 0.0 && rho <= 100.0, "rho must be a percentage in (0, 100]");
    let len = traj.len();
    let keep = ((len as f64 * rho / 100.0).ceil() as usize).clamp(1, len);
    Trajectory::new(traj.cells()[..keep].to_vec()).expect("prefix is non-empty")
}
