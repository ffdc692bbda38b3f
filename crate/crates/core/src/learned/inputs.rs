//! Network input construction from problems and trajectories.

use super::nets::NetKind;
use super::LearnedError;
use crate::features::{build_channel_stack, gc_features, sd_features, ChannelStack, FeatureSequence, HeuristicKind};
use crate::gridworld::{GridMap, NavProblem, Trajectory};
use crate::planning::{CostField, CostModel};

/// One example's network-ready encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum NetInputs {
    /// Coordinate sequence (T rows of 2), optionally paired with a feature
    /// sequence (T rows of |G|) aligned so row t carries the derivative
    /// ending at coordinate t; row 0 is a zero vector.
    Sequence {
        coords: Vec<Vec<f64>>,
        features: Option<Vec<Vec<f64>>>,
    },
    /// Per-move channel frames for the spatiotemporal network.
    Frames(ChannelStack),
}

impl NetInputs {
    pub fn steps(&self) -> usize {
        match self {
            NetInputs::Sequence { coords, .. } => coords.len(),
            NetInputs::Frames(stack) => stack.frames.len(),
        }
    }
}

/// A training or evaluation example with its ground-truth goal index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub inputs: NetInputs,
    pub target: usize,
}

/// Map trajectory cells to [0,1]^2 rows: (row/(H-1), col/(W-1)), with
/// degenerate single-row or single-column maps mapping to 0.
pub fn normalized_coords(m: &GridMap, traj: &Trajectory) -> Vec<Vec<f64>> {
    let scale = |v: usize, extent: usize| {
        if extent > 1 {
            v as f64 / (extent - 1) as f64
        } else {
            0.0
        }
    };
    traj.cells()
        .iter()
        .map(|c| vec![scale(c.row, m.height()), scale(c.col, m.width())])
        .collect()
}

/// Rescale each goal's derivative series to unit mean magnitude. Series
/// produced under unit move costs are exactly ±1 wherever finite, so they
/// pass through bit-for-bit unchanged; series metered by an inflated cost
/// model shrink back to the ±1 regime while keeping their sign structure,
/// letting one trained model read the same input scale under any metering.
/// All-zero series (unreachable goals) stay zero.
fn unit_scale(seq: &mut FeatureSequence) {
    for row in &mut seq.values {
        if row.is_empty() {
            continue;
        }
        let scale = row.iter().map(|v| v.abs()).sum::<f64>() / row.len() as f64;
        if scale > 0.0 && scale != 1.0 {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
    }
}

/// Right-align a (|G| x T-1) feature sequence with a length-T coordinate
/// sequence: row t >= 1 is the derivative over the move ending at t, row 0
/// is all zeros.
fn aligned_feature_rows(seq: &FeatureSequence, steps: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(steps);
    rows.push(vec![0.0; seq.goal_count()]);
    for t in 0..seq.steps() {
        rows.push(seq.column(t));
    }
    debug_assert_eq!(rows.len(), steps);
    rows
}

/// Build the inputs a network of `kind` consumes. Cost fields are required
/// for the plan-derivative variant; the channel-stack variant recomputes
/// its differential channel under `model`.
pub fn build_inputs(
    kind: NetKind,
    p: &NavProblem,
    traj: &Trajectory,
    fields: Option<&[CostField]>,
    model: &CostModel,
) -> Result<NetInputs, LearnedError> {
    match kind {
        NetKind::GcNet => {
            let fields = fields.ok_or(LearnedError::MissingFields { kind: kind.id() })?;
            let mut seq = gc_features(p, traj, fields);
            unit_scale(&mut seq);
            Ok(NetInputs::Sequence {
                coords: normalized_coords(p.map(), traj),
                features: Some(aligned_feature_rows(&seq, traj.len())),
            })
        }
        NetKind::SdNet => {
            let seq = sd_features(p, traj, HeuristicKind::L2);
            Ok(NetInputs::Sequence {
                coords: normalized_coords(p.map(), traj),
                features: Some(aligned_feature_rows(&seq, traj.len())),
            })
        }
        NetKind::LstmObs => Ok(NetInputs::Sequence {
            coords: normalized_coords(p.map(), traj),
            features: None,
        }),
        NetKind::Stdnn => {
            let stack = if traj.len() == 1 {
                // A single observation has no move to encode; emit one
                // stationary frame (zero differential channel).
                let held = Trajectory::new(vec![traj.start(), traj.start()])
                    .expect("two cells");
                build_channel_stack(p, &held, model)?
            } else {
                build_channel_stack(p, traj, model)?
            };
            Ok(NetInputs::Frames(stack))
        }
    }
}
