//! Turn external position logs into labelled example records.
//!
//! Logs arrive as `(agent, frame, x, y)` samples sorted by agent then
//! frame. Positions are mapped to cells by `floor(coordinate * scale)` and
//! clamped into the grid, consecutive duplicates collapse, and gaps between
//! successive cells are bridged with a row-first L connector. An agent
//! becomes one record labelled by the region containing its final cell.
//! Agents ending outside every region, or whose bridged path crosses
//! blocked cells, are dropped and counted rather than failing the batch.

use std::sync::Arc;

use super::records::{ExampleRecord, GenParams};
use super::street::{validate_regions, GoalRegion, TrafficSample};
use super::HarnessError;
use crate::gridworld::{Cell, GridMap, NavProblem, Trajectory};
use crate::seeding::splitmix64;

/// The outcome of an ingest run: records split 80/20 by a hash of the agent
/// id, plus counts of what was discarded.
#[derive(Debug)]
pub struct IngestReport {
    pub train: Vec<ExampleRecord>,
    pub test: Vec<ExampleRecord>,
    pub dropped_off_region: usize,
    pub dropped_invalid: usize,
    pub agents: usize,
}

fn to_cell(s: &TrafficSample, m: &GridMap, scale: f64) -> Cell {
    let clamp = |v: f64, max: usize| -> usize {
        let idx = (v * scale).floor();
        if idx < 0.0 {
            0
        } else {
            (idx as usize).min(max - 1)
        }
    };
    Cell::new(clamp(s.y, m.height()), clamp(s.x, m.width()))
}

fn bridge(from: Cell, to: Cell, out: &mut Vec<Cell>) {
    let mut cur = from;
    while cur.row != to.row {
        cur.row = if to.row > cur.row { cur.row + 1 } else { cur.row - 1 };
        out.push(cur);
    }
    while cur.col != to.col {
        cur.col = if to.col > cur.col { cur.col + 1 } else { cur.col - 1 };
        out.push(cur);
    }
}

/// Ingest a sorted position log against a map and its goal regions.
/// `scale` converts world units to cell indices (cells per unit).
pub fn ingest_trajectories(
    rows: &[TrafficSample],
    map: &Arc<GridMap>,
    regions: &[GoalRegion],
    scale: f64,
) -> Result<IngestReport, HarnessError> {
    if !(scale > 0.0) {
        return Err(HarnessError::Config("scale must be positive".into()));
    }
    if rows.is_empty() {
        return Err(HarnessError::Config("empty position log".into()));
    }
    validate_regions(map, regions)?;
    for (i, pair) in rows.windows(2).enumerate() {
        if (pair[1].agent, pair[1].frame) <= (pair[0].agent, pair[0].frame) {
            return Err(HarnessError::Traffic {
                line: i + 2,
                msg: format!(
                    "rows must be sorted by (agent, frame) without duplicates; \
                     ({}, {}) follows ({}, {})",
                    pair[1].agent, pair[1].frame, pair[0].agent, pair[0].frame
                ),
            });
        }
    }

    let goals: Vec<Cell> = regions.iter().map(|r| r.centroid).collect();
    let mut report = IngestReport {
        train: Vec::new(),
        test: Vec::new(),
        dropped_off_region: 0,
        dropped_invalid: 0,
        agents: 0,
    };

    let mut i = 0;
    while i < rows.len() {
        let agent = rows[i].agent;
        let mut cells: Vec<Cell> = Vec::new();
        while i < rows.len() && rows[i].agent == agent {
            let c = to_cell(&rows[i], map, scale);
            if cells.last() != Some(&c) {
                let mut bridged = Vec::new();
                if let Some(&prev) = cells.last() {
                    bridge(prev, c, &mut bridged);
                } else {
                    bridged.push(c);
                }
                cells.extend(bridged);
            }
            i += 1;
        }
        report.agents += 1;

        let last = *cells.last().expect("agent group is non-empty");
        let Some(true_goal) = regions.iter().position(|r| r.contains(last)) else {
            report.dropped_off_region += 1;
            continue;
        };
        let valid = Trajectory::new(cells.clone())
            .and_then(|t| t.validate(map).map(|_| t))
            .is_ok()
            && NavProblem::new(Arc::clone(map), cells[0], goals.clone(), Some(true_goal)).is_ok();
        if !valid {
            report.dropped_invalid += 1;
            continue;
        }
        let record = ExampleRecord {
            map_name: map.name().to_string(),
            map_size: (map.height(), map.width()),
            goals: goals.clone(),
            start: cells[0],
            true_goal,
            trajectory: cells,
            gen: GenParams { eps: 0.0, delta_max: 0.0, seed: agent },
        };
        if splitmix64(agent) % 5 == 0 {
            report.test.push(record);
        } else {
            report.train.push(record);
        }
    }
    Ok(report)
}
