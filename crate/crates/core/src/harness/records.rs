//! Line-oriented dataset records and their text round trip.
//!
//! One record per line, space-separated `key=value` fields in fixed order:
//!
//! ```text
//! map=train_a size=16x16 goals=(0,1);(5,5) start=(2,2) true=1 traj=(2,2);(2,3) eps=0.2 delta=10.0 seed=7
//! ```
//!
//! Cells render as `(row,col)`; cell lists are `;`-joined. Floats use the
//! shortest representation that parses back to the same value, so a file
//! round trip is lossless.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use super::HarnessError;
use crate::gridworld::{Cell, GridMap, NavProblem, Trajectory};

/// Planner parameters a record was generated with. Ingested records carry
/// `eps = 0`, `delta_max = 0`, and the source agent id as `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub eps: f64,
    pub delta_max: f64,
    pub seed: u64,
}

/// One labelled navigation example: a problem instance plus the full
/// observed trajectory and the index of the goal actually pursued.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub map_name: String,
    /// `(height, width)` of the map the record was produced on.
    pub map_size: (usize, usize),
    pub goals: Vec<Cell>,
    pub start: Cell,
    pub true_goal: usize,
    pub trajectory: Vec<Cell>,
    pub gen: GenParams,
}

impl ExampleRecord {
    /// Bind the record to its map, rebuilding the problem and trajectory.
    /// Fails if the registry map's dimensions disagree with the record.
    pub fn to_problem(
        &self,
        map: &Arc<GridMap>,
    ) -> Result<(NavProblem, Trajectory), HarnessError> {
        if (map.height(), map.width()) != self.map_size {
            return Err(HarnessError::Config(format!(
                "record for {} expects a {}x{} map but got {}x{}",
                self.map_name,
                self.map_size.0,
                self.map_size.1,
                map.height(),
                map.width()
            )));
        }
        let p = NavProblem::new(
            Arc::clone(map),
            self.start,
            self.goals.clone(),
            Some(self.true_goal),
        )?;
        let traj = Trajectory::new(self.trajectory.clone())?;
        traj.validate_for(&p)?;
        Ok((p, traj))
    }
}

fn fmt_cells(cells: &[Cell]) -> String {
    let parts: Vec<String> = cells.iter().map(Cell::to_string).collect();
    parts.join(";")
}

/// Write records one per line. Rejects map names that would break the
/// whitespace-delimited format.
pub fn write_records<W: Write>(w: &mut W, records: &[ExampleRecord]) -> Result<(), HarnessError> {
    for r in records {
        if r.map_name.is_empty() || r.map_name.contains(char::is_whitespace) {
            return Err(HarnessError::Config(format!(
                "map name {:?} is empty or contains whitespace",
                r.map_name
            )));
        }
        if r.true_goal >= r.goals.len() {
            return Err(HarnessError::Config(format!(
                "true goal index {} out of range for {} goals",
                r.true_goal,
                r.goals.len()
            )));
        }
        if r.trajectory.is_empty() {
            return Err(HarnessError::Config("record with empty trajectory".into()));
        }
        writeln!(
            w,
            "map={} size={}x{} goals={} start={} true={} traj={} eps={:?} delta={:?} seed={}",
            r.map_name,
            r.map_size.0,
            r.map_size.1,
            fmt_cells(&r.goals),
            r.start,
            r.true_goal,
            fmt_cells(&r.trajectory),
            r.gen.eps,
            r.gen.delta_max,
            r.gen.seed,
        )?;
    }
    Ok(())
}

fn bad(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Record { line, msg: msg.into() }
}

fn parse_cell(s: &str, line: usize) -> Result<Cell, HarnessError> {
    let inner = s
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| bad(line, format!("cell {s:?} is not of the form (row,col)")))?;
    let (row, col) = inner
        .split_once(',')
        .ok_or_else(|| bad(line, format!("cell {s:?} is missing a comma")))?;
    let row = row.parse().map_err(|_| bad(line, format!("bad row in {s:?}")))?;
    let col = col.parse().map_err(|_| bad(line, format!("bad column in {s:?}")))?;
    Ok(Cell::new(row, col))
}

fn parse_cells(s: &str, line: usize) -> Result<Vec<Cell>, HarnessError> {
    s.split(';').map(|c| parse_cell(c, line)).collect()
}

/// Parse a `;`-separated list of `(row,col)` cells, the same syntax record
/// lines use. Handy for command-line arguments.
pub fn parse_cell_list(s: &str) -> Result<Vec<Cell>, HarnessError> {
    parse_cells(s, 1)
}

/// Read records written by [`write_records`]. Blank lines are skipped.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<ExampleRecord>, HarnessError> {
    const KEYS: [&str; 9] =
        ["map", "size", "goals", "start", "true", "traj", "eps", "delta", "seed"];
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != KEYS.len() {
            return Err(bad(lineno, format!("expected {} fields, got {}", KEYS.len(), fields.len())));
        }
        let mut vals = Vec::with_capacity(KEYS.len());
        for (field, key) in fields.iter().zip(KEYS) {
            let v = field
                .strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| bad(lineno, format!("expected {key}=..., got {field:?}")))?;
            vals.push(v);
        }
        let (h, w) = vals[1]
            .split_once('x')
            .ok_or_else(|| bad(lineno, "size is not of the form HxW"))?;
        let map_size = (
            h.parse().map_err(|_| bad(lineno, "bad height in size"))?,
            w.parse().map_err(|_| bad(lineno, "bad width in size"))?,
        );
        let goals = parse_cells(vals[2], lineno)?;
        let true_goal: usize =
            vals[4].parse().map_err(|_| bad(lineno, "bad true goal index"))?;
        if true_goal >= goals.len() {
            return Err(bad(lineno, format!("true goal {} out of range for {} goals", true_goal, goals.len())));
        }
        let trajectory = parse_cells(vals[5], lineno)?;
        out.push(ExampleRecord {
            map_name: vals[0].to_string(),
            map_size,
            goals,
            start: parse_cell(vals[3], lineno)?,
            true_goal,
            trajectory,
            gen: GenParams {
                eps: vals[6].parse().map_err(|_| bad(lineno, "bad eps"))?,
                delta_max: vals[7].parse().map_err(|_| bad(lineno, "bad delta"))?,
                seed: vals[8].parse().map_err(|_| bad(lineno, "bad seed"))?,
            },
        });
    }
    Ok(out)
}

/// [`write_records`] to a file path.
pub fn save_records(path: &Path, records: &[ExampleRecord]) -> Result<(), HarnessError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records(&mut w, records)
}

/// [`read_records`] from a file path.
pub fn load_records(path: &Path) -> Result<Vec<ExampleRecord>, HarnessError> {
    read_records(std::io::BufReader::new(std::fs::File::open(path)?))
}
