//! A fixed urban block scene and a crowd simulator that walks agents
//! through it, emitting noisy position logs in the external CSV format the
//! ingest pipeline consumes.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::gridworld::{Cell, GridMap};
use crate::planning::{optimal_path, CostModel};
use crate::seeding::mix2;

/// A named rectangular destination area with a representative centre cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalRegion {
    pub name: String,
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
    pub centroid: Cell,
}

impl GoalRegion {
    pub fn contains(&self, c: Cell) -> bool {
        c.row >= self.row_min && c.row <= self.row_max && c.col >= self.col_min && c.col <= self.col_max
    }
}

/// Check regions against the map they describe: rectangles in bounds and
/// non-degenerate, centroids inside their own rectangle and passable.
pub fn validate_regions(m: &GridMap, regions: &[GoalRegion]) -> Result<(), HarnessError> {
    if regions.len() < 2 {
        return Err(HarnessError::Config("need at least two goal regions".into()));
    }
    for r in regions {
        if r.row_min > r.row_max || r.col_min > r.col_max || r.row_max >= m.height() || r.col_max >= m.width() {
            return Err(HarnessError::Config(format!("region {:?} does not fit the map", r.name)));
        }
        if !r.contains(r.centroid) {
            return Err(HarnessError::Config(format!(
                "region {:?} centroid {} lies outside its rectangle",
                r.name, r.centroid
            )));
        }
        if !m.is_passable(r.centroid) {
            return Err(HarnessError::Config(format!(
                "region {:?} centroid {} is blocked",
                r.name, r.centroid
            )));
        }
    }
    Ok(())
}

/// A map together with the destination areas agents move between.
#[derive(Debug, Clone)]
pub struct StreetScene {
    pub map: Arc<GridMap>,
    pub regions: Vec<GoalRegion>,
}

fn region(name: &str, rows: (usize, usize), cols: (usize, usize), centroid: (usize, usize)) -> GoalRegion {
    GoalRegion {
        name: name.into(),
        row_min: rows.0,
        row_max: rows.1,
        col_min: cols.0,
        col_max: cols.1,
        centroid: Cell::new(centroid.0, centroid.1),
    }
}

/// The bundled 24x32 city-block scene: six buildings on a street grid,
/// with destination areas at the four corners and the central crossing.
pub fn street_scene() -> StreetScene {
    let (h, w) = (24, 32);
    let mut passable = vec![true; h * w];
    let buildings: [(usize, usize, usize, usize); 6] = [
        (3, 8, 4, 9),
        (3, 8, 14, 19),
        (3, 8, 24, 27),
        (12, 19, 4, 9),
        (12, 19, 14, 19),
        (12, 19, 24, 27),
    ];
    for (r0, r1, c0, c1) in buildings {
        for r in r0..=r1 {
            for c in c0..=c1 {
                passable[r * w + c] = false;
            }
        }
    }
    let map = Arc::new(GridMap::new("street", h, w, passable).expect("static scene is well formed"));
    let regions = vec![
        region("nw", (0, 2), (0, 3), (1, 1)),
        region("ne", (0, 2), (28, 31), (1, 29)),
        region("sw", (21, 23), (0, 3), (22, 1)),
        region("se", (21, 23), (28, 31), (22, 29)),
        region("mid", (9, 11), (14, 17), (10, 15)),
    ];
    validate_regions(&map, &regions).expect("static regions are well formed");
    StreetScene { map, regions }
}

/// One row of an external position log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSample {
    pub agent: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

/// World units per cell along each axis for the logs this module emits; the
/// matching ingest scale (cells per world unit) is `1.0 / CELL_UNITS`.
pub const CELL_UNITS: f64 = 2.0;

/// Walk `walkers` agents through the scene and log their positions.
///
/// Each agent starts at a random street cell outside every region, visits
/// up to two random waypoints, and finishes at a random cell of a randomly
/// chosen region, following shortest paths between legs. Positions are
/// logged every other step (plus the final one) in world units with
/// sub-cell jitter, so ingest must both bridge gaps and tolerate noise.
/// The log is a pure function of `(scene, walkers, seed)`.
pub fn generate_street_traffic(
    scene: &StreetScene,
    walkers: usize,
    seed: u64,
) -> Result<Vec<TrafficSample>, HarnessError> {
    if walkers == 0 {
        return Err(HarnessError::Config("need at least one walker".into()));
    }
    let m = &scene.map;
    let outside: Vec<Cell> = m
        .passable_cells()
        .into_iter()
        .filter(|c| !scene.regions.iter().any(|r| r.contains(*c)))
        .collect();
    let region_cells: Vec<Vec<Cell>> = scene
        .regions
        .iter()
        .map(|r| {
            (r.row_min..=r.row_max)
                .flat_map(|row| (r.col_min..=r.col_max).map(move |col| Cell::new(row, col)))
                .filter(|c| m.is_passable(*c))
                .collect()
        })
        .collect();
    if outside.is_empty() || region_cells.iter().any(Vec::is_empty) {
        return Err(HarnessError::Config("scene has no usable start or region cells".into()));
    }

    let mut out = Vec::new();
    for agent in 0..walkers as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix2(seed, agent));
        let target = rng.random_range(0..scene.regions.len());
        let start = outside[rng.random_range(0..outside.len())];
        let end = region_cells[target][rng.random_range(0..region_cells[target].len())];
        let mut stops = vec![start];
        for _ in 0..rng.random_range(0..=2u32) {
            stops.push(outside[rng.random_range(0..outside.len())]);
        }
        stops.push(end);

        let mut route = vec![start];
        for leg in stops.windows(2) {
            let path = optimal_path(m, leg[0], leg[1], &CostModel::Uniform)?;
            route.extend_from_slice(&path.into_trajectory().cells()[1..]);
        }

        // Log every other cell, but always log turns: gaps then lie on
        // straight segments, so the ingest side's row-first bridge cannot
        // cut a building corner the walker actually went around.
        let delta = |a: Cell, b: Cell| (b.row as i64 - a.row as i64, b.col as i64 - a.col as i64);
        let last = route.len() - 1;
        let is_turn =
            |j: usize| j > 0 && j < last && delta(route[j - 1], route[j]) != delta(route[j], route[j + 1]);
        let mut frame = 0;
        for (j, cell) in route.iter().enumerate() {
            if j % 2 != 0 && j != last && !is_turn(j) {
                continue;
            }
            let jx = (rng.random::<f64>() - 0.5) * 1.2;
            let jy = (rng.random::<f64>() - 0.5) * 1.2;
            out.push(TrafficSample {
                agent,
                frame,
                x: (cell.col as f64 + 0.5) * CELL_UNITS + jx,
                y: (cell.row as f64 + 0.5) * CELL_UNITS + jy,
            });
            frame += 1;
        }
    }
    Ok(out)
}

/// Write a position log as CSV with an `agent_id,frame,x,y` header.
pub fn write_traffic_csv<W: Write>(w: &mut W, rows: &[TrafficSample]) -> Result<(), HarnessError> {
    writeln!(w, "agent_id,frame,x,y")?;
    for r in rows {
        writeln!(w, "{},{},{:?},{:?}", r.agent, r.frame, r.x, r.y)?;
    }
    Ok(())
}

/// Read a position log. A leading `agent_id,frame,x,y` header is optional.
pub fn read_traffic_csv<R: BufRead>(r: R) -> Result<Vec<TrafficSample>, HarnessError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (lineno == 1 && t == "agent_id,frame,x,y") {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 4 {
            return Err(HarnessError::Traffic {
                line: lineno,
                msg: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let parse = |i: usize, what: &str| -> Result<f64, HarnessError> {
            fields[i].parse::<f64>().map_err(|_| HarnessError::Traffic {
                line: lineno,
                msg: format!("bad {what} {:?}", fields[i]),
            })
        };
        let x = parse(2, "x")?;
        let y = parse(3, "y")?;
        let agent = fields[0].parse().map_err(|_| HarnessError::Traffic {
            line: lineno,
            msg: format!("bad agent id {:?}", fields[0]),
        })?;
        let frame = fields[1].parse().map_err(|_| HarnessError::Traffic {
            line: lineno,
            msg: format!("bad frame {:?}", fields[1]),
        })?;
        out.push(TrafficSample { agent, frame, x, y });
    }
    Ok(out)
}

/// Write goal regions, one per line:
/// `name row_min row_max col_min col_max centroid_row centroid_col`.
pub fn write_region_spec<W: Write>(w: &mut W, regions: &[GoalRegion]) -> Result<(), HarnessError> {
    writeln!(w, "# name row_min row_max col_min col_max centroid_row centroid_col")?;
    for r in regions {
        if r.name.is_empty() || r.name.contains(char::is_whitespace) {
            return Err(HarnessError::Config(format!(
                "region name {:?} is empty or contains whitespace",
                r.name
            )));
        }
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            r.name, r.row_min, r.row_max, r.col_min, r.col_max, r.centroid.row, r.centroid.col
        )?;
    }
    Ok(())
}

/// Read goal regions written by [`write_region_spec`]. Lines starting with
/// `#` are comments.
pub fn read_region_spec<R: BufRead>(r: R) -> Result<Vec<GoalRegion>, HarnessError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(HarnessError::Region {
                line: lineno,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<usize, HarnessError> {
            fields[i].parse().map_err(|_| HarnessError::Region {
                line: lineno,
                msg: format!("bad number {:?}", fields[i]),
            })
        };
        let reg = GoalRegion {
            name: fields[0].to_string(),
            row_min: num(1)?,
            row_max: num(2)?,
            col_min: num(3)?,
            col_max: num(4)?,
            centroid: Cell::new(num(5)?, num(6)?),
        };
        if reg.row_min > reg.row_max || reg.col_min > reg.col_max || !reg.contains(reg.centroid) {
            return Err(HarnessError::Region {
                line: lineno,
                msg: format!("region {:?} is degenerate or its centroid is outside it", reg.name),
            });
        }
        out.push(reg);
    }
    Ok(out)
}
