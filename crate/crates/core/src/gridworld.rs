//! Grid environments: maps, cells, trajectories, problem instances, and the
//! MovingAI `.map` parser.
//!
//! Movement is 4-connected (up, down, left, right) at unit cost. Terrain is
//! collapsed to binary: `.`, `G`, `S` are passable, `@`, `O`, `T`, `W` are
//! blocked.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors from map parsing and problem construction.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("line {line}: malformed header, expected `{expected}`")]
    MalformedHeader { line: usize, expected: &'static str },

    #[error("line {line}: invalid {field} value `{value}`")]
    InvalidHeaderValue {
        line: usize,
        field: &'static str,
        value: String,
    },

    #[error("line {line}: row has {got} cells, header declared width {expected}")]
    RowWidthMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("body has {got} rows, header declared height {expected}")]
    RowCountMismatch { expected: usize, got: usize },

    #[error("line {line}: unknown terrain character `{ch}`")]
    UnknownTerrain { line: usize, ch: char },

    #[error("map has no passable cell")]
    NoPassableCell,

    #[error("cell {0} is out of bounds for a {1}x{2} map")]
    OutOfBounds(Cell, usize, usize),

    #[error("downscale factor {factor} does not divide {height}x{width}")]
    BadDownscaleFactor {
        factor: usize,
        height: usize,
        width: usize,
    },

    #[error("could not sample a problem with {goals} mutually reachable goals in {attempts} attempts")]
    SamplingBudgetExhausted { goals: usize, attempts: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// One grid position, `row` in `0..height`, `col` in `0..width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A rectangular occupancy grid. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    /// Row-major, `true` = passable.
    passable: Vec<bool>,
    name: String,
}

impl GridMap {
    /// Build a map from an explicit passability matrix.
    pub fn new(
        name: impl Into<String>,
        height: usize,
        width: usize,
        passable: Vec<bool>,
    ) -> Result<Self, GridError> {
        if passable.len() != height * width || height == 0 || width == 0 {
            return Err(GridError::RowCountMismatch {
                expected: height,
                got: if width == 0 { 0 } else { passable.len() / width },
            });
        }
        if !passable.iter().any(|&p| p) {
            return Err(GridError::NoPassableCell);
        }
        Ok(Self {
            width,
            height,
            passable,
            name: name.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width
    }

    /// Flat row-major index of a cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.row * self.width + c.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    /// `false` for out-of-bounds cells.
    pub fn is_passable(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.passable[self.index(c)]
    }

    pub fn passable_cells(&self) -> Vec<Cell> {
        (0..self.cells())
            .filter(|&i| self.passable[i])
            .map(|i| self.cell_at(i))
            .collect()
    }

    pub fn count_passable(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }
}

/// The 4-connected neighbor offsets in stable order: up, down, left, right.
const OFFSETS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Passable in-bounds neighbors of `s`, in stable up/down/left/right order.
pub fn neighbors(m: &GridMap, s: Cell) -> Result<Vec<Cell>, GridError> {
    if !m.in_bounds(s) {
        return Err(GridError::OutOfBounds(s, m.height, m.width));
    }
    let mut out = Vec::with_capacity(4);
    for (dr, dc) in OFFSETS {
        let (nr, nc) = (s.row as isize + dr, s.col as isize + dc);
        if nr < 0 || nc < 0 {
            continue;
        }
        let n = Cell::new(nr as usize, nc as usize);
        if m.is_passable(n) {
            out.push(n);
        }
    }
    Ok(out)
}

/// Parse MovingAI map text: `type octile`, `height H`, `width W`, `map`,
/// then `H` rows of `W` terrain characters. CRs are stripped, the trailing
/// newline is optional. `.`/`G`/`S` parse as passable, `@`/`O`/`T`/`W` as
/// blocked; anything else is an error with its line number.
pub fn parse_map(text: &str) -> Result<GridMap, GridError> {
    let mut lines = text.lines().map(|l| l.trim_end_matches('\r')).enumerate();

    let (ln, first) = lines
        .next()
        .ok_or(GridError::MalformedHeader { line: 1, expected: "type <kind>" })?;
    if first.split_whitespace().next() != Some("type") {
        return Err(GridError::MalformedHeader { line: ln + 1, expected: "type <kind>" });
    }

    let mut height: Option<usize> = None;
    let mut width: Option<usize> = None;
    for _ in 0..2 {
        let (ln, line) = lines.next().ok_or(GridError::MalformedHeader {
            line: 0,
            expected: "height/width",
        })?;
        let mut parts = line.split_whitespace();
        let (field, value) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
        let slot = match field {
            "height" => &mut height,
            "width" => &mut width,
            _ => {
                return Err(GridError::MalformedHeader {
                    line: ln + 1,
                    expected: "height <H> or width <W>",
                })
            }
        };
        let parsed: usize = value.parse().map_err(|_| GridError::InvalidHeaderValue {
            line: ln + 1,
            field: if field == "height" { "height" } else { "width" },
            value: value.to_string(),
        })?;
        if parsed == 0 {
            return Err(GridError::InvalidHeaderValue {
                line: ln + 1,
                field: if field == "height" { "height" } else { "width" },
                value: value.to_string(),
            });
        }
        *slot = Some(parsed);
    }
    let (height, width) = match (height, width) {
        (Some(h), Some(w)) => (h, w),
        _ => return Err(GridError::MalformedHeader { line: 3, expected: "height and width" }),
    };

    match lines.next() {
        Some((_, l)) if l.trim() == "map" => {}
        Some((ln, _)) => {
            return Err(GridError::MalformedHeader { line: ln + 1, expected: "map" })
        }
        None => return Err(GridError::MalformedHeader { line: 4, expected: "map" }),
    }

    let mut passable = Vec::with_capacity(height * width);
    let mut rows = 0usize;
    for (ln, line) in lines {
        if rows == height {
            if line.is_empty() {
                continue;
            }
            return Err(GridError::RowCountMismatch { expected: height, got: rows + 1 });
        }
        let count = line.chars().count();
        if count != width {
            return Err(GridError::RowWidthMismatch {
                line: ln + 1,
                expected: width,
                got: count,
            });
        }
        for ch in line.chars() {
            match ch {
                '.' | 'G' | 'S' => passable.push(true),
                '@' | 'O' | 'T' | 'W' => passable.push(false),
                other => return Err(GridError::UnknownTerrain { line: ln + 1, ch: other }),
            }
        }
        rows += 1;
    }
    if rows != height {
        return Err(GridError::RowCountMismatch { expected: height, got: rows });
    }

    // An all-blocked grid is still a parseable document.
    Ok(GridMap {
        width,
        height,
        passable,
        name: String::new(),
    })
}

/// Canonical MovingAI text: `.` for passable, `@` for blocked, no trailing
/// newline. `parse_map(serialize_map(m))` reproduces the passability matrix.
pub fn serialize_map(m: &GridMap) -> String {
    let mut out = format!("type octile\nheight {}\nwidth {}\nmap", m.height, m.width);
    for r in 0..m.height {
        out.push('\n');
        for c in 0..m.width {
            out.push(if m.passable[r * m.width + c] { '.' } else { '@' });
        }
    }
    out
}

/// Downscale by an exact factor: each `factor`x`factor` block becomes one
/// cell, passable iff a strict majority of its source cells are passable
/// (ties block).
pub fn downscale_map(m: &GridMap, factor: usize) -> Result<GridMap, GridError> {
    if factor == 0 || m.height % factor != 0 || m.width % factor != 0 {
        return Err(GridError::BadDownscaleFactor {
            factor,
            height: m.height,
            width: m.width,
        });
    }
    let (nh, nw) = (m.height / factor, m.width / factor);
    let mut passable = Vec::with_capacity(nh * nw);
    for br in 0..nh {
        for bc in 0..nw {
            let mut open = 0usize;
            for r in 0..factor {
                for c in 0..factor {
                    if m.passable[(br * factor + r) * m.width + (bc * factor + c)] {
                        open += 1;
                    }
                }
            }
            passable.push(2 * open > factor * factor);
        }
    }
    Ok(GridMap {
        width: nw,
        height: nh,
        passable,
        name: m.name.clone(),
    })
}

/// One labeled or unlabeled recognition instance: an environment, a start,
/// and an ordered goal set (the order fixes goal indices).
#[derive(Debug, Clone)]
pub struct NavProblem {
    map: Arc<GridMap>,
    start: Cell,
    goals: Vec<Cell>,
    true_goal: Option<usize>,
}

impl NavProblem {
    pub fn new(
        map: Arc<GridMap>,
        start: Cell,
        goals: Vec<Cell>,
        true_goal: Option<usize>,
    ) -> Result<Self, GridError> {
        if !map.is_passable(start) {
            return Err(GridError::InvalidProblem(format!(
                "start {start} is not a passable cell"
            )));
        }
        if goals.len() < 2 {
            return Err(GridError::InvalidProblem("need at least 2 goals".into()));
        }
        for (i, g) in goals.iter().enumerate() {
            if !map.is_passable(*g) {
                return Err(GridError::InvalidProblem(format!(
                    "goal {i} at {g} is not a passable cell"
                )));
            }
            if goals[..i].contains(g) {
                return Err(GridError::InvalidProblem(format!("duplicate goal {g}")));
            }
        }
        if let Some(t) = true_goal {
            if t >= goals.len() {
                return Err(GridError::InvalidProblem(format!(
                    "true goal index {t} out of range"
                )));
            }
        }
        let reach = reachable_set(&map, start);
        for (i, g) in goals.iter().enumerate() {
            if !reach[map.index(*g)] {
                return Err(GridError::InvalidProblem(format!(
                    "goal {i} at {g} is unreachable from start {start}"
                )));
            }
        }
        Ok(Self {
            map,
            start,
            goals,
            true_goal,
        })
    }

    pub fn map(&self) -> &Arc<GridMap> {
        &self.map
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goals(&self) -> &[Cell] {
        &self.goals
    }

    pub fn true_goal(&self) -> Option<usize> {
        self.true_goal
    }
}

/// Flood fill from `start`; `true` at every reachable flat index.
pub fn reachable_set(m: &GridMap, start: Cell) -> Vec<bool> {
    let mut seen = vec![false; m.cells()];
    if !m.is_passable(start) {
        return seen;
    }
    let mut queue = std::collections::VecDeque::new();
    seen[m.index(start)] = true;
    queue.push_back(start);
    while let Some(cur) = queue.pop_front() {
        for n in neighbors(m, cur).expect("queued cells are in bounds") {
            let i = m.index(n);
            if !seen[i] {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// An observed state sequence `s_0..s_T` of 4-connected passable cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    cells: Vec<Cell>,
}

impl Trajectory {
    pub fn new(cells: Vec<Cell>) -> Result<Self, GridError> {
        if cells.is_empty() {
            return Err(GridError::InvalidTrajectory("empty trajectory".into()));
        }
        Ok(Self { cells })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn last(&self) -> Cell {
        *self.cells.last().expect("non-empty by construction")
    }

    /// Consecutive `(from, to)` pairs.
    pub fn moves(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.cells.windows(2).map(|w| (w[0], w[1]))
    }

    /// Check contiguity (every step moves exactly one cell along one axis)
    /// and passability against `m`.
    pub fn validate(&self, m: &GridMap) -> Result<(), GridError> {
        for (i, c) in self.cells.iter().enumerate() {
            if !m.is_passable(*c) {
                return Err(GridError::InvalidTrajectory(format!(
                    "cell {i} at {c} is blocked or out of bounds"
                )));
            }
        }
        for (i, (a, b)) in self.moves().enumerate() {
            let dr = a.row.abs_diff(b.row);
            let dc = a.col.abs_diff(b.col);
            if dr + dc != 1 {
                return Err(GridError::InvalidTrajectory(format!(
                    "step {i} from {a} to {b} is not a unit 4-connected move"
                )));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the start anchoring of `p`.
    pub fn validate_for(&self, p: &NavProblem) -> Result<(), GridError> {
        self.validate(p.map())?;
        if self.start() != p.start() {
            return Err(GridError::InvalidTrajectory(format!(
                "trajectory starts at {} but the problem starts at {}",
                self.start(),
                p.start()
            )));
        }
        Ok(())
    }
}

/// Default retry budget for [`sample_problem`].
pub const SAMPLE_RETRY_BUDGET: usize = 1000;

/// Draw a random problem: start and `num_goals` goals uniformly without
/// replacement from the passable cells, rejected until every goal is
/// reachable from the start; the true goal is uniform over goal indices.
pub fn sample_problem(
    m: &Arc<GridMap>,
    num_goals: usize,
    rng: &mut ChaCha8Rng,
) -> Result<NavProblem, GridError> {
    sample_problem_with_budget(m, num_goals, rng, SAMPLE_RETRY_BUDGET)
}

pub fn sample_problem_with_budget(
    m: &Arc<GridMap>,
    num_goals: usize,
    rng: &mut ChaCha8Rng,
    budget: usize,
) -> Result<NavProblem, GridError> {
    let passable = m.passable_cells();
    for _ in 0..budget {
        if passable.len() < num_goals + 1 {
            continue;
        }
        let picks: Vec<Cell> = passable.choose_multiple(rng, num_goals + 1).copied().collect();
        let start = picks[0];
        let goals = &picks[1..];
        let reach = reachable_set(m, start);
        if goals.iter().all(|g| reach[m.index(*g)]) {
            let true_goal = rng.random_range(0..num_goals);
            return NavProblem::new(Arc::clone(m), start, goals.to_vec(), Some(true_goal));
        }
    }
    Err(GridError::SamplingBudgetExhausted {
        goals: num_goals,
        attempts: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    pub(crate) fn open_map(h: usize, w: usize) -> Arc<GridMap> {
        Arc::new(GridMap::new("open", h, w, vec![true; h * w]).unwrap())
    }

    fn map_from_rows(rows: &[&str]) -> GridMap {
        let text = format!(
            "type octile\nheight {}\nwidth {}\nmap\n{}",
            rows.len(),
            rows[0].len(),
            rows.join("\n")
        );
        parse_map(&text).unwrap()
    }

    #[test]
    fn parses_constructed_map() {
        let m = map_from_rows(&[".@.", "..."]);
        assert_eq!((m.height(), m.width()), (2, 3));
        assert_eq!(m.count_passable(), 5);
        assert!(!m.is_passable(Cell::new(0, 1)));
        assert!(m.is_passable(Cell::new(1, 1)));
    }

    #[test]
    fn swamp_and_goal_terrain_passable_water_trees_blocked() {
        let m = map_from_rows(&["GS.", "TW@", "O.."]);
        assert!(m.is_passable(Cell::new(0, 0)));
        assert!(m.is_passable(Cell::new(0, 1)));
        assert!(!m.is_passable(Cell::new(1, 0)));
        assert!(!m.is_passable(Cell::new(1, 1)));
        assert!(!m.is_passable(Cell::new(2, 0)));
    }

    #[test]
    fn short_row_is_width_mismatch_with_line_number() {
        let err = parse_map("type octile\nheight 2\nwidth 3\nmap\n..\n...").unwrap_err();
        match err {
            GridError::RowWidthMismatch { line, expected, got } => {
                assert_eq!((line, expected, got), (5, 3, 2));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_rows_is_count_mismatch() {
        let err = parse_map("type octile\nheight 3\nwidth 2\nmap\n..\n..").unwrap_err();
        assert!(matches!(
            err,
            GridError::RowCountMismatch { expected: 3, got: 2 }
        ));
    }

    #[test]
    fn unknown_terrain_reports_line() {
        let err = parse_map("type octile\nheight 1\nwidth 3\nmap\n.x.").unwrap_err();
        assert!(matches!(err, GridError::UnknownTerrain { line: 5, ch: 'x' }));
    }

    #[test]
    fn bad_header_value_reports_line() {
        let err = parse_map("type octile\nheight two\nwidth 3\nmap\n...").unwrap_err();
        assert!(matches!(
            err,
            GridError::InvalidHeaderValue { line: 2, field: "height", .. }
        ));
    }

    #[test]
    fn serialize_smallest_map() {
        let m = GridMap::new("", 1, 1, vec![true]).unwrap();
        assert_eq!(serialize_map(&m), "type octile\nheight 1\nwidth 1\nmap\n.");
    }

    #[test]
    fn serialize_all_blocked_body() {
        // Not a valid environment, but still a serializable document.
        let m = GridMap {
            width: 2,
            height: 2,
            passable: vec![false; 4],
            name: String::new(),
        };
        assert!(serialize_map(&m).ends_with("map\n@@\n@@"));
    }

    #[test]
    fn parse_serialize_round_trip_is_idempotent() {
        let texts = [
            "type octile\nheight 2\nwidth 3\nmap\n.@.\n...",
            "type octile\r\nheight 2\r\nwidth 2\r\nmap\r\nG.\r\n.W\r\n",
            "type tile\nheight 1\nwidth 4\nmap\nS..O",
        ];
        for t in texts {
            let once = parse_map(t).unwrap();
            let twice = parse_map(&serialize_map(&once)).unwrap();
            assert_eq!(once, twice);
            assert_eq!(serialize_map(&once), serialize_map(&twice));
        }
    }

    #[test]
    fn neighbors_center_corner_enclosed() {
        let open = open_map(3, 3);
        assert_eq!(neighbors(&open, Cell::new(1, 1)).unwrap().len(), 4);
        assert_eq!(neighbors(&open, Cell::new(0, 0)).unwrap().len(), 2);

        let walled = map_from_rows(&[".@.", "@.@", ".@."]);
        assert!(neighbors(&walled, Cell::new(1, 1)).unwrap().is_empty());
        assert!(neighbors(&walled, Cell::new(3, 0)).is_err());
    }

    #[test]
    fn neighbors_stable_order() {
        let open = open_map(3, 3);
        let ns = neighbors(&open, Cell::new(1, 1)).unwrap();
        assert_eq!(
            ns,
            vec![
                Cell::new(0, 1),
                Cell::new(2, 1),
                Cell::new(1, 0),
                Cell::new(1, 2)
            ]
        );
    }

    #[test]
    fn downscale_identity_and_blocks() {
        let m = map_from_rows(&["..@@", "..@.", ".@..", "...."]);
        let same = downscale_map(&m, 1).unwrap();
        assert_eq!(&m, &same);

        let half = downscale_map(&m, 2).unwrap();
        assert_eq!((half.height(), half.width()), (2, 2));
        // all-passable block stays passable
        assert!(half.is_passable(Cell::new(0, 0)));
        // 2/2 tie blocks, 3/4 majority passes
        assert!(!half.is_passable(Cell::new(0, 1)));
        assert!(half.is_passable(Cell::new(1, 0)));
        assert!(half.is_passable(Cell::new(1, 1)));

        assert!(downscale_map(&m, 3).is_err());
    }

    #[test]
    fn sample_problem_is_seed_deterministic() {
        let m = open_map(5, 5);
        let a = sample_problem(&m, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_problem(&m, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a.start(), b.start());
        assert_eq!(a.goals(), b.goals());
        assert_eq!(a.true_goal(), b.true_goal());
        let c = sample_problem(&m, 2, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert!(a.start() != c.start() || a.goals() != c.goals() || a.true_goal() != c.true_goal());
    }

    #[test]
    fn sample_problem_never_places_unreachable_goals() {
        // Right column sealed off by a wall.
        let sealed = Arc::new(map_from_rows(&["..@.", "..@.", "..@.", "..@."]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = sample_problem(&sealed, 2, &mut rng).unwrap();
            let reach = reachable_set(&sealed, p.start());
            for g in p.goals() {
                assert!(reach[sealed.index(*g)], "goal {g} unreachable (flood fill oracle)");
            }
        }
    }

    #[test]
    fn sample_problem_exhausts_budget_when_start_cannot_fit() {
        let m = open_map(2, 2);
        let err = sample_problem(&m, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, GridError::SamplingBudgetExhausted { .. }));
    }

    #[test]
    fn trajectory_validation() {
        let m = map_from_rows(&["...", ".@.", "..."]);
        let ok = Trajectory::new(vec![Cell::new(0, 0), Cell::new(0, 1), Cell::new(0, 2)]).unwrap();
        ok.validate(&m).unwrap();

        let diagonal =
            Trajectory::new(vec![Cell::new(0, 0), Cell::new(1, 1)]).unwrap();
        assert!(diagonal.validate(&m).is_err());

        let through_wall =
            Trajectory::new(vec![Cell::new(1, 0), Cell::new(1, 1)]).unwrap();
        assert!(through_wall.validate(&m).is_err());

        assert!(Trajectory::new(vec![]).is_err());
    }

    #[test]
    fn valid_trajectories_have_unit_l1_steps() {
        let m = open_map(6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // random walk that stays in bounds
            let mut cells = vec![Cell::new(3, 3)];
            for _ in 0..15 {
                let cur = *cells.last().unwrap();
                let ns = neighbors(&m, cur).unwrap();
                cells.push(ns[rng.random_range(0..ns.len())]);
            }
            let t = Trajectory::new(cells).unwrap();
            t.validate(&m).unwrap();
            for (a, b) in t.moves() {
                assert_eq!(a.row.abs_diff(b.row) + a.col.abs_diff(b.col), 1);
            }
        }
    }
}
