//! Planners and cost models: exact cost-to-goal fields, A* search, the
//! randomly over-estimating heuristic used to simulate suboptimal agents,
//! and deterministic cost corruption for recognizers with erroneous models.
//!
//! All stochastic perturbations are counter-free: each edge or state hashes
//! its endpoints together with a seed, so values do not depend on query
//! order and are reproducible across runs.

use std::collections::BinaryHeap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::gridworld::{neighbors, Cell, GridError, GridMap, Trajectory};
use crate::seeding::{mix3, splitmix64, unit_closed, unit_open};

#[derive(Debug, Error)]
pub enum PlanningError {
    #[error(transparent)]
    Grid(#[from] GridError),

    #[error("endpoint {0} is blocked or out of bounds")]
    BadEndpoint(Cell),

    #[error("no path from {from} to {to}")]
    Unreachable { from: Cell, to: Cell },

    #[error("cost field cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pack a cell into one word for hashing. Rows and columns fit in 32 bits.
fn pack(c: Cell) -> u64 {
    ((c.row as u64) << 32) | c.col as u64
}

/// Deterministic per-edge cost corruption: with probability `eps_prime` a
/// directed edge costs `1 + delta`, `delta` uniform in `(0, delta_max]`,
/// otherwise it keeps its true unit cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub eps_prime: f64,
    pub delta_max: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    /// Cost of the directed move `from -> to`. Always >= 1, so distance
    /// heuristics valid for unit costs stay valid under corruption.
    pub fn edge_cost(&self, from: Cell, to: Cell) -> f64 {
        let k = mix3(self.seed, pack(from), pack(to));
        if unit_open(k) < self.eps_prime {
            1.0 + self.delta_max * unit_closed(splitmix64(k))
        } else {
            1.0
        }
    }
}

/// The cost structure a planner believes in: the true unit-cost dynamics or
/// a corrupted copy of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    Uniform,
    Corrupted(CorruptionSpec),
}

impl CostModel {
    pub fn edge_cost(&self, from: Cell, to: Cell) -> f64 {
        match self {
            CostModel::Uniform => 1.0,
            CostModel::Corrupted(spec) => spec.edge_cost(from, to),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, CostModel::Uniform)
    }
}

/// Optimal cost-to-goal for every cell of a map under one cost model.
/// Unreachable or blocked cells hold `+INF`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    goal: Cell,
    height: usize,
    width: usize,
    costs: Vec<f64>,
}

impl CostField {
    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cost(&self, c: Cell) -> f64 {
        debug_assert!(c.row < self.height && c.col < self.width);
        self.costs[c.row * self.width + c.col]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }
}

/// Cost-to-goal field by breadth-first search from the goal over reversed
/// moves. Routes are always the fewest-move routes of the grid; the model
/// only meters them. Under uniform costs every move costs 1 and the field is
/// the exact optimal cost. Under a corrupted model each route is costed move
/// by move with the model's noisy per-transition costs, so a cell holds the
/// believed cost of its fewest-move route — noise accumulates along the
/// route instead of being planned around, which is the failure mode an
/// erroneous cost model actually inflicts on a recognizer. With eps' = 0
/// every metered move is exactly 1 and the two models agree bitwise.
pub fn cost_field(m: &GridMap, goal: Cell, model: &CostModel) -> Result<CostField, PlanningError> {
    if !m.is_passable(goal) {
        return Err(PlanningError::BadEndpoint(goal));
    }
    let mut costs = vec![f64::INFINITY; m.cells()];
    let gi = m.index(goal);
    costs[gi] = 0.0;

    let mut queue = std::collections::VecDeque::new();
    queue.push_back(goal);
    while let Some(v) = queue.pop_front() {
        let base = costs[m.index(v)];
        for u in neighbors(m, v)? {
            let ui = m.index(u);
            if costs[ui].is_infinite() {
                // Cost-to-goal sums the forward move u -> v.
                costs[ui] = base + model.edge_cost(u, v);
                queue.push_back(u);
            }
        }
    }

    Ok(CostField {
        goal,
        height: m.height(),
        width: m.width(),
        costs,
    })
}

/// Heap key ordered by cost then index, for deterministic Dijkstra.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapKey {
    cost: f64,
    index: usize,
}

impl Eq for HeapKey {}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Optimal cost from `source` to every cell under `model`, optionally with
/// one directed edge removed from the graph. The reverse move survives a
/// removal. Unreachable cells hold `+INF`.
pub fn source_costs(
    m: &GridMap,
    source: Cell,
    model: &CostModel,
    removed: Option<(Cell, Cell)>,
) -> Result<Vec<f64>, PlanningError> {
    if !m.is_passable(source) {
        return Err(PlanningError::BadEndpoint(source));
    }
    let mut costs = vec![f64::INFINITY; m.cells()];
    costs[m.index(source)] = 0.0;
    let mut heap: BinaryHeap<std::cmp::Reverse<HeapKey>> = BinaryHeap::new();
    heap.push(std::cmp::Reverse(HeapKey { cost: 0.0, index: m.index(source) }));
    while let Some(std::cmp::Reverse(HeapKey { cost, index })) = heap.pop() {
        if cost > costs[index] {
            continue;
        }
        let u = m.cell_at(index);
        for v in neighbors(m, u)? {
            if removed == Some((u, v)) {
                continue;
            }
            let vi = m.index(v);
            let cand = cost + model.edge_cost(u, v);
            if cand < costs[vi] {
                costs[vi] = cand;
                heap.push(std::cmp::Reverse(HeapKey { cost: cand, index: vi }));
            }
        }
    }
    Ok(costs)
}

/// Manhattan distance. Admissible and consistent for 4-connected unit moves.
pub fn l1(a: Cell, b: Cell) -> f64 {
    (a.row.abs_diff(b.row) + a.col.abs_diff(b.col)) as f64
}

/// Euclidean distance. Admissible and consistent, weaker than [`l1`].
pub fn l2(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    (dr * dr + dc * dc).sqrt()
}

/// A heuristic that over-estimates at random states: with probability `eps`
/// a state's value is `base + delta`, `delta` uniform in `(0, delta_max]`,
/// otherwise it is the admissible base value. Which states are inflated and
/// by how much is a pure function of `(state, goal, seed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsHeuristic {
    pub eps: f64,
    pub delta_max: f64,
    pub seed: u64,
}

impl EpsHeuristic {
    pub fn eval(&self, base: f64, s: Cell, g: Cell) -> f64 {
        let k = mix3(self.seed, pack(s), pack(g));
        if unit_open(k) < self.eps {
            base + self.delta_max * unit_closed(splitmix64(k))
        } else {
            base
        }
    }
}

/// A found path with its cost under the search's cost model and the number
/// of node expansions the search performed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub cells: Vec<Cell>,
    pub cost: f64,
    pub expanded: usize,
}

impl PathResult {
    pub fn into_trajectory(self) -> Trajectory {
        Trajectory::new(self.cells).expect("search paths are non-empty")
    }
}

/// Open-list entry. `BinaryHeap` pops its maximum, so `Ord` ranks the entry
/// to expand next as greatest: smallest f, then largest g, then earliest
/// insertion. The fixed rule makes searches bit-reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    seq: u64,
    index: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A* from `start` to `goal`. `h` is evaluated once per generated state and
/// is not assumed admissible; states are re-opened when a cheaper route to
/// them appears, but the search still stops at the first goal expansion, so
/// an over-estimating `h` can yield a suboptimal path. That is intended:
/// suboptimal agents come from exactly this search.
pub fn astar_path<H: Fn(Cell) -> f64>(
    m: &GridMap,
    start: Cell,
    goal: Cell,
    model: &CostModel,
    h: H,
) -> Result<PathResult, PlanningError> {
    if !m.is_passable(start) {
        return Err(PlanningError::BadEndpoint(start));
    }
    if !m.is_passable(goal) {
        return Err(PlanningError::BadEndpoint(goal));
    }

    let n = m.cells();
    let mut g_best = vec![f64::INFINITY; n];
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut heap: BinaryHeap<OpenEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut expanded = 0usize;

    let si = m.index(start);
    g_best[si] = 0.0;
    heap.push(OpenEntry { f: h(start), g: 0.0, seq, index: si });

    while let Some(OpenEntry { g, index, .. }) = heap.pop() {
        if g > g_best[index] {
            continue;
        }
        expanded += 1;
        let u = m.cell_at(index);
        if u == goal {
            let mut cells = vec![u];
            let mut cur = index;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push(m.cell_at(cur));
            }
            cells.reverse();
            return Ok(PathResult { cells, cost: g, expanded });
        }
        for v in neighbors(m, u)? {
            let vi = m.index(v);
            let ng = g + model.edge_cost(u, v);
            if ng < g_best[vi] {
                g_best[vi] = ng;
                parent[vi] = index;
                seq += 1;
                heap.push(OpenEntry { f: ng + h(v), g: ng, seq, index: vi });
            }
        }
    }

    Err(PlanningError::Unreachable { from: start, to: goal })
}

/// Shortest path under `model` with the admissible Euclidean heuristic.
pub fn optimal_path(
    m: &GridMap,
    start: Cell,
    goal: Cell,
    model: &CostModel,
) -> Result<PathResult, PlanningError> {
    astar_path(m, start, goal, model, |c| l2(c, goal))
}

/// Simulate a suboptimal but purposeful agent: A* over true unit costs
/// guided by the randomly over-estimating heuristic. With `eps = 0` this is
/// an optimal planner; larger `eps` and `delta_max` give longer detours.
pub fn generate_suboptimal_path(
    m: &GridMap,
    start: Cell,
    goal: Cell,
    eps: f64,
    delta_max: f64,
    seed: u64,
) -> Result<PathResult, PlanningError> {
    let inflate = EpsHeuristic { eps, delta_max, seed };
    astar_path(m, start, goal, &CostModel::Uniform, |c| {
        inflate.eval(l2(c, goal), c, goal)
    })
}

const CACHE_MAGIC: &[u8; 4] = b"PCF1";

/// Serialize a cost field: magic `PCF1`, then height, width, goal row and
/// goal column as little-endian u32, then row-major costs as little-endian
/// f32 with `+INF` marking unreachable cells.
pub fn write_cost_field<W: Write>(w: &mut W, field: &CostField) -> Result<(), PlanningError> {
    w.write_all(CACHE_MAGIC)?;
    for v in [
        field.height as u32,
        field.width as u32,
        field.goal.row as u32,
        field.goal.col as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in &field.costs {
        w.write_all(&(*c as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_cost_field<R: Read>(r: &mut R) -> Result<CostField, PlanningError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| PlanningError::Cache("missing magic".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(PlanningError::Cache(format!(
            "bad magic {magic:?}, expected {CACHE_MAGIC:?}"
        )));
    }
    let mut word = [0u8; 4];
    let mut header = [0u32; 4];
    for slot in &mut header {
        r.read_exact(&mut word)
            .map_err(|_| PlanningError::Cache("truncated header".into()))?;
        *slot = u32::from_le_bytes(word);
    }
    let [height, width, goal_row, goal_col] = header.map(|v| v as usize);
    if height == 0 || width == 0 {
        return Err(PlanningError::Cache("zero dimension".into()));
    }
    if goal_row >= height || goal_col >= width {
        return Err(PlanningError::Cache(format!(
            "goal ({goal_row},{goal_col}) outside {height}x{width} field"
        )));
    }
    let mut costs = Vec::with_capacity(height * width);
    for _ in 0..height * width {
        r.read_exact(&mut word)
            .map_err(|_| PlanningError::Cache("truncated body".into()))?;
        costs.push(f32::from_le_bytes(word) as f64);
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(PlanningError::Cache("trailing bytes after body".into()));
    }
    Ok(CostField {
        goal: Cell::new(goal_row, goal_col),
        height,
        width,
        costs,
    })
}

pub fn save_cost_field(path: &std::path::Path, field: &CostField) -> Result<(), PlanningError> {
    let mut buf = Vec::new();
    write_cost_field(&mut buf, field)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_cost_field(path: &std::path::Path) -> Result<CostField, PlanningError> {
    let bytes = std::fs::read(path)?;
    read_cost_field(&mut bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::parse_map;
    use std::sync::Arc;

    fn map_from_rows(rows: &[&str]) -> GridMap {
        let text = format!(
            "type octile\nheight {}\nwidth {}\nmap\n{}",
            rows.len(),
            rows[0].len(),
            rows.join("\n")
        );
        parse_map(&text).unwrap()
    }

    fn open_map(h: usize, w: usize) -> GridMap {
        GridMap::new("open", h, w, vec![true; h * w]).unwrap()
    }

    /// All-pairs shortest paths by Floyd-Warshall over directed edge costs.
    /// Independent of the search code: no heaps, no queues.
    fn floyd_warshall(m: &GridMap, model: &CostModel) -> Vec<Vec<f64>> {
        let n = m.cells();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for i in 0..n {
            d[i][i] = 0.0;
            let u = m.cell_at(i);
            if !m.is_passable(u) {
                continue;
            }
            for v in neighbors(m, u).unwrap() {
                d[i][m.index(v)] = model.edge_cost(u, v);
            }
        }
        for k in 0..n {
            for i in 0..n {
                if d[i][k].is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let cand = d[i][k] + d[k][j];
                    if cand < d[i][j] {
                        d[i][j] = cand;
                    }
                }
            }
        }
        d
    }

    const MAZE: [&str; 5] = ["......", ".@@@..", ".@..@.", ".@.@@.", "......"];

    #[test]
    fn uniform_cost_field_matches_floyd_warshall_exactly() {
        let m = map_from_rows(&MAZE);
        let d = floyd_warshall(&m, &CostModel::Uniform);
        for g in m.passable_cells() {
            let field = cost_field(&m, g, &CostModel::Uniform).unwrap();
            let gi = m.index(g);
            for i in 0..m.cells() {
                // Unit costs are small integers: equality is exact in f64.
                assert_eq!(field.costs()[i], d[i][gi], "cell {i} goal {g}");
            }
        }
    }

    #[test]
    fn corrupted_cost_field_meters_fewest_move_routes() {
        // A corrupted field must decompose, at every reachable cell, into one
        // metered forward move plus the value of a neighbor that is one move
        // closer to the goal. By induction that certifies each value as the
        // metered cost of some fewest-move route, without pinning which
        // tie-broken route the search picked.
        let m = map_from_rows(&MAZE);
        for (eps_prime, seed) in [(0.2, 11), (1.0, 12), (0.5, 13)] {
            let model = CostModel::Corrupted(CorruptionSpec {
                eps_prime,
                delta_max: 10.0,
                seed,
            });
            for g in m.passable_cells() {
                let clean = cost_field(&m, g, &CostModel::Uniform).unwrap();
                let field = cost_field(&m, g, &model).unwrap();
                for u in m.passable_cells() {
                    let hops = clean.cost(u);
                    let val = field.cost(u);
                    if hops.is_infinite() {
                        assert!(val.is_infinite());
                        continue;
                    }
                    if u == g {
                        assert_eq!(val, 0.0);
                        continue;
                    }
                    let witness = neighbors(&m, u).unwrap().into_iter().any(|v| {
                        clean.cost(v) == hops - 1.0
                            && (val - (field.cost(v) + model.edge_cost(u, v))).abs() < 1e-9
                    });
                    assert!(witness, "cell {u} has no metered fewest-move decomposition");
                    // Every metered move costs at least 1 and at most 11.
                    assert!(val >= hops - 1e-9, "cell {u}: {val} below move count {hops}");
                    assert!(val <= hops * 11.0 + 1e-9, "cell {u}: {val} above cap");
                }
            }
        }
    }

    #[test]
    fn zero_corruption_field_is_bitwise_clean_and_deterministic() {
        let m = map_from_rows(&MAZE);
        let g = Cell::new(2, 3);
        let clean = cost_field(&m, g, &CostModel::Uniform).unwrap();
        let zero = CostModel::Corrupted(CorruptionSpec { eps_prime: 0.0, delta_max: 10.0, seed: 5 });
        assert_eq!(cost_field(&m, g, &zero).unwrap(), clean);

        let model = CostModel::Corrupted(CorruptionSpec { eps_prime: 1.0, delta_max: 10.0, seed: 6 });
        let a = cost_field(&m, g, &model).unwrap();
        let b = cost_field(&m, g, &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cost_field_marks_unreachable_and_blocked_infinite() {
        let m = map_from_rows(&["..@.", "..@.", "..@."]);
        let field = cost_field(&m, Cell::new(0, 0), &CostModel::Uniform).unwrap();
        assert!(field.cost(Cell::new(0, 2)).is_infinite());
        assert!(field.cost(Cell::new(1, 3)).is_infinite());
        assert_eq!(field.cost(Cell::new(2, 1)), 3.0);
    }

    #[test]
    fn corruption_is_order_independent_and_directed() {
        let spec = CorruptionSpec { eps_prime: 1.0, delta_max: 10.0, seed: 99 };
        let a = Cell::new(3, 4);
        let b = Cell::new(3, 5);
        let fwd1 = spec.edge_cost(a, b);
        let rev = spec.edge_cost(b, a);
        let fwd2 = spec.edge_cost(a, b);
        assert_eq!(fwd1, fwd2);
        assert_ne!(fwd1, rev, "directed edges draw independent costs");
        assert!(fwd1 > 1.0 && fwd1 <= 11.0);
    }

    #[test]
    fn corruption_rate_and_mean_match_spec_monte_carlo() {
        // With probability eps' an edge gains Uniform(0, dmax], so the mean
        // edge cost is 1 + eps' * dmax / 2.
        let spec = CorruptionSpec { eps_prime: 0.2, delta_max: 10.0, seed: 7 };
        let mut corrupted = 0usize;
        let mut sum = 0.0;
        let n = 200_000u64;
        for i in 0..n {
            let c = spec.edge_cost(Cell::new(i as usize % 1000, 0), Cell::new(0, i as usize / 1000));
            if c > 1.0 {
                corrupted += 1;
            }
            sum += c;
        }
        let rate = corrupted as f64 / n as f64;
        let mean = sum / n as f64;
        assert!((rate - 0.2).abs() < 0.01, "corruption rate {rate}");
        assert!((mean - 2.0).abs() < 0.05, "mean corrupted cost {mean}");
    }

    #[test]
    fn eps_zero_heuristic_is_base_and_inflation_stats_match() {
        let h0 = EpsHeuristic { eps: 0.0, delta_max: 10.0, seed: 5 };
        let g = Cell::new(40, 40);
        assert_eq!(h0.eval(l2(Cell::new(0, 0), g), Cell::new(0, 0), g), l2(Cell::new(0, 0), g));

        // Mean excess over the base is eps * dmax / 2.
        let h = EpsHeuristic { eps: 0.2, delta_max: 10.0, seed: 5 };
        let mut excess = 0.0;
        let mut inflated = 0usize;
        let n = 200_000;
        for i in 0..n {
            let s = Cell::new(i % 447, i / 447);
            let base = l2(s, g);
            let v = h.eval(base, s, g);
            assert!(v >= base);
            if v > base {
                inflated += 1;
                assert!(v - base <= 10.0 + 1e-12);
            }
            excess += v - base;
        }
        let rate = inflated as f64 / n as f64;
        assert!((rate - 0.2).abs() < 0.01, "inflation rate {rate}");
        assert!((excess / n as f64 - 1.0).abs() < 0.05, "mean excess {}", excess / n as f64);
    }

    #[test]
    fn astar_cost_matches_uniform_field_and_bounds_corrupted_field() {
        let m = map_from_rows(&MAZE);
        let goal = Cell::new(2, 3);
        for model in [
            CostModel::Uniform,
            CostModel::Corrupted(CorruptionSpec { eps_prime: 1.0, delta_max: 10.0, seed: 3 }),
        ] {
            let field = cost_field(&m, goal, &model).unwrap();
            for s in m.passable_cells() {
                if field.cost(s).is_infinite() {
                    assert!(matches!(
                        astar_path(&m, s, goal, &model, |c| l2(c, goal)),
                        Err(PlanningError::Unreachable { .. })
                    ));
                    continue;
                }
                let res = astar_path(&m, s, goal, &model, |c| l2(c, goal)).unwrap();
                match model {
                    // Uniform fields are exact optimal costs.
                    CostModel::Uniform => {
                        assert!((res.cost - field.cost(s)).abs() < 1e-9);
                    }
                    // A corrupted field meters one fewest-move route; A*
                    // searches all routes under the same metered costs, so
                    // its optimum can only be cheaper or equal.
                    CostModel::Corrupted(_) => {
                        assert!(
                            res.cost <= field.cost(s) + 1e-9,
                            "A* {} exceeds metered route {}",
                            res.cost,
                            field.cost(s)
                        );
                    }
                }
                let t = Trajectory::new(res.cells.clone()).unwrap();
                t.validate(&m).unwrap();
                assert_eq!(t.start(), s);
                assert_eq!(t.last(), goal);
                // The reported cost is the sum of its edge costs.
                let sum: f64 = t.moves().map(|(a, b)| model.edge_cost(a, b)).sum();
                assert!((sum - res.cost).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn astar_rejects_blocked_endpoints() {
        let m = map_from_rows(&[".@", ".."]);
        let blocked = Cell::new(0, 1);
        let open = Cell::new(0, 0);
        assert!(matches!(
            astar_path(&m, blocked, open, &CostModel::Uniform, |_| 0.0),
            Err(PlanningError::BadEndpoint(_))
        ));
        assert!(matches!(
            astar_path(&m, open, blocked, &CostModel::Uniform, |_| 0.0),
            Err(PlanningError::BadEndpoint(_))
        ));
    }

    #[test]
    fn astar_is_deterministic() {
        let m = open_map(12, 12);
        let run = || {
            generate_suboptimal_path(&m, Cell::new(0, 0), Cell::new(11, 7), 0.3, 10.0, 77).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.cost, b.cost);
        assert_eq!(a.expanded, b.expanded);
    }

    #[test]
    fn suboptimal_paths_are_valid_and_never_cheaper_than_optimal() {
        let m = Arc::new(map_from_rows(&MAZE));
        let start = Cell::new(0, 0);
        let goal = Cell::new(4, 5);
        let optimal = cost_field(&m, goal, &CostModel::Uniform).unwrap().cost(start);
        for seed in 0..200 {
            let res = generate_suboptimal_path(&m, start, goal, 0.2, 10.0, seed).unwrap();
            let t = Trajectory::new(res.cells).unwrap();
            t.validate(&m).unwrap();
            assert_eq!((t.start(), t.last()), (start, goal));
            assert_eq!(res.cost, (t.len() - 1) as f64);
            assert!(res.cost >= optimal);
        }
    }

    #[test]
    fn inflation_produces_detours_on_some_seeds() {
        // A ring with unequal arcs: 5 steps around the bottom left, 11
        // around the top right. Inflating a bottom-arc state enough sends
        // the search the long way, which is a genuinely suboptimal path.
        let ring = map_from_rows(&[".......", ".@@@@@.", "......."]);
        let start = Cell::new(0, 0);
        let goal = Cell::new(2, 3);
        let optimal = cost_field(&ring, goal, &CostModel::Uniform).unwrap().cost(start);
        assert_eq!(optimal, 5.0);
        let mut detours = 0usize;
        for seed in 0..200 {
            let res = generate_suboptimal_path(&ring, start, goal, 0.2, 10.0, seed).unwrap();
            assert!(res.cost >= optimal);
            if res.cost > optimal {
                detours += 1;
            }
        }
        assert!(detours > 0, "no seed produced a suboptimal path");
        assert!(detours < 120, "detours should be the minority at eps 0.2");
    }

    #[test]
    fn eps_zero_reproduces_optimal_cost() {
        let m = map_from_rows(&MAZE);
        let goal = Cell::new(4, 5);
        let field = cost_field(&m, goal, &CostModel::Uniform).unwrap();
        for s in m.passable_cells() {
            let res = generate_suboptimal_path(&m, s, goal, 0.0, 10.0, 9).unwrap();
            assert_eq!(res.cost, field.cost(s));
        }
    }

    #[test]
    fn optimal_paths_approach_the_goal_monotonically() {
        // Along any optimal path the remaining cost drops by exactly the
        // step cost, so it never increases.
        let m = map_from_rows(&MAZE);
        let goal = Cell::new(2, 2);
        let field = cost_field(&m, goal, &CostModel::Uniform).unwrap();
        for s in m.passable_cells() {
            if field.cost(s).is_infinite() {
                continue;
            }
            let res = optimal_path(&m, s, goal, &CostModel::Uniform).unwrap();
            let mut prev = f64::INFINITY;
            for (i, c) in res.cells.iter().enumerate() {
                let cur = field.cost(*c);
                assert!(cur <= prev, "cost rose at step {i}");
                if i > 0 {
                    assert_eq!(prev - cur, 1.0);
                }
                prev = cur;
            }
            assert_eq!(prev, 0.0);
        }
    }

    #[test]
    fn tie_break_prefers_deeper_nodes() {
        // On an open grid every cell on the L1 rectangle lies on some
        // optimal path. Preferring larger g pushes one route to the goal
        // instead of fanning out, so expansions stay near the path length
        // when the heuristic is exact along it.
        let m = open_map(16, 16);
        let goal = Cell::new(15, 0);
        let res = astar_path(&m, Cell::new(0, 0), goal, &CostModel::Uniform, |c| l1(c, goal))
            .unwrap();
        assert_eq!(res.cost, 15.0);
        assert_eq!(res.expanded, 16, "exact heuristic plus depth tie-break walks straight");
    }

    #[test]
    fn cache_round_trips_integer_fields_exactly() {
        let m = map_from_rows(&MAZE);
        let field = cost_field(&m, Cell::new(0, 0), &CostModel::Uniform).unwrap();
        let mut buf = Vec::new();
        write_cost_field(&mut buf, &field).unwrap();
        assert_eq!(&buf[..4], b"PCF1");
        assert_eq!(buf.len(), 4 + 16 + 4 * m.cells());
        let back = read_cost_field(&mut buf.as_slice()).unwrap();
        // Small integers and +INF survive the f32 round trip bit-exactly.
        assert_eq!(back, field);
    }

    #[test]
    fn cache_round_trips_corrupted_fields_within_f32_precision() {
        let m = map_from_rows(&MAZE);
        let model = CostModel::Corrupted(CorruptionSpec { eps_prime: 1.0, delta_max: 10.0, seed: 21 });
        let field = cost_field(&m, Cell::new(4, 5), &model).unwrap();
        let mut buf = Vec::new();
        write_cost_field(&mut buf, &field).unwrap();
        let back = read_cost_field(&mut buf.as_slice()).unwrap();
        for (a, b) in field.costs().iter().zip(back.costs()) {
            if a.is_infinite() {
                assert!(b.is_infinite());
            } else {
                assert!((a - b).abs() <= a.abs() * 1e-6);
            }
        }
    }

    #[test]
    fn cache_rejects_malformed_input() {
        let m = open_map(2, 2);
        let field = cost_field(&m, Cell::new(0, 0), &CostModel::Uniform).unwrap();
        let mut buf = Vec::new();
        write_cost_field(&mut buf, &field).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(read_cost_field(&mut bad_magic.as_slice()).is_err());

        let truncated = &buf[..buf.len() - 2];
        assert!(read_cost_field(&mut &truncated[..]).is_err());

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_cost_field(&mut trailing.as_slice()).is_err());

        let mut bad_goal = buf;
        // goal row header word sits at offset 12
        bad_goal[12..16].copy_from_slice(&9u32.to_le_bytes());
        assert!(read_cost_field(&mut bad_goal.as_slice()).is_err());
    }

    #[test]
    fn source_costs_match_floyd_warshall_and_respect_removals() {
        let m = map_from_rows(&MAZE);
        let model = CostModel::Corrupted(CorruptionSpec { eps_prime: 0.5, delta_max: 4.0, seed: 2 });
        let d = floyd_warshall(&m, &model);
        let s = Cell::new(0, 0);
        let costs = source_costs(&m, s, &model, None).unwrap();
        for i in 0..m.cells() {
            let (a, b) = (costs[i], d[m.index(s)][i]);
            if a.is_infinite() || b.is_infinite() {
                assert_eq!(a, b);
            } else {
                assert!((a - b).abs() < 1e-9);
            }
        }

        // Removing the only outgoing move of a corridor start disconnects it.
        let corridor = map_from_rows(&["....."]);
        let removed = Some((Cell::new(0, 0), Cell::new(0, 1)));
        let cut = source_costs(&corridor, Cell::new(0, 0), &CostModel::Uniform, removed).unwrap();
        assert!(cut[corridor.index(Cell::new(0, 4))].is_infinite());
        assert_eq!(cut[corridor.index(Cell::new(0, 0))], 0.0);

        // On a ring the removal forces the long way around.
        let ring = map_from_rows(&["...", ".@.", "..."]);
        let cut = source_costs(
            &ring,
            Cell::new(0, 0),
            &CostModel::Uniform,
            Some((Cell::new(0, 0), Cell::new(0, 1))),
        )
        .unwrap();
        assert_eq!(cut[ring.index(Cell::new(0, 1))], 7.0);
    }

    #[test]
    fn heuristics_are_admissible_on_unit_grids() {
        let m = map_from_rows(&MAZE);
        let goal = Cell::new(4, 5);
        let field = cost_field(&m, goal, &CostModel::Uniform).unwrap();
        for s in m.passable_cells() {
            let d = field.cost(s);
            if d.is_finite() {
                assert!(l1(s, goal) <= d + 1e-12);
                assert!(l2(s, goal) <= l1(s, goal) + 1e-12);
            }
        }
    }
}
