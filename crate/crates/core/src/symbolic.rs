//! Cost-based goal recognizers: the start-vs-now cost difference, the
//! observation-complement cost difference, the cost-ratio score, and the
//! Boltzmann posterior that turns any of them into probabilities.
//!
//! All functions are pure and panic only on violated preconditions (fields
//! not matching the problem's goals, invalid trajectories).

use crate::gridworld::{NavProblem, Trajectory};
use crate::planning::{source_costs, CostField, CostModel};

/// Per-goal cost differences, same order as the problem's goals. Entries
/// may be infinite for goals made impossible (+INF) or certain (-INF) by
/// the observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector {
    pub deltas: Vec<f64>,
}

/// A probability distribution over the problem's goals, same index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    /// Normalize non-negative scores. An all-zero score vector has no
    /// information and falls back to uniform.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        debug_assert!(scores.iter().all(|s| *s >= 0.0 && s.is_finite()));
        let sum: f64 = scores.iter().sum();
        let n = scores.len();
        let probs = if sum <= 0.0 {
            vec![1.0 / n as f64; n]
        } else {
            scores.iter().map(|s| s / sum).collect()
        };
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices of all goals sharing the exact maximum probability. Ties are
    /// real here: symmetric layouts produce bit-identical scores.
    pub fn max_indices(&self) -> Vec<usize> {
        let best = self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p == best)
            .map(|(i, _)| i)
            .collect()
    }

    /// Goal indices from most to least probable, ties by lower index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|a, b| self.probs[*b].total_cmp(&self.probs[*a]).then(a.cmp(b)));
        idx
    }
}

/// Panic unless `fields` is one cost field per goal, in goal order.
pub(crate) fn check_goal_fields(p: &NavProblem, fields: &[CostField]) {
    assert_eq!(
        fields.len(),
        p.goals().len(),
        "one cost field per goal, in goal order"
    );
    for (f, g) in fields.iter().zip(p.goals()) {
        assert_eq!(f.goal(), *g, "cost field goal order must match the problem");
    }
}

/// Cost difference between where the agent is and where it started:
/// `deltas[g] = c(s_t, g) - c(s_0, g)`. Only the trajectory endpoints
/// matter. Negative means the agent moved closer to `g` under the
/// recognizer's cost model.
pub fn ms_delta(p: &NavProblem, traj: &Trajectory, fields: &[CostField]) -> DeltaVector {
    check_goal_fields(p, fields);
    let s0 = traj.start();
    let st = traj.last();
    let deltas = fields
        .iter()
        .map(|f| {
            let (c0, ct) = (f.cost(s0), f.cost(st));
            if ct.is_infinite() {
                f64::INFINITY
            } else if c0.is_infinite() {
                f64::NEG_INFINITY
            } else {
                ct - c0
            }
        })
        .collect();
    DeltaVector { deltas }
}

/// Cost difference between complying with the observations and violating
/// them: `deltas[g] = cO - cNotO`. `cO` is the model cost of the observed
/// prefix plus the optimal remaining cost to `g`. `cNotO` is the cheapest
/// plan to `g` that skips at least one observed move, realized as the best
/// optimal cost over single observed-edge removals. With no observed moves,
/// or when every removal disconnects `g`, `cNotO` is `+INF` and the goal is
/// maximally supported (`-INF`).
pub fn rg_delta(p: &NavProblem, traj: &Trajectory, model: &CostModel) -> DeltaVector {
    let m = p.map();
    let s0 = traj.start();
    let st = traj.last();

    let prefix_cost: f64 = traj.moves().map(|(a, b)| model.edge_cost(a, b)).sum();
    let from_last = source_costs(m, st, model, None).expect("trajectory cells are passable");

    // One search per distinct observed move serves every goal at once.
    let mut removals: Vec<(crate::gridworld::Cell, crate::gridworld::Cell)> = Vec::new();
    for mv in traj.moves() {
        if !removals.contains(&mv) {
            removals.push(mv);
        }
    }
    let complement_costs: Vec<Vec<f64>> = removals
        .iter()
        .map(|mv| source_costs(m, s0, model, Some(*mv)).expect("start cell is passable"))
        .collect();

    let deltas = p
        .goals()
        .iter()
        .map(|g| {
            let gi = m.index(*g);
            let c_obs = prefix_cost + from_last[gi];
            let c_not = complement_costs
                .iter()
                .map(|costs| costs[gi])
                .fold(f64::INFINITY, f64::min);
            if c_obs.is_infinite() {
                f64::INFINITY
            } else if c_not.is_infinite() {
                f64::NEG_INFINITY
            } else {
                c_obs - c_not
            }
        })
        .collect();
    DeltaVector { deltas }
}

/// Boltzmann posterior over goals: score `1/(1 + exp(beta * delta))`,
/// normalized. Low delta means high probability. Saturates cleanly:
/// `+INF -> 0`, `-INF -> 1`, and exp overflow is already 0 in f64.
pub fn boltzmann_posterior(deltas: &DeltaVector, beta: f64) -> Posterior {
    assert!(beta > 0.0, "beta must be positive");
    let scores = deltas
        .deltas
        .iter()
        .map(|&d| {
            if d == f64::INFINITY {
                0.0
            } else if d == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 / (1.0 + (beta * d).exp())
            }
        })
        .collect();
    Posterior::from_scores(scores)
}

/// Cost-ratio posterior: score `c(s_0,g) / (prefixCost + c(s_t,g))` per
/// goal, normalized. The score is 1 exactly when the observations lie on an
/// optimal plan to `g` and decays with wasted cost. A degenerate zero
/// denominator (the agent started on `g` and has not moved) scores 1;
/// unreachable goals score 0.
pub fn ratio_posterior(
    p: &NavProblem,
    traj: &Trajectory,
    fields: &[CostField],
    model: &CostModel,
) -> Posterior {
    check_goal_fields(p, fields);
    let s0 = traj.start();
    let st = traj.last();
    let prefix_cost: f64 = traj.moves().map(|(a, b)| model.edge_cost(a, b)).sum();
    let scores = fields
        .iter()
        .map(|f| {
            let (c0, ct) = (f.cost(s0), f.cost(st));
            if c0.is_infinite() || ct.is_infinite() {
                return 0.0;
            }
            let denom = prefix_cost + ct;
            if denom == 0.0 {
                1.0
            } else {
                c0 / denom
            }
        })
        .collect();
    Posterior::from_scores(scores)
}

/// The cost-difference recognizer end to end: Boltzmann over [`ms_delta`].
pub fn ms_recognize(
    p: &NavProblem,
    traj: &Trajectory,
    fields: &[CostField],
    beta: f64,
) -> Posterior {
    boltzmann_posterior(&ms_delta(p, traj, fields), beta)
}

/// The observation-complement recognizer end to end: Boltzmann over
/// [`rg_delta`].
pub fn rg_recognize(p: &NavProblem, traj: &Trajectory, model: &CostModel, beta: f64) -> Posterior {
    boltzmann_posterior(&rg_delta(p, traj, model), beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{neighbors, parse_map, Cell, GridMap};
    use crate::planning::cost_field;
    use std::sync::Arc;

    fn open_map(h: usize, w: usize) -> Arc<GridMap> {
        Arc::new(GridMap::new("open", h, w, vec![true; h * w]).unwrap())
    }

    fn uniform_fields(p: &NavProblem) -> Vec<CostField> {
        p.goals()
            .iter()
            .map(|g| cost_field(p.map(), *g, &CostModel::Uniform).unwrap())
            .collect()
    }

    fn traj(cells: &[(usize, usize)]) -> Trajectory {
        Trajectory::new(cells.iter().map(|&(r, c)| Cell::new(r, c)).collect()).unwrap()
    }

    #[test]
    fn ms_delta_zero_at_start_and_counts_approach() {
        let m = open_map(6, 6);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(0, 5), Cell::new(5, 0)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);

        let at_start = traj(&[(0, 0)]);
        assert_eq!(ms_delta(&p, &at_start, &fields).deltas, vec![0.0, 0.0]);

        // Three steps toward goal 0 are three steps away from goal 1.
        let toward = traj(&[(0, 0), (0, 1), (0, 2), (0, 3)]);
        assert_eq!(ms_delta(&p, &toward, &fields).deltas, vec![-3.0, 3.0]);
    }

    #[test]
    fn ms_delta_sees_only_endpoints() {
        let m = open_map(5, 5);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(2, 2),
            vec![Cell::new(0, 0), Cell::new(4, 4)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);
        let direct = traj(&[(2, 2), (2, 3)]);
        let loopy = traj(&[(2, 2), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(
            ms_delta(&p, &direct, &fields).deltas,
            ms_delta(&p, &loopy, &fields).deltas
        );
    }

    #[test]
    fn ms_delta_on_optimal_trajectory_is_minus_cost() {
        let m = open_map(7, 7);
        let goal = Cell::new(6, 6);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![goal, Cell::new(0, 6)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);
        let t = traj(&[(0, 0), (1, 0), (2, 0), (2, 1), (3, 1)]);
        // Every step reduces the remaining cost to goal 0 by exactly 1.
        assert_eq!(ms_delta(&p, &t, &fields).deltas[0], -4.0);
    }

    #[test]
    fn boltzmann_matches_hand_computed_values() {
        let even = boltzmann_posterior(&DeltaVector { deltas: vec![0.0, 0.0] }, 1.0);
        assert_eq!(even.probs(), &[0.5, 0.5]);

        // weights 1/2 and 1/(1+e^2), normalized
        let p = boltzmann_posterior(&DeltaVector { deltas: vec![0.0, 2.0] }, 1.0);
        assert!((p.probs()[0] - 0.8075).abs() < 1e-4);
        assert!((p.probs()[1] - 0.1925).abs() < 1e-4);

        // saturation: certain goal gets weight 1 against weight 1/2
        let s = boltzmann_posterior(&DeltaVector { deltas: vec![f64::NEG_INFINITY, 0.0] }, 1.0);
        assert!((s.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.probs()[1] - 1.0 / 3.0).abs() < 1e-12);

        // impossible goal gets exactly zero
        let z = boltzmann_posterior(&DeltaVector { deltas: vec![f64::INFINITY, 0.0] }, 1.0);
        assert_eq!(z.probs()[0], 0.0);
        assert_eq!(z.probs()[1], 1.0);
    }

    #[test]
    fn boltzmann_handles_overflow_and_all_zero_scores() {
        let p = boltzmann_posterior(&DeltaVector { deltas: vec![800.0, 900.0] }, 1.0);
        // Both scores underflow to zero; the fallback is uniform.
        assert_eq!(p.probs(), &[0.5, 0.5]);

        let q = boltzmann_posterior(&DeltaVector { deltas: vec![800.0, 0.0] }, 1.0);
        assert_eq!(q.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn boltzmann_is_order_reversing_and_beta_invariant_in_ranking() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.random_range(2..8);
            // Quarter-step deltas and bounded beta keep distinct scores
            // strictly ordered in f64; far outside this range 1/(1+exp(x))
            // saturates and distinct deltas collapse to equal probabilities.
            let deltas: Vec<f64> =
                (0..n).map(|_| rng.random_range(-32..=32) as f64 * 0.25).collect();
            let dv = DeltaVector { deltas: deltas.clone() };
            let beta = rng.random_range(0.1..1.4);
            let p = boltzmann_posterior(&dv, beta);
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for a in 0..n {
                for b in 0..n {
                    if deltas[a] < deltas[b] {
                        assert!(p.probs()[a] > p.probs()[b]);
                    }
                }
            }
            let doubled = boltzmann_posterior(&dv, beta * 2.0);
            assert_eq!(p.ranking(), doubled.ranking());
        }
    }

    #[test]
    fn loop_path_ranks_the_two_near_goals_tied_first() {
        // An agent hooks around its start. The two goals it bent toward tie
        // for first; the goal behind it and the far goal tie behind them.
        let m = open_map(7, 7);
        let goals = vec![
            Cell::new(1, 0),
            Cell::new(0, 4),
            Cell::new(1, 5),
            Cell::new(5, 3),
        ];
        let p = NavProblem::new(Arc::clone(&m), Cell::new(3, 1), goals, None).unwrap();
        let fields = uniform_fields(&p);
        let hook = traj(&[(3, 1), (3, 2), (2, 2)]);

        let d = ms_delta(&p, &hook, &fields);
        assert_eq!(d.deltas, vec![0.0, -2.0, -2.0, 0.0]);

        let post = ms_recognize(&p, &hook, &fields, 1.0);
        assert_eq!(post.max_indices(), vec![1, 2]);
        assert_eq!(post.probs()[1], post.probs()[2]);
        assert_eq!(post.probs()[0], post.probs()[3]);
        assert!(post.probs()[1] > post.probs()[0]);
    }

    /// Exhaustive simple-path enumeration, the oracle for removal planning.
    fn enumerate_best(
        m: &GridMap,
        from: Cell,
        to: Cell,
        skip: Option<(Cell, Cell)>,
    ) -> f64 {
        fn go(
            m: &GridMap,
            cur: Cell,
            to: Cell,
            skip: Option<(Cell, Cell)>,
            seen: &mut Vec<Cell>,
            best: &mut f64,
        ) {
            let cost = (seen.len() - 1) as f64;
            if cost >= *best {
                return;
            }
            if cur == to {
                *best = cost;
                return;
            }
            for n in neighbors(m, cur).unwrap() {
                if seen.contains(&n) || skip == Some((cur, n)) {
                    continue;
                }
                seen.push(n);
                go(m, n, to, skip, seen, best);
                seen.pop();
            }
        }
        let mut seen = vec![from];
        let mut best = f64::INFINITY;
        go(m, from, to, skip, &mut seen, &mut best);
        best
    }

    fn rg_oracle(p: &NavProblem, t: &Trajectory) -> Vec<f64> {
        let m = p.map();
        let prefix = (t.len() - 1) as f64;
        p.goals()
            .iter()
            .map(|g| {
                let c_obs = prefix + enumerate_best(m, t.last(), *g, None);
                let c_not = t
                    .moves()
                    .map(|mv| enumerate_best(m, t.start(), *g, Some(mv)))
                    .fold(f64::INFINITY, f64::min);
                if c_obs.is_infinite() {
                    f64::INFINITY
                } else if c_not.is_infinite() {
                    f64::NEG_INFINITY
                } else {
                    c_obs - c_not
                }
            })
            .collect()
    }

    #[test]
    fn rg_delta_matches_enumeration_oracle() {
        let m = Arc::new(
            parse_map("type octile\nheight 4\nwidth 4\nmap\n....\n.@..\n....\n....").unwrap(),
        );
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(3, 3), Cell::new(0, 3), Cell::new(3, 0)],
            None,
        )
        .unwrap();
        let trajectories = [
            traj(&[(0, 0)]),
            traj(&[(0, 0), (0, 1)]),
            traj(&[(0, 0), (1, 0), (2, 0), (2, 1)]),
            traj(&[(0, 0), (0, 1), (0, 2), (1, 2)]),
            traj(&[(0, 0), (1, 0), (0, 0), (0, 1)]),
        ];
        for t in &trajectories {
            let got = rg_delta(&p, t, &CostModel::Uniform).deltas;
            let want = rg_oracle(&p, t);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                if a.is_infinite() || b.is_infinite() {
                    assert_eq!(a, b, "trajectory {:?}", t.cells());
                } else {
                    assert!((a - b).abs() < 1e-9, "trajectory {:?}", t.cells());
                }
            }
        }
    }

    #[test]
    fn rg_delta_on_optimal_path_with_alternatives_is_zero() {
        let m = open_map(4, 4);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(3, 3), Cell::new(0, 3)],
            None,
        )
        .unwrap();
        // Optimal toward (3,3); removing any used edge leaves other optimal
        // paths, so compliance costs nothing.
        let t = traj(&[(0, 0), (1, 0), (1, 1)]);
        let d = rg_delta(&p, &t, &CostModel::Uniform);
        assert_eq!(d.deltas[0], 0.0);
    }

    #[test]
    fn rg_delta_unique_corridor_is_neg_infinite() {
        let m = Arc::new(parse_map("type octile\nheight 1\nwidth 5\nmap\n.....").unwrap());
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(0, 4), Cell::new(0, 3)],
            None,
        )
        .unwrap();
        let t = traj(&[(0, 0), (0, 1), (0, 2)]);
        let d = rg_delta(&p, &t, &CostModel::Uniform);
        assert_eq!(d.deltas, vec![f64::NEG_INFINITY, f64::NEG_INFINITY]);
        // Maximal support saturates to certainty, split over both goals.
        let post = boltzmann_posterior(&d, 1.0);
        assert_eq!(post.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn rg_delta_detour_costs_exactly_its_waste() {
        let m = open_map(3, 4);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(0, 3), Cell::new(2, 3)],
            None,
        )
        .unwrap();
        // The unique optimal path to (0,3) runs along row 0; this detour
        // wastes 2 and its removals leave the optimal cost untouched.
        let t = traj(&[(0, 0), (1, 0), (1, 1), (0, 1)]);
        let d = rg_delta(&p, &t, &CostModel::Uniform);
        assert_eq!(d.deltas[0], 2.0);
    }

    #[test]
    fn rg_with_no_moves_is_uniform() {
        let m = open_map(3, 3);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(1, 1),
            vec![Cell::new(0, 0), Cell::new(2, 2), Cell::new(0, 2)],
            None,
        )
        .unwrap();
        let post = rg_recognize(&p, &traj(&[(1, 1)]), &CostModel::Uniform, 1.0);
        for p in post.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_scores_optimal_compliance_at_one() {
        let m = open_map(5, 5);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(4, 4), Cell::new(0, 4)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);
        let model = CostModel::Uniform;

        // t = 0: every reachable goal scores 1, the posterior is uniform.
        let start_only = traj(&[(0, 0)]);
        let post = ratio_posterior(&p, &start_only, &fields, &model);
        assert_eq!(post.probs(), &[0.5, 0.5]);

        // On an optimal path to goal 0: score 1 vs 4/(2+6) for goal 1.
        let t = traj(&[(0, 0), (1, 0), (2, 0)]);
        let post = ratio_posterior(&p, &t, &fields, &model);
        let (s0, s1) = (1.0, 4.0 / 8.0);
        assert!((post.probs()[0] - s0 / (s0 + s1)).abs() < 1e-12);
        assert!((post.probs()[1] - s1 / (s0 + s1)).abs() < 1e-12);
    }

    #[test]
    fn ratio_detour_decays_by_wasted_cost() {
        let m = open_map(3, 4);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(0, 3), Cell::new(2, 0)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);
        // Two wasted steps against an optimal cost of 3: score 3/5.
        let t = traj(&[(0, 0), (1, 0), (1, 1), (0, 1)]);
        let post = ratio_posterior(&p, &t, &fields, &CostModel::Uniform);
        let (s0, s1) = (3.0 / 5.0, 2.0 / 6.0);
        assert!((post.probs()[0] - s0 / (s0 + s1)).abs() < 1e-12);
        assert!((post.probs()[1] - s1 / (s0 + s1)).abs() < 1e-12);
    }

    #[test]
    fn ratio_degenerate_start_on_goal_scores_one() {
        let m = open_map(3, 3);
        let p = NavProblem::new(
            Arc::clone(&m),
            Cell::new(0, 0),
            vec![Cell::new(0, 0), Cell::new(2, 2)],
            None,
        )
        .unwrap();
        let fields = uniform_fields(&p);
        let post = ratio_posterior(&p, &traj(&[(0, 0)]), &fields, &CostModel::Uniform);
        // Goal 0: 0/0 scores 1. Goal 1 is also untouched: score 1.
        assert_eq!(post.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn posteriors_sum_to_one_across_random_scenes() {
        use rand::SeedableRng;
        let m = open_map(8, 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let p = crate::gridworld::sample_problem(&m, 4, &mut rng).unwrap();
            let goal = p.goals()[p.true_goal().unwrap()];
            let path =
                crate::planning::optimal_path(&m, p.start(), goal, &CostModel::Uniform).unwrap();
            let t = Trajectory::new(path.cells).unwrap();
            let fields = uniform_fields(&p);
            for post in [
                ms_recognize(&p, &t, &fields, 1.0),
                rg_recognize(&p, &t, &CostModel::Uniform, 1.0),
                ratio_posterior(&p, &t, &fields, &CostModel::Uniform),
            ] {
                let sum: f64 = post.probs().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(post.probs().iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }
}
