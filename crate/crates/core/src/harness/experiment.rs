//! Accuracy experiments: evaluate recognizer methods over a test set at
//! several observability levels, optionally with a corrupted cost model at
//! evaluation time only.

use std::collections::{BTreeMap, BTreeSet, HashMap};


use rayon::prelude::*;

use super::dataset::MapRegistry;
use super::records::ExampleRecord;
use super::HarnessError;
use crate::features::truncate;
use crate::gridworld::{Cell, NavProblem, Trajectory};
use crate::learned::{build_inputs, draw_max, forward, ModelMeta, Net, NetKind};
use crate::planning::{cost_field, CorruptionSpec, CostField, CostModel};
use crate::seeding::{mix2, mix3};
use crate::symbolic::{ms_recognize, ratio_posterior, rg_recognize};

/// Every recognizer the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Ms,
    Rg,
    Ratio,
    GcNet,
    SdNet,
    LstmObs,
    Stdnn,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ms,
        Method::Rg,
        Method::Ratio,
        Method::GcNet,
        Method::SdNet,
        Method::LstmObs,
        Method::Stdnn,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Ms => "ms",
            Method::Rg => "rg",
            Method::Ratio => "ratio",
            Method::GcNet => "gc-net",
            Method::SdNet => "sd-net",
            Method::LstmObs => "lstm-obs",
            Method::Stdnn => "stdnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.id() == s)
    }

    /// The network a learned method runs; `None` for the symbolic ones.
    pub fn net_kind(self) -> Option<NetKind> {
        match self {
            Method::GcNet => Some(NetKind::GcNet),
            Method::SdNet => Some(NetKind::SdNet),
            Method::LstmObs => Some(NetKind::LstmObs),
            Method::Stdnn => Some(NetKind::Stdnn),
            _ => None,
        }
    }

    /// Whether evaluation needs per-goal cost fields.
    fn needs_fields(self) -> bool {
        matches!(self, Method::Ms | Method::Ratio | Method::GcNet)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Trained networks available to an experiment, keyed by architecture.
#[derive(Debug, Default)]
pub struct ModelSet {
    models: BTreeMap<NetKind, (Net, ModelMeta)>,
}

impl ModelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a network under its own kind, replacing any previous one.
    pub fn insert(&mut self, net: Net, meta: ModelMeta) {
        self.models.insert(net.kind(), (net, meta));
    }

    pub fn get(&self, kind: NetKind) -> Option<&(Net, ModelMeta)> {
        self.models.get(&kind)
    }
}

/// What to evaluate: which methods, at which observability percentages,
/// under which (optional) evaluation-time corruption.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Percentages in (0, 100]; each becomes one result row per method.
    pub observability: Vec<u8>,
    /// Corruption of the evaluation-time cost model. Training is never
    /// affected; networks are reused as-is.
    pub corruption: Option<CorruptionSpec>,
    /// Posterior sharpness for the symbolic recognizers.
    pub beta: f64,
    /// Seed for tie-breaking draws over equal posterior maxima.
    pub seed: u64,
    /// Permit test records on maps a model was trained on. Off by default;
    /// needed for ingested data where train and test share one scene and
    /// disjointness comes from the agent split instead.
    pub allow_shared_map: bool,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods selected".into()));
        }
        let mut seen = BTreeSet::new();
        for m in &self.methods {
            if !seen.insert(*m) {
                return Err(HarnessError::Config(format!("method {m} listed twice")));
            }
        }
        if self.observability.is_empty() {
            return Err(HarnessError::Config("no observability levels".into()));
        }
        for &rho in &self.observability {
            if rho == 0 || rho > 100 {
                return Err(HarnessError::Config(format!(
                    "observability {rho} is outside (0, 100]"
                )));
            }
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(HarnessError::Config("beta must be positive and finite".into()));
        }
        Ok(())
    }
}

/// One line of an experiment's output; `accuracy` is exactly
/// `correct / n` at construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    /// `HxW` of the evaluation maps.
    pub map_size: String,
    pub observability: u8,
    /// Evaluation-time corruption level; `0.0` for the clean condition.
    pub eps_prime: f64,
    pub accuracy: f64,
    pub n: usize,
    pub seed: u64,
}

/// Fraction of predictions matching labels. Errors on empty or mismatched
/// inputs rather than returning a silent 0/0.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, HarnessError> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(HarnessError::Config(format!(
            "accuracy over {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / predictions.len() as f64)
}

struct BoundRecord {
    problem: NavProblem,
    trajectory: Trajectory,
    fields: Option<Vec<CostField>>,
}

/// Run every configured method at every observability level over `records`.
///
/// Rows come out in configuration order: methods outermost, observability
/// innermost. Evaluation is parallel but the output is a pure function of
/// the inputs; tie draws are seeded per (method, observability, record), so
/// methods whose inputs ignore the corruption model produce bit-identical
/// rows across corruption levels.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    models: &ModelSet,
    records: &[ExampleRecord],
    maps: &MapRegistry,
) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(HarnessError::Config("no test records".into()));
    }
    let map_size = records[0].map_size;
    let goal_count = records[0].goals.len();
    for r in records {
        if r.map_size != map_size {
            return Err(HarnessError::Config(
                "test records mix map sizes; run one size per experiment".into(),
            ));
        }
        if r.goals.len() != goal_count {
            return Err(HarnessError::Config(
                "test records mix goal counts; run one goal count per experiment".into(),
            ));
        }
    }
    let test_maps: BTreeSet<&str> = records.iter().map(|r| r.map_name.as_str()).collect();
    for method in &cfg.methods {
        let Some(kind) = method.net_kind() else { continue };
        let Some((net, meta)) = models.get(kind) else {
            return Err(HarnessError::MissingModel(method.id().into()));
        };
        if net.goal_count() != goal_count {
            return Err(HarnessError::Config(format!(
                "{} model expects {} goals but records have {}",
                method,
                net.goal_count(),
                goal_count
            )));
        }
        if !cfg.allow_shared_map {
            if let Some(shared) =
                meta.train_maps.iter().find(|m| test_maps.contains(m.as_str()))
            {
                return Err(HarnessError::SharedMap(shared.clone()));
            }
        }
    }

    let model = match cfg.corruption {
        Some(spec) => CostModel::Corrupted(spec),
        None => CostModel::Uniform,
    };
    let eps_prime = cfg.corruption.map(|c| c.eps_prime).unwrap_or(0.0);

    // Cost fields depend only on (map, goal, model): compute each once.
    let needs_fields = cfg.methods.iter().any(|m| m.needs_fields());
    let field_cache: HashMap<(String, Cell), CostField> = if needs_fields {
        let keys: BTreeSet<(String, Cell)> = records
            .iter()
            .flat_map(|r| r.goals.iter().map(|g| (r.map_name.clone(), *g)))
            .collect();
        let keys: Vec<_> = keys.into_iter().collect();
        keys.into_par_iter()
            .map(|(name, goal)| {
                let m = maps.get(&name)?;
                let f = cost_field(m, goal, &model)?;
                Ok(((name, goal), f))
            })
            .collect::<Result<_, HarnessError>>()?
    } else {
        HashMap::new()
    };

    let bound: Vec<BoundRecord> = records
        .par_iter()
        .map(|r| {
            let (problem, trajectory) = r.to_problem(maps.get(&r.map_name)?)?;
            let fields = needs_fields.then(|| {
                r.goals
                    .iter()
                    .map(|g| field_cache[&(r.map_name.clone(), *g)].clone())
                    .collect()
            });
            Ok(BoundRecord { problem, trajectory, fields })
        })
        .collect::<Result<_, HarnessError>>()?;

    let size_str = format!("{}x{}", map_size.0, map_size.1);
    let mut rows = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let net = method.net_kind().map(|k| &models.get(k).expect("checked above").0);
        for &rho in &cfg.observability {
            let correct = bound
                .par_iter()
                .enumerate()
                .map(|(ri, b)| -> Result<bool, HarnessError> {
                    let traj = truncate(&b.trajectory, rho as f64);
                    let posterior = match method {
                        Method::Ms => ms_recognize(
                            &b.problem,
                            &traj,
                            b.fields.as_deref().expect("fields precomputed"),
                            cfg.beta,
                        ),
                        Method::Rg => rg_recognize(&b.problem, &traj, &model, cfg.beta),
                        Method::Ratio => ratio_posterior(
                            &b.problem,
                            &traj,
                            b.fields.as_deref().expect("fields precomputed"),
                            &model,
                        ),
                        Method::GcNet | Method::SdNet | Method::LstmObs | Method::Stdnn => {
                            let kind = method.net_kind().expect("learned method");
                            let inputs = build_inputs(
                                kind,
                                &b.problem,
                                &traj,
                                b.fields.as_deref(),
                                &model,
                            )?;
                            forward(net.expect("checked above"), &inputs)?
                        }
                    };
                    let tie_seed = mix3(cfg.seed, mix2(mi as u64, rho as u64), ri as u64);
                    let truth = b.problem.true_goal().expect("records are labelled");
                    Ok(draw_max(&posterior, tie_seed) == truth)
                })
                .collect::<Result<Vec<bool>, HarnessError>>()?
                .into_iter()
                .filter(|&ok| ok)
                .count();
            rows.push(ResultRow {
                method,
                map_size: size_str.clone(),
                observability: rho,
                eps_prime,
                accuracy: correct as f64 / bound.len() as f64,
                n: bound.len(),
                seed: cfg.seed,
            });
        }
    }
    Ok(rows)
}

/// Re-run an experiment under increasingly corrupted evaluation-time cost
/// models: one clean pass (`eps_prime = 0`), then one pass per entry of
/// `eps_primes`. Networks are the same clean-trained ones throughout.
pub fn robustness_experiment(
    cfg: &ExperimentConfig,
    eps_primes: &[f64],
    delta_max: f64,
    corruption_seed: u64,
    models: &ModelSet,
    records: &[ExampleRecord],
    maps: &MapRegistry,
) -> Result<Vec<ResultRow>, HarnessError> {
    if !(delta_max >= 0.0) {
        return Err(HarnessError::Config("delta_max must be non-negative".into()));
    }
    for &e in eps_primes {
        if !(e >= 0.0) || !e.is_finite() {
            return Err(HarnessError::Config(format!("eps_prime {e} must be non-negative")));
        }
    }
    let clean = ExperimentConfig { corruption: None, ..cfg.clone() };
    let mut rows = run_experiment(&clean, models, records, maps)?;
    for &eps_prime in eps_primes {
        let corrupted = ExperimentConfig {
            corruption: Some(CorruptionSpec { eps_prime, delta_max, seed: corruption_seed }),
            ..cfg.clone()
        };
        rows.extend(run_experiment(&corrupted, models, records, maps)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::GridMap;
    use std::sync::Arc;
    use crate::harness::dataset::{generate_dataset, DatasetSpec};
    use crate::learned::{BaselineNet, DualEncoderNet};

    fn registry() -> (MapRegistry, Vec<Arc<GridMap>>) {
        let m = Arc::new(GridMap::new("test_open", 8, 8, vec![true; 64]).unwrap());
        let mut reg = MapRegistry::new();
        reg.insert(Arc::clone(&m)).unwrap();
        (reg, vec![m])
    }

    fn dataset(maps: &[Arc<GridMap>], count: usize) -> Vec<ExampleRecord> {
        let spec = DatasetSpec { count, goals: 2, eps: 0.0, delta_max: 0.0, seed: 5 };
        generate_dataset(maps, &spec).unwrap()
    }

    fn base_cfg() -> ExperimentConfig {
        ExperimentConfig {
            methods: vec![Method::Ms, Method::Rg, Method::Ratio],
            observability: vec![50, 100],
            corruption: None,
            beta: 1.0,
            seed: 9,
            allow_shared_map: false,
        }
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.id()), Some(m));
        }
        assert_eq!(Method::parse("nope"), None);
    }

    #[test]
    fn symbolic_experiment_is_deterministic_and_ordered() {
        let (reg, maps) = registry();
        let records = dataset(&maps, 30);
        let cfg = base_cfg();
        let rows = run_experiment(&cfg, &ModelSet::new(), &records, &reg).unwrap();
        assert_eq!(rows.len(), 6);
        let expect: Vec<(Method, u8)> = vec![
            (Method::Ms, 50),
            (Method::Ms, 100),
            (Method::Rg, 50),
            (Method::Rg, 100),
            (Method::Ratio, 50),
            (Method::Ratio, 100),
        ];
        for (row, (m, rho)) in rows.iter().zip(expect) {
            assert_eq!((row.method, row.observability), (m, rho));
            assert_eq!(row.n, 30);
            assert_eq!(row.map_size, "8x8");
            assert_eq!(row.eps_prime, 0.0);
            assert!((0.0..=1.0).contains(&row.accuracy));
        }
        // Optimal full observations on an open map: the cost-difference
        // recognizer should be near perfect.
        let ms_full = &rows[1];
        assert!(ms_full.accuracy >= 0.9, "ms at full observability: {}", ms_full.accuracy);
        let again = run_experiment(&cfg, &ModelSet::new(), &records, &reg).unwrap();
        assert_eq!(again, rows);
    }

    #[test]
    fn rejects_bad_configurations() {
        let (reg, maps) = registry();
        let records = dataset(&maps, 4);
        let models = ModelSet::new();
        let bad = [
            ExperimentConfig { methods: vec![], ..base_cfg() },
            ExperimentConfig { methods: vec![Method::Ms, Method::Ms], ..base_cfg() },
            ExperimentConfig { observability: vec![], ..base_cfg() },
            ExperimentConfig { observability: vec![0], ..base_cfg() },
            ExperimentConfig { observability: vec![101], ..base_cfg() },
            ExperimentConfig { beta: 0.0, ..base_cfg() },
        ];
        for cfg in bad {
            assert!(run_experiment(&cfg, &models, &records, &reg).is_err());
        }
        assert!(run_experiment(&base_cfg(), &models, &[], &reg).is_err());
    }

    #[test]
    fn learned_methods_need_models_and_disjoint_maps() {
        let (reg, maps) = registry();
        let records = dataset(&maps, 4);
        let cfg = ExperimentConfig { methods: vec![Method::LstmObs], ..base_cfg() };
        let err = run_experiment(&cfg, &ModelSet::new(), &records, &reg);
        assert!(matches!(err, Err(HarnessError::MissingModel(_))));

        let mut models = ModelSet::new();
        let net = Net::Baseline(BaselineNet::with_hidden(2, 8, 1));
        let mut meta = ModelMeta::untrained(1);
        meta.train_maps = vec!["test_open".into()];
        models.insert(net, meta);
        let err = run_experiment(&cfg, &models, &records, &reg);
        assert!(matches!(err, Err(HarnessError::SharedMap(_))));

        let shared_ok = ExperimentConfig { allow_shared_map: true, ..cfg.clone() };
        let rows = run_experiment(&shared_ok, &models, &records, &reg).unwrap();
        assert_eq!(rows.len(), 2);

        let mut wrong = ModelSet::new();
        wrong.insert(Net::Baseline(BaselineNet::with_hidden(3, 8, 1)), ModelMeta::untrained(1));
        assert!(run_experiment(&cfg, &wrong, &records, &reg).is_err());
    }

    #[test]
    fn corruption_moves_symbolic_rows_but_not_feature_free_ones() {
        let (reg, maps) = registry();
        let records = dataset(&maps, 40);
        let mut models = ModelSet::new();
        models.insert(
            Net::DualEncoder(DualEncoderNet::with_hidden(NetKind::SdNet, 2, 8, 3)),
            ModelMeta::untrained(3),
        );
        let cfg = ExperimentConfig {
            methods: vec![Method::Ms, Method::SdNet],
            observability: vec![50, 100],
            ..base_cfg()
        };
        let rows = robustness_experiment(&cfg, &[0.0, 1.0], 10.0, 77, &models, &records, &reg)
            .unwrap();
        assert_eq!(rows.len(), 12);
        // Rows 0..4 are the clean pass, rows 4..8 the eps'=0 pass: a zero
        // corruption level must reproduce clean behaviour exactly.
        let (first, second) = (&rows[..4], &rows[4..8]);
        for (a, b) in first.iter().zip(second) {
            assert_eq!(a.accuracy, b.accuracy, "eps'=0 differs from clean for {}", a.method);
        }
        // Stable-feature rows never see the corruption model at all.
        let sd: Vec<(u8, f64)> = rows
            .iter()
            .filter(|r| r.method == Method::SdNet)
            .map(|r| (r.observability, r.accuracy))
            .collect();
        assert_eq!(sd.len(), 6);
        for chunk in sd.chunks(2).skip(1) {
            assert_eq!(chunk, &sd[..2], "stable-feature rows moved under corruption");
        }
        assert!(rows.iter().any(|r| r.eps_prime == 1.0));
    }

    #[test]
    fn accuracy_checks_inputs() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 0, 3]).unwrap(), 2.0 / 3.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }
}
