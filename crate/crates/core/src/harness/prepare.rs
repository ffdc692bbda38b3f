//! Bridge from stored records to network training examples.
//!
//! A pool validates its records once, precomputes the per-goal cost fields
//! feature extraction needs, and then serves examples cheaply and
//! deterministically: as an endless shuffled stream for the trainer or as a
//! materialized list for validation.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::dataset::MapRegistry;
use super::records::ExampleRecord;
use super::HarnessError;
use crate::features::GOAL_CHANNELS;
use crate::gridworld::{Cell, GridMap};
use crate::learned::{
    build_inputs, train, BaselineNet, DualEncoderNet, LabeledExample, ModelMeta, Net, NetKind,
    SpatioTemporalNet, TrainConfig, TrainOutcome,
};
use crate::planning::{cost_field, CorruptionSpec, CostField, CostModel};
use crate::seeding::mix2;

/// Records bound to their maps and ready to become training examples for
/// one network architecture.
pub struct ExamplePool {
    kind: NetKind,
    records: Vec<ExampleRecord>,
    maps: HashMap<String, Arc<GridMap>>,
    fields: HashMap<(String, Cell), CostField>,
    goal_count: usize,
    model: CostModel,
}

impl ExamplePool {
    /// Validate `records` against `maps` and precompute whatever `kind`
    /// needs, extracting features under the true unit-cost model.
    pub fn new(
        kind: NetKind,
        records: Vec<ExampleRecord>,
        maps: &MapRegistry,
    ) -> Result<Self, HarnessError> {
        Self::with_model(kind, records, maps, CostModel::Uniform)
    }

    /// Like [`ExamplePool::new`], but extracts features under `model` — the
    /// cost model the recognizer is being taught to believe. All records must
    /// agree on goal count; the grid architecture additionally needs one map
    /// size and at most [`GOAL_CHANNELS`] goals.
    pub fn with_model(
        kind: NetKind,
        records: Vec<ExampleRecord>,
        maps: &MapRegistry,
        model: CostModel,
    ) -> Result<Self, HarnessError> {
        if records.is_empty() {
            return Err(HarnessError::Config("no records to prepare".into()));
        }
        let goal_count = records[0].goals.len();
        for r in &records {
            if r.goals.len() != goal_count {
                return Err(HarnessError::Config("records mix goal counts".into()));
            }
        }
        if kind == NetKind::Stdnn {
            if goal_count > GOAL_CHANNELS {
                return Err(HarnessError::Config(format!(
                    "the grid architecture handles at most {GOAL_CHANNELS} goals, got {goal_count}"
                )));
            }
            if records.iter().any(|r| r.map_size != records[0].map_size) {
                return Err(HarnessError::Config("grid-architecture records mix map sizes".into()));
            }
        }
        let mut used = HashMap::new();
        for r in &records {
            if !used.contains_key(&r.map_name) {
                used.insert(r.map_name.clone(), Arc::clone(maps.get(&r.map_name)?));
            }
        }
        records
            .par_iter()
            .try_for_each(|r| r.to_problem(&used[&r.map_name]).map(|_| ()))?;
        let fields = if kind == NetKind::GcNet {
            let mut keys: Vec<(String, Cell)> = records
                .iter()
                .flat_map(|r| r.goals.iter().map(|g| (r.map_name.clone(), *g)))
                .collect();
            keys.sort();
            keys.dedup();
            keys.into_par_iter()
                .map(|(name, goal)| {
                    let f = cost_field(&used[&name], goal, &model)?;
                    Ok(((name, goal), f))
                })
                .collect::<Result<_, HarnessError>>()?
        } else {
            HashMap::new()
        };
        Ok(Self { kind, records, maps: used, fields, goal_count, model })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn goal_count(&self) -> usize {
        self.goal_count
    }

    /// Sorted names of the maps the records draw on, for model metadata.
    pub fn map_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.maps.keys().cloned().collect();
        names.sort();
        names
    }

    /// Build the example for record `i` from its full trajectory.
    /// Construction cannot fail for a validated pool.
    pub fn example(&self, i: usize) -> LabeledExample {
        let r = &self.records[i];
        let (p, traj) = r.to_problem(&self.maps[&r.map_name]).expect("validated at pool build");
        let fields: Option<Vec<CostField>> = (self.kind == NetKind::GcNet).then(|| {
            r.goals.iter().map(|g| self.fields[&(r.map_name.clone(), *g)].clone()).collect()
        });
        let inputs = build_inputs(self.kind, &p, &traj, fields.as_deref(), &self.model)
            .expect("validated at pool build");
        LabeledExample { inputs, target: r.true_goal }
    }

    /// An endless example stream for the trainer: draw `k` picks record
    /// `mix2(seed, k) % len`, so the schedule is a pure function of `seed`.
    pub fn stream(&self, seed: u64) -> impl Fn(u64) -> LabeledExample + Send + Sync + '_ {
        let len = self.records.len() as u64;
        move |k| self.example((mix2(seed, k) % len) as usize)
    }

    /// Materialize every record's example, in record order.
    pub fn all_examples(&self) -> Vec<LabeledExample> {
        (0..self.records.len()).into_par_iter().map(|i| self.example(i)).collect()
    }
}

/// A trained network (best-validation snapshot restored), its metadata,
/// and the full training history.
pub struct TrainReport {
    pub net: Net,
    pub meta: ModelMeta,
    pub outcome: TrainOutcome,
}

/// The whole training pipeline behind both the CLI and the bindings: split
/// the last `val_count` records off as the validation set, stream the rest,
/// train a fresh network of `kind` for `epochs` epochs, and return it with
/// its best-validation parameters restored. A `belief` teaches the
/// recognizer a deliberately corrupted cost model: training and validation
/// features are both extracted under it, and it is recorded in the model's
/// metadata so evaluation can corrupt its cost model the same way.
pub fn train_recognizer(
    kind: NetKind,
    records: &[ExampleRecord],
    maps: &MapRegistry,
    epochs: usize,
    val_count: usize,
    seed: u64,
    belief: Option<CorruptionSpec>,
) -> Result<TrainReport, HarnessError> {
    if val_count == 0 || val_count >= records.len() {
        return Err(HarnessError::Config(format!(
            "validation count {val_count} must be in 1..{}",
            records.len()
        )));
    }
    let model = match belief {
        Some(spec) => CostModel::Corrupted(spec),
        None => CostModel::Uniform,
    };
    let split = records.len() - val_count;
    let train_pool = ExamplePool::with_model(kind, records[..split].to_vec(), maps, model)?;
    let val_pool = ExamplePool::with_model(kind, records[split..].to_vec(), maps, model)?;
    let validation = val_pool.all_examples();

    let goals = train_pool.goal_count();
    let mut net = match kind {
        NetKind::GcNet | NetKind::SdNet => {
            Net::DualEncoder(DualEncoderNet::new(kind, goals, seed))
        }
        NetKind::LstmObs => Net::Baseline(BaselineNet::new(goals, seed)),
        NetKind::Stdnn => {
            let (h, w) = records[0].map_size;
            Net::SpatioTemporal(SpatioTemporalNet::new(goals, h, w, seed)?)
        }
    };
    let cfg = TrainConfig::desk(epochs, seed);
    let outcome = train(&mut net, train_pool.stream(seed), &validation, &cfg)?;
    net.params_mut().restore_values(&outcome.best_params);
    let meta = ModelMeta {
        trained_epochs: epochs,
        learning_rate: cfg.adam.learning_rate,
        batch_size: cfg.batch_size,
        dropout: cfg.dropout_rate,
        seed,
        train_maps: train_pool.map_names(),
        belief,
    };
    Ok(TrainReport { net, meta, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{generate_dataset, DatasetSpec};
    use crate::learned::NetInputs;

    fn pool_fixture(kind: NetKind) -> ExamplePool {
        let m = Arc::new(GridMap::new("train_a", 8, 8, vec![true; 64]).unwrap());
        let mut reg = MapRegistry::new();
        reg.insert(Arc::clone(&m)).unwrap();
        let spec = DatasetSpec { count: 12, goals: 3, eps: 0.0, delta_max: 0.0, seed: 2 };
        let records = generate_dataset(&[m], &spec).unwrap();
        ExamplePool::new(kind, records, &reg).unwrap()
    }

    #[test]
    fn pool_serves_consistent_examples() {
        let pool = pool_fixture(NetKind::GcNet);
        assert_eq!(pool.len(), 12);
        assert_eq!(pool.goal_count(), 3);
        assert_eq!(pool.map_names(), vec!["train_a".to_string()]);
        let ex = pool.example(0);
        let NetInputs::Sequence { coords, features } = &ex.inputs else {
            panic!("sequence inputs expected")
        };
        let feats = features.as_ref().expect("gc features present");
        assert_eq!(coords.len(), feats.len());
        assert_eq!(feats[0].len(), 3);
        assert!(ex.target < 3);
        let all = pool.all_examples();
        assert_eq!(all.len(), 12);
        assert_eq!(all[0], ex);
    }

    #[test]
    fn stream_is_deterministic_and_in_range() {
        let pool = pool_fixture(NetKind::LstmObs);
        let s1 = pool.stream(7);
        let s2 = pool.stream(7);
        for k in 0..20 {
            assert_eq!(s1(k), s2(k));
        }
        let s3 = pool.stream(8);
        let differs = (0..20).any(|k| s1(k) != s3(k));
        assert!(differs, "different stream seeds should reorder draws");
    }

    #[test]
    fn belief_model_changes_extracted_features_only() {
        let m = Arc::new(GridMap::new("train_a", 8, 8, vec![true; 64]).unwrap());
        let mut reg = MapRegistry::new();
        reg.insert(Arc::clone(&m)).unwrap();
        let spec = DatasetSpec { count: 6, goals: 3, eps: 0.0, delta_max: 0.0, seed: 2 };
        let records = generate_dataset(&[m], &spec).unwrap();
        let belief = CostModel::Corrupted(CorruptionSpec {
            eps_prime: 1.0,
            delta_max: 10.0,
            seed: 909,
        });
        let plain = ExamplePool::new(NetKind::GcNet, records.clone(), &reg).unwrap();
        let taught = ExamplePool::with_model(NetKind::GcNet, records, &reg, belief).unwrap();
        let mut any_difference = false;
        for i in 0..plain.len() {
            let (a, b) = (plain.example(i), taught.example(i));
            assert_eq!(a.target, b.target);
            let (NetInputs::Sequence { coords: ca, features: fa },
                 NetInputs::Sequence { coords: cb, features: fb }) = (&a.inputs, &b.inputs)
            else {
                panic!("sequence inputs expected")
            };
            assert_eq!(ca, cb, "coordinates never depend on the cost model");
            any_difference |= fa != fb;
        }
        assert!(any_difference, "a fully corrupted belief must move some features");
    }

    #[test]
    fn rejects_invalid_pools() {
        let m = Arc::new(GridMap::new("train_a", 8, 8, vec![true; 64]).unwrap());
        let mut reg = MapRegistry::new();
        reg.insert(Arc::clone(&m)).unwrap();
        let spec = DatasetSpec { count: 4, goals: 2, eps: 0.0, delta_max: 0.0, seed: 2 };
        let records = generate_dataset(&[Arc::clone(&m)], &spec).unwrap();

        assert!(ExamplePool::new(NetKind::GcNet, vec![], &reg).is_err());

        let mut mixed = records.clone();
        let six = generate_dataset(
            &[m],
            &DatasetSpec { count: 1, goals: 6, eps: 0.0, delta_max: 0.0, seed: 3 },
        )
        .unwrap();
        mixed.extend(six.clone());
        assert!(ExamplePool::new(NetKind::GcNet, mixed, &reg).is_err());

        assert!(ExamplePool::new(NetKind::Stdnn, six, &reg).is_err());

        let unknown_map = MapRegistry::new();
        assert!(ExamplePool::new(NetKind::SdNet, records, &unknown_map).is_err());
    }
}
