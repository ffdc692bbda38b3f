//! Map bookkeeping and synthetic dataset generation.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::records::{ExampleRecord, GenParams};
use super::HarnessError;
use crate::gridworld::{downscale_map, parse_map, sample_problem, GridMap};
use crate::planning::generate_suboptimal_path;
use crate::seeding::mix2;

/// Named maps, looked up by records when they are bound to problems.
#[derive(Debug, Default, Clone)]
pub struct MapRegistry {
    maps: BTreeMap<String, Arc<GridMap>>,
}

impl MapRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a map under its own name. Unnamed or duplicate names are
    /// configuration errors: records reference maps by name alone.
    pub fn insert(&mut self, m: Arc<GridMap>) -> Result<(), HarnessError> {
        let name = m.name().to_string();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(HarnessError::Config(format!(
                "map name {name:?} is empty or contains whitespace"
            )));
        }
        if self.maps.contains_key(&name) {
            return Err(HarnessError::Config(format!("duplicate map name {name:?}")));
        }
        self.maps.insert(name, m);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Arc<GridMap>, HarnessError> {
        self.maps
            .get(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown map {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }

    pub fn maps(&self) -> impl Iterator<Item = &Arc<GridMap>> {
        self.maps.values()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Load every `*.map` file in `dir`; each map is named by its file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, HarnessError> {
        let mut reg = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "map"))
            .collect();
        paths.sort();
        for path in paths {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| HarnessError::Config(format!("bad map file name {path:?}")))?
                .to_string();
            let text = std::fs::read_to_string(&path)?;
            let m = parse_map(&text)?.with_name(stem);
            reg.insert(Arc::new(m))?;
        }
        if reg.is_empty() {
            return Err(HarnessError::Config(format!("no .map files in {dir:?}")));
        }
        Ok(reg)
    }

    /// Downscale every map by `factor`, keeping names. Used to derive the
    /// coarse variant of a bundled map set.
    pub fn downscaled(&self, factor: usize) -> Result<Self, HarnessError> {
        let mut reg = Self::new();
        for m in self.maps.values() {
            reg.insert(Arc::new(downscale_map(m, factor)?))?;
        }
        Ok(reg)
    }

    /// [`MapRegistry::load_dir`], then downscale every (square) map to
    /// `size` when one is given. All maps must share one downscale factor.
    pub fn load_dir_scaled(dir: &Path, size: Option<usize>) -> Result<Self, HarnessError> {
        let reg = Self::load_dir(dir)?;
        let Some(size) = size else { return Ok(reg) };
        if size == 0 {
            return Err(HarnessError::Config("size must be positive".into()));
        }
        let mut factor = None;
        for m in reg.maps() {
            if m.height() != m.width() {
                return Err(HarnessError::Config(format!(
                    "map {} is not square; cannot downscale to {size}",
                    m.name()
                )));
            }
            let native = m.height();
            let f = if native == size {
                1
            } else if native % size == 0 {
                native / size
            } else {
                return Err(HarnessError::Config(format!(
                    "map {} of size {native} cannot downscale to {size}",
                    m.name()
                )));
            };
            if *factor.get_or_insert(f) != f {
                return Err(HarnessError::Config("maps disagree on the downscale factor".into()));
            }
        }
        match factor {
            Some(1) | None => Ok(reg),
            Some(f) => reg.downscaled(f),
        }
    }
}

/// Maps partitioned into a training pool and a held-out evaluation pool.
/// The two name sets never overlap.
#[derive(Debug, Clone)]
pub struct MapSplit {
    pub train: Vec<Arc<GridMap>>,
    pub test: Vec<Arc<GridMap>>,
}

impl MapSplit {
    pub fn new(train: Vec<Arc<GridMap>>, test: Vec<Arc<GridMap>>) -> Result<Self, HarnessError> {
        if train.is_empty() || test.is_empty() {
            return Err(HarnessError::Config("map split with an empty side".into()));
        }
        for t in &train {
            if test.iter().any(|u| u.name() == t.name()) {
                return Err(HarnessError::Config(format!(
                    "map {:?} appears on both sides of the split",
                    t.name()
                )));
            }
        }
        Ok(Self { train, test })
    }

    /// Split a registry by naming convention: `train_*` maps train models,
    /// `test_*` maps are held out. Any other name is rejected.
    pub fn from_registry(reg: &MapRegistry) -> Result<Self, HarnessError> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for m in reg.maps() {
            if m.name().starts_with("train_") {
                train.push(Arc::clone(m));
            } else if m.name().starts_with("test_") {
                test.push(Arc::clone(m));
            } else {
                return Err(HarnessError::Config(format!(
                    "map name {:?} must start with train_ or test_",
                    m.name()
                )));
            }
        }
        Self::new(train, test)
    }
}

/// How many examples to draw and with what planner parameters.
#[derive(Debug, Clone, Copy)]
pub struct DatasetSpec {
    pub count: usize,
    pub goals: usize,
    pub eps: f64,
    pub delta_max: f64,
    pub seed: u64,
}

/// Draw `spec.count` labelled examples, cycling through `maps` round-robin.
/// Record `i` uses the derived seed `mix2(spec.seed, i)` for both problem
/// sampling and path generation, so the output is a pure function of the
/// spec and the map list, independent of thread count.
pub fn generate_dataset(
    maps: &[Arc<GridMap>],
    spec: &DatasetSpec,
) -> Result<Vec<ExampleRecord>, HarnessError> {
    if maps.is_empty() {
        return Err(HarnessError::Config("no maps to generate from".into()));
    }
    if spec.count == 0 || spec.goals < 2 {
        return Err(HarnessError::Config(
            "dataset needs a positive count and at least two goals".into(),
        ));
    }
    if !(spec.eps >= 0.0) || !(spec.delta_max >= 0.0) {
        return Err(HarnessError::Config("eps and delta_max must be non-negative".into()));
    }
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let m = &maps[i % maps.len()];
            let record_seed = mix2(spec.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
            let p = sample_problem(m, spec.goals, &mut rng)?;
            let true_goal = p.true_goal().expect("sampled problems are labelled");
            let path = generate_suboptimal_path(
                m,
                p.start(),
                p.goals()[true_goal],
                spec.eps,
                spec.delta_max,
                mix2(record_seed, 1),
            )?;
            let traj = path.into_trajectory();
            debug_assert_eq!(traj.last(), p.goals()[true_goal]);
            Ok(ExampleRecord {
                map_name: m.name().to_string(),
                map_size: (m.height(), m.width()),
                goals: p.goals().to_vec(),
                start: p.start(),
                true_goal,
                trajectory: traj.cells().to_vec(),
                gen: GenParams { eps: spec.eps, delta_max: spec.delta_max, seed: record_seed },
            })
        })
        .collect()
}
