//! Python bindings for the goalrec toolkit: maps, planners, recognizers,
//! feature extraction, and the dataset/train/evaluate pipeline.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use goalrec::features;
use goalrec::gridworld::{self, Cell, NavProblem, Trajectory};
use goalrec::harness::{
    generate_dataset, ingest_trajectories, load_records, read_region_spec, read_traffic_csv,
    run_experiment, save_records, save_results, train_recognizer, DatasetSpec, ExperimentConfig,
    MapRegistry, MapSplit, Method, ModelSet,
};
use goalrec::learned::{build_inputs, draw_max, forward, load_model, save_model, NetKind};
use goalrec::planning::{self, CostModel};
use goalrec::symbolic;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cell((row, col): (usize, usize)) -> Cell {
    Cell::new(row, col)
}

fn cells(list: Vec<(usize, usize)>) -> Vec<Cell> {
    list.into_iter().map(cell).collect()
}

fn tuples(cells: &[Cell]) -> Vec<(usize, usize)> {
    cells.iter().map(|c| (c.row, c.col)).collect()
}

/// A rectangular occupancy grid.
#[pyclass(frozen, name = "GridMap", module = "goalrec_py")]
struct PyGridMap {
    inner: Arc<gridworld::GridMap>,
}

#[pymethods]
impl PyGridMap {
    /// Parse MovingAI-style map text.
    #[staticmethod]
    #[pyo3(signature = (text, name = "map"))]
    fn parse(text: &str, name: &str) -> PyResult<Self> {
        let m = gridworld::parse_map(text).map_err(err)?.with_name(name);
        Ok(Self { inner: Arc::new(m) })
    }

    /// Load a .map file; the map is named by the file stem.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(err)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
        let m = gridworld::parse_map(&text).map_err(err)?.with_name(stem);
        Ok(Self { inner: Arc::new(m) })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn is_passable(&self, row: usize, col: usize) -> bool {
        self.inner.in_bounds(Cell::new(row, col)) && self.inner.is_passable(Cell::new(row, col))
    }

    fn passable_count(&self) -> usize {
        self.inner.count_passable()
    }

    /// Canonical map text (`.` passable, `@` blocked).
    fn serialize(&self) -> String {
        gridworld::serialize_map(&self.inner)
    }

    /// Coarsen by an integer factor (majority vote per block, ties blocked).
    fn downscale(&self, factor: usize) -> PyResult<Self> {
        let m = gridworld::downscale_map(&self.inner, factor).map_err(err)?;
        Ok(Self { inner: Arc::new(m) })
    }

    fn __repr__(&self) -> String {
        format!(
            "GridMap(name={:?}, size={}x{}, passable={})",
            self.inner.name(),
            self.inner.height(),
            self.inner.width(),
            self.inner.count_passable()
        )
    }
}

impl PyGridMap {
    fn problem(&self, goals: Vec<(usize, usize)>, traj: &[Cell]) -> PyResult<(NavProblem, Trajectory)> {
        let start = *traj.first().ok_or_else(|| err("empty trajectory"))?;
        let p = NavProblem::new(Arc::clone(&self.inner), start, cells(goals), None).map_err(err)?;
        let t = Trajectory::new(traj.to_vec()).map_err(err)?;
        t.validate_for(&p).map_err(err)?;
        Ok((p, t))
    }
}

/// Shortest path between two cells under unit step costs.
#[pyfunction]
fn optimal_path(
    map: &PyGridMap,
    start: (usize, usize),
    goal: (usize, usize),
) -> PyResult<Vec<(usize, usize)>> {
    let path = planning::optimal_path(&map.inner, cell(start), cell(goal), &CostModel::Uniform)
        .map_err(err)?;
    Ok(tuples(path.into_trajectory().cells()))
}

/// Path of a purposeful but suboptimal agent: with probability `eps` the
/// guiding heuristic is inflated by up to `delta_max` per cell.
#[pyfunction]
#[pyo3(signature = (map, start, goal, seed, eps = 0.2, delta_max = 10.0))]
fn suboptimal_path(
    map: &PyGridMap,
    start: (usize, usize),
    goal: (usize, usize),
    seed: u64,
    eps: f64,
    delta_max: f64,
) -> PyResult<Vec<(usize, usize)>> {
    let path = planning::generate_suboptimal_path(&map.inner, cell(start), cell(goal), eps, delta_max, seed)
        .map_err(err)?;
    Ok(tuples(path.into_trajectory().cells()))
}

/// Optimal travel cost from `start` to `goal`; infinity if unreachable.
#[pyfunction]
fn plan_cost(map: &PyGridMap, start: (usize, usize), goal: (usize, usize)) -> PyResult<f64> {
    let field = planning::cost_field(&map.inner, cell(goal), &CostModel::Uniform).map_err(err)?;
    Ok(field.cost(cell(start)))
}

/// Posterior over `goals` for an observed trajectory prefix.
///
/// Returns `(probabilities, recognized_index)`. Symbolic methods are
/// `"ms"`, `"rg"`, `"ratio"`; the learned ones (`"gc-net"`, `"sd-net"`,
/// `"lstm-obs"`, `"stdnn"`) need `model`, a path to a trained model file.
#[pyfunction]
#[pyo3(signature = (map, goals, traj, method = "ms", beta = 1.0, obs = 100, model = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn recognize(
    map: &PyGridMap,
    goals: Vec<(usize, usize)>,
    traj: Vec<(usize, usize)>,
    method: &str,
    beta: f64,
    obs: u8,
    model: Option<PathBuf>,
    seed: u64,
) -> PyResult<(Vec<f64>, usize)> {
    let method = Method::parse(method).ok_or_else(|| err(format!("unknown method {method:?}")))?;
    let (p, t) = map.problem(goals, &cells(traj))?;
    if obs == 0 || obs > 100 {
        return Err(err("obs must be in 1..=100"));
    }
    let t = features::truncate(&t, obs as f64);
    let model_kind = method.net_kind();
    let fields = || -> PyResult<Vec<planning::CostField>> {
        p.goals()
            .iter()
            .map(|g| planning::cost_field(&map.inner, *g, &CostModel::Uniform).map_err(err))
            .collect()
    };
    let posterior = match method {
        Method::Ms => symbolic::ms_recognize(&p, &t, &fields()?, beta),
        Method::Rg => symbolic::rg_recognize(&p, &t, &CostModel::Uniform, beta),
        Method::Ratio => symbolic::ratio_posterior(&p, &t, &fields()?, &CostModel::Uniform),
        _ => {
            let kind = model_kind.expect("learned method");
            let path = model.ok_or_else(|| err("learned methods need model=..."))?;
            let (net, _) = load_model(&path).map_err(err)?;
            if net.kind() != kind {
                return Err(err(format!("model holds {}, not {}", net.kind(), method)));
            }
            if net.goal_count() != p.goals().len() {
                return Err(err(format!(
                    "model expects {} goals, got {}",
                    net.goal_count(),
                    p.goals().len()
                )));
            }
            let f = if kind == NetKind::GcNet { Some(fields()?) } else { None };
            let inputs = build_inputs(kind, &p, &t, f.as_deref(), &CostModel::Uniform).map_err(err)?;
            forward(&net, &inputs).map_err(err)?
        }
    };
    let pick = draw_max(&posterior, seed);
    Ok((posterior.probs().to_vec(), pick))
}

/// Per-goal cost-derivative features of a trajectory: one row per goal, one
/// column per observed move. Returns `(rows, zeroed_entries)`.
#[pyfunction]
fn gc_features(
    map: &PyGridMap,
    goals: Vec<(usize, usize)>,
    traj: Vec<(usize, usize)>,
) -> PyResult<(Vec<Vec<f64>>, usize)> {
    let (p, t) = map.problem(goals, &cells(traj))?;
    let fields: Vec<planning::CostField> = p
        .goals()
        .iter()
        .map(|g| planning::cost_field(&map.inner, *g, &CostModel::Uniform))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let seq = features::gc_features(&p, &t, &fields);
    Ok((seq.values.clone(), seq.zeroed_entries))
}

/// Closed-form heuristic variant of [`gc_features`] (Euclidean heuristic).
#[pyfunction]
fn sd_features(
    map: &PyGridMap,
    goals: Vec<(usize, usize)>,
    traj: Vec<(usize, usize)>,
) -> PyResult<(Vec<Vec<f64>>, usize)> {
    let (p, t) = map.problem(goals, &cells(traj))?;
    let seq = features::sd_features(&p, &t, features::HeuristicKind::L2);
    Ok((seq.values.clone(), seq.zeroed_entries))
}

/// Generate a labelled record file from the .map files in `maps_dir`.
/// `pool` selects `train_*` maps, `test_*` maps, or `all`.
#[pyfunction]
#[pyo3(signature = (maps_dir, out, count, seed, pool = "train", size = None, goals = 5,
                    eps = 0.2, delta_max = 10.0))]
#[allow(clippy::too_many_arguments)]
fn generate_records(
    maps_dir: PathBuf,
    out: PathBuf,
    count: usize,
    seed: u64,
    pool: &str,
    size: Option<usize>,
    goals: usize,
    eps: f64,
    delta_max: f64,
) -> PyResult<usize> {
    let reg = MapRegistry::load_dir_scaled(&maps_dir, size).map_err(err)?;
    let maps = match pool {
        "all" => reg.maps().cloned().collect(),
        "train" => MapSplit::from_registry(&reg).map_err(err)?.train,
        "test" => MapSplit::from_registry(&reg).map_err(err)?.test,
        other => return Err(err(format!("unknown pool {other:?}"))),
    };
    let spec = DatasetSpec { count, goals, eps, delta_max, seed };
    let records = generate_dataset(&maps, &spec).map_err(err)?;
    save_records(&out, &records).map_err(err)?;
    Ok(records.len())
}

/// Train a recognizer network on a record file and save the model.
/// Returns `(best_epoch, best_validation_loss)`.
#[pyfunction]
#[pyo3(signature = (kind, data, maps_dir, out, seed, size = None, epochs = 50, val_count = 160))]
#[allow(clippy::too_many_arguments)]
fn train_model(
    kind: &str,
    data: PathBuf,
    maps_dir: PathBuf,
    out: PathBuf,
    seed: u64,
    size: Option<usize>,
    epochs: usize,
    val_count: usize,
) -> PyResult<(usize, f64)> {
    let kind = NetKind::parse(kind).ok_or_else(|| err(format!("unknown kind {kind:?}")))?;
    let records = load_records(&data).map_err(err)?;
    let reg = MapRegistry::load_dir_scaled(&maps_dir, size).map_err(err)?;
    let report = train_recognizer(kind, &records, &reg, epochs, val_count, seed).map_err(err)?;
    save_model(&out, &report.net, &report.meta).map_err(err)?;
    Ok((report.outcome.best_epoch, report.outcome.best_validation_loss))
}

/// Evaluate methods over a test record file.
///
/// Returns rows as `(method, observability, eps_prime, accuracy, n)`; also
/// writes them as CSV when `out` is given. `models` is a list of model file
/// paths covering every learned method requested.
#[pyfunction]
#[pyo3(signature = (data, maps_dir, methods, seed, size = None, models = vec![],
                    obs = vec![25, 50, 75, 100], beta = 1.0, allow_shared_map = false,
                    out = None))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    data: PathBuf,
    maps_dir: PathBuf,
    methods: Vec<String>,
    seed: u64,
    size: Option<usize>,
    models: Vec<PathBuf>,
    obs: Vec<u8>,
    beta: f64,
    allow_shared_map: bool,
    out: Option<PathBuf>,
) -> PyResult<Vec<(String, u8, f64, f64, usize)>> {
    let records = load_records(&data).map_err(err)?;
    let reg = MapRegistry::load_dir_scaled(&maps_dir, size).map_err(err)?;
    let methods = methods
        .iter()
        .map(|s| Method::parse(s).ok_or_else(|| err(format!("unknown method {s:?}"))))
        .collect::<PyResult<Vec<Method>>>()?;
    let mut model_set = ModelSet::new();
    for path in &models {
        let (net, meta) = load_model(path).map_err(err)?;
        model_set.insert(net, meta);
    }
    let cfg = ExperimentConfig {
        methods,
        observability: obs,
        corruption: None,
        beta,
        seed,
        allow_shared_map,
    };
    let rows = run_experiment(&cfg, &model_set, &records, &reg).map_err(err)?;
    if let Some(path) = out {
        save_results(&path, &rows).map_err(err)?;
    }
    Ok(rows
        .iter()
        .map(|r| (r.method.to_string(), r.observability, r.eps_prime, r.accuracy, r.n))
        .collect())
}

/// Convert a positional traffic log into labelled train/test record files.
///
/// The log (`agent_id,frame,x,y` CSV) is snapped onto `map` at `scale` cells
/// per coordinate unit, labelled by the goal region each agent ends in, and
/// split by agent hash. Returns
/// `(train, test, dropped_off_region, dropped_invalid, agents)`.
#[pyfunction]
#[pyo3(signature = (traffic, map, regions, out_train, out_test, scale = 0.5))]
fn ingest_log(
    traffic: PathBuf,
    map: &PyGridMap,
    regions: PathBuf,
    out_train: PathBuf,
    out_test: PathBuf,
    scale: f64,
) -> PyResult<(usize, usize, usize, usize, usize)> {
    let rows = read_traffic_csv(std::io::BufReader::new(
        std::fs::File::open(&traffic).map_err(err)?,
    ))
    .map_err(err)?;
    let region_list = read_region_spec(std::io::BufReader::new(
        std::fs::File::open(&regions).map_err(err)?,
    ))
    .map_err(err)?;
    let report = ingest_trajectories(&rows, &map.inner, &region_list, scale).map_err(err)?;
    save_records(&out_train, &report.train).map_err(err)?;
    save_records(&out_test, &report.test).map_err(err)?;
    Ok((
        report.train.len(),
        report.test.len(),
        report.dropped_off_region,
        report.dropped_invalid,
        report.agents,
    ))
}

#[pymodule]
fn goalrec_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridMap>()?;
    m.add_function(wrap_pyfunction!(optimal_path, m)?)?;
    m.add_function(wrap_pyfunction!(suboptimal_path, m)?)?;
    m.add_function(wrap_pyfunction!(plan_cost, m)?)?;
    m.add_function(wrap_pyfunction!(recognize, m)?)?;
    m.add_function(wrap_pyfunction!(gc_features, m)?)?;
    m.add_function(wrap_pyfunction!(sd_features, m)?)?;
    m.add_function(wrap_pyfunction!(generate_records, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(ingest_log, m)?)?;
    Ok(())
}
