//! Max-cut VQE: cost from counts, an SPSA optimizer loop, and multi-QPU
//! orchestration of independent instances.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use conqure_core::{bitstring, CountsMap, WorkloadDocument};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Executor, OffloadError, QpuPool};
use crate::task::QuantumTask;

pub const BRUTE_FORCE_MAX_VERTICES: usize = 20;

#[derive(Debug, Error)]
pub enum VqeError {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid VQE config: {0}")]
    Config(String),
    #[error("counts key width {got} does not match {expected} vertices")]
    KeyWidth { expected: usize, got: usize },
    #[error("brute force is limited to {BRUTE_FORCE_MAX_VERTICES} vertices, graph has {0}")]
    TooLarge(usize),
}

/// Undirected simple graph with unit weights. Vertex `v` is qubit `v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphWire", into = "GraphWire")]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    num_vertices: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphWire> for Graph {
    type Error = VqeError;

    fn try_from(w: GraphWire) -> Result<Self, VqeError> {
        Graph::new(w.num_vertices, w.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<Graph> for GraphWire {
    fn from(g: Graph) -> Self {
        GraphWire { num_vertices: g.num_vertices, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl Graph {
    /// Edges are normalised to `(low, high)`, sorted and deduplicated.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, VqeError> {
        if num_vertices == 0 {
            return Err(VqeError::Graph("graph needs at least one vertex".into()));
        }
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(VqeError::Graph(format!("self-loop on vertex {a}")));
            }
            if a.max(b) >= num_vertices {
                return Err(VqeError::Graph(format!("edge ({a},{b}) outside {num_vertices} vertices")));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Graph { num_vertices, edges: out })
    }

    /// Erdős–Rényi G(n, p): each pair `i < j` in lexicographic order is kept
    /// when a uniform draw from ChaCha20 seeded with `seed` is below `p`.
    pub fn random(num_vertices: usize, p: f64, seed: u64) -> Result<Self, VqeError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..num_vertices {
            for j in i + 1..num_vertices {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(num_vertices, edges)
    }

    pub fn path(num_vertices: usize) -> Self {
        Graph::new(num_vertices, (1..num_vertices).map(|v| (v - 1, v))).expect("path is valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edges crossing the partition given by basis index `bits` (bit `v`
    /// is vertex `v`'s side).
    pub fn cut(&self, bits: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| (bits >> a ^ bits >> b) & 1 == 1).count()
    }
}

/// The repo's frozen 7-vertex test graph and its exhaustive optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxCutFixture {
    pub seed: u64,
    pub edge_probability: f64,
    pub graph: Graph,
    pub optimum: usize,
    pub optimal_bitstring: String,
}

pub fn fixture_graph() -> MaxCutFixture {
    serde_json::from_str(include_str!("../fixtures/maxcut7.json")).expect("bundled fixture parses")
}

/// `-E[cut]` under the empirical distribution of `counts`.
pub fn maxcut_cost(counts: &CountsMap, graph: &Graph) -> Result<f64, VqeError> {
    if counts.num_bits() != graph.num_vertices() {
        return Err(VqeError::KeyWidth { expected: graph.num_vertices(), got: counts.num_bits() });
    }
    let shots = counts.shots() as f64;
    let total: f64 = counts.indexed().map(|(idx, c)| c as f64 * graph.cut(idx) as f64).sum();
    Ok(-total / shots)
}

/// Exhaustive optimum. Ties go to the lexicographically smallest bitstring.
pub fn brute_force_maxcut(graph: &Graph) -> Result<(usize, String), VqeError> {
    let n = graph.num_vertices();
    if n > BRUTE_FORCE_MAX_VERTICES {
        return Err(VqeError::TooLarge(n));
    }
    let (mut best, mut arg) = (0, 0);
    for bits in 0..1usize << n {
        let c = graph.cut(bits);
        if c > best {
            (best, arg) = (c, bits);
        }
    }
    Ok((best, bitstring(arg, n)))
}

/// Noise-free `E[cut]` of the ansatz at `angles`, from the exact output
/// distribution rather than sampled shots.
pub fn exact_expected_cut(graph: &Graph, angles: &[f64]) -> Result<f64, VqeError> {
    let n = graph.num_vertices();
    let circuit = conqure_core::build_vqe_ansatz(n, angles, 1).map_err(|e| VqeError::Config(e.to_string()))?;
    let dist = conqure_core::exact_distribution(&circuit).map_err(|e| VqeError::Config(e.to_string()))?;
    Ok(dist.iter().map(|(bits, p)| p * graph.cut(usize::from_str_radix(bits, 2).expect("binary key")) as f64).sum())
}

/// Uniform angles in `[0, 2π)` from a seed.
pub fn random_angles(count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random::<f64>() * TAU).collect()
}

/// Classical update rule for the angle vector.
pub trait Optimizer: Send {
    /// Points to evaluate at iteration `k` (0-based).
    fn propose(&mut self, k: usize, theta: &[f64]) -> Vec<Vec<f64>>;
    /// Updates `theta` from the costs of the proposed points.
    fn update(&mut self, k: usize, theta: &mut [f64], costs: &[f64]);
}

/// Simultaneous-perturbation stochastic approximation with the standard
/// gain schedules `a_k = a / (k + 1 + A)^alpha`, `c_k = c / (k + 1)^gamma`
/// and Rademacher perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpsaParams {
    pub a: f64,
    pub c: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for SpsaParams {
    fn default() -> Self {
        SpsaParams { a: 0.5, c: 0.2, big_a: 10.0, alpha: 0.602, gamma: 0.101 }
    }
}

pub struct Spsa {
    params: SpsaParams,
    rng: ChaCha20Rng,
    delta: Vec<f64>,
}

impl Spsa {
    pub fn new(params: SpsaParams, seed: u64) -> Self {
        Spsa { params, rng: ChaCha20Rng::seed_from_u64(seed), delta: Vec::new() }
    }

    fn gains(&self, k: usize) -> (f64, f64) {
        let p = &self.params;
        let k = k as f64;
        (p.a / (k + 1.0 + p.big_a).powf(p.alpha), p.c / (k + 1.0).powf(p.gamma))
    }
}

impl Optimizer for Spsa {
    fn propose(&mut self, k: usize, theta: &[f64]) -> Vec<Vec<f64>> {
        let (_, ck) = self.gains(k);
        self.delta = (0..theta.len()).map(|_| if self.rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let shifted = |sign: f64| theta.iter().zip(&self.delta).map(|(t, d)| t + sign * ck * d).collect();
        vec![shifted(1.0), shifted(-1.0)]
    }

    fn update(&mut self, k: usize, theta: &mut [f64], costs: &[f64]) {
        let (ak, ck) = self.gains(k);
        let slope = (costs[0] - costs[1]) / (2.0 * ck);
        for (t, d) in theta.iter_mut().zip(&self.delta) {
            // 1/Δ_i = Δ_i for ±1 perturbations.
            *t -= ak * slope * d;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeRunConfig {
    pub graph: Graph,
    pub initial_angles: Vec<f64>,
    pub shots: u64,
    pub max_iterations: usize,
    pub seed: u64,
    pub spsa: SpsaParams,
    /// Stop once the best cost improved by less than this over `patience`
    /// iterations.
    pub tolerance: f64,
    pub patience: usize,
}

impl VqeRunConfig {
    /// Defaults: 1000 shots, 100 iterations, random initial angles from `seed`.
    pub fn new(graph: Graph, seed: u64) -> Self {
        let initial_angles = random_angles(2 * graph.num_vertices(), seed ^ 0xA5A5_5A5A_C3C3_3C3C);
        VqeRunConfig {
            graph,
            initial_angles,
            shots: 1000,
            max_iterations: 100,
            seed,
            spsa: SpsaParams::default(),
            tolerance: 1e-3,
            patience: 10,
        }
    }

    pub fn validate(&self) -> Result<(), VqeError> {
        let n = self.graph.num_vertices();
        if self.initial_angles.len() != 2 * n {
            return Err(VqeError::Config(format!(
                "{} initial angles for {n} vertices, expected {}",
                self.initial_angles.len(),
                2 * n
            )));
        }
        if self.initial_angles.iter().any(|a| !a.is_finite()) {
            return Err(VqeError::Config("initial angles must be finite".into()));
        }
        if self.shots == 0 || self.max_iterations == 0 || self.patience == 0 {
            return Err(VqeError::Config("shots, max_iterations and patience must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Angles at the start of the iteration.
    pub angles: Vec<f64>,
    /// Mean cost of the iteration's evaluations.
    pub cost: f64,
    /// Lowest single-evaluation cost seen so far.
    pub best_cost: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub best_cost: f64,
    pub best_angles: Vec<f64>,
    /// Most frequent outcome of the lowest-cost evaluation.
    pub best_bitstring: String,
    pub converged: bool,
    pub evaluations: usize,
}

impl ConvergenceTrace {
    fn empty() -> Self {
        ConvergenceTrace {
            records: Vec::new(),
            best_cost: f64::INFINITY,
            best_angles: Vec::new(),
            best_bitstring: String::new(),
            converged: false,
            evaluations: 0,
        }
    }

    /// Equality ignoring wall-clock fields.
    pub fn same_path(&self, other: &ConvergenceTrace) -> bool {
        let strip = |t: &ConvergenceTrace| {
            let mut t = t.clone();
            t.records.iter_mut().for_each(|r| r.elapsed_ms = 0.0);
            t
        };
        strip(self) == strip(other)
    }

    pub fn total_ms(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.elapsed_ms)
    }
}

/// Executor failure mid-run, with the iterations completed before it.
#[derive(Debug, Error)]
#[error("VQE instance failed after {} iteration(s): {source}", trace.records.len())]
pub struct VqeFailure {
    pub trace: Box<ConvergenceTrace>,
    #[source]
    pub source: OffloadError,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shot-sampling seed of evaluation `j` in iteration `k`.
pub fn evaluation_seed(run_seed: u64, k: usize, j: usize) -> u64 {
    splitmix64(splitmix64(run_seed) ^ ((k as u64) << 8 | j as u64))
}

/// Builds the ansatz as a host task: RY layer, CX chain, RY layer, measure.
pub fn ansatz_task(num_qubits: usize, angles: &[f64], shots: u64, seed: u64) -> Result<QuantumTask, OffloadError> {
    let bad = |e: conqure_core::CircuitError| OffloadError::Task(e.to_string());
    if angles.len() != 2 * num_qubits {
        return Err(OffloadError::Task(format!("ansatz on {num_qubits} qubits needs {} angles", 2 * num_qubits)));
    }
    let mut c = QuantumTask::new(num_qubits, shots).with_seed(seed);
    c.map_to("angles", angles);
    for (q, &theta) in angles[..num_qubits].iter().enumerate() {
        c.ry(theta, q).map_err(bad)?;
    }
    for i in 0..num_qubits.saturating_sub(1) {
        c.cx(i, i + 1).map_err(bad)?;
    }
    for (q, &theta) in angles[num_qubits..].iter().enumerate() {
        c.ry(theta, q).map_err(bad)?;
    }
    c.measure().map_err(bad)?;
    Ok(c)
}

fn most_frequent(counts: &CountsMap) -> String {
    counts.iter().max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0))).map(|(k, _)| k.to_owned()).unwrap_or_default()
}

/// One optimisation run. `execute` runs a task document on this
/// instance's QPU.
pub fn run_vqe_instance(
    config: &VqeRunConfig,
    execute: &(dyn Fn(&WorkloadDocument) -> Result<CountsMap, OffloadError> + Sync),
) -> Result<ConvergenceTrace, VqeFailure> {
    let fail = |trace: &ConvergenceTrace, e: OffloadError| VqeFailure { trace: Box::new(trace.clone()), source: e };
    let mut trace = ConvergenceTrace::empty();
    config.validate().map_err(|e| fail(&trace, OffloadError::Task(e.to_string())))?;

    let n = config.graph.num_vertices();
    let mut optimizer = Spsa::new(config.spsa, splitmix64(config.seed ^ 0x5350_5341));
    let mut theta = config.initial_angles.clone();
    let start = Instant::now();
    let mut best_history: Vec<f64> = Vec::with_capacity(config.max_iterations);

    for k in 0..config.max_iterations {
        let points = optimizer.propose(k, &theta);
        let mut costs = Vec::with_capacity(points.len());
        for (j, point) in points.iter().enumerate() {
            let task =
                ansatz_task(n, point, config.shots, evaluation_seed(config.seed, k, j)).map_err(|e| fail(&trace, e))?;
            let doc = task.document().map_err(|e| fail(&trace, e))?;
            let counts = execute(&doc).map_err(|e| fail(&trace, e))?;
            trace.evaluations += 1;
            let cost =
                maxcut_cost(&counts, &config.graph).map_err(|e| fail(&trace, OffloadError::Task(e.to_string())))?;
            if cost < trace.best_cost {
                trace.best_cost = cost;
                trace.best_angles = point.clone();
                trace.best_bitstring = most_frequent(&counts);
            }
            costs.push(cost);
        }
        trace.records.push(IterationRecord {
            iteration: k + 1,
            angles: theta.clone(),
            cost: costs.iter().sum::<f64>() / costs.len() as f64,
            best_cost: trace.best_cost,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        optimizer.update(k, &mut theta, &costs);
        best_history.push(trace.best_cost);

        if config.graph.edges().is_empty() {
            // Cost is identically zero.
            trace.converged = true;
            break;
        }
        if k >= config.patience && best_history[k - config.patience] - trace.best_cost < config.tolerance {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

pub fn run_vqe_instance_on(config: &VqeRunConfig, executor: &dyn Executor) -> Result<ConvergenceTrace, VqeFailure> {
    run_vqe_instance(config, &|doc| executor.execute(doc))
}

#[derive(Debug)]
pub struct ParallelVqeReport {
    pub traces: Vec<Result<ConvergenceTrace, VqeFailure>>,
    pub qpu_count: usize,
    pub wall: Duration,
    pub peak_concurrency: usize,
}

impl ParallelVqeReport {
    /// Index of the instance with the lowest best cost.
    pub fn best_instance(&self) -> Option<usize> {
        self.traces
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().ok().map(|t| (i, t.best_cost)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

/// Runs instance `i` on QPU `i % pool.len()`. Each QPU works through its
/// instances in order; QPUs run concurrently. A pool of one QPU is the
/// serial baseline.
pub fn run_parallel_vqe(configs: &[VqeRunConfig], pool: &QpuPool) -> Result<ParallelVqeReport, VqeError> {
    if configs.is_empty() {
        return Err(VqeError::Config("no VQE instances".into()));
    }
    if pool.is_empty() {
        return Err(VqeError::Config("no QPUs".into()));
    }
    pool.reset_peak();
    let qpus = pool.len();
    let start = Instant::now();
    let mut slots: Vec<Option<Result<ConvergenceTrace, VqeFailure>>> = (0..configs.len()).map(|_| None).collect();
    let finished: Vec<(usize, Result<ConvergenceTrace, VqeFailure>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..qpus.min(configs.len()))
            .map(|qpu| {
                scope.spawn(move || {
                    (qpu..configs.len())
                        .step_by(qpus)
                        .map(|i| {
                            let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                                run_vqe_instance(&configs[i], &|doc| pool.execute(qpu, doc))
                            }))
                            .unwrap_or_else(|_| {
                                Err(VqeFailure {
                                    trace: Box::new(ConvergenceTrace::empty()),
                                    source: OffloadError::Panicked,
                                })
                            });
                            (i, run)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("instance panics are caught")).collect()
    });
    for (i, r) in finished {
        slots[i] = Some(r);
    }
    Ok(ParallelVqeReport {
        traces: slots.into_iter().map(|s| s.expect("every instance ran")).collect(),
        qpu_count: qpus,
        wall: start.elapsed(),
        peak_concurrency: pool.peak_concurrency(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_validation() {
        assert!(Graph::new(0, []).is_err());
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        let g = Graph::new(3, [(2, 0), (0, 2), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(json, r#"{"num_vertices":3,"edges":[[0,1],[0,2]]}"#);
        assert_eq!(serde_json::from_str::<Graph>(&json).unwrap(), g);
        assert!(serde_json::from_str::<Graph>(r#"{"num_vertices":2,"edges":[[0,0]]}"#).is_err());
    }

    #[test]
    fn cost_examples() {
        let triangle = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let all_zero = CountsMap::from_entries([("000", 100)]).unwrap();
        assert_eq!(maxcut_cost(&all_zero, &triangle).unwrap(), 0.0);
        let edge = Graph::path(2);
        let split = CountsMap::from_entries([("01", 50), ("10", 50)]).unwrap();
        assert_eq!(maxcut_cost(&split, &edge).unwrap(), -1.0);
        assert!(matches!(maxcut_cost(&all_zero, &edge), Err(VqeError::KeyWidth { expected: 2, got: 3 })));
    }

    #[test]
    fn brute_force_examples() {
        let triangle = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(brute_force_maxcut(&triangle).unwrap(), (2, "001".to_owned()));
        assert_eq!(brute_force_maxcut(&Graph::path(2)).unwrap(), (1, "01".to_owned()));
        assert!(matches!(brute_force_maxcut(&Graph::path(21)), Err(VqeError::TooLarge(21))));
    }

    #[test]
    fn ansatz_task_matches_core_builder() {
        let angles = conqure_core::builders::SAMPLE_ANSATZ_ANGLES;
        let doc = ansatz_task(4, &angles, 100, 0).unwrap().document().unwrap();
        assert_eq!(doc.circuit, conqure_core::build_vqe_ansatz(4, &angles, 100).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = VqeRunConfig::new(Graph::path(3), 1);
        assert_eq!(cfg.initial_angles.len(), 6);
        cfg.validate().unwrap();
        cfg.initial_angles.pop();
        assert!(cfg.validate().is_err());
        let exec = crate::executor::LocalExecutor::default();
        let err = run_vqe_instance_on(&cfg, &exec).unwrap_err();
        assert!(err.trace.records.is_empty());
    }

    #[test]
    fn spsa_moves_downhill_on_a_quadratic() {
        let mut opt = Spsa::new(SpsaParams { a: 0.5, ..SpsaParams::default() }, 3);
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let mut theta = vec![1.0, -2.0, 0.5];
        let start = f(&theta);
        for k in 0..200 {
            let pts = opt.propose(k, &theta);
            let costs: Vec<f64> = pts.iter().map(|p| f(p)).collect();
            opt.update(k, &mut theta, &costs);
        }
        assert!(f(&theta) < start * 1e-3, "{theta:?}");
    }
}
