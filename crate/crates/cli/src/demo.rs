//! Multi-start VQE max-cut demo: the same instances on one QPU and on
//! several, with traces, a summary and an optional convergence plot.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use conqure_offload::vqe::exact_expected_cut;
use conqure_offload::{
    brute_force_maxcut, run_parallel_vqe, ConvergenceTrace, Graph, ParallelVqeReport, PipeExecutor, QpuPool,
    VqeRunConfig,
};
use serde::Serialize;

use crate::exit::CliError;
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Serial,
    Parallel,
    /// Serial then parallel, with a speedup ratio.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Local,
    /// Pipe executor: program plus leading arguments.
    Pipe(PathBuf, Vec<String>),
}

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub graph: Graph,
    pub instances: usize,
    pub qpus: usize,
    pub mode: Mode,
    pub shots: u64,
    pub iterations: usize,
    pub seed: u64,
    pub device_time: Duration,
    pub backend: Backend,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceFailure {
    pub instance: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub vertices: usize,
    pub edges: usize,
    pub optimum: usize,
    pub instances: usize,
    pub qpus: usize,
    pub shots: u64,
    pub max_iterations: usize,
    pub best_instance: Option<usize>,
    /// `-best_cost`: the best sampled expected cut.
    pub best_sampled_cut: Option<f64>,
    /// Noise-free expected cut at the best angles.
    pub best_expected_cut: Option<f64>,
    pub best_ratio: Option<f64>,
    pub best_bitstring: Option<String>,
    pub serial_wall_s: Option<f64>,
    pub parallel_wall_s: Option<f64>,
    pub speedup: Option<f64>,
    pub traces_identical: Option<bool>,
    pub failures: Vec<InstanceFailure>,
}

#[derive(Debug)]
pub struct DemoOutcome {
    pub summary: DemoSummary,
    /// From the parallel run when there was one, else the serial run.
    pub traces: Vec<Option<ConvergenceTrace>>,
}

/// Instance `i` gets seed `seed + i`; everything else is shared.
pub fn instance_configs(
    graph: &Graph,
    instances: usize,
    seed: u64,
    shots: u64,
    iterations: usize,
) -> Vec<VqeRunConfig> {
    (0..instances as u64)
        .map(|i| {
            let mut c = VqeRunConfig::new(graph.clone(), seed.wrapping_add(i));
            c.shots = shots;
            c.max_iterations = iterations;
            c
        })
        .collect()
}

fn pool(opts: &DemoOptions, qpus: usize) -> QpuPool {
    match &opts.backend {
        Backend::Local => QpuPool::local(qpus, opts.device_time),
        Backend::Pipe(program, args) => {
            let exec = PipeExecutor::new(program)
                .args(args)
                .args(["--device-time-ms".to_owned(), opts.device_time.as_millis().to_string()]);
            QpuPool::pipe(exec, qpus)
        }
    }
}

pub fn run_demo(opts: &DemoOptions) -> Result<DemoOutcome, CliError> {
    if opts.instances == 0 {
        return Err(CliError::Usage("--instances must be at least 1".into()));
    }
    if opts.qpus == 0 {
        return Err(CliError::Usage("--qpus must be at least 1".into()));
    }
    if opts.shots == 0 || opts.iterations == 0 {
        return Err(CliError::Usage("--shots and --iterations must be positive".into()));
    }
    let (optimum, _) = brute_force_maxcut(&opts.graph).map_err(|e| CliError::Usage(e.to_string()))?;
    let configs = instance_configs(&opts.graph, opts.instances, opts.seed, opts.shots, opts.iterations);
    let run = |qpus| run_parallel_vqe(&configs, &pool(opts, qpus)).map_err(|e| CliError::Usage(e.to_string()));

    let serial = matches!(opts.mode, Mode::Serial | Mode::Both).then(|| run(1)).transpose()?;
    let parallel = matches!(opts.mode, Mode::Parallel | Mode::Both).then(|| run(opts.qpus)).transpose()?;
    let traces_identical = match (&serial, &parallel) {
        (Some(s), Some(p)) => Some(s.traces.iter().zip(&p.traces).all(|pair| match pair {
            (Ok(a), Ok(b)) => a.same_path(b),
            _ => false,
        })),
        _ => None,
    };
    let wall = |r: &Option<ParallelVqeReport>| r.as_ref().map(|r| r.wall.as_secs_f64());
    let (serial_wall_s, parallel_wall_s) = (wall(&serial), wall(&parallel));
    let report = parallel.or(serial).expect("at least one mode ran");

    let best = report.best_instance();
    let best_trace = best.and_then(|i| report.traces[i].as_ref().ok());
    let best_expected_cut =
        best_trace.map(|t| exact_expected_cut(&opts.graph, &t.best_angles)).transpose().map_err(CliError::other)?;
    let summary = DemoSummary {
        vertices: opts.graph.num_vertices(),
        edges: opts.graph.edges().len(),
        optimum,
        instances: opts.instances,
        qpus: opts.qpus,
        shots: opts.shots,
        max_iterations: opts.iterations,
        best_instance: best,
        best_sampled_cut: best_trace.map(|t| -t.best_cost),
        best_expected_cut,
        best_ratio: best_expected_cut.filter(|_| optimum > 0).map(|c| c / optimum as f64),
        best_bitstring: best_trace.map(|t| t.best_bitstring.clone()),
        serial_wall_s,
        parallel_wall_s,
        speedup: serial_wall_s.zip(parallel_wall_s).map(|(s, p)| s / p),
        traces_identical,
        failures: report
            .traces
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().err().map(|e| InstanceFailure { instance: i, error: e.to_string() }))
            .collect(),
    };
    Ok(DemoOutcome { summary, traces: report.traces.into_iter().map(Result::ok).collect() })
}

/// `instance_<i>.csv` per instance, `summary.json`, and with `plot`
/// `convergence.svg`. Returns the written paths.
pub fn write_artifacts(dir: &Path, outcome: &DemoOutcome, with_plot: bool) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (i, trace) in outcome.traces.iter().enumerate() {
        let Some(trace) = trace else { continue };
        let path = dir.join(format!("instance_{i}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(CliError::other)?;
        w.write_record(["iteration", "cost", "best_cost", "elapsed_ms"]).map_err(CliError::other)?;
        for r in &trace.records {
            w.write_record([
                r.iteration.to_string(),
                r.cost.to_string(),
                r.best_cost.to_string(),
                format!("{:.3}", r.elapsed_ms),
            ])
            .map_err(CliError::other)?;
        }
        w.flush()?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&outcome.summary).map_err(CliError::other)? + "\n")?;
    written.push(path);
    if with_plot {
        let series: Vec<(String, Vec<f64>)> = outcome
            .traces
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().map(|t| (format!("run {i}"), t.records.iter().map(|r| r.cost).collect())))
            .collect();
        let path = dir.join("convergence.svg");
        fs::write(&path, plot::line_chart("VQE convergence", "iteration", "cost", &series))?;
        written.push(path);
    }
    Ok(written)
}
