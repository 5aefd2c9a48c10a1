use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conqure_cli::bench::{parse_sizes, run_latency_bench, LatencyOptions};
use conqure_cli::demo::{run_demo, write_artifacts, Backend, DemoOptions, Mode};
use conqure_cli::exit::{self, CliError};
use conqure_core::parse_workload;
use conqure_offload::{fixture_graph, Graph};
use conqure_queue::{JobStatus, JobStore, Priority, QueueClient, ServiceConfig, ServiceHandle};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "conqure", version, about = "Quantum job queue, offload runtime and VQE demo")]
struct Cli {
    /// Queue service base URL.
    #[arg(long, global = true, env = "CONQURE_URL", default_value = "http://127.0.0.1:8042")]
    url: String,
    /// Bearer token for services started with `auth_token`.
    #[arg(long, global = true, env = "CONQURE_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Args)]
struct ConfigArgs {
    /// Service config (TOML, or JSON when the name ends in .json).
    #[arg(long, env = "CONQURE_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the queue service until SIGTERM or Ctrl-C.
    Serve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        /// Job store file.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Submit a workload document (`-` reads stdin).
    Submit {
        file: PathBuf,
        #[arg(long, default_value = "sim0")]
        device: String,
        #[arg(long, default_value = "LOW", value_parser = parse_priority)]
        priority: Priority,
        /// Sampling seed, stored in the document metadata.
        #[arg(long)]
        seed: Option<u64>,
        /// Wait for completion and print the counts.
        #[arg(long)]
        wait: bool,
        /// Seconds to wait with --wait.
        #[arg(long, default_value_t = 300.0)]
        timeout: f64,
    },
    /// Show a job's status
    Status { job_id: String },
    /// Fetch a completed job's counts
    Results {
        job_id: String,
        #[arg(long)]
        wait: bool,
        #[arg(long, default_value_t = 300.0)]
        timeout: f64,
    },
    /// Cancel a QUEUED job
    Cancel { job_id: String },
    /// List registered devices
    Devices,
    /// List jobs, newest first.
    List {
        #[arg(long, value_parser = parse_status)]
        status: Option<JobStatus>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Print every stored job as a JSON line, read directly from the store file.
    Dump {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Measure create_work and get_results latency over GHZ sizes.
    BenchLatency {
        #[arg(long, default_value = "2-8")]
        sizes: String,
        /// Per size.
        #[arg(long, default_value_t = 1000)]
        repetitions: usize,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value = "sim0")]
        device: String,
        /// CSV of every sample.
        #[arg(long, default_value = "latency.csv")]
        out: PathBuf,
        /// Start a throwaway service in-process instead of using --url.
        #[arg(long)]
        spawn: bool,
    },
    /// Multi-start VQE max-cut on the bundled 7-vertex graph.
    VqeDemo {
        #[arg(long, default_value_t = 6)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        qpus: usize,
        #[arg(long, value_enum, default_value_t = Mode::Both)]
        mode: Mode,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Instance i uses seed + i.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emulated QPU time per circuit evaluation.
        #[arg(long, default_value_t = 0)]
        device_time_ms: u64,
        /// Run evaluations in `conqure exec` child processes.
        #[arg(long)]
        pipe: bool,
        /// Graph JSON `{"num_vertices": n, "edges": [[a, b], ...]}`.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value = "vqe-demo")]
        out: PathBuf,
        /// Also write convergence.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Device side of the offload pipe: one task line in, one counts line out.
    Exec {
        #[arg(long, value_name = "FILE")]
        tap: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        device_time_ms: u64,
    },
}

fn parse_priority(s: &str) -> Result<Priority, String> {
    s.parse()
}

fn parse_status(s: &str) -> Result<JobStatus, String> {
    s.parse()
}

struct Ctx {
    url: String,
    token: Option<String>,
    format: Format,
}

impl Ctx {
    fn client(&self) -> Result<QueueClient, CliError> {
        let parsed =
            url::Url::parse(&self.url).map_err(|e| CliError::Usage(format!("bad --url `{}`: {e}", self.url)))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(CliError::Usage(format!("bad --url `{}`: expected http or https", self.url)));
        }
        let client = QueueClient::new(&self.url)?;
        Ok(match &self.token {
            Some(t) => client.with_token(t),
            None => client,
        })
    }

    fn emit(&self, human: impl FnOnce() -> String, value: &impl Serialize) -> Result<(), CliError> {
        let text = match self.format {
            Format::Human => human(),
            Format::Json => serde_json::to_string(value).map_err(CliError::other)?,
        };
        let mut out = io::stdout().lock();
        writeln!(out, "{text}")?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { url: cli.url, token: cli.token, format: cli.format };
    match run(&ctx, cli.command) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            match ctx.format {
                Format::Human => eprintln!("conqure: {e}"),
                Format::Json => {
                    println!("{}", json!({"error": e.to_string(), "kind": e.kind(), "exit_code": e.code()}))
                }
            }
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cfg: &ConfigArgs) -> Result<ServiceConfig, CliError> {
    let config = match &cfg.config {
        Some(path) => ServiceConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => ServiceConfig::default(),
    };
    config.apply_env().map_err(|e| CliError::Usage(e.to_string()))
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("CONQURE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(io::stderr).try_init();
}

fn seconds(s: f64) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(s).map_err(|_| CliError::Usage(format!("bad timeout {s}")))
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf)?;
        return Ok(buf);
    }
    std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn wait_for(client: &QueueClient, job_id: &str, timeout: Duration) -> Result<(), CliError> {
    match client.wait_until_done(job_id, timeout)? {
        JobStatus::Completed => Ok(()),
        other => {
            let err = client.status(job_id)?.error.unwrap_or_default();
            Err(CliError::JobFailed(format!(
                "job {job_id} {other}{}",
                if err.is_empty() { err } else { format!(": {err}") }
            )))
        }
    }
}

fn print_results(ctx: &Ctx, client: &QueueClient, job_id: &str) -> Result<(), CliError> {
    let res = client.results(job_id)?;
    ctx.emit(|| res.counts.to_wire(), &res)
}

fn run(ctx: &Ctx, command: Command) -> Result<(), CliError> {
    match command {
        Command::Serve { cfg, port, bind, store } => {
            let mut config = load_config(&cfg)?;
            if let Some(p) = port {
                config.port = p;
            }
            if let Some(b) = bind {
                config.bind = b;
            }
            if let Some(s) = store {
                config.store_path = s;
            }
            config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            init_logging();
            conqure_queue::serve(config).map_err(CliError::other)
        }
        Command::Submit { file, device, priority, seed, wait, timeout } => {
            let bytes = read_input(&file)?;
            let mut doc = parse_workload(&bytes).map_err(|e| CliError::Rejected(format!("{}: {e}", file.display())))?;
            if let Some(s) = seed {
                doc.metadata.insert("seed".into(), s.to_string());
            }
            let client = ctx.client()?;
            let job_id = client.create_work(&doc, &device, priority)?;
            if wait {
                wait_for(&client, &job_id, seconds(timeout)?)?;
                return print_results(ctx, &client, &job_id);
            }
            ctx.emit(|| job_id.clone(), &json!({ "job_id": job_id }))
        }
        Command::Status { job_id } => {
            let st = ctx.client()?.status(&job_id)?;
            ctx.emit(
                || {
                    let mut line =
                        format!("{}  {}  device={} priority={}", st.job_id, st.status, st.device_id, st.priority);
                    if let Some(p) = st.queue_position {
                        line += &format!(" position={p}");
                    }
                    if let Some(e) = &st.error {
                        line += &format!(" error={e}");
                    }
                    line
                },
                &st,
            )
        }
        Command::Results { job_id, wait, timeout } => {
            let client = ctx.client()?;
            if wait {
                wait_for(&client, &job_id, seconds(timeout)?)?;
            }
            print_results(ctx, &client, &job_id)
        }
        Command::Cancel { job_id } => {
            let st = ctx.client()?.cancel(&job_id)?;
            ctx.emit(|| format!("{}  {}", st.job_id, st.status), &st)
        }
        Command::Devices => {
            let devices = ctx.client()?.devices()?;
            ctx.emit(
                || {
                    devices
                        .iter()
                        .map(|d| {
                            let v = serde_json::to_value(d).unwrap_or_default();
                            let gates: Vec<&str> = v["supported_gates"]
                                .as_array()
                                .into_iter()
                                .flatten()
                                .filter_map(|g| g.as_str())
                                .collect();
                            format!(
                                "{}  {}  {} qubits  {} slot(s)  {}  [{}]",
                                d.device_id,
                                v["kind"].as_str().unwrap_or(""),
                                d.num_qubits,
                                d.slots,
                                v["policy"].as_str().unwrap_or(""),
                                gates.join(",")
                            )
                        })
                        .collect::<Vec<_>>()
                        .join("\n")
                },
                &devices,
            )
        }
        Command::List { status, limit } => {
            let jobs = ctx.client()?.list(status, limit)?;
            ctx.emit(
                || {
                    jobs.iter()
                        .map(|j| {
                            format!(
                                "{}  {:<9}  {}  {}  {}",
                                j.job_id, j.status, j.priority, j.device_id, j.submitted_at
                            )
                        })
                        .collect::<Vec<_>>()
                        .join("\n")
                },
                &jobs,
            )
        }
        Command::Dump { cfg, store } => {
            let path = match store {
                Some(p) => p,
                None => load_config(&cfg)?.store_path,
            };
            let records = JobStore::snapshot(&path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
            let mut out = io::stdout().lock();
            for r in &records {
                serde_json::to_writer(&mut out, r).map_err(CliError::other)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        Command::BenchLatency { sizes, repetitions, shots, device, out, spawn } => {
            let opts = LatencyOptions {
                sizes: parse_sizes(&sizes)?,
                repetitions,
                shots,
                device_id: device,
                ..Default::default()
            };
            let scratch;
            let service;
            let client = if spawn {
                scratch = std::env::temp_dir().join(format!("conqure-bench-{}.log", std::process::id()));
                let max = *opts.sizes.iter().max().expect("nonempty");
                let config = ServiceConfig { port: 0, store_path: scratch.clone(), ..ServiceConfig::default() }
                    .with_simulators(1, max.max(1));
                service = Some(ServiceHandle::spawn(config).map_err(CliError::other)?);
                let url = service.as_ref().expect("spawned").url();
                QueueClient::new(url)?
            } else {
                scratch = PathBuf::new();
                service = None;
                ctx.client()?
            };
            let report = run_latency_bench(&client, &opts);
            if let Some(s) = service {
                s.shutdown();
                let _ = std::fs::remove_file(&scratch);
            }
            let report = report?;
            report.write_csv(std::fs::File::create(&out)?)?;
            ctx.emit(
                || {
                    let mut lines = vec![format!(
                        "{:>6}  {:>28}  {:>28}",
                        "qubits", "create_work ms (q1 med q3)", "get_results ms (q1 med q3)"
                    )];
                    let fmt = |s: &conqure_cli::stats::Summary| match (s.q1_ms, s.q3_ms) {
                        (Some(a), Some(b)) => format!("{a:8.3} {:8.3} {b:8.3}", s.median_ms),
                        _ => format!("{:>8} {:8.3} {:>8}", "-", s.median_ms, "-"),
                    };
                    for s in &report.per_size {
                        lines.push(format!(
                            "{:>6}  {:>28}  {:>28}",
                            s.num_qubits,
                            fmt(&s.create_work),
                            fmt(&s.get_results)
                        ));
                    }
                    lines.push(format!(
                        "{:>6}  {:>28}  {:>28}",
                        "all",
                        fmt(&report.create_work),
                        fmt(&report.get_results)
                    ));
                    lines.push(format!("samples written to {}", out.display()));
                    lines.join("\n")
                },
                &report,
            )
        }
        Command::VqeDemo { instances, qpus, mode, shots, iterations, seed, device_time_ms, pipe, graph, out, plot } => {
            let graph = match graph {
                Some(p) => {
                    let text =
                        std::fs::read_to_string(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<Graph>(&text)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
                }
                None => fixture_graph().graph,
            };
            let backend =
                if pipe { Backend::Pipe(std::env::current_exe()?, vec!["exec".into()]) } else { Backend::Local };
            let opts = DemoOptions {
                graph,
                instances,
                qpus,
                mode,
                shots,
                iterations,
                seed,
                device_time: Duration::from_millis(device_time_ms),
                backend,
            };
            let outcome = run_demo(&opts)?;
            let written = write_artifacts(&out, &outcome, plot)?;
            let s = &outcome.summary;
            ctx.emit(
                || {
                    let mut lines =
                        vec![format!("graph: {} vertices, {} edges, optimum cut {}", s.vertices, s.edges, s.optimum)];
                    if let (Some(i), Some(cut), Some(bits)) = (s.best_instance, s.best_expected_cut, &s.best_bitstring)
                    {
                        lines.push(format!(
                            "best: instance {i}, expected cut {cut:.3} ({:.1}% of optimum), most frequent {bits}",
                            100.0 * s.best_ratio.unwrap_or(0.0)
                        ));
                    }
                    if let Some(w) = s.serial_wall_s {
                        lines.push(format!("serial (1 QPU): {w:.3} s"));
                    }
                    if let Some(w) = s.parallel_wall_s {
                        lines.push(format!("parallel ({} QPUs): {w:.3} s", s.qpus));
                    }
                    if let Some(r) = s.speedup {
                        lines.push(format!(
                            "speedup: {r:.2}x, traces identical: {}",
                            s.traces_identical.unwrap_or(false)
                        ));
                    }
                    for f in &s.failures {
                        lines.push(format!("instance {} failed: {}", f.instance, f.error));
                    }
                    lines.push(format!("wrote {} file(s) to {}", written.len(), out.display()));
                    lines.join("\n")
                },
                s,
            )?;
            if s.failures.len() == s.instances {
                return Err(CliError::JobFailed("every VQE instance failed".into()));
            }
            Ok(())
        }
        Command::Exec { tap, device_time_ms } => conqure_offload::serve_pipe(
            io::stdin().lock(),
            io::stdout().lock(),
            Duration::from_millis(device_time_ms),
            tap.as_deref(),
        )
        .map_err(CliError::other),
    }
}
