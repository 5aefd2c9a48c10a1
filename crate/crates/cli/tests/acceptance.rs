//! Acceptance criteria 1-9, run one after another with one PASS/FAIL line
//! each. Pass criterion numbers as arguments to run a subset.

mod common;
#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::sync::{Arc, Barrier};
use std::thread;
use std::time::{Duration, Instant};

use conqure_cli::bench::{run_latency_bench, LatencyOptions};
use conqure_cli::demo::instance_configs;
use conqure_core::{build_ghz, exact_distribution, CountsMap, SimConfig, Simulator, WorkloadDocument};
use conqure_offload::vqe::exact_expected_cut;
use conqure_offload::{
    brute_force_maxcut, fixture_graph, parse_map_from, run_parallel_vqe, Executor, LocalExecutor, PipeExecutor,
    QpuPool, QuantumTask,
};
use conqure_queue::{
    DeviceDescriptor, JobStatus, JobStore, NewJob, Priority, QueueClient, QueuePolicy, Scheduler, ServiceConfig,
    ServiceHandle, StoreOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        // Negated so a NaN measurement fails.
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

// 1. exact_distribution vs dense unitary product.
fn simulator_matches_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let c = oracle::random_circuit(&mut rng, 3, 50, 1);
        let reference = oracle::oracle_probabilities(&c);
        let dist = exact_distribution(&c).map_err(|e| e.to_string())?;
        for (idx, p) in reference.iter().enumerate() {
            let key = conqure_core::bitstring(idx, c.num_qubits());
            let got = dist.get(&key).copied().unwrap_or(0.0);
            worst = worst.max((got - p).abs());
            ensure!((got - p).abs() <= 1e-10, "circuit {i}, |{key}>: {got} vs {p}");
        }
    }
    Ok(format!("200 circuits, max |dp| = {worst:.1e}"))
}

// 2. GHZ-4, 10k shots.
fn ghz_fidelity() -> Outcome {
    let sim = Simulator::new(SimConfig { seed: 2024, ..SimConfig::default() });
    let counts = sim.run(&build_ghz(4, 10_000)).map_err(|e| e.to_string())?;
    ensure!(counts.iter().all(|(k, _)| k == "0000" || k == "1111"), "unexpected outcomes {}", counts.to_wire());
    let (zeros, ones) = (counts.get("0000"), counts.get("1111"));
    for c in [zeros, ones] {
        ensure!((c as f64 - 5000.0).abs() <= 4.0 * 50.0, "count {c} outside 5000 +- 200");
    }
    let again = sim.run(&build_ghz(4, 10_000)).map_err(|e| e.to_string())?;
    ensure!(again == counts, "same seed gave different counts");
    Ok(format!("0000: {zeros}, 1111: {ones}, repeatable"))
}

fn temp_service(config: ServiceConfig) -> (tempfile::TempDir, ServiceHandle, QueueClient) {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig { port: 0, store_path: dir.path().join("jobs.log"), ..config };
    let handle = ServiceHandle::spawn(config).unwrap();
    let client = QueueClient::new(handle.url()).unwrap();
    (dir, handle, client)
}

// 3. Loopback latency.
fn api_latency() -> Outcome {
    let (_dir, handle, client) = temp_service(ServiceConfig::default().with_simulators(1, 8));
    // 7 sizes x 143 = 1001 create_work calls.
    let opts = LatencyOptions { repetitions: 143, ..LatencyOptions::default() };
    let report = run_latency_bench(&client, &opts).map_err(|e| e.to_string());
    handle.shutdown();
    let report = report?;
    let (create, results) = (report.create_work.median_ms, report.get_results.median_ms);
    ensure!(report.create_work.n >= 1000, "only {} create_work samples", report.create_work.n);
    ensure!(create < 50.0, "create_work median {create:.2} ms");
    ensure!(results <= create, "get_results median {results:.2} ms > create_work median {create:.2} ms");
    Ok(format!("{} calls, median create_work {create:.2} ms, get_results {results:.2} ms", report.create_work.n))
}

// 4. Asynchronous submission.
fn asynchrony() -> Outcome {
    let (_dir, handle, client) = temp_service(ServiceConfig::default().with_simulators(1, 12));
    let doc = WorkloadDocument::new(build_ghz(10, 1_000_000));
    let t = Instant::now();
    let job = client.create_work(&doc, "sim0", Priority::Low).map_err(|e| e.to_string())?;
    let ack = t.elapsed();
    let status = client.status(&job).map_err(|e| e.to_string())?.status;
    let done = client.wait_until_done(&job, Duration::from_secs(120));
    handle.shutdown();
    ensure!(ack < Duration::from_millis(100), "ack took {:.1} ms", ms(ack));
    ensure!(!status.is_terminal(), "job already {status} at ack");
    ensure!(done.as_ref().ok() == Some(&JobStatus::Completed), "job ended {done:?}");
    Ok(format!("job_id in {:.1} ms, status {status} at ack", ms(ack)))
}

const VQE_DEVICE_TIME: Duration = Duration::from_millis(20);

// 5. Serial vs parallel VQE.
fn parallel_vqe_speedup() -> Outcome {
    let fx = fixture_graph();
    let configs = instance_configs(&fx.graph, 6, 1, 1000, 100);
    let serial = run_parallel_vqe(&configs, &QpuPool::local(1, VQE_DEVICE_TIME)).map_err(|e| e.to_string())?;
    let parallel = run_parallel_vqe(&configs, &QpuPool::local(6, VQE_DEVICE_TIME)).map_err(|e| e.to_string())?;
    for (i, (s, p)) in serial.traces.iter().zip(&parallel.traces).enumerate() {
        let (s, p) = (s.as_ref().map_err(|e| e.to_string())?, p.as_ref().map_err(|e| e.to_string())?);
        ensure!(s.same_path(p), "instance {i} trace differs between modes");
    }
    let ratio = serial.wall.as_secs_f64() / parallel.wall.as_secs_f64();
    ensure!(serial.wall < Duration::from_secs(300), "serial run took {:?}", serial.wall);
    ensure!(ratio >= 2.5, "serial/parallel = {ratio:.2}");
    Ok(format!(
        "serial {:.2} s, parallel {:.2} s, ratio {ratio:.2}, traces identical",
        serial.wall.as_secs_f64(),
        parallel.wall.as_secs_f64()
    ))
}

// 6. Best-of-6 expected cut against exhaustive enumeration.
fn vqe_quality() -> Outcome {
    let fx = fixture_graph();
    let n = fx.graph.num_vertices();
    let optimum = (0u32..1 << n)
        .map(|mask| fx.graph.edges().iter().filter(|(a, b)| (mask >> a) & 1 != (mask >> b) & 1).count())
        .max()
        .unwrap();
    ensure!(brute_force_maxcut(&fx.graph).map(|r| r.0).ok() == Some(optimum), "brute force disagrees with enumeration");
    ensure!(optimum == fx.optimum, "frozen optimum {} vs enumerated {optimum}", fx.optimum);
    let configs = instance_configs(&fx.graph, 6, 1, 1000, 100);
    let report = run_parallel_vqe(&configs, &QpuPool::local(6, Duration::ZERO)).map_err(|e| e.to_string())?;
    let mut best = 0.0f64;
    for t in &report.traces {
        let t = t.as_ref().map_err(|e| e.to_string())?;
        best = best.max(exact_expected_cut(&fx.graph, &t.best_angles).map_err(|e| e.to_string())?);
    }
    ensure!(best >= 0.9 * optimum as f64, "best expected cut {best:.3} < 0.9 x {optimum}");
    Ok(format!("best expected cut {best:.3} of optimum {optimum} ({:.1}%)", 100.0 * best / optimum as f64))
}

// 7. Scheduler properties.
fn scheduler_properties() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(JobStore::open_with(dir.path().join("jobs.log"), StoreOptions { sync: false }).unwrap());
    let s = Scheduler::new(store, SimConfig::default());
    let submit = |device: &str, priority, qubits| {
        let rec = s
            .store()
            .insert(NewJob {
                device_id: device.into(),
                priority,
                workload: WorkloadDocument::new(build_ghz(qubits, 1)),
                seed: Some(1),
            })
            .unwrap();
        s.enqueue(&rec.job_id).unwrap();
        rec.job_id
    };

    s.register_device_with(DeviceDescriptor::simulator("race", 8), false).map_err(|e| e.to_string())?;
    for trial in 0..10_000 {
        let id = submit("race", Priority::Low, 2);
        let barrier = Arc::new(Barrier::new(2));
        let claims: Vec<Option<String>> = (0..2)
            .map(|_| {
                let (s, b) = (Arc::clone(&s), Arc::clone(&barrier));
                thread::spawn(move || {
                    b.wait();
                    s.dequeue_next("race").unwrap()
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect();
        let won: Vec<&String> = claims.iter().flatten().collect();
        ensure!(won == [&id], "trial {trial}: claims {claims:?}");
    }

    let prios = [Priority::Low, Priority::Medium, Priority::High];
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);
    for case in 0..200 {
        let dev = format!("fifo{case}");
        s.register_device_with(DeviceDescriptor::simulator(&dev, 8), false).map_err(|e| e.to_string())?;
        let mut model: Vec<(Priority, usize, String)> = Vec::new();
        let mut served = Vec::new();
        for step in 0..rng.random_range(1..40) {
            if rng.random_bool(0.3) {
                served.push(s.dequeue_next(&dev).unwrap());
                model.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                let expect = (!model.is_empty()).then(|| model.remove(0).2);
                ensure!(served.last() == Some(&expect), "case {case}: got {:?}, expected {expect:?}", served.last());
            } else {
                let p = prios[rng.random_range(0..3)];
                model.push((p, step, submit(&dev, p, 2)));
            }
        }
    }

    s.register_device_with(DeviceDescriptor::simulator("ion", 8).with_policy(QueuePolicy::QubitAffinity), false)
        .map_err(|e| e.to_string())?;
    submit("ion", Priority::Medium, 4);
    s.dequeue_next("ion").unwrap();
    let older = submit("ion", Priority::Medium, 6);
    let matching = submit("ion", Priority::Medium, 4);
    let urgent = submit("ion", Priority::High, 6);
    ensure!(s.dequeue_next("ion").unwrap().as_ref() == Some(&urgent), "priority must dominate affinity");
    // Last run was 6 qubits now, so the older 6-qubit job is both FIFO and affine.
    ensure!(s.dequeue_next("ion").unwrap().as_ref() == Some(&older), "affine FIFO head not taken");
    let newer6 = submit("ion", Priority::Medium, 6);
    ensure!(s.dequeue_next("ion").unwrap().as_ref() == Some(&newer6), "affinity did not skip the 4-qubit job");
    ensure!(s.dequeue_next("ion").unwrap().as_ref() == Some(&matching), "mismatched job not served last");
    Ok("10000 claim races exactly once, 200 random arrival sequences in priority-FIFO order, affinity preferred".into())
}

// 8. SIGKILL and restart of `conqure serve`.
fn durability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let devices = "[[devices]]\nid = \"sim0\"\nnum_qubits = 8\n\n[[devices]]\nid = \"slow\"\nnum_qubits = 4\nexec_time_ms = 1000\n";
    let mut server = common::Server::start(dir.path(), devices);
    let client = QueueClient::new(server.url()).unwrap().with_poll_interval(Duration::from_millis(5));
    let e = |e: conqure_queue::ClientError| e.to_string();

    let mut done = Vec::new();
    for seed in 0..20u64 {
        let doc = WorkloadDocument::new(build_ghz(2 + seed as usize % 5, 100)).with_metadata("seed", seed.to_string());
        let id = client.create_work(&doc, "sim0", Priority::Low).map_err(e)?;
        client.wait_until_done(&id, Duration::from_secs(20)).map_err(e)?;
        done.push((id.clone(), client.results(&id).map_err(e)?.counts));
    }
    let slow_docs: Vec<WorkloadDocument> = (7..10u64)
        .map(|seed| WorkloadDocument::new(build_ghz(3, 64)).with_metadata("seed", seed.to_string()))
        .collect();
    let slow_ids: Vec<String> =
        slow_docs.iter().map(|d| client.create_work(d, "slow", Priority::Low)).collect::<Result<_, _>>().map_err(e)?;
    let deadline = Instant::now() + Duration::from_secs(10);
    while client.status(&slow_ids[0]).map_err(e)?.status != JobStatus::Running {
        ensure!(Instant::now() < deadline, "slow job never started");
        thread::sleep(Duration::from_millis(5));
    }
    server.signal("KILL");

    let crashed = JobStore::snapshot(&server.store).map_err(|e| e.to_string())?;
    ensure!(crashed.len() == 23, "{} records after crash", crashed.len());
    let running: Vec<&str> =
        crashed.iter().filter(|r| r.status == JobStatus::Running).map(|r| r.job_id.as_str()).collect();
    ensure!(running == [slow_ids[0].as_str()], "RUNNING at crash: {running:?}");

    let server = server.restart();
    let client = QueueClient::new(server.url()).unwrap().with_poll_interval(Duration::from_millis(5));
    for (id, counts) in &done {
        ensure!(&client.results(id).map_err(e)?.counts == counts, "results of {id} changed across restart");
    }
    for (id, doc) in slow_ids.iter().zip(&slow_docs) {
        let st = client.wait_until_done(id, Duration::from_secs(30)).map_err(e)?;
        ensure!(st == JobStatus::Completed, "{id} ended {st}");
        let expected = LocalExecutor::default().execute(doc).map_err(|e| e.to_string())?;
        ensure!(client.results(id).map_err(e)?.counts == expected, "re-run of {id} gave different counts");
    }
    Ok("23 acknowledged jobs survive SIGKILL; interrupted job re-queued with identical counts".into())
}

// 9. Pipe protocol through `conqure exec`.
fn pipe_protocol() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let tap = dir.path().join("tap.jsonl");
    let exec = PipeExecutor::new(common::BIN).arg("exec").arg("--tap").arg(&tap);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0009);
    for i in 0..100u64 {
        let n = rng.random_range(1..=5);
        let shots = rng.random_range(1..=500);
        let angles: Vec<f64> = (0..2 * n)
            .map(|_| match rng.random_range(0..3) {
                0 => rng.random::<f64>() * std::f64::consts::TAU,
                1 => f64::from_bits(rng.random::<u64>() >> 2),
                _ => (rng.random_range(-9_999_999..9_999_999) as f64) * 1e-6,
            })
            .collect();
        let mut task = QuantumTask::new(n, shots).with_seed(i);
        task.map_to("angles", &angles);
        for (q, a) in angles[..n].iter().enumerate() {
            task.ry(a % 7.0, q).unwrap();
        }
        for q in 1..n {
            task.cx(q - 1, q).unwrap();
        }
        for (q, a) in angles[n..].iter().enumerate() {
            task.rx(a % 7.0, q).unwrap();
        }
        task.measure().unwrap();

        let counts = task.execute(&exec).map_err(|e| format!("task {i}: {e}"))?.clone();
        ensure!(counts.shots() == shots, "task {i}: {} of {shots} shots", counts.shots());
        let line = std::fs::read_to_string(&tap).unwrap().lines().last().unwrap().to_owned();
        let seen: serde_json::Value = serde_json::from_str(&line).unwrap();
        let bits: Vec<u64> = serde_json::from_value(seen["angles"]["bits"].clone()).unwrap();
        ensure!(
            bits == angles.iter().map(|a| a.to_bits()).collect::<Vec<_>>(),
            "task {i}: angle bits changed in transit"
        );

        let raw = raw_exchange(&task.document().unwrap().to_json())?;
        ensure!(is_counts_form(&raw, n), "task {i}: reply not in counts form: {raw}");
        let parsed: CountsMap = parse_map_from(&raw, shots).map_err(|e| e.to_string())?;
        ensure!(parsed == counts, "task {i}: raw reply differs");
    }
    Ok("100 tasks, angles bit-exact, counts sum to shots in {\"bits\": n} form".into())
}

fn raw_exchange(line: &str) -> Result<String, String> {
    use std::io::Write;
    let mut child = Command::new(common::BIN)
        .arg("exec")
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    writeln!(child.stdin.take().unwrap(), "{line}").map_err(|e| e.to_string())?;
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "exec exited {}", out.status);
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    ensure!(text.ends_with('\n') && text.matches('\n').count() == 1, "reply is not exactly one line");
    Ok(text.trim_end().to_owned())
}

// `{"0101": 3, "1111": 60}`: sorted binary keys of width n, positive counts.
fn is_counts_form(text: &str, n: usize) -> bool {
    let Some(body) = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')) else { return false };
    let mut prev = String::new();
    body.split(", ").all(|entry| {
        let Some((k, v)) = entry.split_once(": ") else { return false };
        let Some(k) = k.strip_prefix('"').and_then(|k| k.strip_suffix('"')) else { return false };
        let ok = k.len() == n
            && k.bytes().all(|b| b == b'0' || b == b'1')
            && v.parse::<u64>().is_ok_and(|c| c > 0)
            && k > prev.as_str();
        prev = k.to_owned();
        ok
    })
}

type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "simulator vs dense-unitary oracle", Duration::from_secs(30), simulator_matches_oracle),
        (2, "GHZ-4 fidelity", Duration::from_secs(5), ghz_fidelity),
        (3, "API latency", Duration::from_secs(180), api_latency),
        (4, "asynchronous submission", Duration::from_secs(120), asynchrony),
        (5, "parallel VQE speedup", Duration::from_secs(600), parallel_vqe_speedup),
        (6, "VQE quality", Duration::from_secs(300), vqe_quality),
        (7, "scheduler properties", Duration::from_secs(60), scheduler_properties),
        (8, "durability across crash", Duration::from_secs(60), durability),
        (9, "offload pipe protocol", Duration::from_secs(60), pipe_protocol),
    ];
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, limit, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let outcome =
            outcome.and_then(
                |d| {
                    if took <= limit {
                        Ok(d)
                    } else {
                        Err(format!("{d}; took {took:.1?}, limit {limit:?}"))
                    }
                },
            );
        match outcome {
            Ok(detail) => println!("PASS  {n}  {name}: {detail} [{took:.1?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {n}  {name}: {why} [{took:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
