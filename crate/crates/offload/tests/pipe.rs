use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use conqure_core::{build_ghz, CountsMap, WorkloadDocument};
use conqure_offload::{
    parse_map_from, run_multi_offload, Executor, LocalExecutor, OffloadError, PipeExecutor, QpuPool, QuantumTask,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXEC: &str = env!("CARGO_BIN_EXE_conqure-exec");

fn awkward_angle(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => rng.random_range(-10.0..10.0),
        1 => f64::from_bits(rng.random::<u64>() & !(0x7FF << 52) | (rng.random_range(1..2046u64) << 52)),
        2 => f64::from_bits(rng.random_range(1..1u64 << 52)), // subnormal
        3 => [0.1, 1.0 / 3.0, std::f64::consts::PI, -0.0, 2.858849, 1e-300][rng.random_range(0..6)],
        4 => (rng.random_range(0..1_000_000) as f64) * 1e-6,
        _ => rng.random::<f64>() * std::f64::consts::TAU,
    }
}

fn random_task(rng: &mut ChaCha8Rng, id: u64) -> (QuantumTask, Vec<f64>) {
    let n = rng.random_range(1..=4);
    let shots = rng.random_range(1..=300);
    let mut task = QuantumTask::new(n, shots).with_seed(id);
    let angles: Vec<f64> = (0..rng.random_range(1..=12)).map(|_| awkward_angle(rng)).collect();
    task.map_to("angles", &angles);
    for _ in 0..rng.random_range(0..20) {
        let q = rng.random_range(0..n);
        let theta = angles[rng.random_range(0..angles.len())] % 10.0;
        match rng.random_range(0..6) {
            0 => task.h(q),
            1 => task.x(q),
            2 => task.rx(theta, q),
            3 => task.ry(theta, q),
            4 => task.rz(theta, q),
            _ if n > 1 => task.cx(q, (q + 1) % n),
            _ => task.h(q),
        }
        .unwrap();
    }
    task.measure().unwrap();
    (task, angles)
}

fn raw_exchange(line: &str, tap: Option<&Path>) -> (bool, String, String) {
    let mut cmd = Command::new(EXEC);
    if let Some(t) = tap {
        cmd.arg("--tap").arg(t);
    }
    let mut child = cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(line.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    (out.status.success(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn random_tasks_transfer_angles_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let tap = dir.path().join("tap.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(0xF00D);
    for id in 0..100 {
        let (task, angles) = random_task(&mut rng, id);
        let doc = task.document().unwrap();
        let (ok, stdout, stderr) = raw_exchange(&(doc.to_json() + "\n"), Some(&tap));
        assert!(ok, "task {id}: {stderr}");
        assert_eq!(stdout.matches('\n').count(), 1, "one line back");
        let line = stdout.trim_end();
        check_counts_line(line, doc.circuit.num_qubits());
        let counts = parse_map_from(line, doc.circuit.shots()).unwrap();
        assert_eq!(counts.to_wire(), line, "canonical counts form");
        assert_eq!(counts, LocalExecutor::default().execute(&doc).unwrap());

        let observed = std::fs::read_to_string(&tap).unwrap();
        let last: serde_json::Value = serde_json::from_str(observed.lines().last().unwrap()).unwrap();
        let bits: Vec<u64> = serde_json::from_value(last["angles"]["bits"].clone()).unwrap();
        let sent: Vec<u64> = angles.iter().map(|a| a.to_bits()).collect();
        assert_eq!(bits, sent, "task {id}");
    }
    assert_eq!(std::fs::read_to_string(&tap).unwrap().lines().count(), 100);
}

// `{"<bits>": <count>, ...}` with keys of the circuit's width, sorted.
fn check_counts_line(line: &str, width: usize) {
    let inner = line.strip_prefix('{').and_then(|s| s.strip_suffix('}')).expect("braces");
    let mut prev = None;
    for entry in inner.split(", ") {
        let (k, v) = entry.split_once(": ").expect("key: value");
        let k = k.strip_prefix('"').and_then(|k| k.strip_suffix('"')).expect("quoted key");
        assert_eq!(k.len(), width);
        assert!(k.bytes().all(|b| b == b'0' || b == b'1'));
        assert!(v.parse::<u64>().unwrap() > 0);
        assert!(prev < Some(k.to_owned()));
        prev = Some(k.to_owned());
    }
}

#[test]
fn pipe_executor_matches_local_and_fills_frequencies() {
    let mut task = QuantumTask::new(4, 100).with_seed(3);
    task.h(0).unwrap();
    for q in 0..3 {
        task.cx(q, q + 1).unwrap();
    }
    task.measure().unwrap();
    let pipe = PipeExecutor::new(EXEC);
    let counts = task.execute(&pipe).unwrap().clone();
    assert_eq!(counts.shots(), 100);
    assert!(counts.iter().all(|(k, _)| k == "0000" || k == "1111"));
    assert_eq!(Some(&counts), task.frequencies());
    assert_eq!(counts, task.execute(&LocalExecutor::default()).unwrap().clone());
}

#[test]
fn executor_failures_are_reported() {
    let (ok, stdout, stderr) = raw_exchange("{\"version\": 1\n", None);
    assert!(!ok);
    assert!(stdout.is_empty());
    assert!(stderr.contains("conqure-exec"), "{stderr}");

    let doc = WorkloadDocument::new(build_ghz(2, 10));
    let dies = PipeExecutor::new("sh").args(["-c", "cat >/dev/null; echo boom >&2; exit 3"]);
    match dies.execute(&doc) {
        Err(OffloadError::ExecutorFailed { stderr, .. }) => assert!(stderr.contains("boom")),
        other => panic!("{other:?}"),
    }
    let garbage = PipeExecutor::new("sh").args(["-c", "cat >/dev/null; echo nope"]);
    assert!(matches!(garbage.execute(&doc), Err(OffloadError::Message(_))));
    let short = PipeExecutor::new("sh").args(["-c", r#"cat >/dev/null; echo '{"00": 9}'"#]);
    assert!(matches!(short.execute(&doc), Err(OffloadError::Message(_))), "9 of 10 shots");
}

#[test]
fn one_failing_task_does_not_disturb_the_rest() {
    let mut tasks: Vec<_> = (0..4)
        .map(|i| {
            let mut t = QuantumTask::new(2, 20).on_device(i).with_seed(i as u64);
            t.h(0).unwrap().cx(0, 1).unwrap().measure().unwrap();
            t
        })
        .collect();
    let failing = PipeExecutor::new("sh").args(["-c", "exit 1"]);
    let pool = QpuPool::new(vec![
        std::sync::Arc::new(PipeExecutor::new(EXEC)),
        std::sync::Arc::new(failing),
        std::sync::Arc::new(PipeExecutor::new(EXEC)),
        std::sync::Arc::new(LocalExecutor::default()),
    ]);
    let out = run_multi_offload(&mut tasks, &pool);
    assert!(out[1].is_err());
    let ok: Vec<&CountsMap> = [0, 2, 3].iter().map(|&i| out[i].as_ref().unwrap()).collect();
    assert!(ok.iter().all(|c| c.shots() == 20));
    assert!(tasks[1].frequencies().is_none());
}

#[test]
fn pipe_qpus_run_concurrently() {
    let hold = Duration::from_millis(400);
    let exec = PipeExecutor::new(EXEC).args(["--device-time-ms", "400"]);
    let pool = QpuPool::pipe(exec, 4);
    let mut tasks: Vec<_> = (0..4)
        .map(|i| {
            let mut t = QuantumTask::new(3, 50).on_device(i);
            t.x(i % 3).unwrap().measure().unwrap();
            t
        })
        .collect();
    let start = Instant::now();
    let out = run_multi_offload(&mut tasks, &pool);
    let wall = start.elapsed();
    assert!(out.iter().all(Result::is_ok));
    assert!(wall >= hold && wall < hold * 3, "{wall:?}");
    assert_eq!(pool.peak_concurrency(), 4);
}

#[test]
fn queue_executor_goes_through_the_service() {
    use conqure_offload::QueueExecutor;
    use conqure_queue::{QueueClient, ServiceConfig, ServiceHandle};

    let dir = tempfile::tempdir().unwrap();
    let config =
        ServiceConfig { port: 0, store_path: dir.path().join("jobs.log"), sync: false, ..ServiceConfig::default() }
            .with_simulators(2, 8);
    let service = ServiceHandle::spawn(config).unwrap();
    let client = QueueClient::new(service.url()).unwrap().with_poll_interval(Duration::from_millis(5));

    let mut task = QuantumTask::new(3, 64).with_seed(12);
    task.h(0).unwrap().cx(0, 1).unwrap().cx(1, 2).unwrap().measure().unwrap();
    let remote = QueueExecutor::new(client.clone(), "sim1").with_timeout(Duration::from_secs(20));
    let counts = task.execute(&remote).unwrap().clone();
    assert_eq!(counts, LocalExecutor::default().execute(&task.document().unwrap()).unwrap());

    let nowhere = QueueExecutor::new(client, "sim9");
    assert!(matches!(nowhere.execute(&task.document().unwrap()), Err(OffloadError::Client(_))));
    service.shutdown();
}
