//! Client-side latency of `create_work` and `get_results` across GHZ sizes.

use std::io::Write;
use std::time::{Duration, Instant};

use conqure_core::{build_ghz, WorkloadDocument};
use conqure_queue::{Priority, QueueClient};
use serde::Serialize;

use crate::exit::CliError;
use crate::stats::{summarize, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Call {
    CreateWork,
    GetResults,
}

impl Call {
    pub fn as_str(self) -> &'static str {
        match self {
            Call::CreateWork => "create_work",
            Call::GetResults => "get_results",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub call: Call,
    pub num_qubits: usize,
    pub repetition: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone)]
pub struct LatencyOptions {
    pub sizes: Vec<usize>,
    /// Per size.
    pub repetitions: usize,
    pub shots: u64,
    pub device_id: String,
    /// Per job, for the untimed wait between the two calls.
    pub job_timeout: Duration,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        LatencyOptions {
            sizes: (2..=8).collect(),
            repetitions: 1000,
            shots: 1000,
            device_id: "sim0".into(),
            job_timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub num_qubits: usize,
    pub create_work: Summary,
    pub get_results: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyReport {
    pub create_work: Summary,
    pub get_results: Summary,
    pub per_size: Vec<SizeSummary>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

impl LatencyReport {
    /// Box-plot-ready rows: `call,num_qubits,repetition,latency_ms`.
    pub fn write_csv(&self, out: impl Write) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.samples {
            w.serialize(s).map_err(CliError::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `"2-8"`, `"3"` or `"2,4,6"`.
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad qubit sizes `{text}` (try 2-8 or 2,4,6)"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) =
                    (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

/// For each repetition and size: time `create_work`, wait (untimed) for
/// completion, then time `get_results`.
pub fn run_latency_bench(client: &QueueClient, opts: &LatencyOptions) -> Result<LatencyReport, CliError> {
    if opts.repetitions == 0 || opts.sizes.is_empty() {
        return Err(CliError::Usage("need at least one size and one repetition".into()));
    }
    let docs: Vec<(usize, WorkloadDocument)> =
        opts.sizes.iter().map(|&n| (n, WorkloadDocument::new(build_ghz(n, opts.shots)))).collect();
    let client = client.clone().with_poll_interval(Duration::from_millis(1));
    let mut samples = Vec::with_capacity(2 * opts.repetitions * docs.len());
    for repetition in 0..opts.repetitions {
        for (n, doc) in &docs {
            let t = Instant::now();
            let job = client.create_work(doc, &opts.device_id, Priority::Low)?;
            samples.push(Sample { call: Call::CreateWork, num_qubits: *n, repetition, latency_ms: ms(t) });
            client.wait_until_done(&job, opts.job_timeout)?;
            let t = Instant::now();
            client.results(&job)?;
            samples.push(Sample { call: Call::GetResults, num_qubits: *n, repetition, latency_ms: ms(t) });
        }
    }
    let pick = |call: Call, n: Option<usize>| -> Vec<f64> {
        samples.iter().filter(|s| s.call == call && n.is_none_or(|n| s.num_qubits == n)).map(|s| s.latency_ms).collect()
    };
    let summary = |call, n| summarize(&pick(call, n)).expect("nonempty sample");
    Ok(LatencyReport {
        create_work: summary(Call::CreateWork, None),
        get_results: summary(Call::GetResults, None),
        per_size: opts
            .sizes
            .iter()
            .map(|&n| SizeSummary {
                num_qubits: n,
                create_work: summary(Call::CreateWork, Some(n)),
                get_results: summary(Call::GetResults, Some(n)),
            })
            .collect(),
        samples,
    })
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
