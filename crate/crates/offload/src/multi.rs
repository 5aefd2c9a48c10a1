//! Thread-per-QPU execution of many tasks.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};

use conqure_core::CountsMap;

use crate::executor::{OffloadError, QpuPool};
use crate::task::QuantumTask;

/// Runs every task on its `device_index`. Tasks on distinct indices run
/// concurrently; tasks sharing an index run one after another in input
/// order. Results come back in input order and one task's failure does
/// not affect the others.
pub fn run_multi_offload(tasks: &mut [QuantumTask], pool: &QpuPool) -> Vec<Result<CountsMap, OffloadError>> {
    let mut results: Vec<Option<Result<CountsMap, OffloadError>>> = (0..tasks.len()).map(|_| None).collect();
    let mut lanes: BTreeMap<usize, Vec<(usize, &mut QuantumTask)>> = BTreeMap::new();
    for (i, task) in tasks.iter_mut().enumerate() {
        let index = task.device_index();
        if index >= pool.len() {
            results[i] = Some(Err(OffloadError::NoSuchDevice { index, qpus: pool.len() }));
        } else {
            lanes.entry(index).or_default().push((i, task));
        }
    }
    let finished: Vec<(usize, Result<CountsMap, OffloadError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = lanes
            .into_iter()
            .map(|(qpu, lane)| {
                scope.spawn(move || {
                    lane.into_iter()
                        .map(|(i, task)| {
                            let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
                                let doc = task.document()?;
                                let counts = pool.execute(qpu, &doc)?;
                                task.set_frequencies(counts.clone());
                                Ok(counts)
                            }))
                            .unwrap_or(Err(OffloadError::Panicked));
                            (i, outcome)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("lane threads catch panics")).collect()
    });
    for (i, r) in finished {
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("every task has a result")).collect()
}
