//! Device-side executor: reads one task document line on stdin, writes one
//! counts line on stdout.

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

#[derive(Parser)]
#[command(name = "conqure-exec", version, about = "Run one offloaded quantum task from stdin")]
struct Args {
    /// Append the received mapped-in arrays (values and IEEE-754 bits) to FILE.
    #[arg(long, value_name = "FILE")]
    tap: Option<PathBuf>,
    /// Minimum wall time of the execution, emulating QPU occupancy.
    #[arg(long, value_name = "MS", default_value_t = 0)]
    device_time_ms: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    match conqure_offload::serve_pipe(stdin, stdout, Duration::from_millis(args.device_time_ms), args.tap.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conqure-exec: {e}");
            ExitCode::FAILURE
        }
    }
}
