#![allow(dead_code)]

use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub const BIN: &str = env!("CARGO_BIN_EXE_conqure");

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// A `conqure serve` child process on a private port and store.
pub struct Server {
    pub child: Child,
    pub port: u16,
    pub config: PathBuf,
    pub store: PathBuf,
}

impl Server {
    /// `devices` is the TOML body after `[[devices]]` tables are expanded by the caller.
    pub fn start(dir: &Path, devices_toml: &str) -> Server {
        let port = free_port();
        let store = dir.join("jobs.log");
        let config = dir.join("conqure.toml");
        std::fs::write(&config, format!("port = {port}\nstore_path = {:?}\n{devices_toml}", store)).unwrap();
        Self::launch(config, store, port)
    }

    /// Starts again on the same config, port and store.
    pub fn restart(&self) -> Server {
        Self::launch(self.config.clone(), self.store.clone(), self.port)
    }

    fn launch(config: PathBuf, store: PathBuf, port: u16) -> Server {
        let child = Command::new(BIN)
            .args(["serve", "--config"])
            .arg(&config)
            .env("CONQURE_LOG", "warn")
            .env_remove("CONQURE_PORT")
            .env_remove("CONQURE_STORE")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let server = Server { child, port, config, store };
        server.wait_ready();
        server
    }

    fn wait_ready(&self) {
        let deadline = Instant::now() + Duration::from_secs(20);
        while Instant::now() < deadline {
            if TcpStream::connect(("127.0.0.1", self.port)).is_ok() {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        panic!("server on port {} did not come up", self.port);
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn cli(&self, args: &[&str]) -> Output {
        run_cli(&[&["--url", &self.url()], args].concat(), None)
    }

    pub fn signal(&mut self, sig: &str) {
        let status = Command::new("kill").arg(format!("-{sig}")).arg(self.child.id().to_string()).status().unwrap();
        assert!(status.success());
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn run_cli(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .env_remove("CONQURE_URL")
        .env_remove("CONQURE_CONFIG")
        .env_remove("CONQURE_TOKEN")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(text) = stdin {
        pipe.write_all(text.as_bytes()).unwrap();
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn ghz_file(dir: &Path, n: usize, shots: u64) -> PathBuf {
    let path = dir.join(format!("ghz{n}.json"));
    let doc = conqure_core::WorkloadDocument::new(conqure_core::build_ghz(n, shots));
    std::fs::write(&path, doc.to_json()).unwrap();
    path
}
