//! Paced run that streams every bus message to TCP clients and feeds their
//! commands back into the simulation.

use std::net::SocketAddr;
use std::sync::mpsc::channel;
use std::thread;
use std::time::{Duration, Instant};

use super::{write_artifacts, RunConfig, RunReport, Simulation};
use crate::error::Result;
use crate::telemetry::{StreamServer, DEFAULT_CLIENT_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub run: RunConfig,
    /// 0 picks a free port.
    pub port: u16,
    /// Wall-clock pause after each tick.
    pub tick: Duration,
    /// Per-client queue budget, lines.
    pub budget: usize,
    /// Clients to wait for before the first tick.
    pub wait_for_clients: usize,
    /// Upper bound on that wait.
    pub wait_timeout: Duration,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            port: 7878,
            tick: Duration::from_millis(100),
            budget: DEFAULT_CLIENT_BUDGET,
            wait_for_clients: 0,
            wait_timeout: Duration::from_secs(30),
        }
    }
}

/// Runs to the horizon while serving the stream. `ready` gets the bound
/// address before any client is awaited.
pub fn serve(
    config: &ServeConfig,
    ready: impl FnOnce(SocketAddr),
) -> Result<(Simulation, RunReport)> {
    let doc = config.run.load_scenario()?;
    let mut sim = Simulation::new(&doc, config.run.clone())?;
    let (tx, rx) = channel();
    let known = sim.registry().ids().into_iter().collect();
    let server = StreamServer::bind(config.port, known, tx, config.budget)?;
    ready(server.local_addr());

    let start = Instant::now();
    while server.client_count() < config.wait_for_clients && start.elapsed() < config.wait_timeout {
        thread::sleep(Duration::from_millis(5));
    }

    while !sim.finished() {
        let pending = rx.try_iter().collect();
        sim.step(pending)?;
        for msg in sim.take_outbox() {
            server.broadcast(&msg);
        }
        if !config.tick.is_zero() {
            thread::sleep(config.tick);
        }
    }
    server.shutdown();

    let report = sim.report();
    if let Some(out) = &config.run.out {
        write_artifacts(&sim, &report, out)?;
    }
    Ok((sim, report))
}
