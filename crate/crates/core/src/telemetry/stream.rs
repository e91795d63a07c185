//! NDJSON stream service for external consoles.
//!
//! Every connected client gets each broadcast message as one line. Lines a
//! client sends are validated as `command` messages for a known valve and
//! forwarded to the command queue; anything else earns an error reply and
//! the connection stays open. Each client has a bounded outgoing queue;
//! a client that lets it fill up is disconnected, so broadcasting never
//! blocks the caller.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::message::{ErrorReply, MessageKind, TelemetryMessage};
use crate::error::Result;

/// Default per-client queue budget, lines.
pub const DEFAULT_CLIENT_BUDGET: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientEvent {
    Connected { client: u64, peer: String },
    Disconnected { client: u64, reason: String },
}

/// `None` asks the writer to flush and close.
type Line = Option<String>;

/// A client that cannot take a line for this long is dropped.
const WRITE_TIMEOUT: Duration = Duration::from_secs(5);

struct Client {
    id: u64,
    tx: SyncSender<Line>,
    stream: TcpStream,
    writer: JoinHandle<()>,
}

struct Shared {
    clients: Mutex<Vec<Client>>,
    events: Mutex<Vec<ClientEvent>>,
    stop: AtomicBool,
    next_id: AtomicU64,
}

impl Shared {
    fn note(&self, ev: ClientEvent) {
        self.events.lock().expect("event log lock").push(ev);
    }
}

/// Handle of a running stream service.
pub struct StreamServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    acceptor: Option<JoinHandle<()>>,
}

impl StreamServer {
    /// Binds `127.0.0.1:port` (0 picks a free port). Valid client commands
    /// are sent to `commands`.
    pub fn bind(
        port: u16,
        known_valves: BTreeSet<String>,
        commands: Sender<TelemetryMessage>,
        budget: usize,
    ) -> Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            events: Mutex::new(Vec::new()),
            stop: AtomicBool::new(false),
            next_id: AtomicU64::new(1),
        });
        let known = Arc::new(known_valves);
        let sh = Arc::clone(&shared);
        let acceptor = thread::spawn(move || {
            while !sh.stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        if let Err(e) =
                            accept_client(&sh, stream, peer, &known, &commands, budget.max(1))
                        {
                            sh.note(ClientEvent::Disconnected {
                                client: 0,
                                reason: e.to_string(),
                            });
                        }
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => thread::sleep(Duration::from_millis(5)),
                }
            }
        });
        Ok(Self {
            addr,
            shared,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.lock().expect("client lock").len()
    }

    /// Connection events so far.
    pub fn events(&self) -> Vec<ClientEvent> {
        self.shared.events.lock().expect("event log lock").clone()
    }

    /// Queues `msg` for every client without blocking.
    pub fn broadcast(&self, msg: &TelemetryMessage) {
        let line = msg.to_line();
        let mut clients = self.shared.clients.lock().expect("client lock");
        let mut dropped = Vec::new();
        clients.retain(|c| match c.tx.try_send(Some(line.clone())) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                let _ = c.stream.shutdown(Shutdown::Both);
                dropped.push((c.id, "backpressure budget exceeded"));
                false
            }
            Err(TrySendError::Disconnected(_)) => {
                dropped.push((c.id, "client gone"));
                false
            }
        });
        drop(clients);
        for (client, reason) in dropped {
            self.shared.note(ClientEvent::Disconnected {
                client,
                reason: reason.into(),
            });
        }
    }

    /// Stops accepting, lets every client receive what is already queued,
    /// then closes the connections.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        let clients: Vec<Client> = self
            .shared
            .clients
            .lock()
            .expect("client lock")
            .drain(..)
            .collect();
        for c in clients {
            if c.tx.try_send(None).is_ok() {
                let _ = c.writer.join();
            }
            let _ = c.stream.shutdown(Shutdown::Both);
        }
    }
}

impl Drop for StreamServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_client(
    shared: &Arc<Shared>,
    stream: TcpStream,
    peer: SocketAddr,
    known: &Arc<BTreeSet<String>>,
    commands: &Sender<TelemetryMessage>,
    budget: usize,
) -> Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_write_timeout(Some(WRITE_TIMEOUT))?;
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let (tx, rx) = sync_channel::<Line>(budget);

    let mut out = stream.try_clone()?;
    let writer = thread::spawn(move || {
        while let Ok(Some(line)) = rx.recv() {
            if out
                .write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .is_err()
            {
                break;
            }
        }
        let _ = out.flush();
        let _ = out.shutdown(Shutdown::Both);
    });

    let reader = BufReader::new(stream.try_clone()?);
    let replies = tx.clone();
    let known = Arc::clone(known);
    let commands = commands.clone();
    let sh = Arc::clone(shared);
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            match check_client_line(&line, &known) {
                Ok(msg) => {
                    let _ = commands.send(msg);
                }
                Err(e) => {
                    let _ = replies.try_send(Some(ErrorReply::new(e).to_line()));
                }
            }
        }
        sh.note(ClientEvent::Disconnected {
            client: id,
            reason: "client closed".into(),
        });
    });

    shared.clients.lock().expect("client lock").push(Client {
        id,
        tx,
        stream,
        writer,
    });
    shared.note(ClientEvent::Connected {
        client: id,
        peer: peer.to_string(),
    });
    Ok(())
}

/// Validates one client line as a command for a known valve.
pub fn check_client_line(
    line: &str,
    known_valves: &BTreeSet<String>,
) -> std::result::Result<TelemetryMessage, String> {
    let msg = TelemetryMessage::parse_line(line).map_err(|e| e.to_string())?;
    if msg.kind != MessageKind::Command {
        return Err(format!(
            "clients may only send command lines, got {:?}",
            msg.kind
        ));
    }
    let cmd = msg.operator_command().map_err(|e| e.to_string())?;
    if !known_valves.contains(&cmd.valve_id) {
        return Err(format!("unknown valve `{}`", cmd.valve_id));
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valves::LineId;
    use std::io::BufRead;
    use std::sync::mpsc::channel;
    use std::time::Instant;

    fn wait_for(mut cond: impl FnMut() -> bool) {
        let start = Instant::now();
        while !cond() {
            assert!(start.elapsed() < Duration::from_secs(5), "timed out");
            thread::sleep(Duration::from_millis(5));
        }
    }

    fn known() -> BTreeSet<String> {
        ["xv-1".to_string(), "xv-2".to_string()].into()
    }

    #[test]
    fn unknown_valves_are_refused_offline() {
        let ok = r#"{"schema_version":"1","kind":"command","time_s":0,"source":"c","payload":{"action":"open","valve_id":"xv-1","operator_id":"op"}}"#;
        assert!(check_client_line(ok, &known()).is_ok());
        let bad = ok.replace("xv-1", "xv-9");
        assert!(check_client_line(&bad, &known())
            .unwrap_err()
            .contains("unknown valve"));
    }

    #[test]
    fn client_receives_lines_and_error_replies() {
        let (tx, rx) = channel();
        let server = StreamServer::bind(0, known(), tx, 64).unwrap();
        let stream = TcpStream::connect(server.local_addr()).unwrap();
        stream
            .set_read_timeout(Some(Duration::from_secs(5)))
            .unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        wait_for(|| server.client_count() == 1);

        server.broadcast(&TelemetryMessage::pressure_sample(
            "pt-1-0",
            LineId::Line1,
            0.0,
            1.0,
            1e5,
        ));
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        assert!(line.contains("\"kind\":\"pressure_sample\""));

        let mut w = stream.try_clone().unwrap();
        writeln!(w, "garbage").unwrap();
        line.clear();
        reader.read_line(&mut line).unwrap();
        assert!(line.contains("\"kind\":\"error\""), "{line}");

        writeln!(w, r#"{{"schema_version":"1","kind":"command","time_s":0,"source":"c","payload":{{"action":"open","valve_id":"xv-2","operator_id":"op"}}}}"#).unwrap();
        let cmd = rx.recv_timeout(Duration::from_secs(5)).unwrap();
        assert_eq!(cmd.operator_command().unwrap().valve_id, "xv-2");
        server.shutdown();
    }

    #[test]
    fn stalled_clients_are_disconnected() {
        let (tx, _rx) = channel();
        let server = StreamServer::bind(0, known(), tx, 2).unwrap();
        let _idle = TcpStream::connect(server.local_addr()).unwrap();
        wait_for(|| server.client_count() == 1);
        // large lines fill the socket buffer, then the 2-line queue
        let mut big = TelemetryMessage::journal("center", 0.0, serde_json::json!({}));
        big.payload = serde_json::json!({ "pad": "x".repeat(64 * 1024) });
        let start = Instant::now();
        while server.client_count() > 0 {
            server.broadcast(&big);
            assert!(
                start.elapsed() < Duration::from_secs(10),
                "never disconnected"
            );
        }
        assert!(server.events().iter().any(
            |e| matches!(e, ClientEvent::Disconnected { reason, .. } if reason.contains("budget"))
        ));
    }
}
