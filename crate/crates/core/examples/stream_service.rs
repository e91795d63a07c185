//! Serves a fast paced run and consumes it with an in-process console that
//! also sends one command line back.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use pipetwin::center::Mode;
use pipetwin::sim::{serve, RunConfig, ServeConfig};

fn main() -> pipetwin::Result<()> {
    let cfg = ServeConfig {
        run: RunConfig {
            mode: Mode::OperatorConfirm,
            horizon: Some(460.0),
            ..RunConfig::default()
        },
        port: 0,
        tick: Duration::from_millis(1),
        wait_for_clients: 1,
        ..ServeConfig::default()
    };
    let (addr_tx, addr_rx) = mpsc::channel();
    let console = thread::spawn(move || -> std::io::Result<(usize, Vec<String>)> {
        let addr = addr_rx.recv().expect("server address");
        let stream = TcpStream::connect(addr)?;
        let mut w = stream.try_clone()?;
        let mut lines = 0;
        let mut shown = Vec::new();
        let mut sent = false;
        for line in BufReader::new(stream).lines() {
            let line = line?;
            lines += 1;
            if line.contains("\"kind\":\"verdict\"") || line.contains("\"kind\":\"error\"") {
                shown.push(line.clone());
                if !sent {
                    writeln!(
                        w,
                        r#"{{"schema_version":"1","kind":"command","time_s":0,"source":"console","payload":{{"action":"open","valve_id":"xv-1","operator_id":"op-7"}}}}"#
                    )?;
                    sent = true;
                }
            }
        }
        Ok((lines, shown))
    });
    let (_, report) = serve(&cfg, |addr| addr_tx.send(addr).expect("console waiting"))?;
    let (lines, shown) = console.join().expect("console thread").expect("console io");
    println!("console got {lines} lines");
    for l in shown {
        println!("{l}");
    }
    println!("final phase {:?}, t2 = {:?}", report.phase, report.t2);
    Ok(())
}
