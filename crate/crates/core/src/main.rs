use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use pipetwin::center::{Mode, ReferenceMode};
use pipetwin::localization::LocalizationEstimate;
use pipetwin::sim::{self, write_profiles_csv, write_tables, RunConfig, RunReport, ServeConfig};
use pipetwin::transient::{TransientModel, TABLE_OFFSETS};
use pipetwin::{Error, ScenarioDocument};

#[derive(Parser)]
#[command(
    name = "pipetwin",
    version,
    about = "Parallel gas-pipeline digital twin"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Automatic,
    OperatorConfirm,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Automatic => Mode::Automatic,
            ModeArg::OperatorConfirm => Mode::OperatorConfirm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    DamagedAtClosure,
    UndamagedStationary,
}

impl From<ReferenceArg> for ReferenceMode {
    fn from(r: ReferenceArg) -> Self {
        match r {
            ReferenceArg::DamagedAtClosure => ReferenceMode::DamagedAtClosure,
            ReferenceArg::UndamagedStationary => ReferenceMode::UndamagedStationary,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON; the built-in published case when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Tick length, s.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// End time, s (default t1 + 600).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pressure sensor noise, Pa.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Pairing latency, s.
    #[arg(long, default_value_t = 1.0)]
    latency: f64,
    /// Shut-off valve travel time, s.
    #[arg(long, default_value_t = 0.0)]
    travel: f64,
    #[arg(long, value_enum, default_value_t = ReferenceArg::DamagedAtClosure)]
    reference: ReferenceArg,
}

impl RunArgs {
    fn config(&self, mode: ModeArg, out: Option<PathBuf>) -> RunConfig {
        RunConfig {
            scenario: self.scenario.clone(),
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            mode: mode.into(),
            reference: self.reference.into(),
            out,
            noise_sigma: self.noise,
            pairing_latency: self.latency,
            travel_time: self.travel,
            offsets: TABLE_OFFSETS.to_vec(),
        }
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Check a scenario file and list every violated rule.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Simulate to the horizon and write all artifacts.
    Run {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Automatic)]
        mode: ModeArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the three section tables, their comparisons and the profiles.
    Tables {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Offsets after t1, s.
        #[arg(long, value_delimiter = ',')]
        offsets: Option<Vec<f64>>,
    },
    /// Estimate the leak-section bounds from two inlet readings.
    Locate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// CSV `t_s,pressure_pa` of inlet readings.
        #[arg(long, conflicts_with_all = ["p_now", "p_t1"])]
        inlet: Option<PathBuf>,
        /// Inlet pressure at `t`, Pa.
        #[arg(long, requires = "p_t1")]
        p_now: Option<f64>,
        /// Inlet pressure at `t1`, Pa.
        #[arg(long, requires = "p_now")]
        p_t1: Option<f64>,
        /// Reading time, s (default t1 + 120, or the last CSV sample).
        #[arg(long)]
        t: Option<f64>,
        /// Closure time, s (default from the scenario).
        #[arg(long)]
        t1: Option<f64>,
    },
    /// Paced run streaming every bus message as NDJSON over TCP.
    Serve {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::OperatorConfirm)]
        mode: ModeArg,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Wall-clock pause per tick, ms.
        #[arg(long, default_value_t = 100)]
        tick_ms: u64,
        /// Clients to wait for before the first tick.
        #[arg(long, default_value_t = 0)]
        wait_clients: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> pipetwin::Result<ScenarioDocument> {
    match path {
        Some(p) => ScenarioDocument::load(p),
        None => Ok(ScenarioDocument::published()),
    }
}

fn print_report(report: &RunReport) {
    println!("phase      {:?}", report.phase);
    println!("t1_hat     {:?}", report.t1_hat);
    println!("t2         {:?}", report.t2);
    if let Some(e) = &report.estimate {
        println!("l1         {:.1} m (raw {:.1})", e.l1_hat, e.l1_raw);
        println!("l3         {:.1} m (raw {:.1})", e.l3_hat, e.l3_raw);
    }
    println!(
        "events     {}  rejections {}  journal {}",
        report.events, report.rejections, report.journal_records
    );
    for c in &report.checks {
        println!(
            "{} {}: {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for d in &report.diagnostics {
        println!("note {d}");
    }
}

fn read_inlet(path: &Path) -> pipetwin::Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> pipetwin::Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad row {:?}", path.display(), rec)))
        };
        out.push((field(0)?, field(1)?));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{} has no samples",
            path.display()
        )));
    }
    Ok(out)
}

fn locate(
    scenario: Option<&Path>,
    inlet: Option<&Path>,
    p_now: Option<f64>,
    p_t1: Option<f64>,
    t: Option<f64>,
    t1: Option<f64>,
) -> pipetwin::Result<()> {
    let doc = load(scenario)?;
    let spec = doc.spec;
    let t1 = t1.unwrap_or(doc.scenario.t1);
    let (p_now, p_t1, t) = match (inlet, p_now, p_t1) {
        (Some(path), _, _) => {
            let series = read_inlet(path)?;
            let before = series.iter().rev().find(|s| s.0 <= t1).ok_or_else(|| {
                Error::InsufficientData(format!("no inlet sample at or before t1 = {t1}"))
            })?;
            let at = match t {
                Some(t) => series.iter().find(|s| s.0 >= t).ok_or_else(|| {
                    Error::InsufficientData(format!("no inlet sample at or after t = {t}"))
                })?,
                None => series.last().expect("non-empty"),
            };
            (at.1, before.1, at.0)
        }
        (None, Some(a), Some(b)) => (a, b, t.unwrap_or(t1 + 120.0)),
        _ => {
            return Err(Error::Config(
                "give --inlet, or both --p-now and --p-t1".into(),
            ));
        }
    };
    let z = p_now - p_t1;
    if z < 0.0 {
        println!("Z = {z:.1} Pa: the inlet fell after the closure, so the upstream section is not sealed");
        println!("and the quadratic has no admissible root. Check t1 and the valve positions.");
        return Err(Error::NegativeRise(z));
    }
    let e = LocalizationEstimate::compute(&spec, p_now, p_t1, t, t1)?;
    println!("t - t1     {:.1} s", e.elapsed);
    println!("Z          {:.1} Pa", e.z);
    println!("Z1         {:.7} Pa·s/m", e.z1);
    println!("l1 raw     {:.1} m", e.l1_raw);
    println!("l1         {:.1} m", e.l1_hat);
    println!("l3         {:.1} m", e.l3_hat);
    println!("residual   {:.3e}", e.residual);
    Ok(())
}

fn tables(scenario: Option<&Path>, out: &Path, offsets: &[f64]) -> pipetwin::Result<()> {
    let doc = load(scenario)?;
    let (spec, sc) = doc.validated()?;
    let model = TransientModel::new(spec, sc)?;
    let (tables, comparisons) = write_tables(&model, offsets, out)?;
    let profiles = out.join("fig3_profiles.csv");
    write_profiles_csv(&model, offsets, BufWriter::new(File::create(&profiles)?))?;
    for p in tables.iter().chain(&comparisons).chain([&profiles]) {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn execute(cli: Cli) -> pipetwin::Result<bool> {
    match cli.verb {
        Verb::Validate { scenario } => {
            let doc = load(scenario.as_deref())?;
            let report = doc.validate();
            print!("{report}");
            if report.is_valid() {
                println!();
            }
            Ok(report.is_valid())
        }
        Verb::Run { args, mode, out } => {
            let (_, report) = sim::run(&args.config(mode, Some(out.clone())))?;
            print_report(&report);
            println!("artifacts in {}", out.display());
            Ok(report.passed())
        }
        Verb::Tables {
            scenario,
            out,
            offsets,
        } => {
            tables(
                scenario.as_deref(),
                &out,
                offsets.as_deref().unwrap_or(&TABLE_OFFSETS),
            )?;
            Ok(true)
        }
        Verb::Locate {
            scenario,
            inlet,
            p_now,
            p_t1,
            t,
            t1,
        } => {
            locate(scenario.as_deref(), inlet.as_deref(), p_now, p_t1, t, t1)?;
            Ok(true)
        }
        Verb::Serve {
            args,
            mode,
            port,
            tick_ms,
            wait_clients,
            out,
        } => {
            let cfg = ServeConfig {
                run: args.config(mode, out),
                port,
                tick: Duration::from_millis(tick_ms),
                wait_for_clients: wait_clients,
                ..ServeConfig::default()
            };
            let (_, report) = sim::serve(&cfg, |addr| {
                println!("listening on {addr}");
                let _ = std::io::stdout().flush();
            })?;
            print_report(&report);
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
