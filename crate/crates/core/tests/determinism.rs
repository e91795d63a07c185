//! Same inputs, same bytes.

use pipetwin::sim::{run, RunConfig};

fn artifacts(seed: u64, noise: f64) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        seed,
        noise_sigma: noise,
        out: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    };
    run(&cfg).unwrap();
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    assert_eq!(artifacts(11, 30.0), artifacts(11, 30.0));
}

#[test]
fn the_seed_only_touches_noisy_outputs() {
    let a = artifacts(1, 30.0);
    let b = artifacts(2, 30.0);
    let get = |v: &[(String, Vec<u8>)], n: &str| v.iter().find(|f| f.0 == n).unwrap().1.clone();
    assert_ne!(get(&a, "telemetry.ndjson"), get(&b, "telemetry.ndjson"));
    for f in [
        "table1.csv",
        "table2.csv",
        "table3.csv",
        "fig3_profiles.csv",
    ] {
        assert_eq!(get(&a, f), get(&b, f), "{f}");
    }
}

#[test]
fn noisy_runs_still_activate() {
    for seed in 0..5 {
        let (_, report) = run(&RunConfig {
            seed,
            noise_sigma: 50.0,
            ..RunConfig::default()
        })
        .unwrap();
        assert!(report.passed(), "seed {seed}: {:#?}", report.checks);
    }
}
