use std::path::Path;
use std::process::Command;

fn pipetwin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pipetwin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &std::process::Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_accepts_the_builtin_scenario() {
    let o = pipetwin(&["validate"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("scenario is valid"));
}

#[test]
fn validate_lists_violations_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = pipetwin::ScenarioDocument::published();
    doc.scenario.l2 = 5_000.0; // outside [l1, l3]
    doc.spec.sound_speed = -1.0;
    let path = dir.path().join("bad.json");
    std::fs::write(&path, doc.to_json()).unwrap();
    let o = pipetwin(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).lines().filter(|l| l.starts_with("- ")).count() >= 2,
        "{}",
        stdout(&o)
    );

    let o = pipetwin(&[
        "run",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = pipetwin(&[
        "run",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--dt",
        "1",
        "--horizon",
        "900",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    for f in [
        "table1.csv",
        "table2.csv",
        "table3.csv",
        "fig3_profiles.csv",
        "events.ndjson",
        "journal.ndjson",
    ] {
        let p = out.join(f);
        assert!(
            p.is_file() && std::fs::metadata(&p).unwrap().len() > 0,
            "{f}"
        );
    }
    let events = std::fs::read_to_string(out.join("events.ndjson")).unwrap();
    assert_eq!(events.lines().count(), 4);
}

#[test]
fn tables_verb_writes_the_tables_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = pipetwin(&[
        "tables",
        "--out",
        dir.path().to_str().unwrap(),
        "--offsets",
        "0,60,120",
    ]);
    assert!(o.status.success());
    let t1 = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert!(t1.starts_with("x_km,a0,a60,a120\n0,13.36,"), "{t1}");
    assert!(!Path::new(&dir.path().join("events.ndjson")).exists());
}

#[test]
fn locate_prints_the_bounds() {
    let o = pipetwin(&[
        "locate", "--p-now", "145800", "--p-t1", "133600", "--t", "420", "--t1", "300",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("l1 raw     8809.7 m"), "{s}");
    assert!(s.contains("l3         20000.0 m"), "{s}");
}

#[test]
fn locate_reads_an_inlet_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inlet.csv");
    std::fs::write(
        &path,
        "t_s,pressure_pa\n290,133800\n300,133600\n410,145000\n420,145800\n",
    )
    .unwrap();
    let o = pipetwin(&["locate", "--inlet", path.to_str().unwrap(), "--t1", "300"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("8809.7"));
}

#[test]
fn locate_explains_a_falling_inlet() {
    let o = pipetwin(&["locate", "--p-now", "130000", "--p-t1", "133600"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("not sealed"));
}

#[test]
fn unknown_flags_are_usage_errors() {
    let o = pipetwin(&["run", "--bogus"]);
    assert!(!o.status.success());
}
