use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mcld(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcld"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("MCLD_SEED")
        .output()
        .expect("run mcld")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["simulate", "--masses", "1,1", "--lambda", "1", "--t", "0.6", "--seed", "7"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("time,rank,mass\n"));
    let events: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("events.json")).unwrap()).unwrap();
    assert!(events.is_array());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("deleted mass"));
}

#[test]
fn simulate_pure_coalescent_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["simulate", "--masses", "1,0.5,0.5", "--lambda", "0", "--t", "2", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("deleted mass Φ(t) = 0.0000000000000000e0"), "{stdout}");
}

#[test]
fn rejects_non_canonical_masses() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["simulate", "--masses", "3,1,-2", "--t", "1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("masses must be nonnegative non-increasing"));
    let o = mcld(&["simulate", "--masses", "1,2", "--t", "1"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn rejects_two_mass_sources_and_bad_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["simulate", "--masses", "1", "--gen", "const:1:3", "--t", "1"], dir.path());
    assert_eq!(code(&o), 2);
    let o = mcld(&["simulate", "--masses", "1", "--grid", "0,1,0.5"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn seed_from_environment_matches_flag() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--gen", "power:0.6:40", "--grid", "0,0.5,1"];
    let mut flag: Vec<&str> = args.to_vec();
    flag.extend(["--seed", "0x2a"]);
    assert_eq!(code(&mcld(&flag, a.path())), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_mcld"))
        .args(args)
        .arg("--out-dir")
        .arg(b.path())
        .env("MCLD_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for f in ["trajectory.csv", "events.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let runs: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (
            vec!["simulate", "--gen", "power:0.6:64", "--grid", "0,0.25,1", "--seed", "9"],
            vec!["trajectory.csv", "events.json"],
        ),
        (
            vec!["truncation", "--gen", "power:0.6:128", "--truncate", "8,32", "--replicas", "4", "--seed", "5"],
            vec!["truncation_report.json"],
        ),
        (
            vec!["feller", "--gen", "power:0.6:256", "--n-list", "16,64", "--replicas", "8", "--seed", "3"],
            vec!["coupling_report.json", "distances.csv"],
        ),
        (
            vec!["fp", "--n-list", "400", "--grid", "0.5,1", "--replicas", "3", "--seed", "11"],
            vec!["fp_samples.csv"],
        ),
    ];
    for (args, files) in runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(code(&mcld(&args, a.path())), 0, "{args:?}");
        let mut with_workers = vec!["--workers", "2"];
        with_workers.extend(&args);
        assert_eq!(code(&mcld(&with_workers, b.path())), 0, "{args:?}");
        for f in files {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn truncation_at_support_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(
        &["truncation", "--masses", "1,0.7,0.4,0.2", "--truncate", "4", "--replicas", "5", "--seed", "2"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("truncation_report.json")).unwrap()).unwrap();
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    for r in reports {
        assert_eq!(r["gap"].as_f64().unwrap(), 0.0);
        assert_eq!(r["distance"].as_f64().unwrap(), 0.0);
        assert!(r["holds"].as_bool().unwrap());
    }
}

#[test]
fn truncation_level_above_support_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["truncation", "--masses", "1,0.5", "--truncate", "3"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn fp_single_run_has_one_row_per_time_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["fp", "--n-list", "1000", "--grid", "0.5,1,1.5", "--top-r", "4", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("fp_samples.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,replica,t,rank,scaled_mass"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 12);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], "1000");
        assert_eq!(row[1], "0");
        assert_eq!(row[3], ((i % 4) + 1).to_string());
    }
}

#[test]
fn fp_config_file_matches_flags() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("fp.json");
    fs::write(
        &cfg,
        r#"{"n":600,"lambda_rescaled":0,"u":0,"t_list":[1],"top_r":3,"replicas":2,"seed":4}"#,
    )
    .unwrap();
    let o = mcld(&["fp", "--config", cfg.to_str().unwrap()], a.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = mcld(
        &["fp", "--n-list", "600", "--lambda", "0", "--u", "0", "--t", "1", "--top-r", "3", "--replicas", "2", "--seed", "4"],
        b.path(),
    );
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(a.path().join("fp_samples.csv")).unwrap(),
        fs::read(b.path().join("fp_samples.csv")).unwrap()
    );
}

#[test]
fn selftest_quick_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["selftest", "--suite", "quick"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn selftest_with_corrupted_clocks_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["selftest", "--suite", "quick", "--corrupt-clocks"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
}

#[test]
fn selftest_full_writes_results_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = mcld(&["selftest", "--suite", "full", "--only", "4"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selftest_results.json")).unwrap()).unwrap();
    assert_eq!(v[0]["id"], 4);
    assert_eq!(v[0]["passed"], true);
    assert!(dir.path().join("criterion_04.json").exists());
}
