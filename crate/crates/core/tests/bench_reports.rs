//! Experiment harness outputs and the command-line front end.

use std::fs;
use std::process::Command;

use uav_wind::bench::report::write_report;
use uav_wind::bench::{compare_schemes, run_experiment, ExperimentConfig, SweepAxis};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.t0 = 30.0;
    cfg.scenario.q_f = [300.0, 500.0, 100.0];
    cfg.scenario.users = vec![[100.0, 450.0], [250.0, 550.0]];
    cfg.scenario.s_mcsaa = 3;
    cfg.experiment.repeats = 3;
    cfg.experiment.workers = 1;
    cfg.experiment.sweep_axis = Some(SweepAxis::EpsQ);
    cfg.experiment.sweep_values = vec![0.0, 60.0];
    cfg.experiment.flight_logs = true;
    cfg
}

#[test]
fn reports_are_reproducible_and_complete() {
    let cfg = small();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut listings = Vec::new();
    for d in &dirs {
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.complete());
        listings.push(write_report(d.path(), &rep, &compare_schemes(&rep)).unwrap());
    }
    assert_eq!(listings[0], listings[1]);
    for f in &listings[0] {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let manifest = fs::read_to_string(dirs[0].path().join("manifest.toml")).unwrap();
    for f in listings[0].iter().filter(|f| *f != "manifest.toml") {
        assert!(manifest.contains(f.as_str()), "{f} missing from manifest");
    }
    // 3 schemes x 2 points x 3 repeats.
    assert_eq!(listings[0].iter().filter(|f| f.starts_with("logs/")).count(), 18);
    let table = toml::from_str::<toml::Table>(&manifest).unwrap();
    let runs = table["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for r in runs {
        r["wind_seed"].as_str().unwrap().parse::<u64>().unwrap();
        r["city_seed"].as_str().unwrap().parse::<u64>().unwrap();
    }
    let back: ExperimentConfig = table["config"].clone().try_into().unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn throughput_is_bandwidth_times_rate() {
    let cfg = small();
    let rep = run_experiment(&cfg).unwrap();
    for r in &rep.records {
        let m = r.outcome.as_ref().unwrap();
        let log = r.log.as_ref().unwrap();
        let want = cfg.channel.b * cfg.scenario.delta * log.min_user_rate(cfg.scenario.users.len());
        assert!((m.throughput_bits - want).abs() <= 1e-9 * want.max(1.0));
        assert!((m.ee - m.r_min / (m.energy / cfg.scenario.delta)).abs() <= 1e-12 * m.ee.max(1e-300));
    }
}

#[test]
fn zero_tube_makes_adaptation_identical_to_offline() {
    let rep = run_experiment(&small()).unwrap();
    let point = 0;
    let off = rep.metrics(point, 1);
    let ob = rep.metrics(point, 2);
    for (a, b) in off.iter().zip(&ob) {
        assert_eq!(a.energy, b.energy);
        assert_eq!(a.r_min, b.r_min);
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uav-wind"))
}

#[test]
fn cli_writes_wind_samples() {
    let d = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["--seed", "4", "--out"])
        .arg(d.path())
        .args(["sample-wind", "--scenarios", "2", "--slots", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(d.path().join("wind_samples.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# uav-wind wind_samples v1"));
    assert_eq!(lines[1], "scenario,slot,v_ref_mps,beta_deg");
    assert_eq!(lines.len(), 2 + 10);
}

#[test]
fn cli_rejects_bad_config_with_code_2() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("bad.toml");
    fs::write(&path, "[wind]\nlambda = -1.0\n").unwrap();
    let out = cli().arg("--config").arg(&path).arg("reduce-check").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    fs::write(&path, "[wind]\nnot_a_key = 1.0\n").unwrap();
    let out = cli().arg("--config").arg(&path).arg("reduce-check").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_reduce_check_reports_small_error() {
    let out = cli().args(["reduce-check", "--states", "200"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let last = text.lines().last().unwrap();
    let err: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(err < 1e-9, "{last}");
}
