use std::path::Path;
use std::process::{Command, Output};

fn nvqutrit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvqutrit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_lines(o: &Output) -> Vec<serde_json::Value> {
    stdout(o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn rdj_ideal_truth_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvqutrit(&["rdj", "--oracle", "all", "--ideal"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_lines(&o);
    let signals: Vec<f64> = rows.iter().map(|r| r["signal"].as_f64().unwrap()).collect();
    for (s, want) in signals.iter().zip([0.0, 0.0, 1.0, 1.0]) {
        assert!((s - want).abs() < 1e-6);
    }
    let csv = std::fs::read_to_string(dir.path().join("rdj.csv")).unwrap();
    assert!(csv.starts_with("oracle,p0,signal,signal_compensated,classification\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn rdj_dephased_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvqutrit(&["rdj", "--dephased", "--compensate"], dir.path());
    assert!(o.status.success());
    let rows = json_lines(&o);
    let s: Vec<f64> = rows.iter().map(|r| r["signal"].as_f64().unwrap()).collect();
    let contrast = 0.5 * (s[2] + s[3]) - 0.5 * (s[0] + s[1]);
    assert!((contrast - 0.596).abs() < 0.01, "{contrast}");
    assert!(rows.iter().all(|r| r["signal_compensated"].is_f64()));
}

#[test]
fn rdj_shots_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = nvqutrit(
        &["rdj", "--oracle", "3", "--shots", "--seed", "7"],
        dir.path(),
    );
    let shots_a = std::fs::read_to_string(dir.path().join("rdj_shots.csv")).unwrap();
    let b = nvqutrit(
        &["rdj", "--oracle", "3", "--shots", "--seed", "7"],
        dir.path(),
    );
    let shots_b = std::fs::read_to_string(dir.path().join("rdj_shots.csv")).unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(shots_a, shots_b);
    assert!(shots_a.starts_with("oracle,seed,counts,normalized\n"));
    let c = nvqutrit(
        &["rdj", "--oracle", "3", "--shots", "--seed", "8"],
        dir.path(),
    );
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn rdj_rejects_unknown_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvqutrit(&["rdj", "--oracle", "5"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown oracle"));
}

#[test]
fn nutation_writes_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    for (ch, rabi) in [("MW1", 7.87e6), ("mw2", 4.26e6)] {
        let o = nvqutrit(
            &["nutation", "--channel", ch, "--out-dir", "out"],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stem = format!("nutation_{}", ch.to_lowercase());
        let csv = std::fs::read_to_string(dir.path().join(format!("out/{stem}.csv"))).unwrap();
        assert!(csv.starts_with("t_s,signal\n"));
        assert_eq!(csv.lines().count(), 201);
        let fit: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("out/{stem}_fit.json"))).unwrap(),
        )
        .unwrap();
        for key in ["y0", "A", "R", "omega", "residual_rms", "converged"] {
            assert!(fit.get(key).is_some(), "missing {key}");
        }
        let f = fit["omega"].as_f64().unwrap() / (2.0 * std::f64::consts::PI);
        assert!((f - rabi).abs() < 1e4, "{ch}: {f}");
    }
}

#[test]
fn nutation_needs_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvqutrit(
        &["nutation", "--channel", "mw1", "--n-points", "1"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("≥ 2 points required"));
    let o = nvqutrit(&["nutation", "--channel", "mw3"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn run_executes_sequence_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("a.seq"),
        "LASER 5us\nWAIT 5us\nMW1 PI\nREADOUT 300ns\n",
    )
    .unwrap();
    let o = nvqutrit(&["run", "--ideal", "a.seq"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let state = &json_lines(&o)[0];
    assert!(state["populations"][1].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(state["name"], "a");

    std::fs::write(dir.path().join("empty.seq"), "").unwrap();
    let o = nvqutrit(&["run", "empty.seq"], dir.path());
    let pops: Vec<f64> = json_lines(&o)[0]["populations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (p, want) in pops.iter().zip([0.05, 0.9, 0.05]) {
        assert!((p - want).abs() < 1e-12);
    }

    std::fs::write(dir.path().join("bad.seq"), "LASER 5us\nWAIT 5 parsecs\n").unwrap();
    let o = nvqutrit(&["run", "bad.seq"], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2, column"), "{err}");
}

#[test]
fn fit_and_fft_read_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t_s,signal\n");
    for k in 0..200 {
        let t = k as f64 * 5e-9;
        let y = 0.5 + 0.5 * (-1e6 * t).exp() * (2.0 * std::f64::consts::PI * 5e6 * t).cos();
        csv.push_str(&format!("{t},{y}\n"));
    }
    std::fs::write(dir.path().join("curve.csv"), csv).unwrap();
    let o = nvqutrit(&["fit", "curve.csv"], dir.path());
    assert!(o.status.success());
    let fit = &json_lines(&o)[0];
    assert!((fit["R"].as_f64().unwrap() - 1e6).abs() < 1.0);
    let o = nvqutrit(&["fft", "curve.csv"], dir.path());
    let f = json_lines(&o)[0]["frequency_hz"].as_f64().unwrap();
    assert!((f - 5e6).abs() < 0.02e6);

    std::fs::write(dir.path().join("wrong.csv"), "time,value\n0,1\n").unwrap();
    let o = nvqutrit(&["fit", "wrong.csv"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn config_defaults_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = nvqutrit(&["config", "--print-defaults"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("d_hz") && text.contains("dephasing_rate_per_s"));
    std::fs::write(dir.path().join("run.toml"), &text).unwrap();
    let o = nvqutrit(&["--config", "run.toml", "config"], dir.path());
    assert_eq!(stdout(&o), text);

    std::fs::write(
        dir.path().join("off.toml"),
        "[mw1]\ncarrier_hz = 2.8e9\nrabi_hz = 7.87e6\ndephasing_rate_per_s = 0.0\n",
    )
    .unwrap();
    let o = nvqutrit(&["--config", "off.toml", "rdj"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("allow_detuning"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = nvqutrit(
        &["nutation", "--channel", "mw1", "--out-dir", "a"],
        dir.path(),
    );
    let b = nvqutrit(
        &["nutation", "--channel", "mw1", "--out-dir", "b"],
        dir.path(),
    );
    assert_eq!(a.stdout, b.stdout);
    for f in ["nutation_mw1.csv", "nutation_mw1_fit.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
}
