use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cavity_array::montecarlo::debye_waller;

const LAMBDA: f64 = 780.0;

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cavity-array"));
    cmd.env_remove("CAVITY_ARRAY_CONFIG");
    cmd
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path
}

/// Header and rows of a CSV output, comment lines skipped.
fn table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn csv_of(config: &Path, command: &str, extra: &[&str]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut args = vec![command, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    table(&String::from_utf8(out.stdout).unwrap())
}

#[test]
fn fringe_limits() {
    let dir = tempfile::tempdir().unwrap();
    let exact = write_config(
        dir.path(),
        "exact.json",
        r#"{"array": {"sigma_nm": 0}, "mc": {"n_samples": 100}, "sweep": {"start": 780, "stop": 1170, "step": 390}}"#,
    );
    let (h, rows) = csv_of(&exact, "two-atom-fringe", &["--two-level", "--bare-cavity"]);
    let (ratio, overlay) = (column(&h, "ratio_mean"), column(&h, "analytic_sigma0"));
    assert!((rows[0][ratio] - 4.0).abs() < 1e-12 && (rows[0][overlay] - 4.0).abs() < 1e-12);
    assert!(rows[1][ratio].abs() < 1e-12 && rows[1][overlay].abs() < 1e-12);

    let thermal = write_config(
        dir.path(),
        "thermal.json",
        r#"{"mc": {"n_samples": 20000}, "sweep": {"start": 780, "stop": 780, "step": 1}}"#,
    );
    let (h, rows) = csv_of(&thermal, "two-atom-fringe", &["--two-level", "--bare-cavity"]);
    let d = debye_waller(100.0, 2.0 * std::f64::consts::PI / LAMBDA);
    let (mean, stderr) = (rows[0][column(&h, "ratio_mean")], rows[0][column(&h, "ratio_stderr")]);
    assert!((mean - 2.0 * (1.0 + d)).abs() < 3.0 * stderr, "{mean} ± {stderr}");
    assert!((rows[0][column(&h, "analytic")] - 2.0 * (1.0 + d)).abs() < 1e-12);
}

#[test]
fn offset_sweep_examples() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"mc": {"n_samples": 2000}, "sweep": {"start": 0, "stop": 780, "step": 97.5, "atom_numbers": [1, 3, 8]}}"#,
    );
    let (h, rows) = csv_of(&config, "offset-sweep", &["--two-level", "--bare-cavity"]);
    let (spacing, n, offset, analytic) =
        (column(&h, "spacing_nm"), column(&h, "n_atoms"), column(&h, "offset_nm"), column(&h, "analytic"));
    let d = debye_waller(100.0, 2.0 * std::f64::consts::PI / LAMBDA);
    let at = |s: f64, atoms: f64, x: f64| {
        rows.iter().find(|r| r[spacing] == s && r[n] == atoms && (r[offset] - x).abs() < 1e-9).unwrap()
    };
    // antinode, integer spacing: 1 + (N − 1) D
    assert!((at(4.0 * LAMBDA, 3.0, 0.0)[analytic] - (3.0 - 2.0 * (1.0 - d))).abs() < 1e-12);
    // node: N-independent
    for s in [4.0 * LAMBDA, 3.5 * LAMBDA] {
        let reference = at(s, 1.0, LAMBDA / 4.0)[analytic];
        for atoms in [3.0, 8.0] {
            assert!((at(s, atoms, LAMBDA / 4.0)[analytic] / reference - 1.0).abs() < 1e-9);
        }
    }

    let exact = write_config(
        dir.path(),
        "exact.json",
        r#"{"array": {"sigma_nm": 0}, "mc": {"n_samples": 100}, "sweep": {"start": 0, "stop": 780, "step": 48.75, "atom_numbers": [3]}}"#,
    );
    let (h, rows) = csv_of(&exact, "offset-sweep", &["--two-level", "--bare-cavity"]);
    let (offset, ratio, s) = (column(&h, "offset_nm"), column(&h, "ratio_mean"), column(&h, "spacing_nm"));
    let scale = rows.iter().map(|r| r[ratio].abs()).fold(0.0, f64::max);
    for r in &rows {
        if r[offset] + LAMBDA / 2.0 > LAMBDA + 1e-9 {
            continue;
        }
        let shifted = rows
            .iter()
            .find(|q| q[s] == r[s] && (q[offset] - r[offset] - LAMBDA / 2.0).abs() < 1e-9)
            .unwrap();
        assert!((shifted[ratio] - r[ratio]).abs() <= 1e-3 * scale, "{r:?} vs {shifted:?}");
    }
}

#[test]
fn scaling_examples() {
    let dir = tempfile::tempdir().unwrap();
    let exact = write_config(dir.path(), "exact.json", r#"{"array": {"sigma_nm": 0}, "mc": {"n_samples": 100}}"#);
    let (h, rows) = csv_of(&exact, "scaling", &["--two-level", "--bare-cavity"]);
    let (dca, spacing, n, ratio) =
        (column(&h, "delta_ca_MHz"), column(&h, "spacing_nm"), column(&h, "n_atoms"), column(&h, "ratio_mean"));
    for r in &rows {
        let expected = if r[spacing] == 5.0 * LAMBDA { r[n] * r[n] } else { r[n] % 2.0 };
        assert!((r[ratio] - expected).abs() < 1e-9 * expected.max(1.0), "{r:?}");
    }
    assert_eq!(rows.len(), 2 * 2 * 8);

    // thermal spread, full model, at the emission peak
    let thermal = write_config(dir.path(), "thermal.json", r#"{"mc": {"n_samples": 4000}}"#);
    let (h, rows) = csv_of(&thermal, "scaling", &[]);
    let pick = |d: f64| {
        rows.iter()
            .find(|r| r[dca] == d && r[spacing] == 5.0 * LAMBDA && r[n] == 8.0)
            .map(|r| (r[column(&h, "ratio_mean")], r[column(&h, "ratio_stderr")]))
            .unwrap()
    };
    let (near, far) = (pick(-38.0), pick(-507.0));
    assert!(far.0 - near.0 > 3.0 * near.1.hypot(far.1), "-38: {near:?}, -507: {far:?}");
    for r in &rows {
        let (lo, mid, hi) = (r[column(&h, "analytic_lo")], r[column(&h, "analytic")], r[column(&h, "analytic_hi")]);
        assert!(lo <= mid && mid <= hi);
    }
}

#[test]
fn spectrum_fits_embedded_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"array": {"sigma_nm": 0}, "mc": {"n_samples": 100}, "model": {"mode": "two-level"},
            "sweep": {"atom_numbers": [1], "delta_ca_MHz": [-38]}}"#,
    );
    let out = run(&["spectrum", "--config", config.to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let fit = &doc["data"]["fits"][0]["fit"];
    assert!((fit["center_MHz"].as_f64().unwrap() + 0.2529).abs() < 0.0025);
    assert!((fit["hwhm_MHz"].as_f64().unwrap() - 0.5500).abs() < 0.0055);
    assert_eq!(doc["data"]["rows"].as_array().unwrap().len(), 41);
    assert_eq!(doc["provenance"]["command"], "spectrum");

    let out = run(&["spectrum", "--config", config.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# fits: "));
    let (h, _) = table(&text);
    assert_eq!(h, ["delta_ca_MHz", "spacing_nm", "n_atoms", "delta_pc_MHz", "n_mean", "n_stderr"]);
}

#[test]
fn polarization_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"mc": {"n_samples": 500}}"#);
    let (h, rows) = csv_of(&config, "polarization", &[]);
    assert_eq!(&h[3..], ["theta_deg", "T", "T_stderr"]);
    // (−38, −507) × (single atom, constructive, destructive) × 13 angles
    assert_eq!(rows.len(), 2 * 3 * 13);
    let t = column(&h, "T");
    for case in rows.chunks(13) {
        assert!((case[0][t] + case[6][t] - 1.0).abs() < 1e-12);
        assert!((case[0][t] - case[12][t]).abs() < 1e-12);
    }
}

#[test]
fn output_round_trips_through_embedded_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{"cavity": {"delta_ca_MHz": -38}, "array": {"n_atoms": 3, "spacing_nm": "5.5λ"},
            "mc": {"n_samples": 300, "seed": 5, "mF": [1, 0, 0, 0, 1]}, "sweep": {"atom_numbers": [2, 3]}}"#,
    );
    for format in ["csv", "json"] {
        for command in ["scaling", "offset-sweep"] {
            let first = dir.path().join(format!("first-{command}.{format}"));
            let second = dir.path().join(format!("second-{command}.{format}"));
            let a = ["--config", config.to_str().unwrap(), "--format", format, "--output", first.to_str().unwrap()];
            assert!(run(&[&[command][..], &a].concat()).status.success());
            let b = ["--config", first.to_str().unwrap(), "--output", second.to_str().unwrap()];
            assert!(run(&[&[command][..], &b].concat()).status.success());
            assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap(), "{command} {format}");
        }
    }
}

#[test]
fn config_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "env.json", r#"{"mc": {"seed": 123}, "sweep": {"start": -600, "stop": -450, "step": 50}}"#);
    let out = binary().arg("magic").env("CAVITY_ARRAY_CONFIG", &config).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(r#""seed":123"#));
    let out = binary().args(["magic", "--seed", "9"]).env("CAVITY_ARRAY_CONFIG", &config).output().unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains(r#""seed":9"#));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args).status.code().unwrap();
    let typo = write_config(dir.path(), "typo.json", r#"{"cavity": {"kapa_MHz": 1}}"#);
    assert_eq!(code(&["magic", "--config", typo.to_str().unwrap()]), 2);
    let bad_units = write_config(dir.path(), "units.json", r#"{"array": {"spacing_nm": "5.5 furlongs"}}"#);
    assert_eq!(code(&["magic", "--config", bad_units.to_str().unwrap()]), 2);
    assert_eq!(code(&["magic", "--config", "/nonexistent/config.json"]), 2);
    assert_eq!(code(&["scaling", "--samples", "5"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["magic", "--threads", "0"]), 2);

    // minimum on the edge of the search interval
    let boundary = write_config(dir.path(), "edge.json", r#"{"sweep": {"start": -470, "stop": -440, "step": 1}}"#);
    assert_eq!(code(&["magic", "--config", boundary.to_str().unwrap()]), 3);
    // grid too narrow for the resonance is a configuration problem
    let narrow = write_config(
        dir.path(),
        "narrow.json",
        r#"{"mc": {"n_samples": 100}, "sweep": {"start": -0.1, "stop": 0.1, "step": 0.01}}"#,
    );
    assert_eq!(code(&["spectrum", "--config", narrow.to_str().unwrap()]), 2);
    assert_eq!(code(&["magic"]), 0);
}
