//! End-to-end runner behavior: degenerate sweeps, the binarized orthogonal
//! toy, determinism, and bundle verification.

mod common;

use std::path::Path;

use gtn_cli::config::ExperimentConfig;
use gtn_cli::experiment::{parse_curve_csv, run_experiment};
use gtn_cli::replay::replay;

fn toy_binary_csv(dir: &Path) -> std::path::PathBuf {
    // Two classes of distinct 9-bit patterns: class a = low-weight patterns,
    // class b = their complements, 24 rows per class.
    let mut text = String::from("b0,b1,b2,b3,b4,b5,b6,b7,b8,label\n");
    for i in 0..24u16 {
        let mut bits = [0u8; 9];
        for (j, b) in bits.iter_mut().enumerate().take(5) {
            *b = ((i >> j) & 1) as u8;
        }
        bits[5 + (i as usize % 4)] = 1;
        let row: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
        text.push_str(&format!("{},a\n", row.join(",")));
        let inv: Vec<String> = bits.iter().map(|b| (1 - b).to_string()).collect();
        text.push_str(&format!("{},b\n", inv.join(",")));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn toy_config(csv: &Path, out: &Path, eta: f64, epochs: usize, chi: &str) -> ExperimentConfig {
    let toml = format!(
        r#"
name = "toy-binary"
[dataset]
source = "csv"
path = "{}"
feature_columns = ["b0","b1","b2","b3","b4","b5","b6","b7","b8"]
label_column = "label"
normalization = "none"
test_fraction = 0.5
train_per_class = 8
test_per_class = 4
split_seed = 11
[qfm]
theta = 1.0
[model]
chi = {chi}
seed = 5
[training]
eta = {eta}
epochs = {epochs}
early_stop_delta = 0.0
[sweep]
axis = "chi"
seeds_per_point = 1
pairing = "both"
[fits]
kinds = ["log"]
[output]
dir = "{}"
"#,
        csv.display(),
        out.display()
    );
    ExperimentConfig::from_toml_str(&toml).unwrap()
}

#[test]
fn degenerate_single_point_sweep_refuses_fits_and_skips_training_at_zero_eta() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());

    let out1 = dir.path().join("one");
    let report = run_experiment(&toy_config(&csv, &out1, 0.0, 1, "[4]"), &out1).unwrap();
    assert!(report.fit_plan.is_empty());
    assert!(!report.fits_refused.is_empty());
    assert!(report.fits_refused[0].reason.contains("at least 2"));
    assert!(out1.join("curves/n8_train_intra.csv").exists());

    // eta = 0 means more epochs change nothing: identical curve bytes.
    let out2 = dir.path().join("two");
    run_experiment(&toy_config(&csv, &out2, 0.0, 30, "[4]"), &out2).unwrap();
    let a = std::fs::read(out1.join("curves/n8_train_intra.csv")).unwrap();
    let b = std::fs::read(out2.join("curves/n8_train_intra.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn binarized_toy_reaches_ln_n_intra_and_diverges_inter() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());
    let out = dir.path().join("out");
    let cfg = toy_config(&csv, &out, 0.1, 300, "[8]");
    run_experiment(&cfg, &out).unwrap();

    let intra = parse_curve_csv(&out.join("curves/n8_train_intra.csv")).unwrap();
    let ln8 = 8.0_f64.ln();
    for row in &intra {
        assert!(
            (row.nll - ln8).abs() < 0.05,
            "class {} train NLL {} vs ln 8 = {ln8}",
            row.class,
            row.nll
        );
    }
    let inter = parse_curve_csv(&out.join("curves/n8_train_inter.csv")).unwrap();
    for (i, row) in inter.iter().enumerate() {
        assert!(
            row.nll > intra[i].nll,
            "inter {} not above intra {}",
            row.nll,
            intra[i].nll
        );
    }
}

#[test]
fn reruns_are_byte_identical_and_replay_flags_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let cfg1 = toy_config(&csv, &out1, 0.05, 12, "[2, 4]");
    let cfg2 = toy_config(&csv, &out2, 0.05, 12, "[2, 4]");
    run_experiment(&cfg1, &out1).unwrap();
    run_experiment(&cfg2, &out2).unwrap();

    for name in [
        "curves/n8_train_intra.csv",
        "curves/n8_train_inter.csv",
        "curves/n8_test_intra.csv",
        "curves/n8_test_inter.csv",
    ] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // Untouched bundle verifies clean.
    let verdict = replay(&out1).unwrap();
    assert!(verdict.ok, "issues: {:?}", verdict.issues);
    assert!(verdict.warnings.is_empty());
    assert!(verdict.fits_checked > 0);

    // Edit one CSV cell: the report names the file and the data row.
    let target = out1.join("curves/n8_train_intra.csv");
    let text = std::fs::read_to_string(&target).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[2].split(',').map(String::from).collect();
    fields[4] = "9.99".into();
    lines[2] = fields.join(",");
    std::fs::write(&target, lines.join("\n") + "\n").unwrap();
    let verdict = replay(&out1).unwrap();
    assert!(!verdict.ok);
    assert!(
        verdict
            .issues
            .iter()
            .any(|i| i.contains("n8_train_intra.csv") && i.contains("row 2")),
        "issues: {:?}",
        verdict.issues
    );
}

#[test]
fn replay_warns_on_version_drift_but_still_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());
    let out = dir.path().join("out");
    let cfg = toy_config(&csv, &out, 0.05, 8, "[2, 4]");
    run_experiment(&cfg, &out).unwrap();

    let report_path = out.join("report.json");
    let text = std::fs::read_to_string(&report_path).unwrap();
    let drifted = text.replacen("\"bundle_version\": 1", "\"bundle_version\": 0", 1);
    assert_ne!(text, drifted);
    std::fs::write(&report_path, drifted).unwrap();

    let verdict = replay(&out).unwrap();
    assert!(verdict.ok, "issues: {:?}", verdict.issues);
    assert_eq!(verdict.warnings.len(), 1);
    assert!(verdict.warnings[0].contains("version drift"));
    assert!(verdict.fits_checked > 0);
}

#[test]
fn replay_flags_config_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());
    let out = dir.path().join("out");
    let cfg = toy_config(&csv, &out, 0.05, 4, "[2]");
    run_experiment(&cfg, &out).unwrap();

    let report_path = out.join("report.json");
    let text = std::fs::read_to_string(&report_path).unwrap();
    let tampered = text.replacen("\"eta\": 0.05", "\"eta\": 0.5", 1);
    assert_ne!(text, tampered);
    std::fs::write(&report_path, tampered).unwrap();

    let verdict = replay(&out).unwrap();
    assert!(verdict
        .issues
        .iter()
        .any(|i| i.contains("config hash mismatch")));
}

#[test]
fn cli_binary_runs_replays_and_fits() {
    let dir = tempfile::tempdir().unwrap();
    let csv = toy_binary_csv(dir.path());
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("cfg.toml");
    // Reuse the TOML produced by toy_config by serializing it back.
    let cfg = toy_config(&csv, &out, 0.05, 8, "[2, 4]");
    std::fs::write(&cfg_path, toml::to_string(&cfg).unwrap()).unwrap();

    let gtn = env!("CARGO_BIN_EXE_gtn");
    let status = std::process::Command::new(gtn)
        .args(["run", "--config"])
        .arg(&cfg_path)
        .args(["--workers", "2"])
        .status()
        .unwrap();
    assert!(status.success());

    let status = std::process::Command::new(gtn)
        .arg("replay")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let output = std::process::Command::new(gtn)
        .args(["fit", "--kind", "log", "--curves"])
        .arg(out.join("curves/n8_train_intra.csv"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(fit["kind"], "log");
    assert!(fit["coefficients"]["p"].is_number());
}
