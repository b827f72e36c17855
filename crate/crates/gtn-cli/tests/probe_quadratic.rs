//! Scratch probe for sweep dynamics; run with --ignored.
mod common;

use gtn_cli::config::ExperimentConfig;
use gtn_cli::experiment::run_experiment;

#[test]
#[ignore]
fn probe_m_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_synth_idx(dir.path(), 700, 99);
    let out = dir.path().join("out");
    let toml = format!(
        r#"
name = "probe"
[dataset]
source = "idx"
train_images = "{}"
train_labels = "{}"
crop_sides = [8, 12, 16, 20, 24, 28]
train_per_class = 256
test_per_class = 128
[qfm]
theta = 1.0
[model]
chi = [16]
seed = 3
[training]
eta = 0.05
epochs = 60
early_stop_delta = 1e-5
[sweep]
axis = "M"
seeds_per_point = 1
pairing = "both"
[fits]
kinds = ["linear", "quadratic"]
[output]
dir = "{}"
"#,
        images.display(),
        labels.display(),
        out.display()
    );
    let cfg = ExperimentConfig::from_toml_str(&toml).unwrap();
    let t0 = std::time::Instant::now();
    let report = run_experiment(&cfg, &out).unwrap();
    println!("elapsed: {:?}", t0.elapsed());
    for f in &report.fit_gate {
        println!("{}: r2={:.5}", f.fit_file, f.r_squared);
    }
    for name in report.curve_files.keys() {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        println!("== {name}\n{text}");
    }
    for entry in &report.fit_plan {
        let text = std::fs::read_to_string(out.join(&entry.fit_file)).unwrap();
        println!("== {}\n{}", entry.fit_file, text);
    }
}
