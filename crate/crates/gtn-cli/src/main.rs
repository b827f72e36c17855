//! `gtn`: train MPS generative tensor networks over config-driven sweeps,
//! fit NLL scaling laws, and verify result bundles.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtn_cli::{config, experiment, replay};
use gtn_core::fit::{Pairing, Split};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "gtn", version, about = "Generative tensor network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel sweep points (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Overrides the config's `model.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-derive fits from a result bundle and flag tampering or drift.
    Replay {
        /// The bundle directory written by `run`.
        dir: PathBuf,
    },
    /// Fit scaling laws over an existing curve CSV.
    Fit {
        #[arg(long)]
        curves: PathBuf,
        /// linear, quadratic, or log.
        #[arg(long)]
        kind: String,
        /// Write fit JSONs here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> gtn_core::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            if workers > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global();
            }
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.model.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let report = experiment::run_experiment(&cfg, &out_dir)?;
            println!(
                "wrote {} curve files, {} fits ({} refused) to {}",
                report.curve_files.len(),
                report.fit_plan.len(),
                report.fits_refused.len(),
                out_dir.display()
            );
            for refusal in &report.fits_refused {
                println!(
                    "  fit refused for {} ({}): {}",
                    refusal.curve_file, refusal.kind, refusal.reason
                );
            }
            for gate in &report.fit_gate {
                println!(
                    "  {}: R^2 = {:.6} -> law {}",
                    gate.fit_file,
                    gate.r_squared,
                    if gate.holds { "holds" } else { "does not hold" }
                );
            }
            for d in &report.divergence {
                match d.report.first_flagged {
                    Some(key) => println!(
                        "  divergence [{} {}]: first flagged at chi = {key}",
                        d.pairing, d.kind
                    ),
                    None => println!("  divergence [{} {}]: no flag", d.pairing, d.kind),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { dir } => {
            let report = replay::replay(&dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Fit { curves, kind, out } => {
            let rows = experiment::parse_curve_csv(&curves)?;
            let mut groups: Vec<(Split, Pairing)> = Vec::new();
            for r in &rows {
                if !groups.contains(&(r.split, r.pairing)) {
                    groups.push((r.split, r.pairing));
                }
            }
            for (split, pairing) in groups {
                let subset: Vec<_> = rows
                    .iter()
                    .filter(|r| r.split == split && r.pairing == pairing)
                    .cloned()
                    .collect();
                let meta_cfg = fit_meta_config(&curves);
                let fit = experiment::fit_curve(&meta_cfg, &subset, None, split, pairing, &kind)?;
                let text = serde_json::to_string_pretty(&fit)? + "\n";
                match &out {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        let stem = curves
                            .file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_else(|| "curves".into());
                        let path = dir.join(format!("{stem}_{split}_{pairing}_{kind}.json"));
                        std::fs::write(&path, text)?;
                        println!("wrote {}", path.display());
                    }
                    None => print!("{text}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Standalone `fit` runs on bare CSVs with no config; supply neutral
/// metadata.
fn fit_meta_config(curves: &std::path::Path) -> ExperimentConfig {
    let name = curves
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "curves".into());
    let text = format!(
        r#"
name = "{name}"
[dataset]
source = "logistic"
r = [3.9]
steps = 2
samples_per_class = 2
train_per_class = 1
test_per_class = 1
[qfm]
theta = 1.0
[model]
chi = [1]
[sweep]
axis = "chi"
pairing = "intra"
[output]
dir = "."
"#
    );
    ExperimentConfig::from_toml_str(&text).expect("static template parses")
}
