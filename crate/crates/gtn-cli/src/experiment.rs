//! Config-driven sweeps: per point, train one GTN per class, evaluate
//! intra/inter-class NLL on both splits, aggregate over seeds, fit the
//! configured scaling laws, and write a replayable bundle.
//!
//! Bundle layout under the output directory:
//!
//! ```text
//! curves/<family>_<split>_<pairing>.csv   sweep_value,split,pairing,class,nll,mean_prob,accuracy
//! fits/<family>_<split>_<pairing>_<kind>.json
//! points/<family>_<value>.json            raw per-seed fragments
//! report.json                             hashes, per-seed data, fit gate, divergence
//! ```
//!
//! Everything is a pure function of the config, so a rerun produces
//! byte-identical curve files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use gtn_core::data::{
    self, filter_by_label, logistic_trajectories, merge_as_classes, split_fraction, subsample,
    LabeledDataset,
};
use gtn_core::fit::{
    divergence_report, fit_linear, fit_log, fit_quadratic, CurveMeta, CurveSeries,
    DivergenceReport, Pairing, ScalingFit, Split,
};
use gtn_core::qfm::{binarize, crop_center, qfm_encode, FeatureVector, QfmConfig};
use gtn_core::train::{nll, train, BatchSize, GtncModel, TrainConfig};
use gtn_core::{GtnError, Mps, ProductState, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, PairingChoice, SweepAxis};

pub const BUNDLE_VERSION: u32 = 1;
pub const CURVE_HEADER: &str = "sweep_value,split,pairing,class,nll,mean_prob,accuracy";

/// One aggregated curve entry (seed means).
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub sweep_value: f64,
    pub split: Split,
    pub pairing: Pairing,
    pub class: usize,
    pub nll: f64,
    pub mean_prob: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowSummary {
    pub split: Split,
    pub pairing: Pairing,
    pub class: usize,
    pub nll_mean: f64,
    pub nll_std: f64,
    pub nll_per_seed: Vec<f64>,
    pub mean_prob: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSummary {
    pub family: String,
    pub sweep_value: f64,
    pub seeds: Vec<u64>,
    pub rows: Vec<RowSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveFileDigest {
    pub sha256: String,
    pub row_hashes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitPlanEntry {
    pub curve_file: String,
    pub fit_file: String,
    pub kind: String,
    pub family_chi: Option<usize>,
    pub split: Split,
    pub pairing: Pairing,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitRefusal {
    pub curve_file: String,
    pub kind: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitGateEntry {
    pub fit_file: String,
    pub r_squared: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceSection {
    pub pairing: Pairing,
    pub kind: String,
    pub report: DivergenceReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub bundle_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub points: Vec<PointSummary>,
    pub curve_files: BTreeMap<String, CurveFileDigest>,
    pub fit_plan: Vec<FitPlanEntry>,
    pub fits_refused: Vec<FitRefusal>,
    pub fit_gate: Vec<FitGateEntry>,
    pub divergence: Vec<DivergenceSection>,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex_digest(json.as_bytes())
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64;
    for p in parts {
        acc = mix64(acc ^ p.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    acc
}

/// Class-partitioned train/test pools with dense labels.
struct Pools {
    train: Vec<LabeledDataset>,
    test: Vec<LabeledDataset>,
    image_shape: Option<(usize, usize)>,
}

fn prepare_pools(cfg: &ExperimentConfig) -> Result<Pools> {
    let ds = &cfg.dataset;
    let (train_all, test_all) = match ds.source.as_str() {
        "idx" => {
            let train = data::load_idx(
                ds.train_images.as_ref().unwrap(),
                ds.train_labels.as_ref().unwrap(),
            )?;
            match (&ds.test_images, &ds.test_labels) {
                (Some(ti), Some(tl)) => (train, data::load_idx(ti, tl)?),
                _ => split_fraction(&train, 1.0 - ds.test_fraction, ds.split_seed)?,
            }
        }
        "csv" => {
            let norm = match ds.normalization.as_str() {
                "minmax" => data::Normalization::MinMax,
                _ => data::Normalization::None,
            };
            let all = data::load_csv(
                ds.path.as_ref().unwrap(),
                &ds.feature_columns,
                ds.label_column.as_ref().unwrap(),
                norm,
            )?;
            split_fraction(&all, 1.0 - ds.test_fraction, ds.split_seed)?
        }
        "logistic" => {
            let steps = ds.steps.unwrap();
            let per_class = ds.samples_per_class.unwrap();
            let mut train_parts = Vec::new();
            let mut test_parts = Vec::new();
            for (g, &r) in ds.r.iter().enumerate() {
                train_parts.push(logistic_trajectories(
                    r,
                    per_class,
                    steps,
                    ds.burn_in,
                    derive_seed(&[ds.split_seed, g as u64, 0]),
                )?);
                test_parts.push(logistic_trajectories(
                    r,
                    per_class,
                    steps,
                    ds.burn_in,
                    derive_seed(&[ds.split_seed, g as u64, 1]),
                )?);
            }
            (merge_as_classes(&train_parts)?, merge_as_classes(&test_parts)?)
        }
        _ => unreachable!("validated"),
    };

    // Optional class filter, then dense relabeling in list order.
    let wanted: Vec<usize> = if ds.classes.is_empty() {
        train_all.classes()
    } else {
        ds.classes.clone()
    };
    if wanted.len() < 2 && cfg.pairing()? != PairingChoice::Intra {
        return Err(GtnError::Parameter(
            "inter-class evaluation needs at least two classes".into(),
        ));
    }

    let maybe_binarize = |pool: LabeledDataset| -> Result<LabeledDataset> {
        if !ds.binarize {
            return Ok(pool);
        }
        let samples = pool
            .samples
            .iter()
            .map(|s| binarize(s, ds.binarize_threshold))
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(samples, pool.labels, pool.name, pool.image_shape)
    };

    let per_class = |pool: &LabeledDataset| -> Result<Vec<LabeledDataset>> {
        wanted
            .iter()
            .map(|&g| maybe_binarize(filter_by_label(pool, g)?))
            .collect()
    };
    let train = per_class(&train_all)?;
    let test = per_class(&test_all)?;
    Ok(Pools {
        image_shape: train_all.image_shape,
        train,
        test,
    })
}

/// Per-point knobs after resolving the sweep axis.
#[derive(Clone, Copy)]
struct PointSpec {
    sweep_value: f64,
    side: Option<usize>,
    theta: f64,
    h: usize,
    n_train: usize,
    chi: usize,
}

fn encode_class(
    pool: &LabeledDataset,
    count: usize,
    seed: u64,
    side: Option<usize>,
    image_shape: Option<(usize, usize)>,
    qfm: &QfmConfig,
) -> Result<Vec<ProductState>> {
    let picked = subsample(pool, count, seed)?;
    picked
        .samples
        .iter()
        .map(|s| -> Result<ProductState> {
            let cropped: FeatureVector = match (side, image_shape) {
                (Some(side), Some((h, w))) => crop_center(s.values(), h, w, side)?,
                (Some(_), None) => {
                    return Err(GtnError::Parameter(
                        "crop requested on a dataset without image shape".into(),
                    ))
                }
                (None, _) => s.clone(),
            };
            qfm_encode(&cropped, qfm)
        })
        .collect()
}

struct PointOutcome {
    family: String,
    family_chi: Option<usize>,
    summary: PointSummary,
    rows: Vec<CurveRow>,
}

fn run_point(
    cfg: &ExperimentConfig,
    pools: &Pools,
    family: &str,
    family_chi: Option<usize>,
    ctx_idx: usize,
    point_idx: usize,
    spec: PointSpec,
) -> Result<PointOutcome> {
    let g_count = pools.train.len();
    let qfm = QfmConfig::new(spec.theta, spec.h)?;
    let pairing = cfg.pairing()?;
    let reps = cfg.sweep.seeds_per_point;

    let mut seeds = Vec::with_capacity(reps);
    // (split, pairing, class) -> per-rep nll / mean_prob / accuracy
    let mut acc: BTreeMap<(u8, u8, usize), (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();

    for rep in 0..reps {
        let rep_seed = derive_seed(&[cfg.model.seed, ctx_idx as u64, point_idx as u64, rep as u64]);
        seeds.push(rep_seed);

        let mut train_states = Vec::with_capacity(g_count);
        let mut test_states = Vec::with_capacity(g_count);
        for g in 0..g_count {
            train_states.push(encode_class(
                &pools.train[g],
                spec.n_train,
                derive_seed(&[rep_seed, g as u64, 1]),
                spec.side,
                pools.image_shape,
                &qfm,
            )?);
            test_states.push(encode_class(
                &pools.test[g],
                cfg.dataset.test_per_class,
                derive_seed(&[rep_seed, g as u64, 2]),
                spec.side,
                pools.image_shape,
                &qfm,
            )?);
        }

        let m_total = train_states[0][0].len();
        let train_cfg = TrainConfig {
            eta: cfg.training.eta,
            epochs: cfg.training.epochs,
            batch_size: match cfg.training.batch_size {
                0 => BatchSize::Full,
                b => BatchSize::Size(b),
            },
            seed: derive_seed(&[rep_seed, 7]),
            renormalize_every_step: cfg.training.renormalize_every_step,
            early_stop_delta: cfg.training.early_stop_delta,
        };
        let mut models = Vec::with_capacity(g_count);
        for (g, states) in train_states.iter().enumerate() {
            let initial = Mps::random(
                m_total,
                2,
                spec.chi,
                derive_seed(&[rep_seed, g as u64, 3]),
            )?;
            let (model, _trace) = train(&initial, states, None, &train_cfg)?;
            models.push(model);
        }

        let gtnc = GtncModel::new(models.clone())?;
        let labeled = |per_class: &[Vec<ProductState>]| -> Vec<(ProductState, usize)> {
            per_class
                .iter()
                .enumerate()
                .flat_map(|(g, states)| states.iter().map(move |s| (s.clone(), g)))
                .collect()
        };
        let acc_train = gtnc.accuracy(&labeled(&train_states))?;
        let acc_test = gtnc.accuracy(&labeled(&test_states))?;

        let splits: [(Split, &Vec<Vec<ProductState>>, f64); 2] = [
            (Split::Train, &train_states, acc_train),
            (Split::Test, &test_states, acc_test),
        ];
        for (split, states, accuracy) in splits {
            for g in 0..g_count {
                if pairing != PairingChoice::Inter {
                    let l = nll(&models[g], &states[g])?;
                    push_rep(&mut acc, split, Pairing::Intra, g, l, accuracy);
                }
                if pairing != PairingChoice::Intra && g_count > 1 {
                    let mut total = 0.0;
                    for other in (0..g_count).filter(|o| *o != g) {
                        total += nll(&models[g], &states[other])?;
                    }
                    let l = total / (g_count - 1) as f64;
                    push_rep(&mut acc, split, Pairing::Inter, g, l, accuracy);
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for ((split_tag, pairing_tag, class), (nlls, probs, accs)) in &acc {
        let split = if *split_tag == 0 { Split::Train } else { Split::Test };
        let pairing = if *pairing_tag == 0 { Pairing::Intra } else { Pairing::Inter };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let nll_mean = mean(nlls);
        let std = if nlls.len() > 1 && nll_mean.is_finite() {
            (nlls.iter().map(|x| (x - nll_mean) * (x - nll_mean)).sum::<f64>()
                / (nlls.len() - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        rows.push(CurveRow {
            sweep_value: spec.sweep_value,
            split,
            pairing,
            class: *class,
            nll: nll_mean,
            mean_prob: mean(probs),
            accuracy: mean(accs),
        });
        summaries.push(RowSummary {
            split,
            pairing,
            class: *class,
            nll_mean,
            nll_std: std,
            nll_per_seed: nlls.clone(),
            mean_prob: mean(probs),
            accuracy: mean(accs),
        });
    }

    Ok(PointOutcome {
        family: family.to_string(),
        family_chi,
        summary: PointSummary {
            family: family.to_string(),
            sweep_value: spec.sweep_value,
            seeds,
            rows: summaries,
        },
        rows,
    })
}

#[allow(clippy::type_complexity)]
fn push_rep(
    acc: &mut BTreeMap<(u8, u8, usize), (Vec<f64>, Vec<f64>, Vec<f64>)>,
    split: Split,
    pairing: Pairing,
    class: usize,
    nll_value: f64,
    accuracy: f64,
) {
    let key = (
        if split == Split::Train { 0 } else { 1 },
        if pairing == Pairing::Intra { 0 } else { 1 },
        class,
    );
    let entry = acc.entry(key).or_default();
    entry.0.push(nll_value);
    entry.1.push((-nll_value).exp());
    entry.2.push(accuracy);
}

fn format_sweep_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Runs the full experiment and writes the result bundle. Returns the report
/// that was written to `report.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let axis = cfg.axis()?;
    let points = cfg.sweep_points()?;
    let pools = prepare_pools(cfg)?;

    // Pool-size checks up front so a bad config fails before any training.
    let max_n = match axis {
        SweepAxis::N => points.iter().cloned().fold(0.0, f64::max) as usize,
        _ => cfg.dataset.train_per_class,
    };
    for (g, pool) in pools.train.iter().enumerate() {
        if pool.len() < max_n {
            return Err(GtnError::Parameter(format!(
                "class {g} has {} training samples, sweep needs {max_n}",
                pool.len()
            )));
        }
    }
    for (g, pool) in pools.test.iter().enumerate() {
        if pool.len() < cfg.dataset.test_per_class {
            return Err(GtnError::Parameter(format!(
                "class {g} has {} test samples, config needs {}",
                pool.len(),
                cfg.dataset.test_per_class
            )));
        }
    }

    // Families: one curve per chi for non-chi axes, a single family otherwise.
    let families: Vec<(String, Option<usize>)> = match axis {
        SweepAxis::Chi => vec![(format!("n{}", cfg.dataset.train_per_class), None)],
        _ => cfg
            .model
            .chi
            .iter()
            .map(|c| (format!("chi{c}"), Some(*c)))
            .collect(),
    };

    std::fs::create_dir_all(out_dir.join("curves"))?;
    std::fs::create_dir_all(out_dir.join("fits"))?;
    std::fs::create_dir_all(out_dir.join("points"))?;

    let mut tasks = Vec::new();
    for (ctx_idx, (family, family_chi)) in families.iter().enumerate() {
        for (point_idx, &value) in points.iter().enumerate() {
            let spec = PointSpec {
                sweep_value: value,
                side: match axis {
                    SweepAxis::M => Some(cfg.dataset.crop_sides[point_idx]),
                    _ => cfg.dataset.crop_sides.first().copied(),
                },
                theta: if axis == SweepAxis::Theta { value } else { cfg.qfm.theta },
                h: if axis == SweepAxis::H { value as usize } else { cfg.qfm.h },
                n_train: if axis == SweepAxis::N { value as usize } else { cfg.dataset.train_per_class },
                chi: match (axis, family_chi) {
                    (SweepAxis::Chi, _) => value as usize,
                    (_, Some(c)) => *c,
                    _ => unreachable!(),
                },
            };
            tasks.push((family.clone(), *family_chi, ctx_idx, point_idx, spec));
        }
    }

    // Points are independent; run them in parallel and merge in task order.
    let outcomes: Vec<Result<PointOutcome>> = tasks
        .par_iter()
        .map(|(family, family_chi, ctx_idx, point_idx, spec)| {
            let outcome = run_point(cfg, &pools, family, *family_chi, *ctx_idx, *point_idx, *spec)
                .map_err(|e| {
                    GtnError::Parameter(format!(
                        "sweep point {}={} (family {family}) failed: {e}",
                        axis.as_str(),
                        format_sweep_value(spec.sweep_value)
                    ))
                })?;
            // Fragment for partial-result retention.
            let frag = out_dir.join("points").join(format!(
                "{family}_{}.json",
                format_sweep_value(spec.sweep_value)
            ));
            std::fs::write(&frag, serde_json::to_string_pretty(&outcome.summary)? + "\n")?;
            Ok(outcome)
        })
        .collect();
    let mut done = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        done.push(o?);
    }

    // Merge rows into per-(family, split, pairing) curve files.
    let mut by_file: BTreeMap<String, (Option<usize>, Split, Pairing, Vec<CurveRow>)> =
        BTreeMap::new();
    for outcome in &done {
        for row in &outcome.rows {
            let name = format!(
                "curves/{}_{}_{}.csv",
                outcome.family, row.split, row.pairing
            );
            by_file
                .entry(name)
                .or_insert_with(|| (outcome.family_chi, row.split, row.pairing, Vec::new()))
                .3
                .push(row.clone());
        }
    }

    let mut curve_files = BTreeMap::new();
    for (name, (_, _, _, rows)) in &mut by_file {
        rows.sort_by(|a, b| {
            a.sweep_value
                .total_cmp(&b.sweep_value)
                .then(a.class.cmp(&b.class))
        });
        let mut text = String::from(CURVE_HEADER);
        text.push('\n');
        let mut row_hashes = Vec::with_capacity(rows.len());
        for r in rows.iter() {
            let line = format!(
                "{},{},{},{},{},{},{}",
                r.sweep_value, r.split, r.pairing, r.class, r.nll, r.mean_prob, r.accuracy
            );
            row_hashes.push(hex_digest(line.as_bytes())[..16].to_string());
            text.push_str(&line);
            text.push('\n');
        }
        std::fs::write(out_dir.join(name), text.as_bytes())?;
        curve_files.insert(
            name.clone(),
            CurveFileDigest {
                sha256: hex_digest(text.as_bytes()),
                row_hashes,
            },
        );
    }

    // Fits over each curve file.
    let mut fit_plan = Vec::new();
    let mut fits_refused = Vec::new();
    let mut fit_gate = Vec::new();
    for (name, (family_chi, split, pairing, rows)) in &by_file {
        for kind in &cfg.fits.kinds {
            let fit_file = format!(
                "fits/{}_{kind}.json",
                name.trim_start_matches("curves/").trim_end_matches(".csv")
            );
            match fit_curve(cfg, rows, *family_chi, *split, *pairing, kind) {
                Ok(fit) => {
                    std::fs::write(
                        out_dir.join(&fit_file),
                        serde_json::to_string_pretty(&fit)? + "\n",
                    )?;
                    fit_gate.push(FitGateEntry {
                        fit_file: fit_file.clone(),
                        r_squared: fit.r_squared,
                        holds: fit.r_squared >= cfg.fits.r2_gate,
                    });
                    fit_plan.push(FitPlanEntry {
                        curve_file: name.clone(),
                        fit_file,
                        kind: kind.clone(),
                        family_chi: *family_chi,
                        split: *split,
                        pairing: *pairing,
                    });
                }
                Err(e) => fits_refused.push(FitRefusal {
                    curve_file: name.clone(),
                    kind: kind.clone(),
                    reason: e.to_string(),
                }),
            }
        }
    }

    // Train/test coefficient divergence keyed by chi (one fit family per chi).
    let mut divergence = Vec::new();
    if axis != SweepAxis::Chi && cfg.model.chi.len() > 1 {
        for kind in &cfg.fits.kinds {
            for pairing in [Pairing::Intra, Pairing::Inter] {
                let train_fits = collect_fits(out_dir, &fit_plan, kind, pairing, Split::Train)?;
                let test_fits = collect_fits(out_dir, &fit_plan, kind, pairing, Split::Test)?;
                if let (Some(tr), Some(te)) = (train_fits, test_fits) {
                    if !tr.is_empty() && tr.len() == te.len() {
                        divergence.push(DivergenceSection {
                            pairing,
                            kind: kind.clone(),
                            report: divergence_report(&tr, &te, cfg.fits.divergence_threshold)?,
                        });
                    }
                }
            }
        }
    }

    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        bundle_version: BUNDLE_VERSION,
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        points: done.into_iter().map(|o| o.summary).collect(),
        curve_files,
        fit_plan,
        fits_refused,
        fit_gate,
        divergence,
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(report)
}

fn collect_fits(
    out_dir: &Path,
    plan: &[FitPlanEntry],
    kind: &str,
    pairing: Pairing,
    split: Split,
) -> Result<Option<Vec<(f64, ScalingFit)>>> {
    let mut out = Vec::new();
    for entry in plan {
        if entry.kind == kind && entry.pairing == pairing && entry.split == split {
            let Some(chi) = entry.family_chi else {
                return Ok(None);
            };
            let text = std::fs::read_to_string(out_dir.join(&entry.fit_file))?;
            let fit: ScalingFit = serde_json::from_str(&text)
                .map_err(|e| GtnError::Parameter(format!("unreadable fit JSON: {e}")))?;
            out.push((chi as f64, fit));
        }
    }
    if out.is_empty() {
        return Ok(None);
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Some(out))
}

/// Assembles the class-averaged series for one curve file and runs one fit
/// kind. Non-finite NLL points (zero-probability samples) are excluded; the
/// fit refuses when too few finite points remain.
pub fn fit_curve(
    cfg: &ExperimentConfig,
    rows: &[CurveRow],
    family_chi: Option<usize>,
    split: Split,
    pairing: Pairing,
    kind: &str,
) -> Result<ScalingFit> {
    let (points, dropped) = series_points(rows);
    let needed = match kind {
        "quadratic" => 3,
        _ => 2,
    };
    if points.len() < needed {
        return Err(GtnError::Parameter(format!(
            "need at least {needed} finite points for a {kind} fit, have {} ({} dropped as non-finite)",
            points.len(),
            dropped
        )));
    }
    let meta = CurveMeta {
        chi: family_chi,
        n: Some(cfg.dataset.train_per_class),
        split,
        pairing,
        dataset: cfg.name.clone(),
        theta: cfg.qfm.theta,
        h: cfg.qfm.h,
    };
    match kind {
        "linear" => fit_linear(&CurveSeries::new(points, meta)?),
        "quadratic" => fit_quadratic(&CurveSeries::new(points, meta)?),
        "log" => {
            let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
            let mut fit = fit_log(&xs, &ys)?;
            fit.meta = Some(meta);
            Ok(fit)
        }
        other => Err(GtnError::Parameter(format!("unknown fit kind {other:?}"))),
    }
}

/// Class-averaged `(sweep_value, nll)` points; returns the number of
/// sweep values dropped for non-finite NLL.
pub fn series_points(rows: &[CurveRow]) -> (Vec<(f64, f64)>, usize) {
    let mut grouped: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.sweep_value.to_bits())
            .or_insert((r.sweep_value, Vec::new()))
            .1
            .push(r.nll);
    }
    let mut points = Vec::new();
    let mut dropped = 0;
    let mut entries: Vec<(f64, Vec<f64>)> = grouped.into_values().collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (x, ys) in entries {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        if mean.is_finite() {
            points.push((x, mean));
        } else {
            dropped += 1;
        }
    }
    (points, dropped)
}

/// Parses a curve CSV produced by [`run_experiment`].
pub fn parse_curve_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let text = std::fs::read_to_string(path)?;
    parse_curve_text(&text)
}

pub fn parse_curve_text(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CURVE_HEADER => {}
        other => {
            return Err(GtnError::Parameter(format!(
                "unexpected curve header {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(GtnError::Table {
                row: i + 1,
                column: String::new(),
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, col: &str| -> Result<f64> {
            s.parse().map_err(|_| GtnError::Table {
                row: i + 1,
                column: col.to_string(),
                message: format!("non-numeric cell {s:?}"),
            })
        };
        rows.push(CurveRow {
            sweep_value: parse_f(fields[0], "sweep_value")?,
            split: match fields[1] {
                "train" => Split::Train,
                "test" => Split::Test,
                other => {
                    return Err(GtnError::Table {
                        row: i + 1,
                        column: "split".into(),
                        message: format!("unknown split {other:?}"),
                    })
                }
            },
            pairing: match fields[2] {
                "intra" => Pairing::Intra,
                "inter" => Pairing::Inter,
                other => {
                    return Err(GtnError::Table {
                        row: i + 1,
                        column: "pairing".into(),
                        message: format!("unknown pairing {other:?}"),
                    })
                }
            },
            class: fields[3].parse().map_err(|_| GtnError::Table {
                row: i + 1,
                column: "class".into(),
                message: format!("non-integer class {:?}", fields[3]),
            })?,
            nll: parse_f(fields[4], "nll")?,
            mean_prob: parse_f(fields[5], "mean_prob")?,
            accuracy: parse_f(fields[6], "accuracy")?,
        });
    }
    Ok(rows)
}
