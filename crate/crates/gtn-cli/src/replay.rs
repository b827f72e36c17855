//! Bundle verification: re-derives the scaling fits from the stored curve
//! files and checks every artifact hash, without touching the original
//! dataset.

use std::path::Path;

use gtn_core::fit::ScalingFit;
use gtn_core::{GtnError, Result};
use serde::Serialize;

use crate::experiment::{
    config_hash, fit_curve, hex_digest, parse_curve_csv, RunReport, BUNDLE_VERSION,
};

const FIT_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Serialize)]
pub struct VerificationReport {
    pub ok: bool,
    pub issues: Vec<String>,
    pub warnings: Vec<String>,
    pub fits_checked: usize,
    pub curve_files_checked: usize,
}

/// Verifies a result bundle in place.
pub fn replay(dir: &Path) -> Result<VerificationReport> {
    let report_path = dir.join("report.json");
    let report_text = std::fs::read_to_string(&report_path).map_err(|e| {
        GtnError::Parameter(format!("bundle incomplete: {}: {e}", report_path.display()))
    })?;
    let report: RunReport = serde_json::from_str(&report_text)
        .map_err(|e| GtnError::Parameter(format!("unreadable report.json: {e}")))?;

    let mut issues = Vec::new();
    let mut warnings = Vec::new();

    if report.bundle_version != BUNDLE_VERSION {
        warnings.push(format!(
            "version drift: bundle was written by version {}, this build is {}; fits recomputed anyway",
            report.bundle_version, BUNDLE_VERSION
        ));
    }
    if config_hash(&report.config) != report.config_hash {
        issues.push("config hash mismatch: the inline config or its hash was modified".into());
    }

    // Curve files: whole-file hash, then per-row localization on mismatch.
    let mut curve_files_checked = 0;
    for (name, digest) in &report.curve_files {
        let path = dir.join(name);
        let Ok(bytes) = std::fs::read(&path) else {
            issues.push(format!("missing curve file {name}"));
            continue;
        };
        curve_files_checked += 1;
        if hex_digest(&bytes) == digest.sha256 {
            continue;
        }
        let text = String::from_utf8_lossy(&bytes);
        let mut located = false;
        for (i, line) in text.lines().skip(1).enumerate() {
            let expected = digest.row_hashes.get(i);
            let actual = &hex_digest(line.as_bytes())[..16];
            match expected {
                Some(h) if h == actual => {}
                Some(_) => {
                    issues.push(format!("curve file {name} modified at data row {}", i + 1));
                    located = true;
                    break;
                }
                None => {
                    issues.push(format!("curve file {name} has extra data row {}", i + 1));
                    located = true;
                    break;
                }
            }
        }
        if !located {
            issues.push(format!("curve file {name} modified (rows removed or header changed)"));
        }
    }

    // Re-run every planned fit from the stored curves and compare.
    let mut fits_checked = 0;
    for entry in &report.fit_plan {
        let curve_path = dir.join(&entry.curve_file);
        let fit_path = dir.join(&entry.fit_file);
        let stored_text = match std::fs::read_to_string(&fit_path) {
            Ok(t) => t,
            Err(_) => {
                issues.push(format!("missing fit file {}", entry.fit_file));
                continue;
            }
        };
        let stored: ScalingFit = match serde_json::from_str(&stored_text) {
            Ok(f) => f,
            Err(e) => {
                issues.push(format!("unreadable fit file {}: {e}", entry.fit_file));
                continue;
            }
        };
        let rows = match parse_curve_csv(&curve_path) {
            Ok(r) => r,
            Err(e) => {
                issues.push(format!("cannot refit {}: {e}", entry.curve_file));
                continue;
            }
        };
        match fit_curve(
            &report.config,
            &rows,
            entry.family_chi,
            entry.split,
            entry.pairing,
            &entry.kind,
        ) {
            Ok(recomputed) => {
                fits_checked += 1;
                if let Some(field) = fit_mismatch(&stored, &recomputed) {
                    issues.push(format!(
                        "fit {} does not reproduce from {}: {field} differs beyond {FIT_MATCH_TOL:e}",
                        entry.fit_file, entry.curve_file
                    ));
                }
            }
            Err(e) => issues.push(format!(
                "stored fit {} exists but refitting failed: {e}",
                entry.fit_file
            )),
        }
    }

    Ok(VerificationReport {
        ok: issues.is_empty(),
        issues,
        warnings,
        fits_checked,
        curve_files_checked,
    })
}

fn close(a: f64, b: f64) -> bool {
    if a == b || (a.is_nan() && b.is_nan()) {
        return true;
    }
    (a - b).abs() <= FIT_MATCH_TOL * a.abs().max(b.abs()).max(1.0)
}

fn fit_mismatch(a: &ScalingFit, b: &ScalingFit) -> Option<String> {
    if a.kind != b.kind {
        return Some("kind".into());
    }
    if a.n_points != b.n_points {
        return Some("n_points".into());
    }
    let ca = a.coefficients.as_slice();
    let cb = b.coefficients.as_slice();
    for ((x, y), name) in ca.iter().zip(&cb).zip(a.coefficients.names()) {
        if !close(*x, *y) {
            return Some(format!("coefficient {name}"));
        }
    }
    for (i, (x, y)) in a.std_errors.iter().zip(&b.std_errors).enumerate() {
        if !close(*x, *y) {
            return Some(format!("std_errors[{i}]"));
        }
    }
    if !close(a.r_squared, b.r_squared) {
        return Some("r_squared".into());
    }
    if !close(a.residual_max, b.residual_max) {
        return Some("residual_max".into());
    }
    None
}
