//! Experiment configuration: a TOML document validated up front. Unknown keys
//! are rejected so a typo in a sweep axis cannot silently change a run.

use std::path::{Path, PathBuf};

use gtn_core::{GtnError, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSection,
    pub qfm: QfmSection,
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainingSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub fits: FitsSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// "idx", "csv", or "logistic".
    pub source: String,
    #[serde(default)]
    pub binarize: bool,
    #[serde(default = "default_threshold")]
    pub binarize_threshold: f64,
    /// Center-crop sides for image data; the `M` sweep axis reads its points
    /// from here (feature count per point is `side^2`).
    #[serde(default)]
    pub crop_sides: Vec<usize>,
    /// Optional label filter; labels are remapped to dense ids in list order.
    #[serde(default)]
    pub classes: Vec<usize>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,

    // idx
    #[serde(default)]
    pub train_images: Option<PathBuf>,
    #[serde(default)]
    pub train_labels: Option<PathBuf>,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,

    // csv
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "default_normalization")]
    pub normalization: String,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,

    // logistic
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub samples_per_class: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QfmSection {
    pub theta: f64,
    #[serde(default = "default_h")]
    pub h: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Bond dimensions; the `chi` sweep axis reads its points from here, any
    /// other axis treats each entry as one curve family.
    pub chi: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub renormalize_every_step: bool,
    #[serde(default = "default_early_stop")]
    pub early_stop_delta: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            eta: default_eta(),
            epochs: default_epochs(),
            batch_size: 0,
            renormalize_every_step: true,
            early_stop_delta: default_early_stop(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "M", "chi", "N", "theta", or "H".
    pub axis: String,
    /// Abscissae for the N, theta, and H axes; M and chi take their points
    /// from `dataset.crop_sides` and `model.chi`.
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default = "default_seeds_per_point")]
    pub seeds_per_point: usize,
    #[serde(default = "default_pairing")]
    pub pairing: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitsSection {
    /// Any of "linear", "quadratic", "log".
    #[serde(default)]
    pub kinds: Vec<String>,
    #[serde(default = "default_r2_gate")]
    pub r2_gate: f64,
    #[serde(default = "default_divergence_threshold")]
    pub divergence_threshold: f64,
}

impl Default for FitsSection {
    fn default() -> Self {
        FitsSection {
            kinds: Vec::new(),
            r2_gate: default_r2_gate(),
            divergence_threshold: default_divergence_threshold(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn default_threshold() -> f64 {
    0.5
}
fn default_split_seed() -> u64 {
    1
}
fn default_normalization() -> String {
    "minmax".into()
}
fn default_test_fraction() -> f64 {
    0.25
}
fn default_burn_in() -> usize {
    100
}
fn default_h() -> usize {
    1
}
fn default_eta() -> f64 {
    1e-2
}
fn default_epochs() -> usize {
    500
}
fn default_true() -> bool {
    true
}
fn default_early_stop() -> f64 {
    1e-6
}
fn default_seeds_per_point() -> usize {
    5
}
fn default_pairing() -> String {
    "both".into()
}
fn default_r2_gate() -> f64 {
    0.98
}
fn default_divergence_threshold() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    M,
    Chi,
    N,
    Theta,
    H,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::M => "M",
            SweepAxis::Chi => "chi",
            SweepAxis::N => "N",
            SweepAxis::Theta => "theta",
            SweepAxis::H => "H",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingChoice {
    Intra,
    Inter,
    Both,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| GtnError::Parameter(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn axis(&self) -> Result<SweepAxis> {
        match self.sweep.axis.as_str() {
            "M" => Ok(SweepAxis::M),
            "chi" => Ok(SweepAxis::Chi),
            "N" => Ok(SweepAxis::N),
            "theta" => Ok(SweepAxis::Theta),
            "H" => Ok(SweepAxis::H),
            other => Err(GtnError::Parameter(format!(
                "unknown sweep axis {other:?}; expected M, chi, N, theta, or H"
            ))),
        }
    }

    pub fn pairing(&self) -> Result<PairingChoice> {
        match self.sweep.pairing.as_str() {
            "intra" => Ok(PairingChoice::Intra),
            "inter" => Ok(PairingChoice::Inter),
            "both" => Ok(PairingChoice::Both),
            other => Err(GtnError::Parameter(format!(
                "unknown pairing {other:?}; expected intra, inter, or both"
            ))),
        }
    }

    /// Sweep abscissae for the configured axis.
    pub fn sweep_points(&self) -> Result<Vec<f64>> {
        let pts: Vec<f64> = match self.axis()? {
            SweepAxis::M => self
                .dataset
                .crop_sides
                .iter()
                .map(|s| (s * s) as f64)
                .collect(),
            SweepAxis::Chi => self.model.chi.iter().map(|c| *c as f64).collect(),
            SweepAxis::N | SweepAxis::Theta | SweepAxis::H => self.sweep.values.clone(),
        };
        if pts.is_empty() {
            return Err(GtnError::Parameter(format!(
                "sweep axis {} has no points",
                self.sweep.axis
            )));
        }
        for w in pts.windows(2) {
            if w[1] <= w[0] {
                return Err(GtnError::Parameter(
                    "sweep points must be strictly increasing".into(),
                ));
            }
        }
        Ok(pts)
    }

    fn validate(&self) -> Result<()> {
        let axis = self.axis()?;
        self.pairing()?;
        self.sweep_points()?;
        if self.sweep.seeds_per_point == 0 {
            return Err(GtnError::Parameter("seeds_per_point must be positive".into()));
        }
        if !(self.qfm.theta > 0.0 && self.qfm.theta <= 1.0) {
            return Err(GtnError::Parameter(format!(
                "qfm.theta must lie in (0,1], got {}",
                self.qfm.theta
            )));
        }
        if self.qfm.h == 0 {
            return Err(GtnError::Parameter("qfm.h must be at least 1".into()));
        }
        if self.model.chi.is_empty() {
            return Err(GtnError::Parameter("model.chi must list at least one value".into()));
        }
        if self.dataset.train_per_class == 0 || self.dataset.test_per_class == 0 {
            return Err(GtnError::Parameter(
                "train_per_class and test_per_class must be positive".into(),
            ));
        }

        match axis {
            SweepAxis::M => {
                if self.dataset.source == "logistic" || self.dataset.source == "csv" {
                    return Err(GtnError::Parameter(
                        "the M sweep crops images; it needs an image (idx) dataset".into(),
                    ));
                }
            }
            SweepAxis::Theta => {
                if self.sweep.values.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                    return Err(GtnError::Parameter(
                        "theta sweep values must lie in (0,1]".into(),
                    ));
                }
            }
            SweepAxis::N | SweepAxis::H => {
                if self
                    .sweep
                    .values
                    .iter()
                    .any(|v| *v < 1.0 || v.fract() != 0.0)
                {
                    return Err(GtnError::Parameter(format!(
                        "{} sweep values must be positive integers",
                        self.sweep.axis
                    )));
                }
            }
            SweepAxis::Chi => {}
        }
        if axis != SweepAxis::M && self.dataset.crop_sides.len() > 1 {
            return Err(GtnError::Parameter(
                "multiple crop_sides are only meaningful for the M sweep axis".into(),
            ));
        }

        match self.dataset.source.as_str() {
            "idx" => {
                let (Some(ti), Some(tl)) =
                    (&self.dataset.train_images, &self.dataset.train_labels)
                else {
                    return Err(GtnError::Parameter(
                        "idx source needs train_images and train_labels".into(),
                    ));
                };
                for p in [Some(ti), Some(tl), self.dataset.test_images.as_ref(), self.dataset.test_labels.as_ref()]
                    .into_iter()
                    .flatten()
                {
                    if !p.exists() {
                        return Err(GtnError::Parameter(format!(
                            "dataset path {} does not exist",
                            p.display()
                        )));
                    }
                }
                if self.dataset.test_images.is_some() != self.dataset.test_labels.is_some() {
                    return Err(GtnError::Parameter(
                        "test_images and test_labels must be given together".into(),
                    ));
                }
            }
            "csv" => {
                let Some(p) = &self.dataset.path else {
                    return Err(GtnError::Parameter("csv source needs a path".into()));
                };
                if !p.exists() {
                    return Err(GtnError::Parameter(format!(
                        "dataset path {} does not exist",
                        p.display()
                    )));
                }
                if self.dataset.feature_columns.is_empty()
                    || self.dataset.label_column.is_none()
                {
                    return Err(GtnError::Parameter(
                        "csv source needs feature_columns and label_column".into(),
                    ));
                }
                if !matches!(self.dataset.normalization.as_str(), "minmax" | "none") {
                    return Err(GtnError::Parameter(format!(
                        "unknown normalization {:?}",
                        self.dataset.normalization
                    )));
                }
            }
            "logistic" => {
                if self.dataset.r.is_empty()
                    || self.dataset.steps.is_none()
                    || self.dataset.samples_per_class.is_none()
                {
                    return Err(GtnError::Parameter(
                        "logistic source needs r (one value per class), steps, and samples_per_class".into(),
                    ));
                }
                if self.dataset.r.iter().any(|r| !(*r > 0.0 && *r <= 4.0)) {
                    return Err(GtnError::Parameter("logistic r values must lie in (0,4]".into()));
                }
            }
            other => {
                return Err(GtnError::Parameter(format!(
                    "unknown dataset source {other:?}; expected idx, csv, or logistic"
                )));
            }
        }

        for kind in &self.fits.kinds {
            if !matches!(kind.as_str(), "linear" | "quadratic" | "log") {
                return Err(GtnError::Parameter(format!(
                    "unknown fit kind {kind:?}; expected linear, quadratic, or log"
                )));
            }
        }
        Ok(())
    }
}
