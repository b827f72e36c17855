//! Dataset ingestion: IDX image files, CSV tables, logistic-map trajectories,
//! label filtering, and deterministic subsampling.
//!
//! Every loader rejects feature values outside `[0,1]`; nothing is clamped
//! silently.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01};

use crate::error::{GtnError, Result};
use crate::qfm::FeatureVector;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CACHE_MAGIC: &[u8; 4] = b"GTNC";
const CACHE_VERSION: u32 = 1;

/// Samples with integer class ids and optional image geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<FeatureVector>,
    pub labels: Vec<usize>,
    pub name: String,
    pub image_shape: Option<(usize, usize)>,
}

impl LabeledDataset {
    pub fn new(
        samples: Vec<FeatureVector>,
        labels: Vec<usize>,
        name: String,
        image_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(GtnError::param(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if samples.is_empty() {
            return Err(GtnError::param("dataset is empty"));
        }
        let m = samples[0].len();
        if samples.iter().any(|s| s.len() != m) {
            return Err(GtnError::param("samples differ in feature count"));
        }
        if let Some((h, w)) = image_shape {
            if h * w != m {
                return Err(GtnError::param(format!(
                    "image shape {h}x{w} does not match {m} features"
                )));
            }
        }
        Ok(LabeledDataset {
            samples,
            labels,
            name,
            image_shape,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.samples[0].len()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<usize> {
        let mut cs: Vec<usize> = self.labels.clone();
        cs.sort_unstable();
        cs.dedup();
        cs
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(GtnError::Format {
            offset: bytes.len() as u64,
            message: format!("truncated while reading {what}"),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Loads an IDX image/label pair (the MNIST-family distribution format).
/// Pixels are scaled to `[0,1]` by dividing by 255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let img_bytes = fs::read(images_path)?;
    let magic = be_u32(&img_bytes, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(GtnError::Format {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let count = be_u32(&img_bytes, 4, "image count")? as usize;
    let rows = be_u32(&img_bytes, 8, "row count")? as usize;
    let cols = be_u32(&img_bytes, 12, "column count")? as usize;
    let expected = 16 + count * rows * cols;
    if img_bytes.len() != expected {
        return Err(GtnError::Format {
            offset: img_bytes.len().min(expected) as u64,
            message: format!(
                "image payload is {} bytes, header implies {expected}",
                img_bytes.len()
            ),
        });
    }

    let lbl_bytes = fs::read(labels_path)?;
    let magic = be_u32(&lbl_bytes, 0, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(GtnError::Format {
            offset: 0,
            message: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let label_count = be_u32(&lbl_bytes, 4, "label count")? as usize;
    if lbl_bytes.len() != 8 + label_count {
        return Err(GtnError::Format {
            offset: lbl_bytes.len().min(8 + label_count) as u64,
            message: format!(
                "label payload is {} bytes, header implies {}",
                lbl_bytes.len(),
                8 + label_count
            ),
        });
    }
    if label_count != count {
        return Err(GtnError::Format {
            offset: 4,
            message: format!("{count} images but {label_count} labels"),
        });
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        let values: Vec<f64> = img_bytes[start..start + rows * cols]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        samples.push(FeatureVector::new(values)?);
    }
    let labels: Vec<usize> = lbl_bytes[8..].iter().map(|&b| b as usize).collect();
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    LabeledDataset::new(samples, labels, name, Some((rows, cols)))
}

/// Per-column normalization for CSV ingestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Min-max to `[0,1]` per feature column; constant columns map to 0.
    MinMax,
    /// Values must already lie in `[0,1]`.
    None,
}

/// Loads a CSV table with a header row. Feature columns are selected by
/// name; string labels are mapped to dense integer ids in first-appearance
/// order.
pub fn load_csv(
    path: &Path,
    feature_columns: &[String],
    label_column: &str,
    normalization: Normalization,
) -> Result<LabeledDataset> {
    if feature_columns.is_empty() {
        return Err(GtnError::param("no feature columns selected"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| GtnError::param(format!("cannot read CSV header: {e}")))?
        .clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GtnError::param(format!("column {name:?} not found in header")))
    };
    let feature_idx: Vec<usize> = feature_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let label_idx = col_index(label_column)?;

    let mut raw_rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_ids: Vec<String> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GtnError::Table {
            row: row_no + 1,
            column: String::new(),
            message: format!("unreadable record: {e}"),
        })?;
        let mut row = Vec::with_capacity(feature_idx.len());
        for (ci, &idx) in feature_idx.iter().enumerate() {
            let cell = record.get(idx).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| GtnError::Table {
                row: row_no + 1,
                column: feature_columns[ci].clone(),
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(GtnError::Table {
                    row: row_no + 1,
                    column: feature_columns[ci].clone(),
                    message: format!("non-finite cell {cell:?}"),
                });
            }
            row.push(value);
        }
        raw_rows.push(row);
        let label = record.get(label_idx).unwrap_or("").trim().to_string();
        let id = match label_ids.iter().position(|l| *l == label) {
            Some(id) => id,
            None => {
                label_ids.push(label);
                label_ids.len() - 1
            }
        };
        labels.push(id);
    }
    if raw_rows.is_empty() {
        return Err(GtnError::param("CSV has no data rows"));
    }

    let m = feature_idx.len();
    if let Normalization::MinMax = normalization {
        for j in 0..m {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for row in &raw_rows {
                lo = lo.min(row[j]);
                hi = hi.max(row[j]);
            }
            let span = hi - lo;
            for row in &mut raw_rows {
                row[j] = if span > 0.0 { (row[j] - lo) / span } else { 0.0 };
            }
        }
    }
    let mut samples = Vec::with_capacity(raw_rows.len());
    for (row_no, row) in raw_rows.into_iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(GtnError::Table {
                row: row_no + 1,
                column: feature_columns[j].clone(),
                message: format!("value {} outside [0,1] (normalization: none)", row[j]),
            });
        }
        samples.push(FeatureVector::new(row)?);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    LabeledDataset::new(samples, labels, name, None)
}

/// Chaotic time-series samples: each row is `steps` consecutive iterates of
/// `x <- r x (1 - x)` after a burn-in, from a uniformly drawn start in (0,1).
/// Pure arithmetic; identical `(r, seed)` give identical 64-bit values.
pub fn logistic_trajectories(
    r: f64,
    n_samples: usize,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(r > 0.0 && r <= 4.0) {
        return Err(GtnError::param(format!(
            "logistic parameter must lie in (0,4], got {r}"
        )));
    }
    if n_samples == 0 || steps == 0 {
        return Err(GtnError::param("need at least one sample and one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut x: f64 = Open01.sample(&mut rng);
        for _ in 0..burn_in {
            x = r * x * (1.0 - x);
        }
        let mut traj = Vec::with_capacity(steps);
        for _ in 0..steps {
            x = r * x * (1.0 - x);
            traj.push(x);
        }
        samples.push(FeatureVector::new(traj)?);
    }
    let labels = vec![0; n_samples];
    LabeledDataset::new(samples, labels, format!("logistic_r{r}"), None)
}

/// Keeps only the samples with label `g` (labels preserved).
pub fn filter_by_label(ds: &LabeledDataset, g: usize) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (s, &l) in ds.samples.iter().zip(&ds.labels) {
        if l == g {
            samples.push(s.clone());
            labels.push(l);
        }
    }
    if samples.is_empty() {
        return Err(GtnError::param(format!(
            "label {g} does not occur in dataset {:?}",
            ds.name
        )));
    }
    LabeledDataset::new(samples, labels, ds.name.clone(), ds.image_shape)
}

/// Draws `n` samples without replacement via a seeded shuffle.
pub fn subsample(ds: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(GtnError::param("cannot subsample zero samples"));
    }
    if n > ds.len() {
        return Err(GtnError::param(format!(
            "requested {n} samples from a dataset of {}",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx.truncate(n);
    let samples = idx.iter().map(|&i| ds.samples[i].clone()).collect();
    let labels = idx.iter().map(|&i| ds.labels[i]).collect();
    LabeledDataset::new(samples, labels, ds.name.clone(), ds.image_shape)
}

/// Deterministic shuffle-split into `(train, test)` by train fraction.
pub fn split_fraction(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(GtnError::param(format!(
            "train fraction must lie in (0,1), got {train_fraction}"
        )));
    }
    let n_train = ((ds.len() as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train == ds.len() {
        return Err(GtnError::param("split leaves one side empty"));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let pick = |range: &[usize]| -> Result<LabeledDataset> {
        LabeledDataset::new(
            range.iter().map(|&i| ds.samples[i].clone()).collect(),
            range.iter().map(|&i| ds.labels[i]).collect(),
            ds.name.clone(),
            ds.image_shape,
        )
    };
    Ok((pick(&idx[..n_train])?, pick(&idx[n_train..])?))
}

/// Concatenates per-class datasets, relabeling each to its position.
pub fn merge_as_classes(parts: &[LabeledDataset]) -> Result<LabeledDataset> {
    if parts.is_empty() {
        return Err(GtnError::param("nothing to merge"));
    }
    let m = parts[0].feature_count();
    if parts.iter().any(|p| p.feature_count() != m) {
        return Err(GtnError::param("merged parts differ in feature count"));
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (g, part) in parts.iter().enumerate() {
        for s in &part.samples {
            samples.push(s.clone());
            labels.push(g);
        }
    }
    let name = parts
        .iter()
        .map(|p| p.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    LabeledDataset::new(samples, labels, name, parts[0].image_shape)
}

impl LabeledDataset {
    /// Writes the versioned binary cache; round trips are bit-exact.
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        let name_bytes = self.name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u32).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        match self.image_shape {
            Some((h, w)) => {
                buf.push(1);
                buf.extend_from_slice(&(h as u32).to_le_bytes());
                buf.extend_from_slice(&(w as u32).to_le_bytes());
            }
            None => buf.push(0),
        }
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.feature_count() as u32).to_le_bytes());
        for &l in &self.labels {
            buf.extend_from_slice(&(l as u32).to_le_bytes());
        }
        for s in &self.samples {
            for v in s.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    /// Reads the binary cache, refusing mismatched versions.
    pub fn read_cache(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 8 || &bytes[0..4] != CACHE_MAGIC {
            return Err(GtnError::Format {
                offset: 0,
                message: "not a dataset cache (bad magic)".into(),
            });
        }
        let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
        if version != CACHE_VERSION {
            return Err(GtnError::Format {
                offset: 4,
                message: format!("cache version {version}, this build reads {CACHE_VERSION}"),
            });
        }
        let mut at = 8usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
            if bytes.len() < *at + n {
                return Err(GtnError::Format {
                    offset: bytes.len() as u64,
                    message: "truncated cache".into(),
                });
            }
            let out = &bytes[*at..*at + n];
            *at += n;
            Ok(out)
        };
        let name_len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut at, name_len)?.to_vec())
            .map_err(|_| GtnError::Format {
                offset: at as u64,
                message: "cache name is not UTF-8".into(),
            })?;
        let has_shape = take(&mut at, 1)?[0] != 0;
        let image_shape = if has_shape {
            let h = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
            let w = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
            Some((h, w))
        } else {
            None
        };
        let n = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize);
        }
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut values = Vec::with_capacity(m);
            for _ in 0..m {
                values.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
            }
            samples.push(FeatureVector::new(values)?);
        }
        LabeledDataset::new(samples, labels, name, image_shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logistic_fixed_point_is_stationary() {
        let r = 3.2;
        // x* = 1 - 1/r is the nontrivial fixed point.
        let x_star = 1.0 - 1.0 / r;
        let mut x = x_star;
        for _ in 0..100 {
            x = r * x * (1.0 - x);
        }
        assert_relative_eq!(x, x_star, epsilon = 1e-9);
    }

    #[test]
    fn logistic_iterates_match_direct_arithmetic() {
        // r=4, x0=0.2: 0.64, 0.9216, 0.28901376.
        let mut x = 0.2_f64;
        let expect = [0.64, 0.9216, 0.28901376];
        for e in expect {
            x = 4.0 * x * (1.0 - x);
            assert_relative_eq!(x, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn logistic_trajectories_stay_in_unit_interval_and_are_deterministic() {
        let a = logistic_trajectories(3.9, 20, 16, 100, 7).unwrap();
        let b = logistic_trajectories(3.9, 20, 16, 100, 7).unwrap();
        assert_eq!(a, b);
        for s in &a.samples {
            assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let c = logistic_trajectories(3.9, 20, 16, 100, 8).unwrap();
        assert_ne!(a, c);
        assert!(logistic_trajectories(4.5, 5, 5, 0, 0).is_err());
    }

    #[test]
    fn filter_matches_label_frequency_and_rejects_absent_labels() {
        let ds = two_class_toy();
        let zeros = filter_by_label(&ds, 0).unwrap();
        assert_eq!(zeros.len(), ds.labels.iter().filter(|l| **l == 0).count());
        assert!(filter_by_label(&ds, 9).is_err());
    }

    #[test]
    fn subsample_is_a_seeded_permutation() {
        let ds = two_class_toy();
        let all = subsample(&ds, ds.len(), 3).unwrap();
        let mut seen: Vec<&[f64]> = all.samples.iter().map(|s| s.values()).collect();
        let mut orig: Vec<&[f64]> = ds.samples.iter().map(|s| s.values()).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, orig);

        let a = subsample(&ds, 3, 11).unwrap();
        let b = subsample(&ds, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(subsample(&ds, ds.len() + 1, 0).is_err());
    }

    #[test]
    fn cache_round_trips_bit_exactly() {
        let ds = two_class_toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.cache");
        ds.write_cache(&path).unwrap();
        let back = LabeledDataset::read_cache(&path).unwrap();
        assert_eq!(back, ds);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn cache_refuses_version_drift() {
        let ds = two_class_toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.cache");
        ds.write_cache(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 99;
        fs::write(&path, bytes).unwrap();
        let err = LabeledDataset::read_cache(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn split_fraction_is_deterministic_and_partitions() {
        let ds = two_class_toy();
        let (tr, te) = split_fraction(&ds, 0.75, 5).unwrap();
        assert_eq!(tr.len() + te.len(), ds.len());
        let (tr2, _) = split_fraction(&ds, 0.75, 5).unwrap();
        assert_eq!(tr, tr2);
    }

    fn two_class_toy() -> LabeledDataset {
        let samples = (0..8)
            .map(|i| FeatureVector::new(vec![i as f64 / 7.0, 1.0 - i as f64 / 7.0]).unwrap())
            .collect();
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        LabeledDataset::new(samples, labels, "toy".into(), None).unwrap()
    }
}
