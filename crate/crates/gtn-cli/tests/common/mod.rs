//! Deterministic synthetic image data in IDX format for integration tests:
//! two visually distinct 28x28 grayscale classes (a top-left blob with
//! horizontal stripes vs. a bottom-right blob with vertical stripes), with
//! per-sample jitter in position, amplitude, phase, and pixel noise.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SIDE: usize = 28;

// Class 0 is dark with horizontal stripe bands, class 1 bright with vertical
// bands; the mean levels separate the classes at every pixel (inter-class
// penalties stay roughly constant per pixel), while detail noise concentrated
// in the image center makes outer pixels cheaper to model (intra-class NLL
// bends with growing crops).
fn sample_image(class: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let base = if class == 0 { 0.35 } else { 0.65 };
    let amp: f64 = rng.random_range(0.88..1.12);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mid = (SIDE as f64 - 1.0) / 2.0;

    let mut out = Vec::with_capacity(SIDE * SIDE);
    for r in 0..SIDE {
        for c in 0..SIDE {
            let stripe_coord = if class == 0 { r as f64 } else { c as f64 };
            let stripes = 0.2 * (std::f64::consts::TAU * stripe_coord / 7.0 + phase).sin();
            let dr = r as f64 - mid;
            let dc = c as f64 - mid;
            let sigma = 0.03 + 0.09 * (-(dr * dr + dc * dc) / (2.0 * 49.0)).exp();
            let noise: f64 = rng.random_range(-1.0..1.0) * sigma * 1.73;
            let v: f64 = (amp * (base + stripes) + noise).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

/// IDX image/label byte blobs with `n_per_class` samples per class,
/// interleaved 0,1,0,1,...
pub fn synth_idx_bytes(n_per_class: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;

    let mut images = Vec::with_capacity(16 + n * SIDE * SIDE);
    images.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    images.extend_from_slice(&(n as u32).to_be_bytes());
    images.extend_from_slice(&(SIDE as u32).to_be_bytes());
    images.extend_from_slice(&(SIDE as u32).to_be_bytes());

    let mut labels = Vec::with_capacity(8 + n);
    labels.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());

    for i in 0..n {
        let class = i % 2;
        images.extend_from_slice(&sample_image(class, &mut rng));
        labels.push(class as u8);
    }
    (images, labels)
}

/// Writes a synthetic IDX pair under `dir` and returns the two paths.
pub fn write_synth_idx(dir: &Path, n_per_class: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (images, labels) = synth_idx_bytes(n_per_class, seed);
    let ip = dir.join(format!("synth-{n_per_class}-{seed}-images.idx"));
    let lp = dir.join(format!("synth-{n_per_class}-{seed}-labels.idx"));
    std::fs::write(&ip, images).unwrap();
    std::fs::write(&lp, labels).unwrap();
    (ip, lp)
}
