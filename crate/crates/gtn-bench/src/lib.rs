//! Shared input generators for the criterion benchmarks.

use gtn_core::qfm::{qfm_encode, FeatureVector, QfmConfig};
use gtn_core::ProductState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random unit-norm product states.
pub fn random_states(m: usize, count: usize, seed: u64) -> Vec<ProductState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let vectors = (0..m)
                .map(|_| {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
                    vec![t.cos(), t.sin()]
                })
                .collect();
            ProductState::new(vectors).unwrap()
        })
        .collect()
}

/// Distinct binary patterns encoded at theta = 1.
pub fn binary_states(m: usize, count: usize, seed: u64) -> Vec<ProductState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = QfmConfig::new(1.0, 1).unwrap();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let bits: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8)).collect();
        if !seen.insert(bits.clone()) {
            continue;
        }
        let fv = FeatureVector::new(bits.iter().map(|b| *b as f64).collect()).unwrap();
        out.push(qfm_encode(&fv, &cfg).unwrap());
    }
    out
}
