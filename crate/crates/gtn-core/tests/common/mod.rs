//! Brute-force oracles shared by the integration tests.
//!
//! Everything here expands states into full `d^M` vectors by direct index
//! iteration and plain arithmetic, independent of the contraction paths under
//! test.
#![allow(dead_code)]

use gtn_core::{Mps, ProductState};

/// Expands an MPS into its full state vector, site 0 most significant.
pub fn state_vector(mps: &Mps) -> Vec<f64> {
    let m = mps.len();
    let d = mps.phys_dim();
    let total = d.pow(m as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut digits = vec![0usize; m];
        for site in (0..m).rev() {
            digits[site] = rem % d;
            rem /= d;
        }
        let mut v = vec![1.0f64];
        for (site, &s) in digits.iter().enumerate() {
            let mat = mps.sites()[site].mat(s);
            let mut next = vec![0.0; mat.ncols()];
            for (b, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (a, va) in v.iter().enumerate() {
                    acc += va * mat[(a, b)];
                }
                *slot = acc;
            }
            v = next;
        }
        out.push(v[0]);
    }
    out
}

/// Expands a product state into its full tensor-product vector.
pub fn product_vector(x: &ProductState) -> Vec<f64> {
    let m = x.len();
    let d = x.phys_dim();
    let total = d.pow(m as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut amp = 1.0;
        for site in (0..m).rev() {
            amp *= x.site(site)[rem % d];
            rem /= d;
        }
        out.push(amp);
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A random product state with normally distributed site vectors.
pub fn random_product_state(m: usize, d: usize, seed: u64) -> ProductState {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vectors = (0..m)
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = norm(&v);
                if n > 1e-3 {
                    return v.iter().map(|x| x / n).collect();
                }
            }
        })
        .collect();
    ProductState::new(vectors).unwrap()
}
