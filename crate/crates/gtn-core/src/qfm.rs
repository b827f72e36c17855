//! Quantum feature maps: scalar features in `[0,1]` become unit vectors on
//! two-level sites via `(cos(theta*pi*x/2), sin(theta*pi*x/2))`, optionally
//! replicated over `H` spins per feature.

use nalgebra::DMatrix;

use crate::error::{GtnError, Result};
use crate::mps::ProductState;

/// A raw feature vector with every value in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(GtnError::param("feature vector must be non-empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(GtnError::param(format!(
                "feature {i} has value {v}, outside [0,1]"
            )));
        }
        Ok(FeatureVector { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Feature-map hyperparameters: orthogonality knob `theta` in `(0,1]` and
/// spin-replication count `H >= 1` (`H = 1` is the plain map).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QfmConfig {
    theta: f64,
    h: usize,
}

impl QfmConfig {
    pub fn new(theta: f64, h: usize) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(GtnError::param(format!(
                "theta must lie in (0,1], got {theta}"
            )));
        }
        if h < 1 {
            return Err(GtnError::param("spin replication H must be at least 1"));
        }
        Ok(QfmConfig { theta, h })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn h(&self) -> usize {
        self.h
    }
}

/// `(cos(pi t), sin(pi t))` with the quarter-turn endpoints exact, so that
/// `theta = 1` binary features map to exact basis vectors and distinct binary
/// samples are exactly orthogonal.
fn unit_at(t: f64) -> [f64; 2] {
    if t == 0.0 {
        [1.0, 0.0]
    } else if t == 0.5 {
        [0.0, 1.0]
    } else {
        let a = std::f64::consts::PI * t;
        [a.cos(), a.sin()]
    }
}

/// Per-site embedding of one scalar feature.
pub fn site_vector(x: f64, theta: f64) -> [f64; 2] {
    unit_at(theta * x * 0.5)
}

/// Encodes a feature vector into a product state with `M * H` sites; the site
/// vector for feature `m` appears `H` times in a row.
pub fn qfm_encode(x: &FeatureVector, cfg: &QfmConfig) -> Result<ProductState> {
    let mut vectors = Vec::with_capacity(x.len() * cfg.h);
    for (i, &v) in x.values().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(GtnError::param(format!(
                "feature {i} has value {v}, outside [0,1]"
            )));
        }
        let site = site_vector(v, cfg.theta).to_vec();
        for _ in 0..cfg.h {
            vectors.push(site.clone());
        }
    }
    ProductState::new(vectors)
}

/// Per-site Gram matrix `G = sum_j phi(j/(D-1)) phi(j/(D-1))^T` over the
/// uniform feature grid with `D` levels; symmetric positive semidefinite by
/// construction. Feeds the `sum_x P(x)` normalization audit.
pub fn site_gram(cfg: &QfmConfig, grid_levels: usize) -> Result<DMatrix<f64>> {
    if grid_levels < 2 {
        return Err(GtnError::param("grid needs at least 2 levels"));
    }
    let mut g = DMatrix::zeros(2, 2);
    for j in 0..grid_levels {
        let x = j as f64 / (grid_levels - 1) as f64;
        let phi = site_vector(x, cfg.theta);
        for a in 0..2 {
            for b in 0..2 {
                g[(a, b)] += phi[a] * phi[b];
            }
        }
    }
    Ok(g)
}

/// Maps each value to 0 below the threshold and 1 at or above it (ties map
/// up).
pub fn binarize(x: &FeatureVector, threshold: f64) -> Result<FeatureVector> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(GtnError::param(format!(
            "binarization threshold must lie in (0,1), got {threshold}"
        )));
    }
    FeatureVector::new(
        x.values()
            .iter()
            .map(|&v| if v < threshold { 0.0 } else { 1.0 })
            .collect(),
    )
}

/// Extracts the central `side x side` block of a row-major `H x W` image and
/// flattens it row-major; for even remainders the top-left of the two
/// centered positions is chosen.
pub fn crop_center(pixels: &[f64], height: usize, width: usize, side: usize) -> Result<FeatureVector> {
    if pixels.len() != height * width {
        return Err(GtnError::param(format!(
            "image buffer has {} values, expected {height}x{width}",
            pixels.len()
        )));
    }
    if side == 0 || side > height.min(width) {
        return Err(GtnError::param(format!(
            "crop side {side} does not fit a {height}x{width} image"
        )));
    }
    let top = (height - side) / 2;
    let left = (width - side) / 2;
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            out.push(pixels[(top + r) * width + (left + c)]);
        }
    }
    FeatureVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn endpoint_features_map_to_exact_basis_vectors() {
        let cfg = QfmConfig::new(1.0, 1).unwrap();
        let p = qfm_encode(&fv(&[0.0, 1.0]), &cfg).unwrap();
        assert_eq!(p.site(0), &[1.0, 0.0]);
        assert_eq!(p.site(1), &[0.0, 1.0]);
    }

    #[test]
    fn distinct_binary_samples_are_exactly_orthogonal() {
        let cfg = QfmConfig::new(1.0, 1).unwrap();
        let a = qfm_encode(&fv(&[0.0, 1.0, 1.0, 0.0]), &cfg).unwrap();
        let b = qfm_encode(&fv(&[0.0, 1.0, 0.0, 0.0]), &cfg).unwrap();
        assert!(a.overlap(&b).unwrap().is_zero());
        assert_eq!(a.overlap(&a).unwrap().sign, 1);
    }

    #[test]
    fn replication_repeats_sites_and_powers_overlaps() {
        let cfg3 = QfmConfig::new(1.0, 3).unwrap();
        let p = qfm_encode(&fv(&[0.5]), &cfg3).unwrap();
        assert_eq!(p.len(), 3);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for m in 0..3 {
            assert_relative_eq!(p.site(m)[0], half, epsilon = 1e-15);
            assert_relative_eq!(p.site(m)[1], half, epsilon = 1e-15);
        }

        let cfg1 = QfmConfig::new(0.7, 1).unwrap();
        let cfgh = QfmConfig::new(0.7, 3).unwrap();
        let x = fv(&[0.2, 0.9]);
        let y = fv(&[0.6, 0.3]);
        let base = qfm_encode(&x, &cfg1)
            .unwrap()
            .overlap(&qfm_encode(&y, &cfg1).unwrap())
            .unwrap();
        let rep = qfm_encode(&x, &cfgh)
            .unwrap()
            .overlap(&qfm_encode(&y, &cfgh).unwrap())
            .unwrap();
        assert_relative_eq!(rep.log_mag, 3.0 * base.log_mag, epsilon = 1e-12);
    }

    #[test]
    fn encode_rejects_out_of_range_values() {
        assert!(FeatureVector::new(vec![0.5, 1.2]).is_err());
        assert!(FeatureVector::new(vec![-0.1]).is_err());
    }

    #[test]
    fn gram_at_theta_one_binary_grid_is_identity() {
        let cfg = QfmConfig::new(1.0, 1).unwrap();
        let g = site_gram(&cfg, 2).unwrap();
        assert_eq!(g, DMatrix::identity(2, 2));
    }

    #[test]
    fn gram_at_theta_half_matches_outer_products() {
        let cfg = QfmConfig::new(0.5, 1).unwrap();
        let g = site_gram(&cfg, 2).unwrap();
        // phi(0) = (1,0); phi(1) = (cos(pi/4), sin(pi/4)).
        let c = (std::f64::consts::PI / 4.0).cos();
        let s = (std::f64::consts::PI / 4.0).sin();
        assert_relative_eq!(g[(0, 0)], 1.0 + c * c, epsilon = 1e-15);
        assert_relative_eq!(g[(0, 1)], c * s, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 0)], c * s, epsilon = 1e-15);
        assert_relative_eq!(g[(1, 1)], s * s, epsilon = 1e-15);
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        for theta in [0.3, 0.5, 1.0] {
            let cfg = QfmConfig::new(theta, 1).unwrap();
            let g = site_gram(&cfg, 5).unwrap();
            let eigs = g.symmetric_eigen().eigenvalues;
            assert!(eigs.iter().all(|l| *l >= -1e-12));
        }
    }

    #[test]
    fn binarize_thresholds_with_ties_up() {
        let b = binarize(&fv(&[0.2, 0.8]), 0.5).unwrap();
        assert_eq!(b.values(), &[0.0, 1.0]);
        let b = binarize(&fv(&[0.0, 0.0]), 0.5).unwrap();
        assert_eq!(b.values(), &[0.0, 0.0]);
        let b = binarize(&fv(&[0.5]), 0.5).unwrap();
        assert_eq!(b.values(), &[1.0]);
    }

    #[test]
    fn crop_center_selects_the_middle_block() {
        let img: Vec<f64> = (0..16).map(|v| v as f64 / 15.0).collect();
        let c = crop_center(&img, 4, 4, 2).unwrap();
        let expect: Vec<f64> = [5.0, 6.0, 9.0, 10.0].iter().map(|v| v / 15.0).collect();
        assert_eq!(c.values(), &expect[..]);

        let full: Vec<f64> = vec![0.25; 28 * 28];
        assert_eq!(crop_center(&full, 28, 28, 28).unwrap().len(), 784);

        // 28x28 cropped to 8 keeps rows/cols 10..=17.
        let img: Vec<f64> = (0..28 * 28).map(|v| (v % 997) as f64 / 996.0).collect();
        let c = crop_center(&img, 28, 28, 8).unwrap();
        assert_eq!(c.values()[0], img[10 * 28 + 10]);
        assert_eq!(c.values()[63], img[17 * 28 + 17]);
    }

    #[test]
    fn crop_center_rejects_oversized_side() {
        let img = vec![0.0; 16];
        assert!(crop_center(&img, 4, 4, 5).is_err());
    }

    #[test]
    fn crop_composition_matches_direct_crop() {
        let img: Vec<f64> = (0..28 * 28).map(|v| (v % 255) as f64 / 254.0).collect();
        let big = crop_center(&img, 28, 28, 20).unwrap();
        let nested = crop_center(big.values(), 20, 20, 8).unwrap();
        let direct = crop_center(&img, 28, 28, 8).unwrap();
        assert_eq!(nested, direct);
    }
}
