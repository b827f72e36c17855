//! Matrix product states: construction, canonical form, log-domain
//! contraction, exact superpositions, and transfer-matrix spectra.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GtnError, Result};
use crate::logamp::LogAmplitude;
use crate::tensor::{lq_pos, qr_pos, svd_trunc, SiteTensor};

/// Tolerance for the isometry condition of canonical-form tensors.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// Largest number of product states accepted by [`Mps::superposition`];
/// bounds the `O(M d N^2)` working memory of the exact construction.
pub const MAX_SUPERPOSITION: usize = 4096;

/// Relative singular-value threshold for exact-rank compression.
const SVD_RTOL: f64 = 1e-12;

/// A product state: one unit-norm vector of length `d` per site.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    vectors: Vec<Vec<f64>>,
}

impl ProductState {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(GtnError::param("product state needs at least one site"));
        }
        let d = vectors[0].len();
        if d == 0 {
            return Err(GtnError::param("site vectors must be non-empty"));
        }
        for (m, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(GtnError::param(format!(
                    "site {m} has dimension {} but site 0 has {d}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GtnError::param(format!("site {m} has non-finite entries")));
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(GtnError::param(format!(
                    "site {m} has norm {norm}, expected 1 within 1e-12"
                )));
            }
        }
        Ok(ProductState { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phys_dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn site(&self, m: usize) -> &[f64] {
        &self.vectors[m]
    }

    /// `<self|other>` as a product of per-site dot products, in log form.
    pub fn overlap(&self, other: &ProductState) -> Result<LogAmplitude> {
        if self.len() != other.len() || self.phys_dim() != other.phys_dim() {
            return Err(GtnError::param("product states differ in shape"));
        }
        let mut acc = LogAmplitude::from_value(1.0);
        for (a, b) in self.vectors.iter().zip(&other.vectors) {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            acc = acc.mul(&LogAmplitude::from_value(dot));
            if acc.is_zero() {
                return Ok(LogAmplitude::ZERO);
            }
        }
        Ok(acc)
    }
}

/// A matrix product state over `M` sites of physical dimension `d`.
///
/// Boundary bonds have dimension 1 and adjacent sites agree on their shared
/// bond. `canonical_center = Some(c)` records that sites left of `c` are left
/// isometries, sites right of `c` are right isometries, and site `c` carries
/// the norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    sites: Vec<SiteTensor>,
    canonical_center: Option<usize>,
}

impl Mps {
    pub fn new(sites: Vec<SiteTensor>) -> Result<Self> {
        if sites.is_empty() {
            return Err(GtnError::param("an MPS needs at least one site"));
        }
        let d = sites[0].phys_dim();
        if sites.iter().any(|s| s.phys_dim() != d) {
            return Err(GtnError::param("all sites must share the physical dimension"));
        }
        if sites[0].left_dim() != 1 || sites[sites.len() - 1].right_dim() != 1 {
            return Err(GtnError::param("boundary bonds must have dimension 1"));
        }
        for m in 0..sites.len() - 1 {
            if sites[m].right_dim() != sites[m + 1].left_dim() {
                return Err(GtnError::param(format!(
                    "bond mismatch between sites {m} and {}: {} vs {}",
                    m + 1,
                    sites[m].right_dim(),
                    sites[m + 1].left_dim()
                )));
            }
        }
        if sites.iter().any(|s| !s.is_finite()) {
            return Err(GtnError::param("site tensors contain non-finite entries"));
        }
        Ok(Mps {
            sites,
            canonical_center: None,
        })
    }

    pub(crate) fn from_parts_unchecked(sites: Vec<SiteTensor>, center: Option<usize>) -> Self {
        Mps {
            sites,
            canonical_center: center,
        }
    }

    /// Random MPS with i.i.d. standard-normal entries, right-canonicalized and
    /// normalized. Bond dimensions are capped at `min(chi, d^m, d^(M-m))` so no
    /// bond exceeds what the surrounding Hilbert space supports.
    pub fn random(m_sites: usize, d: usize, chi: usize, seed: u64) -> Result<Self> {
        if m_sites < 2 {
            return Err(GtnError::param("random MPS needs at least 2 sites"));
        }
        if d < 2 {
            return Err(GtnError::param("physical dimension must be at least 2"));
        }
        if chi < 1 {
            return Err(GtnError::param("bond dimension must be at least 1"));
        }
        let bonds = bond_caps(m_sites, d, chi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sites = Vec::with_capacity(m_sites);
        for m in 0..m_sites {
            let (l, r) = (bonds[m], bonds[m + 1]);
            let mut t = SiteTensor::zeros(d, l, r);
            for s in 0..d {
                for a in 0..l {
                    for b in 0..r {
                        t.set(s, a, b, StandardNormal.sample(&mut rng));
                    }
                }
            }
            sites.push(t);
        }
        Mps::new(sites)?.canonicalize()
    }

    /// Writes a product state as a bond-dimension-1 MPS.
    pub fn from_product(state: &ProductState) -> Self {
        let d = state.phys_dim();
        let sites = (0..state.len())
            .map(|m| {
                let phi = state.site(m);
                let mats = (0..d)
                    .map(|s| DMatrix::from_element(1, 1, phi[s]))
                    .collect();
                SiteTensor::from_mats(mats).expect("slices share shape")
            })
            .collect();
        Mps {
            sites,
            canonical_center: Some(state.len() - 1),
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn phys_dim(&self) -> usize {
        self.sites[0].phys_dim()
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.canonical_center
    }

    /// Bond dimensions including the trivial boundaries: `M + 1` values.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.len() + 1);
        dims.push(1);
        for s in &self.sites {
            dims.push(s.right_dim());
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.sites.iter().map(SiteTensor::param_count).sum()
    }

    /// Replaces one site tensor; clears canonical metadata.
    pub fn with_site(&self, m: usize, tensor: SiteTensor) -> Result<Self> {
        if m >= self.len() {
            return Err(GtnError::param(format!("site index {m} out of range")));
        }
        let mut sites = self.sites.clone();
        sites[m] = tensor;
        Mps::new(sites)
    }

    /// Gauge-transforms to canonical form with the orthogonality center on the
    /// right end (site `M-1`) and normalizes. The represented state is
    /// unchanged up to normalization.
    pub fn canonicalize(&self) -> Result<Self> {
        self.canonicalize_to(self.len() - 1)
    }

    /// Canonical form with the center at an arbitrary site.
    pub fn canonicalize_to(&self, center: usize) -> Result<Self> {
        if center >= self.len() {
            return Err(GtnError::param(format!("center {center} out of range")));
        }
        let d = self.phys_dim();
        let mut sites = self.sites.clone();
        // Each carry factor is rescaled to unit Frobenius norm before being
        // absorbed; only the overall scale changes, which the final
        // normalization removes, and chains of any length stay in range.
        for m in 0..center {
            let (q, mut r) = qr_pos(&sites[m].unfold_left());
            let z = r.norm();
            if !z.is_finite() {
                return Err(GtnError::numeric(format!(
                    "non-finite values while canonicalizing site {m}"
                )));
            }
            if z == 0.0 {
                return Err(GtnError::numeric("cannot canonicalize the zero state"));
            }
            r.unscale_mut(z);
            sites[m] = SiteTensor::fold_left(&q, d);
            sites[m + 1].absorb_left(&r);
        }
        for m in (center + 1..self.len()).rev() {
            let (mut l, q) = lq_pos(&sites[m].unfold_right());
            let z = l.norm();
            if !z.is_finite() {
                return Err(GtnError::numeric(format!(
                    "non-finite values while canonicalizing site {m}"
                )));
            }
            if z == 0.0 {
                return Err(GtnError::numeric("cannot canonicalize the zero state"));
            }
            l.unscale_mut(z);
            sites[m] = SiteTensor::fold_right(&q, d);
            sites[m - 1].absorb_right(&l);
        }
        let norm = sites[center].norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(GtnError::numeric("cannot canonicalize the zero state"));
        }
        if !norm.is_finite() {
            return Err(GtnError::numeric("state norm overflowed during canonicalization"));
        }
        sites[center].scale(1.0 / norm);
        Ok(Mps {
            sites,
            canonical_center: Some(center),
        })
    }

    /// Checks the canonical-form invariants at the recorded center.
    pub fn verify_canonical(&self, tol: f64) -> bool {
        let Some(c) = self.canonical_center else {
            return false;
        };
        self.sites[..c].iter().all(|s| s.is_left_isometry(tol))
            && self.sites[c + 1..].iter().all(|s| s.is_right_isometry(tol))
            && (self.sites[c].norm_sqr().sqrt() - 1.0).abs() <= tol
    }

    /// `<self|other>` by left-to-right boundary contraction with per-site
    /// renormalization; never over- or underflows regardless of `M`.
    pub fn log_overlap(&self, other: &Mps) -> Result<LogAmplitude> {
        if self.len() != other.len() || self.phys_dim() != other.phys_dim() {
            return Err(GtnError::param(format!(
                "overlap shape mismatch: ({}, {}) vs ({}, {})",
                self.len(),
                self.phys_dim(),
                other.len(),
                other.phys_dim()
            )));
        }
        // Real tensors make the overlap symmetric; contracting the pair in a
        // content-determined order makes it exactly symmetric in floating
        // point as well.
        let (a, b) = if content_le(self, other) {
            (self, other)
        } else {
            (other, self)
        };
        let d = a.phys_dim();
        let mut v = DMatrix::from_element(1, 1, 1.0);
        let mut acc = 0.0;
        for m in 0..a.len() {
            let (ta, tb) = (&a.sites[m], &b.sites[m]);
            let mut next = DMatrix::zeros(ta.right_dim(), tb.right_dim());
            for s in 0..d {
                next += ta.mat(s).transpose() * &v * tb.mat(s);
            }
            let z = next.norm();
            if z == 0.0 {
                return Ok(LogAmplitude::ZERO);
            }
            if !z.is_finite() {
                return Err(GtnError::numeric(format!(
                    "non-finite boundary vector at site {m}"
                )));
            }
            next.unscale_mut(z);
            acc += z.ln();
            v = next;
        }
        let s = v[(0, 0)];
        Ok(LogAmplitude::new(if s > 0.0 { 1 } else { -1 }, acc))
    }

    /// `ln <self|self>`, always finite for a nonzero state.
    pub fn log_norm_sqr(&self) -> Result<f64> {
        let la = self.log_overlap(self)?;
        if la.is_zero() {
            return Err(GtnError::numeric("zero-norm state"));
        }
        Ok(la.log_mag)
    }

    /// `<x|self>` for a product state `x`, with the same stability contract as
    /// [`Mps::log_overlap`].
    pub fn log_amplitude(&self, x: &ProductState) -> Result<LogAmplitude> {
        if self.len() != x.len() || self.phys_dim() != x.phys_dim() {
            return Err(GtnError::param(format!(
                "amplitude shape mismatch: ({}, {}) vs ({}, {})",
                self.len(),
                self.phys_dim(),
                x.len(),
                x.phys_dim()
            )));
        }
        let mut u = DMatrix::from_element(1, 1, 1.0);
        let mut acc = 0.0;
        for m in 0..self.len() {
            let eff = self.sites[m].phys_apply(x.site(m));
            u *= eff;
            let z = u.norm();
            if z == 0.0 {
                return Ok(LogAmplitude::ZERO);
            }
            if !z.is_finite() {
                return Err(GtnError::numeric(format!(
                    "non-finite boundary vector at site {m}"
                )));
            }
            u.unscale_mut(z);
            acc += z.ln();
        }
        let s = u[(0, 0)];
        Ok(LogAmplitude::new(if s > 0.0 { 1 } else { -1 }, acc))
    }

    /// The normalized sum of `N` product states as a canonical MPS.
    ///
    /// The bond dimension at cut `m` never exceeds `min(N, d^m, d^(M-m))`; the
    /// final division is by the true norm of the sum, which equals `sqrt(N)`
    /// only when the states are mutually orthogonal.
    pub fn superposition(states: &[ProductState]) -> Result<Self> {
        if states.is_empty() {
            return Err(GtnError::param("superposition of an empty state list"));
        }
        if states.len() > MAX_SUPERPOSITION {
            return Err(GtnError::param(format!(
                "superposition capped at {MAX_SUPERPOSITION} states, got {}",
                states.len()
            )));
        }
        let n = states.len();
        let m_sites = states[0].len();
        let d = states[0].phys_dim();
        if states
            .iter()
            .any(|s| s.len() != m_sites || s.phys_dim() != d)
        {
            return Err(GtnError::param("superposition states differ in shape"));
        }

        // Left-to-right construction of the exact rank-N boundary form, with
        // blockwise-SVD compression after every site so the carry never grows
        // beyond (numerical rank) x N.
        let mut carry = DMatrix::from_element(1, n, 1.0);
        let mut sites = Vec::with_capacity(m_sites);
        for m in 0..m_sites {
            let k = carry.nrows();
            let t = DMatrix::from_fn(d * k, n, |row, col| {
                carry[(row % k, col)] * states[col].site(m)[row / k]
            });
            if m + 1 < m_sites {
                let svd = svd_trunc(&t, SVD_RTOL)?;
                if svd.sigma.is_empty() {
                    return Err(GtnError::numeric("superposition sums to the zero state"));
                }
                sites.push(SiteTensor::fold_left(&svd.u, d));
                let mut next = svd.v_t;
                for (row, s) in svd.sigma.iter().enumerate() {
                    next.row_mut(row).scale_mut(*s);
                }
                carry = next;
            } else {
                let col = &t * DMatrix::from_element(n, 1, 1.0);
                sites.push(SiteTensor::fold_left(&col, d));
            }
        }

        // Right-to-left then left-to-right SVD passes cap the right-edge bonds
        // at d^(M-m), reduce every bond to the exact Schmidt rank, and leave
        // the orthogonality center on the right end.
        let mut mps = Mps {
            sites,
            canonical_center: None,
        };
        mps.compress_sweep()?;
        let norm = mps.sites[m_sites - 1].norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GtnError::numeric("superposition sums to the zero state"));
        }
        mps.sites[m_sites - 1].scale(1.0 / norm);
        mps.canonical_center = Some(m_sites - 1);
        Ok(mps)
    }

    fn compress_sweep(&mut self) -> Result<()> {
        let d = self.phys_dim();
        let m_sites = self.len();
        for m in (1..m_sites).rev() {
            let svd = svd_trunc(&self.sites[m].unfold_right(), SVD_RTOL)?;
            if svd.sigma.is_empty() {
                return Err(GtnError::numeric("compression hit a zero tensor"));
            }
            self.sites[m] = SiteTensor::fold_right(&svd.v_t, d);
            let mut carry = svd.u;
            for (col, s) in svd.sigma.iter().enumerate() {
                carry.column_mut(col).scale_mut(*s);
            }
            self.sites[m - 1].absorb_right(&carry);
        }
        for m in 0..m_sites - 1 {
            let svd = svd_trunc(&self.sites[m].unfold_left(), SVD_RTOL)?;
            if svd.sigma.is_empty() {
                return Err(GtnError::numeric("compression hit a zero tensor"));
            }
            self.sites[m] = SiteTensor::fold_left(&svd.u, d);
            let mut carry = svd.v_t;
            for (row, s) in svd.sigma.iter().enumerate() {
                carry.row_mut(row).scale_mut(*s);
            }
            self.sites[m + 1].absorb_left(&carry);
        }
        Ok(())
    }

    /// `sum_x P(x)` over the full discrete sample grid whose per-site Gram
    /// matrix is `gram`, contracted in log-stabilized form.
    ///
    /// With `gram = I` this is `<Psi|Psi>`.
    pub fn sum_probability(&self, gram: &DMatrix<f64>) -> Result<f64> {
        let d = self.phys_dim();
        if gram.nrows() != d || gram.ncols() != d {
            return Err(GtnError::param(format!(
                "gram matrix must be {d}x{d}, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let scale = gram.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..d {
            for j in 0..d {
                if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-10 * scale {
                    return Err(GtnError::param("gram matrix must be symmetric"));
                }
            }
        }
        let eigs = gram.clone().symmetric_eigen().eigenvalues;
        if eigs.iter().any(|l| *l < -1e-10 * scale) {
            return Err(GtnError::param("gram matrix must be positive semidefinite"));
        }

        let mut v = DMatrix::from_element(1, 1, 1.0);
        let mut acc = 0.0;
        for t in &self.sites {
            let mut next = DMatrix::zeros(t.right_dim(), t.right_dim());
            for sp in 0..d {
                let tmp = &v * t.mat(sp);
                for s in 0..d {
                    let g = gram[(s, sp)];
                    if g != 0.0 {
                        next += t.mat(s).transpose() * &tmp * g;
                    }
                }
            }
            let z = next.norm();
            if z == 0.0 {
                return Ok(0.0);
            }
            if !z.is_finite() {
                return Err(GtnError::numeric("non-finite contraction in sum_probability"));
            }
            next.unscale_mut(z);
            acc += z.ln();
            v = next;
        }
        Ok(v[(0, 0)].signum() * acc.exp())
    }
}

/// Bond caps `min(chi, d^m, d^(M-m))` for every cut, with saturating powers.
pub(crate) fn bond_caps(m_sites: usize, d: usize, chi: usize) -> Vec<usize> {
    let pow_capped = |e: usize| -> usize {
        let mut p = 1usize;
        for _ in 0..e {
            p = p.saturating_mul(d);
            if p >= chi {
                return chi;
            }
        }
        p
    };
    (0..=m_sites)
        .map(|c| chi.min(pow_capped(c)).min(pow_capped(m_sites - c)))
        .collect()
}

/// Largest-modulus eigenvalue of the transfer matrix
/// `T[(a,a'),(b,b')] = sum_s A[s][a,b] B[s][a',b']`.
///
/// Small problems (total dimension <= 64, i.e. chi <= 8) go through a dense
/// eigensolver; larger ones use power iteration with tolerance 1e-10 and at
/// most 10^4 iterations.
pub fn transfer_dominant_eig(a: &SiteTensor, b: &SiteTensor) -> Result<f64> {
    if a.phys_dim() != b.phys_dim() {
        return Err(GtnError::param("transfer tensors differ in physical dimension"));
    }
    if a.left_dim() != a.right_dim() || b.left_dim() != b.right_dim() {
        return Err(GtnError::param("transfer tensors need square bond dimensions"));
    }
    let (ca, cb) = (a.left_dim(), b.left_dim());
    let dim = ca * cb;
    if dim <= 64 {
        let t = DMatrix::from_fn(dim, dim, |row, col| {
            let (ai, api) = (row / cb, row % cb);
            let (bi, bpi) = (col / cb, col % cb);
            (0..a.phys_dim())
                .map(|s| a.get(s, ai, bi) * b.get(s, api, bpi))
                .sum()
        });
        let eigs = t.complex_eigenvalues();
        return Ok(eigs.iter().map(|e| e.norm()).fold(0.0, f64::max));
    }

    let mut v = DMatrix::from_fn(ca, cb, |i, j| 1.0 + 1e-3 * (i * cb + j) as f64);
    let z = v.norm();
    v.unscale_mut(z);
    let mut lambda_prev = f64::NAN;
    let mut gap = f64::NAN;
    for _ in 0..10_000 {
        let mut w = DMatrix::zeros(ca, cb);
        for s in 0..a.phys_dim() {
            w += a.mat(s) * &v * b.mat(s).transpose();
        }
        let lambda = w.norm();
        if !lambda.is_finite() {
            return Err(GtnError::numeric("transfer power iteration overflowed"));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        w.unscale_mut(lambda);
        v = w;
        gap = (lambda - lambda_prev).abs();
        if gap <= 1e-10 {
            return Ok(lambda);
        }
        lambda_prev = lambda;
    }
    Err(GtnError::numeric(format!(
        "transfer power iteration did not converge within 10^4 steps; last gap {gap:.3e}"
    )))
}

/// Deterministic content order used to make `log_overlap` exactly symmetric.
fn content_le(a: &Mps, b: &Mps) -> bool {
    let key = |m: &Mps| (m.len(), m.phys_dim(), m.bond_dims());
    match key(a).cmp(&key(b)) {
        Ordering::Less => return true,
        Ordering::Greater => return false,
        Ordering::Equal => {}
    }
    for (ta, tb) in a.sites.iter().zip(&b.sites) {
        for (x, y) in ta.entries_row_major().zip(tb.entries_row_major()) {
            match x.total_cmp(&y) {
                Ordering::Less => return true,
                Ordering::Greater => return false,
                Ordering::Equal => {}
            }
        }
    }
    true
}
