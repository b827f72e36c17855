//! Rank-3 site tensors and the matrix factorizations used to move an
//! orthogonality center.
//!
//! A site tensor `A` with physical dimension `d` and bond dimensions
//! `(chi_left, chi_right)` is stored as `d` matrices of shape
//! `chi_left x chi_right`, one per physical index value. Contractions over a
//! chain of sites then reduce to ordinary matrix products.

use nalgebra::DMatrix;

use crate::error::{GtnError, Result};

/// One MPS site: `d` matrices of shape `chi_left x chi_right`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    mats: Vec<DMatrix<f64>>,
}

impl SiteTensor {
    pub fn from_mats(mats: Vec<DMatrix<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(GtnError::param("site tensor needs physical dimension >= 1"));
        }
        let (l, r) = (mats[0].nrows(), mats[0].ncols());
        if mats.iter().any(|m| m.nrows() != l || m.ncols() != r) {
            return Err(GtnError::param(
                "all physical slices of a site tensor must share bond dimensions",
            ));
        }
        Ok(SiteTensor { mats })
    }

    pub fn zeros(d: usize, left: usize, right: usize) -> Self {
        SiteTensor {
            mats: (0..d).map(|_| DMatrix::zeros(left, right)).collect(),
        }
    }

    pub fn phys_dim(&self) -> usize {
        self.mats.len()
    }

    pub fn left_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn right_dim(&self) -> usize {
        self.mats[0].ncols()
    }

    pub fn mat(&self, s: usize) -> &DMatrix<f64> {
        &self.mats[s]
    }

    pub fn mat_mut(&mut self, s: usize) -> &mut DMatrix<f64> {
        &mut self.mats[s]
    }

    pub fn get(&self, s: usize, a: usize, b: usize) -> f64 {
        self.mats[s][(a, b)]
    }

    pub fn set(&mut self, s: usize, a: usize, b: usize, v: f64) {
        self.mats[s][(a, b)] = v;
    }

    pub fn param_count(&self) -> usize {
        self.phys_dim() * self.left_dim() * self.right_dim()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum()
    }

    pub fn scale(&mut self, c: f64) {
        for m in &mut self.mats {
            *m *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mats.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    /// `sum_s phi[s] * A[s]`, the effective bond matrix once the physical
    /// index is contracted with a site vector.
    pub fn phys_apply(&self, phi: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.left_dim(), self.right_dim());
        for (s, m) in self.mats.iter().enumerate() {
            out.axpy_from_slice(phi[s], m);
        }
        out
    }

    /// Left-multiplies every slice by `m` (absorbs a carry into the left bond).
    pub fn absorb_left(&mut self, m: &DMatrix<f64>) {
        for slice in &mut self.mats {
            *slice = m * &*slice;
        }
    }

    /// Right-multiplies every slice by `m` (absorbs a carry into the right bond).
    pub fn absorb_right(&mut self, m: &DMatrix<f64>) {
        for slice in &mut self.mats {
            *slice = &*slice * m;
        }
    }

    /// Merges `(s, a_left)` into the row index: a `(d * chi_left) x chi_right`
    /// matrix with row index `s * chi_left + a_left`.
    pub fn unfold_left(&self) -> DMatrix<f64> {
        let (d, l, r) = (self.phys_dim(), self.left_dim(), self.right_dim());
        DMatrix::from_fn(d * l, r, |row, col| self.mats[row / l][(row % l, col)])
    }

    pub fn fold_left(m: &DMatrix<f64>, d: usize) -> Self {
        let l = m.nrows() / d;
        debug_assert_eq!(l * d, m.nrows());
        let mats = (0..d)
            .map(|s| DMatrix::from_fn(l, m.ncols(), |a, b| m[(s * l + a, b)]))
            .collect();
        SiteTensor { mats }
    }

    /// Merges `(s, a_right)` into the column index: a `chi_left x (d * chi_right)`
    /// matrix with column index `s * chi_right + a_right`.
    pub fn unfold_right(&self) -> DMatrix<f64> {
        let (d, l, r) = (self.phys_dim(), self.left_dim(), self.right_dim());
        DMatrix::from_fn(l, d * r, |row, col| self.mats[col / r][(row, col % r)])
    }

    pub fn fold_right(m: &DMatrix<f64>, d: usize) -> Self {
        let r = m.ncols() / d;
        debug_assert_eq!(r * d, m.ncols());
        let mats = (0..d)
            .map(|s| DMatrix::from_fn(m.nrows(), r, |a, b| m[(a, s * r + b)]))
            .collect();
        SiteTensor { mats }
    }

    /// `sum_s A[s]^T A[s] == I` within `tol`.
    pub fn is_left_isometry(&self, tol: f64) -> bool {
        let r = self.right_dim();
        let mut g = DMatrix::zeros(r, r);
        for m in &self.mats {
            g += m.transpose() * m;
        }
        gram_is_identity(&g, tol)
    }

    /// `sum_s A[s] A[s]^T == I` within `tol`.
    pub fn is_right_isometry(&self, tol: f64) -> bool {
        let l = self.left_dim();
        let mut g = DMatrix::zeros(l, l);
        for m in &self.mats {
            g += m * m.transpose();
        }
        gram_is_identity(&g, tol)
    }

    /// Entries in row-major `(s, a_left, a_right)` order.
    pub fn entries_row_major(&self) -> impl Iterator<Item = f64> + '_ {
        self.mats.iter().flat_map(|m| {
            (0..m.nrows()).flat_map(move |a| (0..m.ncols()).map(move |b| m[(a, b)]))
        })
    }
}

fn gram_is_identity(g: &DMatrix<f64>, tol: f64) -> bool {
    let n = g.nrows();
    (0..n).all(|i| (0..n).all(|j| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() <= tol))
}

trait AxpySlice {
    fn axpy_from_slice(&mut self, alpha: f64, other: &DMatrix<f64>);
}

impl AxpySlice for DMatrix<f64> {
    fn axpy_from_slice(&mut self, alpha: f64, other: &DMatrix<f64>) {
        self.zip_apply(other, |a, b| *a += alpha * b);
    }
}

/// Thin QR with the sign convention `diag(R) >= 0`, making the factorization
/// unique and the decomposition of an isometry the identity-producing one.
pub(crate) fn qr_pos(mat: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = mat.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let k = r.nrows().min(r.ncols());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).neg_mut();
            q.column_mut(j).neg_mut();
        }
    }
    (q, r)
}

/// Thin LQ with `diag(L) >= 0`: `mat = L * Q` with `Q` having orthonormal rows.
pub(crate) fn lq_pos(mat: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (qt, rt) = qr_pos(&mat.transpose());
    (rt.transpose(), qt.transpose())
}

pub(crate) struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

/// SVD truncated at `sigma > rel_tol * sigma_max`, computed blockwise over the
/// connected components of the nonzero pattern.
///
/// The blockwise pass matters for exactness: a matrix whose rows/columns split
/// into decoupled groups (e.g. the prefix channels of a superposition of
/// mutually orthogonal basis-encoded states) keeps exact zeros across groups,
/// so amplitudes that vanish by orthogonality stay exactly zero instead of
/// picking up `1e-16` SVD residue. Dense matrices form a single component and
/// take the ordinary path.
pub(crate) fn svd_trunc(mat: &DMatrix<f64>, rel_tol: f64) -> Result<TruncatedSvd> {
    let (nr, nc) = (mat.nrows(), mat.ncols());
    let mut uf = UnionFind::new(nr + nc);
    for i in 0..nr {
        for j in 0..nc {
            if mat[(i, j)] != 0.0 {
                uf.union(i, nr + j);
            }
        }
    }

    // Group rows and columns by component, skipping all-zero rows/columns.
    let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut comp_of_root = std::collections::HashMap::new();
    for i in 0..nr {
        if mat.row(i).iter().all(|v| *v == 0.0) {
            continue;
        }
        let root = uf.find(i);
        let idx = *comp_of_root.entry(root).or_insert_with(|| {
            comps.push((Vec::new(), Vec::new()));
            comps.len() - 1
        });
        comps[idx].0.push(i);
    }
    for j in 0..nc {
        if mat.column(j).iter().all(|v| *v == 0.0) {
            continue;
        }
        let root = uf.find(nr + j);
        let idx = *comp_of_root.entry(root).or_insert_with(|| {
            comps.push((Vec::new(), Vec::new()));
            comps.len() - 1
        });
        comps[idx].1.push(j);
    }

    // SVD per component; collect (sigma, component, index-within-component).
    struct BlockSvd {
        rows: Vec<usize>,
        cols: Vec<usize>,
        u: DMatrix<f64>,
        v_t: DMatrix<f64>,
    }
    let mut blocks = Vec::with_capacity(comps.len());
    let mut spectrum: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, (rows, cols)) in comps.iter().enumerate() {
        let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| mat[(rows[i], cols[j])]);
        let svd = sub.svd(true, true);
        let u = svd.u.ok_or_else(|| GtnError::numeric("SVD failed to produce U"))?;
        let v_t = svd
            .v_t
            .ok_or_else(|| GtnError::numeric("SVD failed to produce V^T"))?;
        for (k, s) in svd.singular_values.iter().enumerate() {
            spectrum.push((*s, ci, k));
        }
        blocks.push(BlockSvd {
            rows: rows.clone(),
            cols: cols.clone(),
            u,
            v_t,
        });
    }

    spectrum.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let sigma_max = spectrum.first().map(|s| s.0).unwrap_or(0.0);
    let kept: Vec<_> = spectrum
        .into_iter()
        .filter(|(s, _, _)| *s > rel_tol * sigma_max && *s > 0.0)
        .collect();

    let k = kept.len();
    let mut u = DMatrix::zeros(nr, k);
    let mut v_t = DMatrix::zeros(k, nc);
    let mut sigma = Vec::with_capacity(k);
    for (out, (s, ci, within)) in kept.iter().enumerate() {
        sigma.push(*s);
        let b = &blocks[*ci];
        for (bi, &row) in b.rows.iter().enumerate() {
            u[(row, out)] = b.u[(bi, *within)];
        }
        for (bj, &col) in b.cols.iter().enumerate() {
            v_t[(out, col)] = b.v_t[(*within, bj)];
        }
    }
    Ok(TruncatedSvd { u, sigma, v_t })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
