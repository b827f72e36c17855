//! Born-machine training: NLL evaluation, site-sweep gradient descent, and
//! the class-conditional classifier.
//!
//! The model probability of a sample is `P(x) = |<x|Psi>|^2 / <Psi|Psi>`; the
//! explicit division keeps every quantity well-defined even when an update
//! de-normalizes the state. All per-sample environment algebra runs on
//! renormalized boundary vectors, so the exponentially small amplitudes of
//! long chains never underflow: the accumulated log factors cancel exactly in
//! the gradient's ratios.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GtnError, Result};
use crate::mps::{Mps, ProductState};
use crate::tensor::{lq_pos, qr_pos, SiteTensor};

/// Batch selection for one sweep pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

/// Gradient-descent hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Gradient step. Zero is allowed and makes training a no-op pass.
    pub eta: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub seed: u64,
    /// Rescale the center tensor to unit norm after every site update.
    pub renormalize_every_step: bool,
    /// Stop once the epoch-to-epoch change of the train NLL drops below this.
    pub early_stop_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 1e-2,
            epochs: 500,
            batch_size: BatchSize::Full,
            seed: 0,
            renormalize_every_step: true,
            early_stop_delta: 1e-6,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(GtnError::param(format!(
                "learning rate must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.epochs < 1 {
            return Err(GtnError::param("epochs must be at least 1"));
        }
        if let BatchSize::Size(0) = self.batch_size {
            return Err(GtnError::param("batch size must be positive"));
        }
        if self.early_stop_delta < 0.0 {
            return Err(GtnError::param("early_stop_delta must be non-negative"));
        }
        Ok(())
    }
}

/// Per-epoch NLL record of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTrace {
    pub train_nll: Vec<f64>,
    pub test_nll: Option<Vec<f64>>,
}

impl LossTrace {
    /// CSV export with columns `epoch, train_nll, test_nll` (the last column
    /// empty when no test set was supplied).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "epoch,train_nll,test_nll")?;
        for (i, t) in self.train_nll.iter().enumerate() {
            let test = match &self.test_nll {
                Some(v) => format!("{}", v[i]),
                None => String::new(),
            };
            writeln!(w, "{},{},{}", i, t, test)?;
        }
        Ok(())
    }
}

/// Negative mean log-likelihood `-(1/N) sum_n ln P(x_n)` with
/// `P(x) = |<x|Psi>|^2 / <Psi|Psi>`.
///
/// Returns `+inf` when any sample has exactly zero amplitude.
pub fn nll(psi: &Mps, states: &[ProductState]) -> Result<f64> {
    if states.is_empty() {
        return Err(GtnError::param("NLL of an empty sample set"));
    }
    for s in states {
        if s.len() != psi.len() || s.phys_dim() != psi.phys_dim() {
            return Err(GtnError::param("sample shape does not match the model"));
        }
    }
    let log_z = psi.log_norm_sqr()?;
    let amps = states
        .par_iter()
        .map(|x| psi.log_amplitude(x))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for la in &amps {
        if la.is_zero() {
            return Ok(f64::INFINITY);
        }
        total += 2.0 * la.log_mag - log_z;
    }
    Ok(-total / states.len() as f64)
}

/// Geometric mean of the per-sample probabilities, `exp(-L)`.
pub fn mean_probability(psi: &Mps, states: &[ProductState]) -> Result<f64> {
    Ok((-nll(psi, states)?).exp())
}

/// Gradient of the NLL with respect to the site-`m` tensor:
/// `(2/Z) E_Z - (2/N) sum_n E_n / <x_n|Psi>`, with the environment tensors
/// computed on renormalized boundaries so the log factors cancel.
pub fn nll_gradient(psi: &Mps, states: &[ProductState], m: usize) -> Result<SiteTensor> {
    if states.is_empty() {
        return Err(GtnError::param("gradient over an empty sample set"));
    }
    if m >= psi.len() {
        return Err(GtnError::param(format!("site index {m} out of range")));
    }
    for s in states {
        if s.len() != psi.len() || s.phys_dim() != psi.phys_dim() {
            return Err(GtnError::param("sample shape does not match the model"));
        }
    }
    let d = psi.phys_dim();
    let sites = psi.sites();

    // Normalized transfer environments of <Psi|Psi> around site m.
    let mut l_env = DMatrix::from_element(1, 1, 1.0);
    for t in &sites[..m] {
        let mut next = DMatrix::zeros(t.right_dim(), t.right_dim());
        for s in 0..d {
            next += t.mat(s).transpose() * &l_env * t.mat(s);
        }
        let z = next.norm();
        if z == 0.0 {
            return Err(GtnError::numeric("zero-norm state in gradient"));
        }
        next.unscale_mut(z);
        l_env = next;
    }
    let mut r_env = DMatrix::from_element(1, 1, 1.0);
    for t in sites[m + 1..].iter().rev() {
        let mut next = DMatrix::zeros(t.left_dim(), t.left_dim());
        for s in 0..d {
            next += t.mat(s) * &r_env * t.mat(s).transpose();
        }
        let z = next.norm();
        if z == 0.0 {
            return Err(GtnError::numeric("zero-norm state in gradient"));
        }
        next.unscale_mut(z);
        r_env = next;
    }
    let center = &sites[m];
    let env_times = |s: usize| &l_env * center.mat(s) * &r_env;
    let c_z: f64 = (0..d).map(|s| center.mat(s).dot(&env_times(s))).sum();
    if c_z == 0.0 {
        return Err(GtnError::numeric("zero-norm state in gradient"));
    }

    // Per-sample boundary vectors around site m.
    let partials = states
        .par_iter()
        .enumerate()
        .map(|(n, x)| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            let mut u_l = DMatrix::from_element(1, 1, 1.0);
            for (i, t) in sites[..m].iter().enumerate() {
                u_l = t.phys_apply(x.site(i)).transpose() * u_l;
                let z = u_l.norm();
                if z == 0.0 {
                    return Err(GtnError::numeric(format!(
                        "sample {n} has exactly zero amplitude (left partial vanished at site {i})"
                    )));
                }
                u_l.unscale_mut(z);
            }
            let mut u_r = DMatrix::from_element(1, 1, 1.0);
            for (i, t) in sites[m + 1..].iter().enumerate().rev() {
                u_r = t.phys_apply(x.site(m + 1 + i)) * u_r;
                let z = u_r.norm();
                if z == 0.0 {
                    return Err(GtnError::numeric(format!(
                        "sample {n} has exactly zero amplitude (right partial vanished at site {})",
                        m + 1 + i
                    )));
                }
                u_r.unscale_mut(z);
            }
            Ok((u_l, u_r))
        })
        .collect::<Result<Vec<_>>>()?;

    let n_samples = states.len() as f64;
    let mut grad = SiteTensor::zeros(d, center.left_dim(), center.right_dim());
    for s in 0..d {
        *grad.mat_mut(s) = env_times(s) * (2.0 / c_z);
    }
    for (n, (u_l, u_r)) in partials.iter().enumerate() {
        let phi = states[n].site(m);
        let c_n: f64 = (0..d)
            .map(|s| phi[s] * (u_l.transpose() * center.mat(s) * u_r)[(0, 0)])
            .sum();
        if c_n == 0.0 {
            return Err(GtnError::numeric(format!(
                "sample {n} has exactly zero amplitude at site {m}"
            )));
        }
        let outer = u_l * u_r.transpose();
        for s in 0..d {
            let w = 2.0 * phi[s] / (c_n * n_samples);
            grad.mat_mut(s).zip_apply(&outer, |g, o| *g -= w * o);
        }
    }
    Ok(grad)
}

/// Trains by site-sweep gradient descent: each epoch updates sites
/// `0..M-1` left-to-right and back, re-canonicalizing so the orthogonality
/// center tracks the updated site. Deterministic for a fixed seed.
pub fn train(
    initial: &Mps,
    train_states: &[ProductState],
    test_states: Option<&[ProductState]>,
    cfg: &TrainConfig,
) -> Result<(Mps, LossTrace)> {
    cfg.validate()?;
    if train_states.is_empty() {
        return Err(GtnError::param("training set is empty"));
    }
    for s in train_states.iter().chain(test_states.unwrap_or(&[])) {
        if s.len() != initial.len() || s.phys_dim() != initial.phys_dim() {
            return Err(GtnError::param("sample shape does not match the model"));
        }
    }

    let mut mps = initial.canonicalize_to(0)?;
    let initial_nll = nll(&mps, train_states)?;
    let divergence_cap = 10.0 * initial_nll.abs().max(0.1);
    let mut trace = LossTrace {
        train_nll: Vec::new(),
        test_nll: test_states.map(|_| Vec::new()),
    };
    let n = train_states.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for _epoch in 0..cfg.epochs {
        let batches: Vec<Vec<usize>> = match cfg.batch_size {
            BatchSize::Full => vec![(0..n).collect()],
            BatchSize::Size(b) => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                order.chunks(b.min(n)).map(|c| c.to_vec()).collect()
            }
        };
        for batch in &batches {
            let refs: Vec<&ProductState> = batch.iter().map(|&i| &train_states[i]).collect();
            let lefts = sweep_left_to_right(&mut mps, &refs, cfg)?;
            sweep_right_to_left(&mut mps, &refs, cfg, lefts)?;
        }

        let train_l = nll(&mps, train_states)?;
        trace.train_nll.push(train_l);
        if let (Some(test), Some(out)) = (test_states, trace.test_nll.as_mut()) {
            out.push(nll(&mps, test)?);
        }
        if !train_l.is_finite() || (train_l > divergence_cap && train_l > initial_nll) {
            return Err(GtnError::Training {
                message: format!(
                    "training diverged: NLL {train_l} exceeded 10x the initial {initial_nll}"
                ),
                trace: Box::new(trace),
            });
        }
        let len = trace.train_nll.len();
        if len >= 2 && (trace.train_nll[len - 2] - train_l).abs() < cfg.early_stop_delta {
            break;
        }
    }

    Ok((mps.canonicalize()?, trace))
}

/// Per-site feature matrix for a batch: rows are samples, columns physical
/// values.
fn phi_matrix(states: &[&ProductState], m: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), d, |n, s| states[n].site(m)[s])
}

/// Applies the site tensor to every sample's boundary row at once:
/// `out = sum_s diag(phi[:,s]) * (bound * A[s])`, then renormalizes each row.
/// `transpose_site` selects the leftward direction (right-boundary rows
/// contract against `A[s]^T`).
fn advance_rows(
    bound: &DMatrix<f64>,
    site: &SiteTensor,
    phi: &DMatrix<f64>,
    transpose_site: bool,
) -> Result<DMatrix<f64>> {
    let d = site.phys_dim();
    let cols = if transpose_site {
        site.left_dim()
    } else {
        site.right_dim()
    };
    let mut out = DMatrix::zeros(bound.nrows(), cols);
    for s in 0..d {
        let y = if transpose_site {
            bound * site.mat(s).transpose()
        } else {
            bound * site.mat(s)
        };
        for n in 0..bound.nrows() {
            let p = phi[(n, s)];
            if p != 0.0 {
                for c in 0..cols {
                    out[(n, c)] += p * y[(n, c)];
                }
            }
        }
    }
    for n in 0..out.nrows() {
        let z: f64 = out.row(n).norm();
        if z == 0.0 {
            return Err(GtnError::numeric(format!(
                "sample {n} (batch index) has exactly zero amplitude"
            )));
        }
        if !z.is_finite() {
            return Err(GtnError::numeric("non-finite boundary row in sweep"));
        }
        out.row_mut(n).unscale_mut(z);
    }
    Ok(out)
}

/// Gradient step at the orthogonality center, where `Z = ||A||_F^2` and the
/// state environments are identities.
fn update_center(
    site: &mut SiteTensor,
    lefts: &DMatrix<f64>,
    rights: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    cfg: &TrainConfig,
) -> Result<()> {
    let d = site.phys_dim();
    let n = phi.nrows();
    let z: f64 = site.norm_sqr();
    if z == 0.0 {
        return Err(GtnError::numeric("center tensor collapsed to zero"));
    }

    // c_n = sum_s phi[n,s] * (u_L A[s] u_R)_n
    let mut c = vec![0.0; n];
    let mut y_cache = Vec::with_capacity(d);
    for s in 0..d {
        let y = lefts * site.mat(s); // n x chi_r
        for row in 0..n {
            let mut dot = 0.0;
            for col in 0..y.ncols() {
                dot += y[(row, col)] * rights[(row, col)];
            }
            c[row] += phi[(row, s)] * dot;
        }
        y_cache.push(y);
    }
    if let Some(bad) = c.iter().position(|v| *v == 0.0) {
        return Err(GtnError::numeric(format!(
            "sample {bad} (batch index) has exactly zero amplitude at the center site"
        )));
    }

    let scale_model = 2.0 / z;
    let scale_data = 2.0 / n as f64;
    for s in 0..d {
        // grad[s] = (2/Z) A[s] - (2/N) U_L^T diag(phi[:,s]/c) U_R
        let mut weighted = lefts.clone();
        for row in 0..n {
            let w = phi[(row, s)] / c[row];
            weighted.row_mut(row).scale_mut(w);
        }
        let data_term = weighted.transpose() * rights;
        let mat = site.mat_mut(s);
        mat.zip_zip_apply(&data_term, &mat.clone(), |g, dt, a| {
            *g = a - cfg.eta * (scale_model * a - scale_data * dt)
        });
    }
    if cfg.renormalize_every_step {
        let norm = site.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(GtnError::numeric("center tensor collapsed during update"));
        }
        site.scale(1.0 / norm);
    }
    Ok(())
}

/// Left-to-right half sweep. Expects the center at site 0; leaves it at
/// `M-1`. Returns the per-site left boundary stacks for the return sweep.
fn sweep_left_to_right(
    mps: &mut Mps,
    batch: &[&ProductState],
    cfg: &TrainConfig,
) -> Result<Vec<DMatrix<f64>>> {
    let m_sites = mps.len();
    let d = mps.phys_dim();
    let n = batch.len();
    let mut sites = mps.sites().to_vec();

    let phis: Vec<DMatrix<f64>> = (0..m_sites).map(|m| phi_matrix(batch, m, d)).collect();

    // rights[m]: boundary rows of sites m..M-1, built before any update; site
    // m+1.. stays untouched until the center passes it, so entries stay valid.
    let mut rights: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); m_sites + 1];
    rights[m_sites] = DMatrix::from_element(n, 1, 1.0);
    for m in (1..m_sites).rev() {
        rights[m] = advance_rows(&rights[m + 1], &sites[m], &phis[m], true)?;
    }

    let mut lefts: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); m_sites];
    lefts[0] = DMatrix::from_element(n, 1, 1.0);
    for m in 0..m_sites {
        update_center(&mut sites[m], &lefts[m], &rights[m + 1], &phis[m], cfg)?;
        if m + 1 < m_sites {
            let (q, r) = qr_pos(&sites[m].unfold_left());
            sites[m] = SiteTensor::fold_left(&q, d);
            sites[m + 1].absorb_left(&r);
            lefts[m + 1] = advance_rows(&lefts[m], &sites[m], &phis[m], false)?;
        }
    }

    *mps = Mps::from_parts_unchecked(sites, Some(m_sites - 1));
    Ok(lefts)
}

/// Right-to-left half sweep. Expects the center at `M-1`; leaves it at 0.
fn sweep_right_to_left(
    mps: &mut Mps,
    batch: &[&ProductState],
    cfg: &TrainConfig,
    lefts: Vec<DMatrix<f64>>,
) -> Result<()> {
    let m_sites = mps.len();
    let d = mps.phys_dim();
    let n = batch.len();
    let mut sites = mps.sites().to_vec();

    let phis: Vec<DMatrix<f64>> = (0..m_sites).map(|m| phi_matrix(batch, m, d)).collect();
    let mut right = DMatrix::from_element(n, 1, 1.0);

    for m in (0..m_sites).rev() {
        update_center(&mut sites[m], &lefts[m], &right, &phis[m], cfg)?;
        if m > 0 {
            let (l, q) = lq_pos(&sites[m].unfold_right());
            sites[m] = SiteTensor::fold_right(&q, d);
            sites[m - 1].absorb_right(&l);
            right = advance_rows(&right, &sites[m], &phis[m], true)?;
        }
    }

    *mps = Mps::from_parts_unchecked(sites, Some(0));
    Ok(())
}

/// Class-conditional GTN models indexed by label.
#[derive(Clone, Debug)]
pub struct GtncModel {
    models: Vec<Mps>,
    log_norms: Vec<f64>,
}

impl GtncModel {
    pub fn new(models: Vec<Mps>) -> Result<Self> {
        if models.is_empty() {
            return Err(GtnError::param("classifier needs at least one class model"));
        }
        let (m, d) = (models[0].len(), models[0].phys_dim());
        if models.iter().any(|g| g.len() != m || g.phys_dim() != d) {
            return Err(GtnError::param("class models must share site count and physical dimension"));
        }
        let log_norms = models
            .iter()
            .map(|g| g.log_norm_sqr())
            .collect::<Result<Vec<_>>>()?;
        Ok(GtncModel { models, log_norms })
    }

    pub fn class_count(&self) -> usize {
        self.models.len()
    }

    pub fn model(&self, g: usize) -> &Mps {
        &self.models[g]
    }

    /// `argmax_g |<y|Psi_g>|` over normalized models; ties break toward the
    /// smaller label.
    pub fn classify(&self, y: &ProductState) -> Result<usize> {
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (g, model) in self.models.iter().enumerate() {
            let la = model.log_amplitude(y)?;
            let score = if la.is_zero() {
                f64::NEG_INFINITY
            } else {
                la.log_mag - 0.5 * self.log_norms[g]
            };
            if score > best_score {
                best_score = score;
                best = g;
            }
        }
        Ok(best)
    }

    /// Fraction of samples classified to their own label.
    pub fn accuracy(&self, samples: &[(ProductState, usize)]) -> Result<f64> {
        if samples.is_empty() {
            return Err(GtnError::param("accuracy of an empty sample set"));
        }
        let hits = samples
            .par_iter()
            .map(|(y, label)| Ok((self.classify(y)? == *label) as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / samples.len() as f64)
    }
}
