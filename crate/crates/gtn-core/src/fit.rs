//! Scaling-law regressions: the linear NLL law, its quadratic correction,
//! logarithmic coefficient laws in the bond dimension, the composition
//! identity between them, and train/test divergence reports.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GtnError, Result};

/// Which split a curve was measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Whether samples and models share a class (intra) or differ (inter).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    Intra,
    Inter,
}

impl std::fmt::Display for Pairing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pairing::Intra => "intra",
            Pairing::Inter => "inter",
        })
    }
}

/// Provenance of a measured NLL curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub chi: Option<usize>,
    pub n: Option<usize>,
    pub split: Split,
    pub pairing: Pairing,
    pub dataset: String,
    pub theta: f64,
    pub h: usize,
}

/// `(abscissa, NLL)` points with strictly increasing abscissae.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSeries {
    points: Vec<(f64, f64)>,
    pub meta: CurveMeta,
}

impl CurveSeries {
    pub fn new(points: Vec<(f64, f64)>, meta: CurveMeta) -> Result<Self> {
        if points.is_empty() {
            return Err(GtnError::param("curve series needs at least one point"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(GtnError::param(format!(
                    "abscissae must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(GtnError::param("curve series contains non-finite points"));
        }
        Ok(CurveSeries { points, meta })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Linear,
    Quadratic,
    Log,
}

/// Recovered coefficients, keyed by the law they belong to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitCoefficients {
    /// `L = k M + b`
    Linear { k: f64, b: f64 },
    /// `L = beta M - alpha M^2 + gamma` (positive `alpha` means concave
    /// suppression of the linear growth)
    Quadratic { alpha: f64, beta: f64, gamma: f64 },
    /// `y = p ln x + q`
    Log { p: f64, q: f64 },
}

impl FitCoefficients {
    pub fn as_slice(&self) -> Vec<f64> {
        match self {
            FitCoefficients::Linear { k, b } => vec![*k, *b],
            FitCoefficients::Quadratic { alpha, beta, gamma } => vec![*alpha, *beta, *gamma],
            FitCoefficients::Log { p, q } => vec![*p, *q],
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            FitCoefficients::Linear { .. } => &["k", "b"],
            FitCoefficients::Quadratic { .. } => &["alpha", "beta", "gamma"],
            FitCoefficients::Log { .. } => &["p", "q"],
        }
    }
}

/// A fitted scaling law with residual diagnostics. `std_errors` follows the
/// declaration order of the coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub kind: FitKind,
    pub coefficients: FitCoefficients,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
    pub residual_max: f64,
    pub n_points: usize,
    pub meta: Option<CurveMeta>,
}

impl ScalingFit {
    /// 95% confidence half-widths from the OLS variance estimates, one per
    /// coefficient. Infinite when there are no residual degrees of freedom.
    pub fn ci95_half_widths(&self) -> Vec<f64> {
        let p = self.coefficients.as_slice().len();
        if self.n_points <= p {
            return vec![f64::INFINITY; p];
        }
        let t = t975(self.n_points - p);
        self.std_errors.iter().map(|se| se * t).collect()
    }
}

/// Two-sided 97.5% Student-t quantile.
fn t975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        f64::INFINITY
    } else if df <= TABLE.len() {
        TABLE[df - 1]
    } else {
        1.96
    }
}

struct Ols {
    coefficients: Vec<f64>, // slopes in column order, then intercept last
    std_errors: Vec<f64>,
    r_squared: f64,
    residual_max: f64,
}

/// OLS on centered, max-abs-scaled design columns plus an intercept; the
/// normal equations are solved by Cholesky and the coefficients un-scaled
/// back. Scaling keeps `M` and `M^2` columns comparably conditioned.
fn ols(columns: &[&[f64]], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    let p = columns.len() + 1;
    if n < p {
        return Err(GtnError::param(format!(
            "need at least {p} points for {} basis functions, got {n}",
            columns.len()
        )));
    }
    let mut means = Vec::with_capacity(columns.len());
    let mut scales = Vec::with_capacity(columns.len());
    for col in columns {
        let mean = col.iter().sum::<f64>() / n as f64;
        let scale = col.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(GtnError::param("degenerate design: a basis column is constant"));
        }
        means.push(mean);
        scales.push(scale);
    }

    let design = DMatrix::from_fn(n, p, |i, j| {
        if j < columns.len() {
            (columns[j][i] - means[j]) / scales[j]
        } else {
            1.0
        }
    });
    let yv = DMatrix::from_fn(n, 1, |i, _| y[i]);
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * &yv;
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| GtnError::param("degenerate design matrix"))?;
    let scaled_coef = chol.solve(&rhs);
    let gram_inv = chol.inverse();

    let fitted = &design * &scaled_coef;
    let mut ssr = 0.0;
    let mut residual_max: f64 = 0.0;
    for i in 0..n {
        let r = y[i] - fitted[(i, 0)];
        ssr += r * r;
        residual_max = residual_max.max(r.abs());
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let y_scale: f64 = y.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let r_squared = if sst > 0.0 {
        1.0 - ssr / sst
    } else if ssr <= 1e-24 * (n as f64) * y_scale * y_scale {
        1.0
    } else {
        f64::NEG_INFINITY
    };

    // Un-scale: original slope j = scaled_j / scale_j; the intercept picks up
    // the centering shifts. Propagate the covariance through the same linear
    // map.
    let k = columns.len();
    let mut transform = DMatrix::zeros(p, p);
    for j in 0..k {
        transform[(j, j)] = 1.0 / scales[j];
    }
    transform[(k, k)] = 1.0;
    for j in 0..k {
        transform[(k, j)] = -means[j] / scales[j];
    }
    let sigma2 = if n > p { ssr / (n - p) as f64 } else { f64::NAN };
    let cov = &transform * (gram_inv * sigma2) * transform.transpose();

    let mut coefficients = Vec::with_capacity(p);
    let mut std_errors = Vec::with_capacity(p);
    for j in 0..k {
        coefficients.push(scaled_coef[(j, 0)] / scales[j]);
        std_errors.push(cov[(j, j)].max(0.0).sqrt());
    }
    let intercept = scaled_coef[(k, 0)]
        - (0..k)
            .map(|j| scaled_coef[(j, 0)] * means[j] / scales[j])
            .sum::<f64>();
    coefficients.push(intercept);
    std_errors.push(cov[(k, k)].max(0.0).sqrt());

    Ok(Ols {
        coefficients,
        std_errors,
        r_squared,
        residual_max,
    })
}

/// Least-squares fit of `L = k M + b`.
pub fn fit_linear(series: &CurveSeries) -> Result<ScalingFit> {
    if series.len() < 2 {
        return Err(GtnError::param("linear fit needs at least 2 points"));
    }
    let xs: Vec<f64> = series.points().iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.points().iter().map(|p| p.1).collect();
    let out = ols(&[&xs], &ys)?;
    Ok(ScalingFit {
        kind: FitKind::Linear,
        coefficients: FitCoefficients::Linear {
            k: out.coefficients[0],
            b: out.coefficients[1],
        },
        std_errors: out.std_errors,
        r_squared: out.r_squared,
        residual_max: out.residual_max,
        n_points: series.len(),
        meta: Some(series.meta.clone()),
    })
}

/// Least-squares fit of `L = beta M - alpha M^2 + gamma` on the basis
/// `(M^2, M, 1)`, reported in the sign convention where `alpha > 0` means the
/// quadratic term suppresses the linear growth.
pub fn fit_quadratic(series: &CurveSeries) -> Result<ScalingFit> {
    if series.len() < 3 {
        return Err(GtnError::param("quadratic fit needs at least 3 points"));
    }
    let xs2: Vec<f64> = series.points().iter().map(|p| p.0 * p.0).collect();
    let xs: Vec<f64> = series.points().iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.points().iter().map(|p| p.1).collect();
    let out = ols(&[&xs2, &xs], &ys)?;
    Ok(ScalingFit {
        kind: FitKind::Quadratic,
        coefficients: FitCoefficients::Quadratic {
            alpha: -out.coefficients[0],
            beta: out.coefficients[1],
            gamma: out.coefficients[2],
        },
        std_errors: out.std_errors,
        r_squared: out.r_squared,
        residual_max: out.residual_max,
        n_points: series.len(),
        meta: Some(series.meta.clone()),
    })
}

/// Least-squares fit of `y = p ln x + q`.
pub fn fit_log(xs: &[f64], ys: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() {
        return Err(GtnError::param("fit_log inputs differ in length"));
    }
    if xs.len() < 2 {
        return Err(GtnError::param("log fit needs at least 2 points"));
    }
    if let Some(bad) = xs.iter().find(|x| !(**x > 0.0)) {
        return Err(GtnError::param(format!(
            "log fit abscissae must be positive, got {bad}"
        )));
    }
    let lnx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let out = ols(&[&lnx], ys)?;
    Ok(ScalingFit {
        kind: FitKind::Log,
        coefficients: FitCoefficients::Log {
            p: out.coefficients[0],
            q: out.coefficients[1],
        },
        std_errors: out.std_errors,
        r_squared: out.r_squared,
        residual_max: out.residual_max,
        n_points: xs.len(),
        meta: None,
    })
}

/// Composes the coefficient-vs-ln-chi laws into the NLL-vs-ln-chi pair at a
/// fixed feature count: `p_L = -p_alpha M^2 + p_beta M + p_gamma` and the same
/// for the `q`s.
pub fn compose_pq(
    alpha_fit: &ScalingFit,
    beta_fit: &ScalingFit,
    gamma_fit: &ScalingFit,
    m: f64,
) -> Result<(f64, f64)> {
    let extract = |fit: &ScalingFit| -> Result<(f64, f64)> {
        match fit.coefficients {
            FitCoefficients::Log { p, q } => Ok((p, q)),
            _ => Err(GtnError::param("compose_pq expects log-kind fits")),
        }
    };
    let (pa, qa) = extract(alpha_fit)?;
    let (pb, qb) = extract(beta_fit)?;
    let (pg, qg) = extract(gamma_fit)?;
    Ok((
        -pa * m * m + pb * m + pg,
        -qa * m * m + qb * m + qg,
    ))
}

/// One key's coefficient gaps between train and test fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEntry {
    pub key: f64,
    /// Signed relative gaps `(c_train - c_test) / max(|c_train|, |c_test|, eps)`
    /// per coefficient.
    pub gaps: Vec<f64>,
    pub flagged: bool,
}

/// Train/test coefficient divergence across a family of fits keyed by chi or
/// N; the over-parameterization (or data-insufficiency) signature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub threshold: f64,
    pub coefficient_names: Vec<String>,
    pub entries: Vec<DivergenceEntry>,
    /// Smallest key at which any coefficient gap exceeds the threshold.
    pub first_flagged: Option<f64>,
}

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 0.25;

/// Compares train against test fits key by key. The gap denominator is the
/// larger coefficient magnitude (floored at `1e-12`), which makes the
/// absolute gaps symmetric under swapping the two fit families.
pub fn divergence_report(
    train_fits: &[(f64, ScalingFit)],
    test_fits: &[(f64, ScalingFit)],
    threshold: f64,
) -> Result<DivergenceReport> {
    const EPS: f64 = 1e-12;
    if train_fits.len() != test_fits.len() {
        return Err(GtnError::param(format!(
            "key mismatch: {} train fits vs {} test fits",
            train_fits.len(),
            test_fits.len()
        )));
    }
    if train_fits.is_empty() {
        return Err(GtnError::param("divergence report over no fits"));
    }
    let mut train: Vec<&(f64, ScalingFit)> = train_fits.iter().collect();
    let mut test: Vec<&(f64, ScalingFit)> = test_fits.iter().collect();
    train.sort_by(|a, b| a.0.total_cmp(&b.0));
    test.sort_by(|a, b| a.0.total_cmp(&b.0));

    let kind = train[0].1.kind;
    let names: Vec<String> = train[0]
        .1
        .coefficients
        .names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut entries = Vec::with_capacity(train.len());
    let mut first_flagged = None;
    for (tr, te) in train.iter().zip(&test) {
        if tr.0 != te.0 {
            return Err(GtnError::param(format!(
                "key mismatch: train has {} where test has {}",
                tr.0, te.0
            )));
        }
        if tr.1.kind != kind || te.1.kind != kind {
            return Err(GtnError::param("divergence report requires fits of one kind"));
        }
        let ctr = tr.1.coefficients.as_slice();
        let cte = te.1.coefficients.as_slice();
        let gaps: Vec<f64> = ctr
            .iter()
            .zip(&cte)
            .map(|(a, b)| (a - b) / a.abs().max(b.abs()).max(EPS))
            .collect();
        let flagged = gaps.iter().any(|g| g.abs() > threshold);
        if flagged && first_flagged.is_none() {
            first_flagged = Some(tr.0);
        }
        entries.push(DivergenceEntry {
            key: tr.0,
            gaps,
            flagged,
        });
    }
    Ok(DivergenceReport {
        threshold,
        coefficient_names: names,
        entries,
        first_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn meta() -> CurveMeta {
        CurveMeta {
            chi: Some(8),
            n: Some(64),
            split: Split::Train,
            pairing: Pairing::Intra,
            dataset: "synthetic".into(),
            theta: 1.0,
            h: 1,
        }
    }

    fn series(points: Vec<(f64, f64)>) -> CurveSeries {
        CurveSeries::new(points, meta()).unwrap()
    }

    #[test]
    fn series_rejects_non_increasing_abscissae() {
        assert!(CurveSeries::new(vec![(1.0, 0.0), (1.0, 1.0)], meta()).is_err());
        assert!(CurveSeries::new(vec![(2.0, 0.0), (1.0, 1.0)], meta()).is_err());
    }

    #[test]
    fn linear_fit_recovers_an_exact_line() {
        let s = series((1..=5).map(|m| (m as f64, 2.0 * m as f64 + 1.0)).collect());
        let fit = fit_linear(&s).unwrap();
        match fit.coefficients {
            FitCoefficients::Linear { k, b } => {
                assert_relative_eq!(k, 2.0, epsilon = 1e-12);
                assert_relative_eq!(b, 1.0, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.residual_max < 1e-12);
    }

    #[test]
    fn quadratic_fit_recovers_exact_coefficients() {
        let pts: Vec<(f64, f64)> = [64.0, 144.0, 256.0, 400.0, 576.0, 784.0]
            .iter()
            .map(|&m| (m, 0.07 * m - 3e-5 * m * m + 1.0))
            .collect();
        let fit = fit_quadratic(&series(pts)).unwrap();
        match fit.coefficients {
            FitCoefficients::Quadratic { alpha, beta, gamma } => {
                assert_relative_eq!(alpha, 3e-5, epsilon = 1e-10);
                assert_relative_eq!(beta, 0.07, epsilon = 1e-10);
                assert_relative_eq!(gamma, 1.0, epsilon = 1e-7);
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_on_linear_data_reduces_to_the_linear_fit() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|m| (m as f64, 0.5 * m as f64 + 2.0)).collect();
        let lin = fit_linear(&series(pts.clone())).unwrap();
        let quad = fit_quadratic(&series(pts)).unwrap();
        let (FitCoefficients::Linear { k, b }, FitCoefficients::Quadratic { alpha, beta, gamma }) =
            (lin.coefficients, quad.coefficients)
        else {
            unreachable!()
        };
        assert!(alpha.abs() < 1e-12);
        assert_relative_eq!(beta, k, epsilon = 1e-9);
        assert_relative_eq!(gamma, b, epsilon = 1e-9);
        assert!(quad.residual_max <= lin.residual_max + 1e-12);
    }

    #[test]
    fn fits_are_equivariant_under_power_of_two_scaling() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|m| (m as f64, 0.3 * m as f64 - 0.002 * (m * m) as f64 + 0.7))
            .collect();
        let base = fit_quadratic(&series(pts.clone())).unwrap();
        let scaled_pts: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (*x, 4.0 * y)).collect();
        let scaled = fit_quadratic(&series(scaled_pts)).unwrap();
        let b = base.coefficients.as_slice();
        let s = scaled.coefficients.as_slice();
        for (x, y) in b.iter().zip(&s) {
            assert_eq!(4.0 * x, *y);
        }
    }

    #[test]
    fn log_fit_recovers_exact_log_law() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.ln() + 1.0).collect();
        let fit = fit_log(&xs, &ys).unwrap();
        match fit.coefficients {
            FitCoefficients::Log { p, q } => {
                assert_relative_eq!(p, 3.0, epsilon = 1e-12);
                assert_relative_eq!(q, 1.0, epsilon = 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn log_fit_of_constant_data_has_zero_slope() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [5.0, 5.0, 5.0];
        let fit = fit_log(&xs, &ys).unwrap();
        match fit.coefficients {
            FitCoefficients::Log { p, .. } => assert!(p.abs() < 1e-14),
            _ => unreachable!(),
        }
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_fit_rejects_non_positive_abscissae() {
        assert!(fit_log(&[0.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_log(&[-1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn round_trip_of_recovered_coefficients_is_exact_on_noiseless_data() {
        let pts: Vec<(f64, f64)> = (2..=9).map(|m| (m as f64, -0.4 * m as f64 + 3.0)).collect();
        let fit = fit_linear(&series(pts)).unwrap();
        let FitCoefficients::Linear { k, b } = fit.coefficients else {
            unreachable!()
        };
        let regen: Vec<(f64, f64)> = (2..=9).map(|m| (m as f64, k * m as f64 + b)).collect();
        let fit2 = fit_linear(&series(regen)).unwrap();
        let FitCoefficients::Linear { k: k2, b: b2 } = fit2.coefficients else {
            unreachable!()
        };
        assert_relative_eq!(k, k2, epsilon = 1e-10);
        assert_relative_eq!(b, b2, epsilon = 1e-10);
    }

    #[test]
    fn compose_pq_is_the_stated_polynomial() {
        let log_fit = |p: f64, q: f64| ScalingFit {
            kind: FitKind::Log,
            coefficients: FitCoefficients::Log { p, q },
            std_errors: vec![0.0, 0.0],
            r_squared: 1.0,
            residual_max: 0.0,
            n_points: 4,
            meta: None,
        };
        let (pl, ql) = compose_pq(&log_fit(0.0, 0.0), &log_fit(0.0, 0.0), &log_fit(5.0, 2.0), 123.0)
            .unwrap();
        assert_eq!(pl, 5.0);
        assert_eq!(ql, 2.0);

        // Planted exact laws: alpha(p) = pa ln chi + qa etc. reproduce the
        // directly fitted (p_L, q_L) to round-off.
        let (pa, qa) = (2e-7, 1e-6);
        let (pb, qb) = (-3e-3, 8e-2);
        let (pg, qg) = (0.4, 0.9);
        let m = 36.0;
        let chis = [2.0, 4.0, 8.0, 16.0, 32.0];
        let ys: Vec<f64> = chis
            .iter()
            .map(|chi: &f64| {
                let a = pa * chi.ln() + qa;
                let b = pb * chi.ln() + qb;
                let g = pg * chi.ln() + qg;
                b * m - a * m * m + g
            })
            .collect();
        let direct = fit_log(&chis, &ys).unwrap();
        let (pl, ql) = compose_pq(
            &log_fit(pa, qa),
            &log_fit(pb, qb),
            &log_fit(pg, qg),
            m,
        )
        .unwrap();
        let FitCoefficients::Log { p, q } = direct.coefficients else {
            unreachable!()
        };
        assert_relative_eq!(p, pl, epsilon = 1e-10, max_relative = 1e-10);
        assert_relative_eq!(q, ql, epsilon = 1e-10, max_relative = 1e-10);
    }

    #[test]
    fn compose_pq_rejects_non_log_fits() {
        let lin = fit_linear(&series(vec![(1.0, 1.0), (2.0, 2.0)])).unwrap();
        let log = fit_log(&[1.0, 2.0], &[0.0, 1.0]).unwrap();
        assert!(compose_pq(&lin, &log, &log, 4.0).is_err());
    }

    #[test]
    fn identical_fit_families_have_zero_gaps() {
        let mk = |key: f64| {
            (
                key,
                fit_quadratic(&series(
                    (1..=5)
                        .map(|m| (m as f64, 0.1 * m as f64 - 1e-3 * (m * m) as f64 + key))
                        .collect(),
                ))
                .unwrap(),
            )
        };
        let fits: Vec<_> = [2.0, 4.0, 8.0].iter().map(|k| mk(*k)).collect();
        let report = divergence_report(&fits, &fits, DEFAULT_DIVERGENCE_THRESHOLD).unwrap();
        assert!(report.first_flagged.is_none());
        assert!(report
            .entries
            .iter()
            .all(|e| e.gaps.iter().all(|g| *g == 0.0)));
    }

    #[test]
    fn planted_doubling_is_flagged_at_the_first_bad_key() {
        let base = |key: f64, alpha: f64| {
            (
                key,
                ScalingFit {
                    kind: FitKind::Quadratic,
                    coefficients: FitCoefficients::Quadratic {
                        alpha,
                        beta: 0.07,
                        gamma: 1.0,
                    },
                    std_errors: vec![0.0; 3],
                    r_squared: 1.0,
                    residual_max: 0.0,
                    n_points: 6,
                    meta: None,
                },
            )
        };
        let keys = [8.0, 16.0, 32.0, 64.0];
        let train: Vec<_> = keys.iter().map(|k| base(*k, 3e-5)).collect();
        let test: Vec<_> = keys
            .iter()
            .map(|k| base(*k, if *k >= 32.0 { 6e-5 } else { 3e-5 }))
            .collect();
        let report = divergence_report(&train, &test, DEFAULT_DIVERGENCE_THRESHOLD).unwrap();
        assert_eq!(report.first_flagged, Some(32.0));

        // Absolute gaps are symmetric under swapping the families.
        let swapped = divergence_report(&test, &train, DEFAULT_DIVERGENCE_THRESHOLD).unwrap();
        for (a, b) in report.entries.iter().zip(&swapped.entries) {
            for (x, y) in a.gaps.iter().zip(&b.gaps) {
                assert_eq!(x.abs(), y.abs());
            }
        }
    }

    #[test]
    fn divergence_rejects_key_mismatch() {
        let lin = fit_linear(&series(vec![(1.0, 1.0), (2.0, 2.0)])).unwrap();
        let a = vec![(2.0, lin.clone()), (4.0, lin.clone())];
        let b = vec![(2.0, lin.clone()), (8.0, lin.clone())];
        assert!(divergence_report(&a, &b, 0.25).is_err());
        assert!(divergence_report(&a, &a[..1].to_vec(), 0.25).is_err());
    }

    #[test]
    fn monte_carlo_noise_recovery_stays_within_three_standard_errors() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let noise = Normal::new(0.0, 0.01).unwrap();
        let (alpha_true, beta_true, gamma_true) = (3e-5, 0.07, 1.0);
        let ms: Vec<f64> = (1..=30).map(|i| (i * 26) as f64).collect();
        let mut ok = 0;
        let trials = 100;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12345);
        for _ in 0..trials {
            let pts: Vec<(f64, f64)> = ms
                .iter()
                .map(|&m| {
                    (
                        m,
                        beta_true * m - alpha_true * m * m + gamma_true + noise.sample(&mut rng),
                    )
                })
                .collect();
            let fit = fit_quadratic(&series(pts)).unwrap();
            let c = fit.coefficients.as_slice();
            let truth = [alpha_true, beta_true, gamma_true];
            let within = c
                .iter()
                .zip(truth.iter())
                .zip(fit.std_errors.iter())
                .all(|((est, tr), se)| (est - tr).abs() <= 3.0 * se);
            if within {
                ok += 1;
            }
        }
        assert!(ok >= 95, "only {ok}/{trials} trials within 3 SE");
    }

    #[test]
    fn fit_json_shape_is_stable() {
        let fit = fit_linear(&series(vec![(1.0, 3.0), (2.0, 5.0)])).unwrap();
        let json = serde_json::to_value(&fit).unwrap();
        assert_eq!(json["kind"], "linear");
        assert!(json["coefficients"]["k"].is_number());
        assert!(json["r_squared"].is_number());
        assert!(json["residual_max"].is_number());
        assert_eq!(json["n_points"], 2);
        assert_eq!(json["meta"]["split"], "train");
        let back: ScalingFit = serde_json::from_value(json).unwrap();
        assert_eq!(back, fit);
    }
}
