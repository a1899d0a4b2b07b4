//! Gaussian mixture specifications.
//!
//! Fitting is plain expectation–maximisation with k-means++ seeding and a
//! ridge `εI` added to every covariance. Certification pushes each component
//! through the linear head, where it becomes a univariate Gaussian over the
//! logit, and sums the mass above `σ⁻¹(τ)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::normal::normal_sf;
use crate::types::{dot, inverse_sigmoid, ActivationSet, ClassifierHead};
use crate::verify::check_tau;

pub const EM_TOLERANCE: f64 = 1e-6;
pub const EM_MAX_ITER: usize = 500;
/// Ridge as a fraction of the mean per-coordinate data variance.
pub const REG_SCALE: f64 = 1e-6;
/// Percentile of construction-point log-densities used as the boundary.
pub const BOUNDARY_PERCENTILE: f64 = 5.0;
/// Below this many construction points the boundary is flagged.
pub const LOW_CONFIDENCE_POINTS: usize = 20;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Full,
    Diag,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(DMatrix<f64>),
    Diag(Vec<f64>),
}

impl Covariance {
    pub fn kind(&self) -> CovarianceKind {
        match self {
            Covariance::Full(_) => CovarianceKind::Full,
            Covariance::Diag(_) => CovarianceKind::Diag,
        }
    }

    /// `wᵀ Σ w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        match self {
            Covariance::Full(m) => {
                let v = DVector::from_column_slice(w);
                v.dot(&(m * &v))
            }
            Covariance::Diag(var) => w.iter().zip(var).map(|(wi, s)| wi * wi * s).sum(),
        }
    }
}

/// Per-component quantities needed to evaluate densities.
#[derive(Debug, Clone, PartialEq)]
enum Factor {
    Full { chol_l: DMatrix<f64>, log_norm: f64 },
    Diag { inv_var: Vec<f64>, log_norm: f64 },
}

impl Factor {
    fn new(cov: &Covariance, component: usize) -> Result<Self> {
        match cov {
            Covariance::Full(m) => {
                let d = m.nrows();
                let chol = Cholesky::<f64, Dyn>::new(m.clone())
                    .ok_or(Error::NotPositiveDefinite { component })?;
                let l = chol.l();
                let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                Ok(Factor::Full {
                    chol_l: l,
                    log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
                })
            }
            Covariance::Diag(var) => {
                if var.iter().any(|&v| v <= 0.0) {
                    return Err(Error::NotPositiveDefinite { component });
                }
                let log_det: f64 = var.iter().map(|v| v.ln()).sum();
                Ok(Factor::Diag {
                    inv_var: var.iter().map(|v| 1.0 / v).collect(),
                    log_norm: -0.5 * (var.len() as f64 * LN_2PI + log_det),
                })
            }
        }
    }

    fn log_pdf(&self, mean: &[f64], x: &[f64]) -> f64 {
        match self {
            Factor::Full { chol_l, log_norm } => {
                let diff = DVector::from_iterator(x.len(), x.iter().zip(mean).map(|(a, b)| a - b));
                let y = chol_l
                    .solve_lower_triangular(&diff)
                    .expect("Cholesky factor has a positive diagonal");
                log_norm - 0.5 * y.norm_squared()
            }
            Factor::Diag { inv_var, log_norm } => {
                let maha: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(inv_var)
                    .map(|((a, b), iv)| (a - b) * (a - b) * iv)
                    .sum();
                log_norm - 0.5 * maha
            }
        }
    }
}

/// Fitted mixture plus its density membership boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Covariance>,
    kind: CovarianceKind,
    /// Log-density at the boundary percentile of the construction points.
    pub density_boundary: Option<f64>,
    pub low_confidence: bool,
    factors: Vec<Factor>,
}

impl GmmSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Covariance>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Empty("mixture components"));
        }
        ensure_dim(k, means.len())?;
        ensure_dim(k, covariances.len())?;
        ensure_finite(&weights, "mixture weights")?;
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("mixture weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::Empty("component mean"));
        }
        let kind = covariances[0].kind();
        for (c, (mean, cov)) in means.iter().zip(&covariances).enumerate() {
            ensure_dim(d, mean.len())?;
            ensure_finite(mean, "component mean")?;
            if cov.kind() != kind {
                return Err(Error::InvalidParameter(format!(
                    "component {c} mixes covariance kinds"
                )));
            }
            match cov {
                Covariance::Full(m) => {
                    ensure_dim(d, m.nrows())?;
                    ensure_dim(d, m.ncols())?;
                    ensure_finite(m.as_slice(), "covariance")?;
                    if (m - m.transpose()).amax() > 1e-10 {
                        return Err(Error::InvalidParameter(format!(
                            "covariance of component {c} is not symmetric"
                        )));
                    }
                }
                Covariance::Diag(v) => {
                    ensure_dim(d, v.len())?;
                    ensure_finite(v, "covariance")?;
                }
            }
        }
        let factors = covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| Factor::new(cov, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            weights,
            means,
            covariances,
            kind,
            density_boundary: None,
            low_confidence: false,
            factors,
        })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Covariance] {
        &self.covariances
    }

    fn component_log_pdfs(&self, x: &[f64], out: &mut [f64]) {
        for (c, slot) in out.iter_mut().enumerate().take(self.components()) {
            *slot = if self.weights[c] > 0.0 {
                self.weights[c].ln() + self.factors[c].log_pdf(&self.means[c], x)
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    /// Membership test: `log p(x) ≥ boundary`. Requires a boundary.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        let boundary = self
            .density_boundary
            .ok_or(Error::InvalidParameter("mixture has no density boundary".into()))?;
        Ok(log_density(self, x)? >= boundary)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log p(x)` under the mixture.
pub fn log_density(spec: &GmmSpec, x: &[f64]) -> Result<f64> {
    ensure_dim(spec.dim(), x.len())?;
    ensure_finite(x, "input vector")?;
    let mut buf = vec![0.0; spec.components()];
    spec.component_log_pdfs(x, &mut buf);
    Ok(log_sum_exp(&buf))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBoundary {
    pub value: f64,
    pub low_confidence: bool,
}

/// Percentile with linear interpolation between the closest order
/// statistics (`pos = p/100 · (n − 1)`).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// 5th-percentile log-density of `points` under `spec`.
pub fn density_boundary(spec: &GmmSpec, points: &ActivationSet) -> Result<DensityBoundary> {
    ensure_dim(spec.dim(), points.dim())?;
    let dens: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| log_density(spec, points.row(i)))
        .collect::<Result<_>>()?;
    Ok(DensityBoundary {
        value: percentile(&dens, BOUNDARY_PERCENTILE),
        low_confidence: points.len() < LOW_CONFIDENCE_POINTS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub spec: GmmSpec,
    /// Mean per-point log-likelihood after initialisation and after every
    /// accepted M-step. An iterate that would lower it ends the fit instead.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Components re-seeded after collapsing to zero mass.
    pub reseeds: usize,
}

impl GmmFit {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood.last().expect("history is never empty")
    }
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Covariance>,
}

impl Params {
    fn to_spec(&self) -> Result<GmmSpec> {
        GmmSpec::new(self.weights.clone(), self.means.clone(), self.covs.clone())
    }
}

/// Responsibility-weighted mean and biased covariance (plus ridge).
fn weighted_moments(
    points: &ActivationSet,
    resp: &[f64],
    mass: f64,
    kind: CovarianceKind,
    reg: f64,
) -> (Vec<f64>, Covariance) {
    let d = points.dim();
    let mut mean = vec![0.0; d];
    for (row, &r) in points.rows().zip(resp) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += r * v);
    }
    mean.iter_mut().for_each(|m| *m /= mass);
    let cov = match kind {
        CovarianceKind::Full => {
            let n = points.len();
            let scaled = DMatrix::from_fn(n, d, |i, j| resp[i].sqrt() * (points.row(i)[j] - mean[j]));
            let mut m = scaled.tr_mul(&scaled) / mass;
            // symmetrise against rounding in the product
            m = (&m + m.transpose()) * 0.5;
            for i in 0..d {
                m[(i, i)] += reg;
            }
            Covariance::Full(m)
        }
        CovarianceKind::Diag => {
            let mut var = vec![0.0; d];
            for (row, &r) in points.rows().zip(resp) {
                for j in 0..d {
                    let diff = row[j] - mean[j];
                    var[j] += r * diff * diff;
                }
            }
            var.iter_mut().for_each(|v| *v = *v / mass + reg);
            Covariance::Diag(var)
        }
    };
    (mean, cov)
}

fn kmeans_pp(points: &ActivationSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centres = vec![points.row(rng.random_range(0..n)).to_vec()];
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut d2: Vec<f64> = points.rows().map(|r| sq(r, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(idx).to_vec();
        for (dist, row) in d2.iter_mut().zip(points.rows()) {
            *dist = dist.min(sq(row, &c));
        }
        centres.push(c);
    }
    centres
}

/// E-step: responsibilities (row-major `N×K`), per-point log-likelihood.
fn e_step(spec: &GmmSpec, points: &ActivationSet) -> (Vec<f64>, Vec<f64>) {
    let k = spec.components();
    let rows: Vec<(Vec<f64>, f64)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![0.0; k];
            spec.component_log_pdfs(points.row(i), &mut buf);
            let lse = log_sum_exp(&buf);
            buf.iter_mut().for_each(|v| *v = (*v - lse).exp());
            (buf, lse)
        })
        .collect();
    let mut resp = Vec::with_capacity(points.len() * k);
    let mut point_ll = Vec::with_capacity(points.len());
    for (r, l) in rows {
        resp.extend(r);
        point_ll.push(l);
    }
    (resp, point_ll)
}

/// Fits a `k`-component mixture by EM. Deterministic for a given seed.
pub fn fit_gmm(points: &ActivationSet, k: usize, kind: CovarianceKind, seed: u64) -> Result<GmmFit> {
    let (n, d) = (points.len(), points.dim());
    if k == 0 {
        return Err(Error::InvalidParameter("number of components must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InsufficientSamples(format!(
            "{k} components requested from {n} points"
        )));
    }
    if kind == CovarianceKind::Full && n < d + 2 {
        return Err(Error::InsufficientSamples(format!(
            "full covariance in dimension {d} needs at least {} points, got {n}",
            d + 2
        )));
    }

    let all = vec![1.0; n];
    let (_, data_cov) = weighted_moments(points, &all, n as f64, kind, 0.0);
    let mean_var = match &data_cov {
        Covariance::Full(m) => m.diagonal().mean(),
        Covariance::Diag(v) => v.iter().sum::<f64>() / d as f64,
    };
    let reg = if mean_var > 0.0 { REG_SCALE * mean_var } else { REG_SCALE };
    let init_cov = match data_cov {
        Covariance::Full(mut m) => {
            for i in 0..d {
                m[(i, i)] += reg;
            }
            Covariance::Full(m)
        }
        Covariance::Diag(v) => Covariance::Diag(v.into_iter().map(|s| s + reg).collect()),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Params {
        weights: vec![1.0 / k as f64; k],
        means: kmeans_pp(points, k, &mut rng),
        covs: vec![init_cov.clone(); k],
    };
    let mut spec = params.to_spec()?;
    let (mut resp, mut point_ll) = e_step(&spec, points);
    let mut history = vec![point_ll.iter().sum::<f64>() / n as f64];
    let mut converged = false;
    let mut iterations = 0;
    let mut reseeds = 0;

    while iterations < EM_MAX_ITER {
        iterations += 1;
        for c in 0..k {
            let col: Vec<f64> = (0..n).map(|i| resp[i * k + c]).collect();
            let mass: f64 = col.iter().sum();
            if mass < 1e-10 * n as f64 {
                // collapsed component: restart it at the worst-explained point
                let worst = (0..n)
                    .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)))
                    .expect("n > 0");
                params.means[c] = points.row(worst).to_vec();
                params.covs[c] = init_cov.clone();
                params.weights[c] = 1.0 / n as f64;
                reseeds += 1;
                continue;
            }
            let (mean, cov) = weighted_moments(points, &col, mass, kind, reg);
            params.means[c] = mean;
            params.covs[c] = cov;
            params.weights[c] = mass / n as f64;
        }
        let total: f64 = params.weights.iter().sum();
        params.weights.iter_mut().for_each(|w| *w /= total);

        let candidate = params.to_spec()?;
        let (r, l) = e_step(&candidate, points);
        let ll = l.iter().sum::<f64>() / n as f64;
        let prev = *history.last().expect("non-empty");
        if ll < prev {
            // rounding or a re-seed lowered the likelihood: keep the last iterate
            converged = true;
            break;
        }
        spec = candidate;
        resp = r;
        point_ll = l;
        history.push(ll);
        if ll - prev < EM_TOLERANCE {
            converged = true;
            break;
        }
    }

    let boundary = percentile(&point_ll, BOUNDARY_PERCENTILE);
    spec.density_boundary = Some(boundary);
    spec.low_confidence = n < LOW_CONFIDENCE_POINTS;
    Ok(GmmFit {
        spec,
        log_likelihood: history,
        iterations,
        converged,
        reseeds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentCoverage {
    pub weight: f64,
    /// `wᵀμ_c + b`.
    pub mu_z: f64,
    /// `√(wᵀΣ_c w)`.
    pub sigma_z: f64,
    /// Mass of this component's logit above the logit threshold.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbCertificate {
    pub tau: f64,
    pub logit_threshold: f64,
    pub per_component: Vec<ComponentCoverage>,
    /// `Σ π_c p_c`.
    pub total: f64,
}

/// Probability, under the mixture, that an activation scores above `tau`.
pub fn certify_gmm(spec: &GmmSpec, head: &ClassifierHead, tau: f64) -> Result<ProbCertificate> {
    ensure_dim(spec.dim(), head.dim())?;
    check_tau(tau)?;
    let threshold = inverse_sigmoid(tau)?;
    let w = head.weights();
    let mut per_component = Vec::with_capacity(spec.components());
    for c in 0..spec.components() {
        let mu_z = dot(w, &spec.means[c]) + head.bias();
        let var = spec.covariances[c].quadratic_form(w);
        if var < 0.0 || !var.is_finite() {
            return Err(Error::NegativeVariance {
                component: c,
                variance: var,
            });
        }
        let sigma_z = var.sqrt();
        let p = if sigma_z == 0.0 {
            if mu_z > threshold {
                1.0
            } else {
                0.0
            }
        } else {
            normal_sf((threshold - mu_z) / sigma_z)
        };
        per_component.push(ComponentCoverage {
            weight: spec.weights[c],
            mu_z,
            sigma_z,
            p,
        });
    }
    let total = per_component.iter().map(|c| c.weight * c.p).sum::<f64>().clamp(0.0, 1.0);
    Ok(ProbCertificate {
        tau,
        logit_threshold: threshold,
        per_component,
        total,
    })
}
