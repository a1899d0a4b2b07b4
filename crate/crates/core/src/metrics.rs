//! ROC analysis, threshold selection and specification fidelity.
//!
//! The flagging rule is `score > tau` throughout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::hdbscan;
use crate::error::{ensure_dim, Error, Result};
use crate::gmm::{fit_gmm, CovarianceKind, GmmSpec};
use crate::rect::{build_multi_rect, rect_contains, ClusteringParams, MultiRectSpec, RectSpec};
use crate::types::ActivationSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocAnalysis {
    /// Sorted by threshold, descending.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub tau_star: f64,
    pub youden_j: f64,
}

/// ROC curve over midpoint thresholds. `labels` are 1 for harmful.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocAnalysis> {
    ensure_dim(scores.len(), labels.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "scores" });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.iter().filter(|&&l| l == 0).count();
    if pos + neg != labels.len() {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidParameter(
            "ROC needs at least one positive and one negative label".into(),
        ));
    }

    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut thresholds = Vec::with_capacity(distinct.len() + 1);
    thresholds.push(distinct[distinct.len() - 1].next_up());
    for pair in distinct.windows(2).rev() {
        thresholds.push((pair[0] + pair[1]) * 0.5);
    }
    thresholds.push(distinct[0].next_down());

    let points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&s, &l) in scores.iter().zip(labels) {
                if s > t {
                    if l == 1 {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            RocPoint {
                threshold: t,
                fpr: fp as f64 / neg as f64,
                tpr: tp as f64 / pos as f64,
            }
        })
        .collect();

    let auc = trapezoid_auc(&points);
    // thresholds are descending, so the first maximiser is the largest one
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.tpr - p.fpr > points[best].tpr - points[best].fpr {
            best = i;
        }
    }
    Ok(RocAnalysis {
        auc,
        tau_star: points[best].threshold,
        youden_j: points[best].tpr - points[best].fpr,
        points,
    })
}

pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) * 0.5)
        .sum()
}

/// Largest double strictly below the minimum harmful score, so that every
/// harmful score is flagged under `score > tau`.
pub fn pessimistic_threshold(scores_harmful: &[f64]) -> Result<f64> {
    if scores_harmful.is_empty() {
        return Err(Error::Empty("harmful scores"));
    }
    let min = scores_harmful.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::NonFinite { what: "scores" });
    }
    Ok(min.next_down())
}

/// Region membership predicate.
pub trait Membership {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> Result<bool>;
}

impl Membership for RectSpec {
    fn dim(&self) -> usize {
        RectSpec::dim(self)
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        rect_contains(self, x)
    }
}

impl Membership for MultiRectSpec {
    fn dim(&self) -> usize {
        MultiRectSpec::dim(self)
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        MultiRectSpec::contains(self, x)
    }
}

impl Membership for GmmSpec {
    fn dim(&self) -> usize {
        GmmSpec::dim(self)
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        GmmSpec::contains(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing fell inside the region; precision is reported as 0.
    pub precision_undefined: bool,
}

impl FidelityReport {
    pub fn from_counts(true_pos: usize, false_pos: usize, true_neg: usize, false_neg: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            true_pos,
            false_pos,
            true_neg,
            false_neg,
            precision,
            recall,
            f1,
            precision_undefined: true_pos + false_pos == 0,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Harmful points inside the region are true positives, benign points
/// outside are true negatives.
pub fn fidelity<M: Membership + ?Sized>(
    region: &M,
    harmful: &ActivationSet,
    benign: &ActivationSet,
) -> Result<FidelityReport> {
    ensure_dim(region.dim(), harmful.dim())?;
    ensure_dim(region.dim(), benign.dim())?;
    let count = |set: &ActivationSet| -> Result<usize> {
        let mut inside = 0;
        for x in set.rows() {
            if region.contains(x)? {
                inside += 1;
            }
        }
        Ok(inside)
    };
    let tp = count(harmful)?;
    let fp = count(benign)?;
    Ok(FidelityReport::from_counts(tp, fp, benign.len() - fp, harmful.len() - tp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMethod {
    /// Grid values are minimum cluster sizes.
    MultiRect,
    /// Grid values are component counts.
    Gmm { kind: CovarianceKind, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub regions: usize,
    /// Fewer than two clusters were found (multi-rect only).
    pub degenerate: bool,
}

/// Multi-rect spec from HDBSCAN labels, or `None` when every point is noise.
pub fn multi_rect_from_clustering(points: &ActivationSet, m: usize) -> Result<Option<MultiRectSpec>> {
    let clusters = hdbscan(points, m)?;
    match build_multi_rect(points, &clusters.labels) {
        Ok(mut spec) => {
            spec.clustering = Some(ClusteringParams {
                min_cluster_size: m,
                metric: "cosine".into(),
            });
            Ok(Some(spec))
        }
        Err(Error::AllNoise) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Rebuilds the specification for each grid value and scores it on the
/// holdout sets. Rows follow grid order.
pub fn sweep(
    points: &ActivationSet,
    harmful: &ActivationSet,
    benign: &ActivationSet,
    method: SweepMethod,
    grid: &[usize],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    let n = points.len();
    for &v in grid {
        let ok = match method {
            SweepMethod::MultiRect => (2..=n).contains(&v),
            SweepMethod::Gmm { .. } => (1..=n).contains(&v),
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "grid value {v} is invalid for {n} construction points"
            )));
        }
    }
    grid.par_iter()
        .map(|&v| match method {
            SweepMethod::MultiRect => match multi_rect_from_clustering(points, v)? {
                Some(spec) => {
                    let f = fidelity(&spec, harmful, benign)?;
                    Ok(SweepRow {
                        param: v,
                        precision: f.precision,
                        recall: f.recall,
                        f1: f.f1,
                        regions: spec.rects().len(),
                        degenerate: spec.rects().len() < 2,
                    })
                }
                None => {
                    ensure_dim(points.dim(), harmful.dim())?;
                    ensure_dim(points.dim(), benign.dim())?;
                    Ok(SweepRow {
                        param: v,
                        precision: 0.0,
                        recall: 0.0,
                        f1: 0.0,
                        regions: 0,
                        degenerate: true,
                    })
                }
            },
            SweepMethod::Gmm { kind, seed } => {
                let fit = fit_gmm(points, v, kind, seed)?;
                let f = fidelity(&fit.spec, harmful, benign)?;
                Ok(SweepRow {
                    param: v,
                    precision: f.precision,
                    recall: f.recall,
                    f1: f.f1,
                    regions: v,
                    degenerate: false,
                })
            }
        })
        .collect()
}
