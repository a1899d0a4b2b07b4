//! Shared domain types and the sigmoid head.
//!
//! All arithmetic is carried out in `f64`; the interchange formats store
//! `f32` payloads which are widened on read.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Numerically stable logistic function.
///
/// Branches on the sign of `z` so that `exp` is only ever evaluated on a
/// non-positive argument.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Maps a probability threshold back to logit space, `ln(tau / (1 - tau))`.
pub fn inverse_sigmoid(tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::ThresholdOutOfRange(tau));
    }
    // ln(tau) - ln(1 - tau), with ln_1p keeping precision for small tau
    Ok(tau.ln() - (-tau).ln_1p())
}

/// Output of the sigmoid head, `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Decision rule shared by every metric: flagged iff `score > tau`.
    pub fn flags(self, tau: f64) -> bool {
        self.0 > tau
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Linear classification head followed by a sigmoid: `f(x) = σ(wᵀx + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Vec<f64>,
    bias: f64,
}

impl ClassifierHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("head weights"));
        }
        ensure_finite(&weights, "head weights")?;
        if !bias.is_finite() {
            return Err(Error::NonFinite { what: "head bias" });
        }
        Ok(Self { weights, bias })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Pre-activation `wᵀx + b`.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        ensure_dim(self.dim(), x.len())?;
        ensure_finite(x, "input vector")?;
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn score(&self, x: &[f64]) -> Result<Score> {
        self.logit(x).map(|z| Score(sigmoid(z)))
    }
}

/// Evaluates the head on a single activation vector.
pub fn head_score(head: &ClassifierHead, x: &[f64]) -> Result<Score> {
    head.score(x)
}

/// Decision thresholds attached to a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Youden-optimal threshold.
    pub tau_star: f64,
    /// Most permissive threshold that keeps recall at 1 on the reference set.
    pub tau_pess: f64,
}

impl Thresholds {
    pub fn new(tau_star: f64, tau_pess: f64) -> Result<Self> {
        for tau in [tau_star, tau_pess] {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::ThresholdOutOfRange(tau));
            }
        }
        Ok(Self { tau_star, tau_pess })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenPosition {
    First,
    Last,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivationMeta {
    pub model: Option<String>,
    pub token_position: Option<TokenPosition>,
    pub source: Option<String>,
}

/// `N×d` matrix of pre-classification activations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    labels: Option<Vec<u8>>,
    pub meta: ActivationMeta,
}

impl ActivationSet {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidShape(format!(
                "activation set must be at least 1x1, got {rows}x{dim}"
            )));
        }
        if data.len() != rows * dim {
            return Err(Error::InvalidShape(format!(
                "{} values cannot fill a {rows}x{dim} matrix",
                data.len()
            )));
        }
        ensure_finite(&data, "activations")?;
        Ok(Self {
            data,
            rows,
            dim,
            labels: None,
            meta: ActivationMeta::default(),
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            ensure_dim(dim, row.as_ref().len())?;
            data.extend_from_slice(row.as_ref());
        }
        Self::new(rows.len(), dim, data)
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                rows: self.rows,
            });
        }
        if let Some(pos) = labels.iter().position(|&l| l > 1) {
            return Err(Error::InvalidLabel {
                line: pos + 1,
                value: labels[pos].to_string(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// New set containing the given rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty("row selection"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidShape(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(indices.len(), self.dim, data)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i]).collect());
        }
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Rows whose label equals `label`. Errors when the set is unlabelled.
    pub fn filter_label(&self, label: u8) -> Result<Self> {
        let labels = self
            .labels
            .as_ref()
            .ok_or(Error::Empty("labels (set is unlabelled)"))?;
        let idx: Vec<usize> = (0..self.rows).filter(|&i| labels[i] == label).collect();
        self.select(&idx)
    }

    pub fn scores(&self, head: &ClassifierHead) -> Result<Vec<f64>> {
        self.rows().map(|x| head.score(x).map(Score::value)).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
