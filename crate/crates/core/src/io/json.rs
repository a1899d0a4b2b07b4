//! JSON documents: classifier heads, specifications and reports.
//!
//! Numbers go through `serde_json`, which prints the shortest decimal that
//! round-trips, so every `f64` survives a write/read cycle unchanged.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{ComponentCoverage, Covariance, CovarianceKind, GmmSpec, ProbCertificate};
use crate::metrics::FidelityReport;
use crate::rect::{ClusteringParams, MultiRectSpec, RectSpec, Rotation};
use crate::spec::{SpecKind, Specification};
use crate::types::{ClassifierHead, Thresholds};
use crate::verify::{ExactCertificate, MultiCertificate, Verdict};

pub const TOOL_NAME: &str = "guardcert";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn schema_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserialises `text`, reporting failures with the JSON path of the
/// offending field.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema_error(path, e.into_inner().to_string())
    })
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| schema_error(".", e.to_string()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// --- heads -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadDoc {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadFile {
    pub head: ClassifierHead,
    pub thresholds: Option<Thresholds>,
    pub model_tag: Option<String>,
}

impl HeadFile {
    pub fn new(head: ClassifierHead) -> Self {
        Self {
            head,
            thresholds: None,
            model_tag: None,
        }
    }

    pub fn to_doc(&self) -> HeadDoc {
        HeadDoc {
            dim: self.head.dim(),
            weights: self.head.weights().to_vec(),
            bias: self.head.bias(),
            thresholds: self.thresholds,
            model_tag: self.model_tag.clone(),
        }
    }

    pub fn from_doc(doc: HeadDoc) -> Result<Self> {
        if doc.weights.len() != doc.dim {
            return Err(schema_error(
                "weights",
                format!("{} weights for dim {}", doc.weights.len(), doc.dim),
            ));
        }
        if let Some(i) = doc.weights.iter().position(|w| !w.is_finite()) {
            return Err(schema_error(format!("weights[{i}]"), "not finite"));
        }
        let head = ClassifierHead::new(doc.weights, doc.bias)
            .map_err(|e| schema_error("bias", e.to_string()))?;
        let thresholds = doc
            .thresholds
            .map(|t| Thresholds::new(t.tau_star, t.tau_pess))
            .transpose()
            .map_err(|e| schema_error("thresholds", e.to_string()))?;
        Ok(Self {
            head,
            thresholds,
            model_tag: doc.model_tag,
        })
    }
}

pub fn parse_head(text: &str) -> Result<HeadFile> {
    HeadFile::from_doc(from_json_str(text)?)
}

pub fn read_head(path: &Path) -> Result<HeadFile> {
    parse_head(&read_text(path)?)
}

pub fn write_head(head: &HeadFile, path: &Path) -> Result<()> {
    write_text(path, &to_json_string(&head.to_doc())?)
}

// --- specifications --------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDoc {
    /// Rows are the principal axes.
    pub rotation: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub member_count: usize,
    pub cluster_id: Option<i64>,
}

impl RectDoc {
    fn from_rect(r: &RectSpec) -> Self {
        Self {
            rotation: r.rotation().to_rows(),
            lower: r.lower().to_vec(),
            upper: r.upper().to_vec(),
            member_count: r.member_count(),
            cluster_id: r.cluster_id(),
        }
    }

    fn to_rect(&self, path: &str, dim: usize) -> Result<RectSpec> {
        if self.rotation.len() != dim {
            return Err(schema_error(
                format!("{path}.rotation"),
                format!("{} rows for dim {dim}", self.rotation.len()),
            ));
        }
        let rotation =
            Rotation::from_rows(&self.rotation).map_err(|e| schema_error(format!("{path}.rotation"), e.to_string()))?;
        RectSpec::new(
            rotation,
            self.lower.clone(),
            self.upper.clone(),
            self.member_count,
            self.cluster_id,
        )
        .map_err(|e| schema_error(format!("{path}.lower"), e.to_string()))
    }
}

/// One covariance block: a `d×d` matrix or a `d`-vector of variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceDoc {
    Full(Vec<Vec<f64>>),
    Diag(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecDoc {
    SingleRect {
        dim: usize,
        rect: RectDoc,
    },
    MultiRect {
        dim: usize,
        #[serde(default)]
        min_cluster_size: Option<usize>,
        #[serde(default)]
        metric: Option<String>,
        noise_count: usize,
        #[serde(default)]
        labels: Option<Vec<i64>>,
        rects: Vec<RectDoc>,
    },
    Gmm {
        dim: usize,
        covariance_kind: CovarianceKind,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<CovarianceDoc>,
        density_boundary: f64,
        #[serde(default)]
        low_confidence: bool,
    },
}

impl SpecDoc {
    pub fn from_spec(spec: &Specification) -> Result<Self> {
        Ok(match spec {
            Specification::SingleRect(r) => SpecDoc::SingleRect {
                dim: r.dim(),
                rect: RectDoc::from_rect(r),
            },
            Specification::MultiRect(m) => SpecDoc::MultiRect {
                dim: m.dim(),
                min_cluster_size: m.clustering.as_ref().map(|c| c.min_cluster_size),
                metric: m.clustering.as_ref().map(|c| c.metric.clone()),
                noise_count: m.noise_count,
                labels: m.labels.clone(),
                rects: m.rects().iter().map(RectDoc::from_rect).collect(),
            },
            Specification::Gmm(g) => SpecDoc::Gmm {
                dim: g.dim(),
                covariance_kind: g.kind(),
                weights: g.weights().to_vec(),
                means: g.means().to_vec(),
                covariances: g
                    .covariances()
                    .iter()
                    .map(|c| match c {
                        Covariance::Full(m) => {
                            CovarianceDoc::Full(m.row_iter().map(|r| r.iter().copied().collect()).collect())
                        }
                        Covariance::Diag(v) => CovarianceDoc::Diag(v.clone()),
                    })
                    .collect(),
                density_boundary: g.density_boundary.ok_or_else(|| {
                    schema_error("density_boundary", "mixture has no density boundary")
                })?,
                low_confidence: g.low_confidence,
            },
        })
    }

    pub fn into_spec(self) -> Result<Specification> {
        match self {
            SpecDoc::SingleRect { dim, rect } => Ok(Specification::SingleRect(rect.to_rect("rect", dim)?)),
            SpecDoc::MultiRect {
                dim,
                min_cluster_size,
                metric,
                noise_count,
                labels,
                rects,
            } => {
                if rects.is_empty() {
                    return Err(schema_error("rects", "at least one rectangle is required"));
                }
                let rects = rects
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r.to_rect(&format!("rects[{i}]"), dim))
                    .collect::<Result<Vec<_>>>()?;
                let mut spec = MultiRectSpec::new(rects, noise_count)?;
                spec.clustering = min_cluster_size.map(|m| ClusteringParams {
                    min_cluster_size: m,
                    metric: metric.unwrap_or_else(|| "cosine".into()),
                });
                spec.labels = labels;
                Ok(Specification::MultiRect(spec))
            }
            SpecDoc::Gmm {
                dim,
                covariance_kind,
                weights,
                means,
                covariances,
                density_boundary,
                low_confidence,
            } => {
                for (i, m) in means.iter().enumerate() {
                    if m.len() != dim {
                        return Err(schema_error(format!("means[{i}]"), format!("expected {dim} entries")));
                    }
                }
                let covs = covariances
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| match (covariance_kind, c) {
                        (CovarianceKind::Full, CovarianceDoc::Full(rows)) => {
                            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                                return Err(schema_error(
                                    format!("covariances[{i}]"),
                                    format!("expected a {dim}x{dim} matrix"),
                                ));
                            }
                            Ok(Covariance::Full(DMatrix::from_fn(dim, dim, |a, b| rows[a][b])))
                        }
                        (CovarianceKind::Diag, CovarianceDoc::Diag(v)) => Ok(Covariance::Diag(v)),
                        _ => Err(schema_error(
                            format!("covariances[{i}]"),
                            format!("does not match covariance_kind {covariance_kind:?}"),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if !density_boundary.is_finite() {
                    return Err(schema_error("density_boundary", "not finite"));
                }
                let mut spec =
                    GmmSpec::new(weights, means, covs).map_err(|e| schema_error("weights", e.to_string()))?;
                spec.density_boundary = Some(density_boundary);
                spec.low_confidence = low_confidence;
                Ok(Specification::Gmm(spec))
            }
        }
    }
}

pub fn parse_spec(text: &str) -> Result<Specification> {
    from_json_str::<SpecDoc>(text)?.into_spec()
}

pub fn spec_to_string(spec: &Specification) -> Result<String> {
    to_json_string(&SpecDoc::from_spec(spec)?)
}

pub fn read_spec(path: &Path) -> Result<Specification> {
    parse_spec(&read_text(path)?)
}

pub fn write_spec(spec: &Specification, path: &Path) -> Result<()> {
    write_text(path, &spec_to_string(spec)?)
}

// --- reports ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub rect_index: usize,
    pub verdict: Verdict,
    pub z_min: f64,
    pub score_min: f64,
    pub margin: f64,
    pub tau: f64,
    pub witness_rotated: Vec<f64>,
    pub witness_original: Vec<f64>,
}

impl From<&ExactCertificate> for CertificateDoc {
    fn from(c: &ExactCertificate) -> Self {
        Self {
            rect_index: c.rect_index,
            verdict: c.verdict,
            z_min: c.z_min,
            score_min: c.score_min,
            margin: c.margin,
            tau: c.tau,
            witness_rotated: c.witness_rotated.clone(),
            witness_original: c.witness_original.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSummary {
    pub kind: SpecKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_cluster_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_kind: Option<CovarianceKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_boundary: Option<f64>,
}

impl SpecSummary {
    pub fn of(spec: &Specification) -> Self {
        let mut s = Self {
            kind: spec.kind(),
            dim: 0,
            regions: None,
            min_cluster_size: None,
            noise_count: None,
            components: None,
            covariance_kind: None,
            density_boundary: None,
        };
        match spec {
            Specification::SingleRect(r) => {
                s.dim = r.dim();
                s.regions = Some(1);
            }
            Specification::MultiRect(m) => {
                s.dim = m.dim();
                s.regions = Some(m.rects().len());
                s.min_cluster_size = m.clustering.as_ref().map(|c| c.min_cluster_size);
                s.noise_count = Some(m.noise_count);
            }
            Specification::Gmm(g) => {
                s.dim = g.dim();
                s.components = Some(g.components());
                s.covariance_kind = Some(g.kind());
                s.density_boundary = g.density_boundary;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReportResult {
    Exact {
        verdict: Verdict,
        min_margin: f64,
        certificates: Vec<CertificateDoc>,
    },
    Probabilistic {
        total: f64,
        logit_threshold: f64,
        per_component: Vec<ComponentCoverage>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_coverage: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_passed: Option<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub spec: SpecSummary,
    pub tau: f64,
    /// `literal`, `star` or `pess`.
    pub tau_source: String,
    pub result: ReportResult,
}

impl Report {
    pub fn exact(spec: &Specification, tau_source: &str, cert: &MultiCertificate, tau: f64) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            spec: SpecSummary::of(spec),
            tau,
            tau_source: tau_source.into(),
            result: ReportResult::Exact {
                verdict: cert.verdict,
                min_margin: cert.min_margin,
                certificates: cert.certificates.iter().map(CertificateDoc::from).collect(),
            },
        }
    }

    pub fn probabilistic(
        spec: &Specification,
        tau_source: &str,
        cert: &ProbCertificate,
        min_coverage: Option<f64>,
    ) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            spec: SpecSummary::of(spec),
            tau: cert.tau,
            tau_source: tau_source.into(),
            result: ReportResult::Probabilistic {
                total: cert.total,
                logit_threshold: cert.logit_threshold,
                per_component: cert.per_component.clone(),
                min_coverage,
                gate_passed: min_coverage.map(|m| cert.total >= m),
            },
        }
    }
}

pub fn parse_report(text: &str) -> Result<Report> {
    from_json_str(text)
}

pub fn write_report(report: &Report, path: &Path) -> Result<()> {
    write_text(path, &to_json_string(report)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityDoc {
    pub tool: String,
    pub version: String,
    pub spec: SpecSummary,
    pub harmful: usize,
    pub benign: usize,
    #[serde(flatten)]
    pub report: FidelityReport,
}
