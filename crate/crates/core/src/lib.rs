//! Certification of sigmoid-head guardrail classifiers over regions of
//! activation space.
//!
//! A specification describes where harmful activations live: one rotated box,
//! one box per HDBSCAN cluster, or a Gaussian mixture with a density
//! boundary. Boxes are checked exactly against the head; mixtures get a
//! closed-form coverage probability.

pub mod cluster;
pub mod error;
pub mod gmm;
pub mod io;
pub mod metrics;
pub mod normal;
pub mod rect;
pub mod spec;
pub mod synth;
pub mod types;
pub mod verify;

pub use cluster::{hdbscan, ClusterResult, NOISE};
pub use error::{Error, Result};
pub use gmm::{certify_gmm, fit_gmm, Covariance, CovarianceKind, GmmFit, GmmSpec, ProbCertificate};
pub use metrics::{fidelity, pessimistic_threshold, roc, sweep, FidelityReport, Membership, RocAnalysis, SweepMethod, SweepRow};
pub use rect::{build_multi_rect, fit_rotation, single_rect, MultiRectSpec, RectSpec, Rotation};
pub use spec::{SpecKind, Specification};
pub use types::{inverse_sigmoid, sigmoid, ActivationSet, ClassifierHead, Score, Thresholds};
pub use verify::{verify_multi, verify_rect, verify_single, ExactCertificate, MultiCertificate, Verdict};
