//! Exact certification of box regions.
//!
//! σ is strictly increasing, so the minimum of `σ(wᵀx + b)` over a box is
//! attained at the corner that minimises each `wᵢxᵢ` independently. The
//! whole check is one pass over the coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::rect::{check_bounds, rotate_head, MultiRectSpec, RectSpec};
use crate::types::{sigmoid, ClassifierHead};

/// `Sat`: some point of the region scores `≤ tau` (a counterexample).
/// `Unsat`: every point scores `> tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactCertificate {
    pub verdict: Verdict,
    pub z_min: f64,
    pub score_min: f64,
    pub witness_rotated: Vec<f64>,
    pub witness_original: Vec<f64>,
    pub tau: f64,
    /// `score_min − tau`; non-positive exactly when the verdict is SAT.
    pub margin: f64,
    pub rect_index: usize,
}

/// Minimiser of `Σ wᵢxᵢ` over `[lower, upper]`. Zero weights take the lower
/// bound.
pub fn worst_case_point(weights: &[f64], lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(weights.len(), lower.len())?;
    ensure_dim(weights.len(), upper.len())?;
    ensure_finite(lower, "lower bounds")?;
    ensure_finite(upper, "upper bounds")?;
    check_bounds(lower, upper)?;
    Ok(weights
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&w, (&l, &u))| if w >= 0.0 { l } else { u })
        .collect())
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::ThresholdOutOfRange(tau))
    }
}

/// Certifies one box against a head already expressed in the box's rotated
/// coordinates (see [`rotate_head`]).
pub fn verify_rect(head_rotated: &ClassifierHead, rect: &RectSpec, tau: f64) -> Result<ExactCertificate> {
    ensure_dim(rect.dim(), head_rotated.dim())?;
    check_tau(tau)?;
    let w = head_rotated.weights();
    let witness_rotated = worst_case_point(w, rect.lower(), rect.upper())?;
    let z_min = w
        .iter()
        .zip(rect.lower().iter().zip(rect.upper()))
        .map(|(&w, (&l, &u))| (w * l).min(w * u))
        .sum::<f64>()
        + head_rotated.bias();
    let score_min = sigmoid(z_min);
    // ties go to SAT: the safety property is the strict `f(x) > tau`
    let verdict = if score_min > tau {
        Verdict::Unsat
    } else {
        Verdict::Sat
    };
    let witness_original = rect.rotation().apply_transpose(&witness_rotated)?;
    Ok(ExactCertificate {
        verdict,
        z_min,
        score_min,
        witness_rotated,
        witness_original,
        tau,
        margin: score_min - tau,
        rect_index: 0,
    })
}

/// Certificates for every box of a multi-region spec plus the disjunctive
/// aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCertificate {
    pub certificates: Vec<ExactCertificate>,
    /// SAT when any region is SAT.
    pub verdict: Verdict,
    pub min_margin: f64,
}

/// Verifies each region with its own rotated head. `head` is in original
/// coordinates.
pub fn verify_multi(head: &ClassifierHead, spec: &MultiRectSpec, tau: f64) -> Result<MultiCertificate> {
    verify_rects(head, spec.rects(), tau)
}

pub(crate) fn verify_rects(head: &ClassifierHead, rects: &[RectSpec], tau: f64) -> Result<MultiCertificate> {
    if rects.is_empty() {
        return Err(Error::Empty("multi-rect spec"));
    }
    check_tau(tau)?;
    let certificates = rects
        .par_iter()
        .enumerate()
        .map(|(i, rect)| {
            let rotated = rotate_head(head, rect.rotation())?;
            let mut cert = verify_rect(&rotated, rect, tau)?;
            cert.rect_index = i;
            Ok(cert)
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = if certificates.iter().any(|c| c.verdict == Verdict::Sat) {
        Verdict::Sat
    } else {
        Verdict::Unsat
    };
    let min_margin = certificates
        .iter()
        .map(|c| c.margin)
        .fold(f64::INFINITY, f64::min);
    Ok(MultiCertificate {
        certificates,
        verdict,
        min_margin,
    })
}

/// Single-box convenience: rotates `head` into the box frame and verifies.
pub fn verify_single(head: &ClassifierHead, rect: &RectSpec, tau: f64) -> Result<ExactCertificate> {
    let rotated = rotate_head(head, rect.rotation())?;
    verify_rect(&rotated, rect, tau)
}
