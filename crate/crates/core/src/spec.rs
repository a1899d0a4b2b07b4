//! The three specification shapes behind one type.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gmm::GmmSpec;
use crate::metrics::Membership;
use crate::rect::{MultiRectSpec, RectSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecKind {
    SingleRect,
    MultiRect,
    Gmm,
}

impl SpecKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpecKind::SingleRect => "single-rect",
            SpecKind::MultiRect => "multi-rect",
            SpecKind::Gmm => "gmm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Specification {
    SingleRect(RectSpec),
    MultiRect(MultiRectSpec),
    Gmm(GmmSpec),
}

impl Specification {
    pub fn kind(&self) -> SpecKind {
        match self {
            Specification::SingleRect(_) => SpecKind::SingleRect,
            Specification::MultiRect(_) => SpecKind::MultiRect,
            Specification::Gmm(_) => SpecKind::Gmm,
        }
    }
}

impl Membership for Specification {
    fn dim(&self) -> usize {
        match self {
            Specification::SingleRect(r) => r.dim(),
            Specification::MultiRect(m) => m.dim(),
            Specification::Gmm(g) => g.dim(),
        }
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        match self {
            Specification::SingleRect(r) => r.contains(x),
            Specification::MultiRect(m) => m.contains(x),
            Specification::Gmm(g) => g.contains(x),
        }
    }
}
