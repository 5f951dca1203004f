//! Binary morphology with square structuring elements.

use serde::{Deserialize, Serialize};

use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphKind {
    Erode,
    Dilate,
    Open,
    Close,
}

/// One step of a morphology plan: operation and kernel radius (kernel side `2r+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphStep {
    pub op: MorphKind,
    pub radius: usize,
}

impl MorphStep {
    pub fn new(op: MorphKind, radius: usize) -> Self {
        MorphStep { op, radius }
    }
}

pub fn apply_plan(mask: &BinaryMask, plan: &[MorphStep]) -> BinaryMask {
    plan.iter().fold(mask.clone(), |m, step| match step.op {
        MorphKind::Erode => erode(&m, step.radius),
        MorphKind::Dilate => dilate(&m, step.radius),
        MorphKind::Open => dilate(&erode(&m, step.radius), step.radius),
        MorphKind::Close => erode(&dilate(&m, step.radius), step.radius),
    })
}

/// Pixels outside the frame are ignored (neither foreground nor background).
pub fn erode(mask: &BinaryMask, r: usize) -> BinaryMask {
    separable(mask, r, true)
}

pub fn dilate(mask: &BinaryMask, r: usize) -> BinaryMask {
    separable(mask, r, false)
}

fn separable(mask: &BinaryMask, r: usize, erode: bool) -> BinaryMask {
    if r == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let pass = |get: &dyn Fn(usize, usize) -> bool, x: usize, y: usize, horizontal: bool| {
        let (lo, hi, fixed) = if horizontal {
            (x.saturating_sub(r), (x + r).min(w - 1), y)
        } else {
            (y.saturating_sub(r), (y + r).min(h - 1), x)
        };
        let mut it = (lo..=hi).map(|i| if horizontal { get(i, fixed) } else { get(fixed, i) });
        if erode {
            it.all(|b| b)
        } else {
            it.any(|b| b)
        }
    };
    let rows = BinaryMask::from_fn(w, h, |x, y| pass(&|a, b| mask.get(a, b), x, y, true));
    BinaryMask::from_fn(w, h, |x, y| pass(&|a, b| rows.get(a, b), x, y, false))
}
