//! Shape descriptors and the etch-pit shape gate.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::ellipse::EllipseFit;
use super::label::Blob;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    /// Major over minor axis of the fitted ellipse.
    pub lengthiness: f64,
    /// Pixel area over fitted-ellipse area.
    pub compactness: f64,
    /// `4 pi A / P^2` with the traced outer-contour perimeter.
    pub circularity: f64,
    pub area: usize,
    pub perimeter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateLimits {
    pub max_lengthiness: f64,
    pub min_compactness: f64,
    pub min_circularity: f64,
}

impl Default for GateLimits {
    fn default() -> Self {
        GateLimits {
            max_lengthiness: 3.0,
            min_compactness: 0.6,
            min_circularity: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    Degenerate,
    Lengthiness,
    Circularity,
    Compactness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum GateVerdict {
    Keep,
    /// Every failed criterion, in check order (lengthiness, circularity, compactness).
    Reject { reasons: Vec<RejectReason> },
}

impl GateVerdict {
    pub fn is_keep(&self) -> bool {
        matches!(self, GateVerdict::Keep)
    }

    /// First failed criterion.
    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            GateVerdict::Keep => None,
            GateVerdict::Reject { reasons } => reasons.first().copied(),
        }
    }
}

const STEPS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Length of the outer 8-connected contour: axis steps count 1, diagonal steps sqrt(2).
///
/// Moore-neighbour tracing from the top-left pixel, stopping when the first
/// move repeats. Interior holes do not contribute.
pub fn contour_perimeter(blob: &Blob) -> f64 {
    if blob.area <= 1 {
        return 0.0;
    }
    let mask = blob.local_mask();
    let fg = |x: i64, y: i64| mask.get_or_false(x as isize, y as isize);
    let start = {
        let &(x, y) = blob.pixels.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
        (x as i64 - blob.bbox.x0 as i64, y as i64 - blob.bbox.y0 as i64)
    };

    let mut cur = start;
    let mut search_from = 4usize;
    let mut first_move: Option<usize> = None;
    let mut length = 0.0;
    let limit = 8 * blob.area + 8;
    for _ in 0..limit {
        let Some(d) = (0..8)
            .map(|i| (search_from + i) % 8)
            .find(|&d| fg(cur.0 + STEPS[d].0, cur.1 + STEPS[d].1))
        else {
            return 0.0;
        };
        if cur == start {
            match first_move {
                None => first_move = Some(d),
                Some(fd) if fd == d => return length,
                Some(_) => {}
            }
        }
        length += if d % 2 == 0 { 1.0 } else { SQRT_2 };
        cur = (cur.0 + STEPS[d].0, cur.1 + STEPS[d].1);
        search_from = if d % 2 == 0 { (d + 6) % 8 } else { (d + 5) % 8 };
    }
    length
}

pub fn descriptors(blob: &Blob, fit: &EllipseFit) -> ShapeDescriptors {
    let area = blob.area;
    let perimeter = contour_perimeter(blob);
    let circularity = if perimeter > 0.0 {
        4.0 * PI * area as f64 / (perimeter * perimeter)
    } else {
        0.0
    };
    ShapeDescriptors {
        lengthiness: fit.major / fit.minor,
        compactness: area as f64 / fit.area(),
        circularity,
        area,
        perimeter,
    }
}

/// Keeps a blob iff lengthiness <= max AND compactness >= min AND circularity >= min.
pub fn shape_gate(blob: &Blob, fit: &EllipseFit, limits: &GateLimits) -> (ShapeDescriptors, GateVerdict) {
    let d = descriptors(blob, fit);
    if fit.degenerate {
        return (
            d,
            GateVerdict::Reject {
                reasons: vec![RejectReason::Degenerate],
            },
        );
    }
    (d, judge(&d, limits))
}

pub fn judge(d: &ShapeDescriptors, limits: &GateLimits) -> GateVerdict {
    let mut reasons = Vec::new();
    if d.lengthiness > limits.max_lengthiness {
        reasons.push(RejectReason::Lengthiness);
    }
    if d.circularity < limits.min_circularity {
        reasons.push(RejectReason::Circularity);
    }
    if d.compactness < limits.min_compactness {
        reasons.push(RejectReason::Compactness);
    }
    if reasons.is_empty() {
        GateVerdict::Keep
    } else {
        GateVerdict::Reject { reasons }
    }
}
