//! Second-moment ellipse fit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::label::{Blob, MIN_BLOB_AREA};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center: (f64, f64),
    /// Full major-axis length in pixels.
    pub major: f64,
    /// Full minor-axis length in pixels, at least 1.
    pub minor: f64,
    /// Angle of the major axis from +x towards +y (image rows), in `[0, pi)`.
    pub orientation: f64,
    /// All pixels collinear; the minor axis was clamped.
    pub degenerate: bool,
}

impl EllipseFit {
    pub fn area(&self) -> f64 {
        PI * self.major * self.minor / 4.0
    }
}

/// Central second moments `(mu20, mu02, mu11)` normalized by pixel count.
pub fn central_moments(blob: &Blob) -> (f64, f64, f64) {
    let (cx, cy) = blob.centroid;
    let n = blob.area as f64;
    let (mut m20, mut m02, mut m11) = (0.0, 0.0, 0.0);
    for &(x, y) in &blob.pixels {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        m20 += dx * dx;
        m02 += dy * dy;
        m11 += dx * dy;
    }
    (m20 / n, m02 / n, m11 / n)
}

/// Fits the ellipse with the blob's second central moments.
///
/// Axis length is `4 * sqrt(eigenvalue)` of the pixel covariance; the
/// orientation follows the principal eigenvector.
pub fn fit_ellipse(blob: &Blob) -> Result<EllipseFit> {
    if blob.area < MIN_BLOB_AREA {
        return Err(Error::Precondition(format!(
            "ellipse fit needs at least {MIN_BLOB_AREA} pixels, blob has {}",
            blob.area
        )));
    }
    let (m20, m02, m11) = central_moments(blob);
    let mean = (m20 + m02) / 2.0;
    let rad = (((m20 - m02) / 2.0).powi(2) + m11 * m11).sqrt();
    let l_max = mean + rad;
    let l_min = (mean - rad).max(0.0);
    let degenerate = l_min <= 1e-9 * l_max.max(1.0);

    let mut orientation = if rad <= 1e-12 * mean.max(1.0) {
        0.0
    } else {
        0.5 * (2.0 * m11).atan2(m20 - m02)
    };
    if orientation < 0.0 {
        orientation += PI;
    }
    if orientation >= PI {
        orientation -= PI;
    }

    let major = 4.0 * l_max.sqrt();
    let minor = if degenerate { 1.0 } else { (4.0 * l_min.sqrt()).max(1.0) };
    Ok(EllipseFit {
        center: blob.centroid,
        major: major.max(minor),
        minor,
        orientation,
        degenerate,
    })
}
