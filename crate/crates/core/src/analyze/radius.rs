use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius thresholds (micrometres, ascending) separating named size classes;
/// `labels` has one more entry than `thresholds_um`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeClasses {
    pub thresholds_um: Vec<f64>,
    pub labels: Vec<String>,
}

impl Default for SizeClasses {
    fn default() -> Self {
        SizeClasses {
            thresholds_um: vec![3.0, 6.0],
            labels: vec!["small".into(), "medium".into(), "large".into()],
        }
    }
}

impl SizeClasses {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.thresholds_um.len() + 1 {
            return Err(Error::Config("size classes need one label more than thresholds".into()));
        }
        if self.thresholds_um.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("size thresholds must increase".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitRadius {
    pub radius_px: f64,
    pub radius_um: f64,
    pub class: usize,
    pub label: String,
}

/// Equivalent-disk radius `sqrt(area / pi)` and its size class.
pub fn burgers_radius(area_px: usize, pixel_size_um: f64, classes: &SizeClasses) -> Result<PitRadius> {
    classes.validate()?;
    if area_px == 0 {
        return Err(Error::InvalidInput("pit mask has zero area".into()));
    }
    if !(pixel_size_um > 0.0) {
        return Err(Error::Config(format!("pixel size {pixel_size_um} must be positive")));
    }
    let radius_px = (area_px as f64 / std::f64::consts::PI).sqrt();
    let radius_um = radius_px * pixel_size_um;
    let class = classes.thresholds_um.iter().filter(|&&t| radius_um >= t).count();
    Ok(PitRadius {
        radius_px,
        radius_um,
        class,
        label: classes.labels[class].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_pixel_pit() {
        let r = burgers_radius(100, 1.0, &SizeClasses::default()).unwrap();
        assert!((r.radius_um - 5.641895835477563).abs() < 1e-12);
        assert_eq!(r.label, "medium");
        let r2 = burgers_radius(100, 2.0, &SizeClasses::default()).unwrap();
        assert_eq!(r2.radius_um, 2.0 * r.radius_um);
        assert!(burgers_radius(0, 1.0, &SizeClasses::default()).is_err());
    }
}
