//! Minimal bar charts for the report.

use std::collections::BTreeMap;

use image::{GrayImage, Luma};

const BAR: u32 = 6;
const GAP: u32 = 2;
const HEIGHT: u32 = 120;
const MARGIN: u32 = 8;

/// Signed-error histogram: one dark bar per integer error, a grey tick
/// under zero.
pub fn histogram(hist: &BTreeMap<i64, usize>) -> GrayImage {
    let lo = hist.keys().next().copied().unwrap_or(0).min(0);
    let hi = hist.keys().next_back().copied().unwrap_or(0).max(0);
    let bins = (hi - lo + 1) as u32;
    let w = 2 * MARGIN + bins * (BAR + GAP);
    let h = HEIGHT + 2 * MARGIN + 4;
    let mut img = GrayImage::from_pixel(w, h, Luma([255]));
    let peak = hist.values().copied().max().unwrap_or(0).max(1) as f64;
    let base = MARGIN + HEIGHT;
    for (&e, &n) in hist {
        let x0 = MARGIN + (e - lo) as u32 * (BAR + GAP);
        let bar = ((n as f64 / peak) * HEIGHT as f64).round() as u32;
        for x in x0..x0 + BAR {
            for y in base - bar..base {
                img.put_pixel(x, y, Luma([40]));
            }
        }
    }
    let z = MARGIN + (-lo) as u32 * (BAR + GAP);
    for x in z..z + BAR {
        for y in base + 1..base + 4 {
            img.put_pixel(x, y, Luma([140]));
        }
    }
    img
}
