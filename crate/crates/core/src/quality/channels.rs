//! Three-channel patch representation: intensity, Fourier magnitude and a
//! Haar wavelet map, each 64x64 in `[0, 1]`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::raster::GrayImage;

pub const SIDE: usize = 64;
const GRID: usize = 4;
/// 3 channels x 16 cells x (mean, std).
pub const QUALITY_DIM: usize = 3 * GRID * GRID * 2;

/// Documents the order of [`featurize_channels`] output; its hash is stored with models.
pub const FEATURE_LAYOUT: &str =
    "channels[gray,fft_mag,wavelet] x cells[4x4 row-major] x stats[mean,std]; side 64; haar level 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub gray: GrayImage,
    /// log(1 + |F|) with DC at `(32, 32)`, divided by its maximum.
    pub fft_mag: GrayImage,
    /// Half approximation, half detail energy, each divided by its maximum.
    pub wavelet: GrayImage,
}

/// Single-level Haar subbands of an even-sized image, using 2x2 block averages.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarBands {
    pub width: usize,
    pub height: usize,
    pub ll: Vec<f32>,
    pub lh: Vec<f32>,
    pub hl: Vec<f32>,
    pub hh: Vec<f32>,
}

pub fn haar_level1(img: &GrayImage) -> HaarBands {
    let (w, h) = (img.width() / 2, img.height() / 2);
    let mut bands = HaarBands {
        width: w,
        height: h,
        ll: vec![0.0; w * h],
        lh: vec![0.0; w * h],
        hl: vec![0.0; w * h],
        hh: vec![0.0; w * h],
    };
    for y in 0..h {
        for x in 0..w {
            let a = img.get(2 * x, 2 * y);
            let b = img.get(2 * x + 1, 2 * y);
            let c = img.get(2 * x, 2 * y + 1);
            let d = img.get(2 * x + 1, 2 * y + 1);
            let i = y * w + x;
            bands.ll[i] = (a + b + c + d) / 4.0;
            bands.lh[i] = (a + b - c - d) / 4.0;
            bands.hl[i] = (a - b + c - d) / 4.0;
            bands.hh[i] = (a - b - c + d) / 4.0;
        }
    }
    bands
}

fn normalize_by_max(v: &mut [f64]) {
    let m = v.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

/// Shifted log-magnitude spectrum of a square image.
pub fn fft_magnitude(img: &GrayImage) -> GrayImage {
    let n = img.width();
    assert_eq!(n, img.height(), "square input expected");
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = img.data().iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    for row in buf.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = buf[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            buf[y * n + x] = col[y];
        }
    }
    let half = n / 2;
    let mut mag = vec![0.0f64; n * n];
    for v in 0..n {
        for u in 0..n {
            let (su, sv) = ((u + half) % n, (v + half) % n);
            mag[sv * n + su] = buf[v * n + u].norm().ln_1p();
        }
    }
    normalize_by_max(&mut mag);
    GrayImage::from_fn(n, n, |x, y| mag[y * n + x] as f32)
}

/// Resamples to 64x64 (bilinear) and derives the three channels.
pub fn build_channels(patch: &GrayImage) -> ChannelStack {
    let gray = patch.resize_bilinear(SIDE, SIDE);
    let fft_mag = fft_magnitude(&gray);
    let bands = haar_level1(&gray);
    let mut approx: Vec<f64> = bands.ll.iter().map(|&v| v as f64).collect();
    let mut energy: Vec<f64> = (0..bands.ll.len())
        .map(|i| (bands.lh[i].powi(2) + bands.hl[i].powi(2) + bands.hh[i].powi(2)) as f64)
        .collect();
    normalize_by_max(&mut approx);
    normalize_by_max(&mut energy);
    let bw = bands.width;
    let wavelet = GrayImage::from_fn(SIDE, SIDE, |x, y| {
        let i = (y / 2) * bw + x / 2;
        (0.5 * approx[i] + 0.5 * energy[i]) as f32
    });
    ChannelStack { gray, fft_mag, wavelet }
}

/// Mean and population standard deviation on a 4x4 grid of each channel.
pub fn featurize_channels(stack: &ChannelStack) -> Vec<f64> {
    let cell = SIDE / GRID;
    let mut out = Vec::with_capacity(QUALITY_DIM);
    for ch in [&stack.gray, &stack.fft_mag, &stack.wavelet] {
        for gy in 0..GRID {
            for gx in 0..GRID {
                let vals: Vec<f64> = (0..cell)
                    .flat_map(|y| (0..cell).map(move |x| (gx * cell + x, gy * cell + y)))
                    .map(|(x, y)| ch.get(x, y) as f64)
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
                out.push(mean);
                out.push(var.sqrt());
            }
        }
    }
    out
}

pub fn quality_features(patch: &GrayImage) -> Vec<f64> {
    featurize_channels(&build_channels(patch))
}
