//! Dense 2-D grid primitives.
//!
//! Heatmaps hold `f64` values internally; files store them as `f32`. Every
//! operation here is a pure function of its inputs.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Non-negative attention intensities on a `width x height` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Heatmap2D {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap2D {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width * height;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if v < 0.0 {
                return Err(Error::NegativeValue(v));
            }
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a heatmap by evaluating `f(x, y)` at every cell.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_dims(width, height)?;
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    /// Widens single-precision values, as stored on disk.
    pub fn from_f32(width: usize, height: usize, values: &[f32]) -> Result<Self> {
        Self::new(width, height, values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Applies `f` to every value, re-checking the heatmap invariants.
    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.values.iter().copied().map(f).collect())
    }

    /// Narrows to single precision for storage.
    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

/// A `{0, 1}` grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width.checked_mul(height).is_none() {
        return Err(Error::ZeroDimension { width, height });
    }
    Ok(())
}

/// Linearly interpolated `q`-quantile (closest-ranks interpolation).
///
/// With `n` values sorted ascending, the position is `p = (n - 1) * q` and the
/// result is `v[floor(p)] + frac(p) * (v[floor(p) + 1] - v[floor(p)])`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::QuantileOutOfRange);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(interpolate_sorted(&sorted, q))
}

fn interpolate_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(pos) as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        sorted[lo.min(sorted.len() - 1)]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Mask of cells whose value is at or above the `q`-quantile of the heatmap.
///
/// Ties at the threshold are kept, so a constant heatmap yields a full mask.
pub fn threshold_mask(hm: &Heatmap2D, q: f64) -> Result<BinaryMask> {
    let threshold = quantile(hm.values(), q)?;
    let bits = hm.values().iter().map(|&v| v >= threshold).collect();
    BinaryMask::new(hm.width, hm.height, bits)
}

/// Intersection over union of two masks. Two empty masks score 0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel with `a = -0.5`.
fn cubic_kernel(x: f64) -> f64 {
    let x = libm::fabs(x);
    if x <= 1.0 {
        ((CUBIC_A + 2.0) * x - (CUBIC_A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((CUBIC_A * x - 5.0 * CUBIC_A) * x + 8.0 * CUBIC_A) * x - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Source taps and weights for one output coordinate along an axis.
#[derive(Clone, Copy)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn axis_taps(src_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = src_len as f64 / out_len as f64;
    let last = src_len as isize - 1;
    (0..out_len)
        .map(|o| {
            let s = (o as f64 + 0.5) * scale - 0.5;
            let base = libm::floor(s);
            let t = s - base;
            let base = base as isize;
            let mut taps = Taps {
                index: [0; 4],
                weight: [0.0; 4],
            };
            for k in 0..4 {
                let offset = k as isize - 1;
                taps.index[k] = (base + offset).clamp(0, last) as usize;
                taps.weight[k] = cubic_kernel(t - offset as f64);
            }
            taps
        })
        .collect()
}

/// Bicubic resampling to `out_w x out_h` (no downscaling).
///
/// Pixel-centre mapping `src = (dst + 0.5) * src_len / out_len - 0.5`, edge
/// samples are clamped, and negative overshoot is clamped to zero.
pub fn bicubic_upscale(src: &Heatmap2D, out_w: usize, out_h: usize) -> Result<Heatmap2D> {
    check_dims(out_w, out_h)?;
    if out_w < src.width || out_h < src.height {
        return Err(Error::Downscale {
            src_w: src.width,
            src_h: src.height,
            out_w,
            out_h,
        });
    }
    let xt = axis_taps(src.width, out_w);
    let yt = axis_taps(src.height, out_h);

    // Horizontal pass: src.height rows of out_w samples.
    let mut rows = vec![0.0f64; src.height * out_w];
    for y in 0..src.height {
        let src_row = &src.values[y * src.width..(y + 1) * src.width];
        let dst_row = &mut rows[y * out_w..(y + 1) * out_w];
        for (dst, taps) in dst_row.iter_mut().zip(&xt) {
            *dst = (0..4).map(|k| taps.weight[k] * src_row[taps.index[k]]).sum();
        }
    }

    let mut out = Vec::with_capacity(out_w * out_h);
    for taps in &yt {
        for x in 0..out_w {
            let v: f64 = (0..4)
                .map(|k| taps.weight[k] * rows[taps.index[k] * out_w + x])
                .sum();
            out.push(if v > 0.0 { v } else { 0.0 });
        }
    }
    Heatmap2D::new(out_w, out_h, out)
}
