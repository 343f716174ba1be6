//! Image-quality and mask metrics. All values are fractions; percentages are
//! a presentation concern.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

/// Returned by [`psnr`] for identical inputs.
pub const PSNR_CAP: f64 = 100.0;

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Window side used for an `h`×`w` image: 11, or the largest odd size that fits.
pub fn ssim_window(h: usize, w: usize) -> usize {
    let fit = h.min(w);
    if fit >= SSIM_WINDOW {
        SSIM_WINDOW
    } else if fit % 2 == 1 {
        fit
    } else {
        fit.saturating_sub(1).max(1)
    }
}

/// Separable "valid" filtering of a single plane.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * horiz[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03 and dynamic range 1. Only windows fully inside the image count.
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    if a.channels() != 1 {
        return Err(Error::UnsupportedChannels(a.channels()));
    }
    let (_, h, w) = a.shape();
    if h == 0 || w == 0 {
        return Err(Error::Empty("ssim of an empty image"));
    }
    let k = gaussian_kernel(ssim_window(h, w), SSIM_SIGMA);
    let (pa, pb) = (a.channel(0), b.channel(0));
    let sq = |f: &dyn Fn(usize) -> f64| (0..h * w).map(f).collect::<Vec<f64>>();
    let (mu_a, oh, ow) = filter_valid(pa, h, w, &k);
    let (mu_b, ..) = filter_valid(pb, h, w, &k);
    let (e_aa, ..) = filter_valid(&sq(&|i| pa[i] * pa[i]), h, w, &k);
    let (e_bb, ..) = filter_valid(&sq(&|i| pb[i] * pb[i]), h, w, &k);
    let (e_ab, ..) = filter_valid(&sq(&|i| pa[i] * pb[i]), h, w, &k);

    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let total: f64 = (0..oh * ow)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / (oh * ow) as f64)
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() {
        return Err(Error::Empty("mse of an empty tensor"));
    }
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10·log10(1 / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask data length {} for {height}x{width}",
                data.len()
            )));
        }
        Ok(Mask { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Mask { height, width, data }
    }

    /// Pixels above 0.5 are foreground.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        if t.channels() != 1 {
            return Err(Error::UnsupportedChannels(t.channels()));
        }
        Ok(Mask {
            height: t.height(),
            width: t.width(),
            data: t.data().iter().map(|&v| v > 0.5).collect(),
        })
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_fn(1, self.height, self.width, |_, y, x| if self.get(y, x) { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Foreground pixels with a background 4-neighbour or on the image edge.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        let (h, w) = (self.height, self.width);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if !self.get(y, x) {
                    continue;
                }
                let edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w;
                if edge
                    || !self.get(y - 1, x)
                    || !self.get(y + 1, x)
                    || !self.get(y, x - 1)
                    || !self.get(y, x + 1)
                {
                    out.push((y, x));
                }
            }
        }
        out
    }
}

fn mask_shapes(a: &Mask, b: &Mask) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::ShapeMismatch(format!(
            "masks {}x{} and {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    Ok(())
}

fn overlap_counts(a: &Mask, b: &Mask) -> (usize, usize, usize) {
    let mut inter = 0;
    let (mut na, mut nb) = (0, 0);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    (inter, na, nb)
}

pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    mask_shapes(a, b)?;
    let (inter, na, nb) = overlap_counts(a, b);
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    mask_shapes(a, b)?;
    let (inter, na, nb) = overlap_counts(a, b);
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

fn directed(from: &[(usize, usize)], to: &[(usize, usize)]) -> f64 {
    from.iter()
        .map(|&(y, x)| {
            to.iter()
                .map(|&(v, u)| {
                    let (dy, dx) = (y as f64 - v as f64, x as f64 - u as f64);
                    dy * dy + dx * dx
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Symmetric Hausdorff distance between the two boundary pixel sets, in pixels.
pub fn hausdorff_boundary(a: &Mask, b: &Mask) -> Result<f64> {
    mask_shapes(a, b)?;
    let (ba, bb) = (a.boundary(), b.boundary());
    if ba.is_empty() || bb.is_empty() {
        return Err(Error::Empty("hausdorff distance needs non-empty masks"));
    }
    Ok(directed(&ba, &bb).max(directed(&bb, &ba)))
}
