//! Dense `(channels, height, width)` tensors and per-channel statistics.

use crate::error::{Error, Result};

/// Row-major, channel-major real array. Holds both images and feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking the length and that every value is finite.
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "data length {} does not match {}x{}x{}",
                data.len(),
                c,
                h,
                w
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Tensor { c, h, w, data })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn filled(c: usize, h: usize, w: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Tensor {
            c,
            h,
            w,
            data: vec![value; c * h * w],
        }
    }

    /// Builds a tensor from `f(channel, row, col)`.
    pub fn from_fn(c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    data.push(f(ch, y, x));
                }
            }
        }
        assert!(data.iter().all(|v| v.is_finite()), "from_fn produced a non-finite value");
        Tensor { c, h, w, data }
    }

    pub(crate) fn from_parts_unchecked(c: usize, h: usize, w: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), c * h * w);
        Tensor { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    /// The `h*w` values of one channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.h * self.w;
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Applies `f` elementwise. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(data.iter().all(|v| v.is_finite()), "map produced a non-finite value");
        Tensor { data, ..*self }
    }

    pub fn clamp01(&self) -> Tensor {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Rows `[start, end)` of every channel.
    pub fn rows(&self, start: usize, end: usize) -> Tensor {
        assert!(start <= end && end <= self.h);
        let rows = end - start;
        let mut data = Vec::with_capacity(self.c * rows * self.w);
        for ch in 0..self.c {
            let base = ch * self.h * self.w;
            data.extend_from_slice(&self.data[base + start * self.w..base + end * self.w]);
        }
        Tensor::from_parts_unchecked(self.c, rows, self.w, data)
    }

    /// Top-left `h`×`w` window of every channel.
    pub fn crop(&self, h: usize, w: usize) -> Tensor {
        assert!(h <= self.h && w <= self.w);
        Tensor::from_fn(self.c, h, w, |c, y, x| self.get(c, y, x))
    }

    /// Sum of squares of every value.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Mean and population std of a slice. Two-pass for accuracy.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if let Some(&first) = values.first() {
        if values.iter().all(|&v| v == first) {
            return (first, 0.0);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

pub fn channel_stats(t: &Tensor) -> Result<ChannelStats> {
    if t.h * t.w == 0 || t.c == 0 {
        return Err(Error::Empty("channel_stats needs at least one value per channel"));
    }
    let (mean, std) = (0..t.c).map(|c| mean_std(t.channel(c))).unzip();
    Ok(ChannelStats { mean, std })
}

/// Rec. 601 luma for RGB; identity for single-channel input.
pub fn to_grayscale(t: &Tensor) -> Result<Tensor> {
    match t.c {
        1 => Ok(t.clone()),
        3 => {
            let n = t.h * t.w;
            let (r, g, b) = (t.channel(0), t.channel(1), t.channel(2));
            let data = (0..n)
                .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
                .collect();
            Ok(Tensor::from_parts_unchecked(1, t.h, t.w, data))
        }
        c => Err(Error::UnsupportedChannels(c)),
    }
}
