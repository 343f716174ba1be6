//! Circular uniform local binary patterns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LbpVariant {
    /// Non-rotation-invariant uniform patterns (at most two circular bit
    /// transitions), one bin per uniform code plus one catch-all bin.
    Uniform,
}

/// How neighbours off the pixel grid are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Nearest pixel. Every bit compares two actual pixel values, so label
    /// maps are invariant under strictly increasing intensity maps.
    #[default]
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpConfig {
    pub points: usize,
    pub radius: f64,
    pub variant: LbpVariant,
    #[serde(default)]
    pub sampling: Sampling,
}

impl Default for LbpConfig {
    fn default() -> Self {
        LbpConfig {
            points: 8,
            radius: 3.0,
            variant: LbpVariant::Uniform,
            sampling: Sampling::Nearest,
        }
    }
}

impl LbpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(4..=16).contains(&self.points) {
            return Err(Error::InvalidConfig(format!("LBP points must be in 4..=16, got {}", self.points)));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidConfig(format!("LBP radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }

    /// Uniform labels plus the catch-all: `P(P-1) + 3` (59 for `P = 8`).
    pub fn bins(&self) -> usize {
        self.points * (self.points - 1) + 3
    }
}

/// Circular 0/1 transitions in the low `bits` bits of `code`.
pub fn transitions(code: u32, bits: usize) -> u32 {
    let mask = (1u32 << bits) - 1;
    let rotated = ((code >> 1) | ((code & 1) << (bits - 1))) & mask;
    (code ^ rotated).count_ones()
}

/// Lookup from raw code to label: uniform codes in ascending order get
/// `0..P(P-1)+2`, everything else the last label.
pub fn uniform_label_table(points: usize) -> Vec<u16> {
    let n = 1usize << points;
    let catch_all = (points * (points - 1) + 2) as u16;
    let mut next = 0u16;
    (0..n as u32)
        .map(|code| {
            if transitions(code, points) <= 2 {
                next += 1;
                next - 1
            } else {
                catch_all
            }
        })
        .collect()
}

/// Per-pixel labels for the interior of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub bins: usize,
    pub labels: Vec<u16>,
}

impl LabelMap {
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn snap(v: f64) -> f64 {
    (v * 1e8).round() / 1e8
}

/// Neighbour offsets `(dy, dx)` starting east and going counterclockwise
/// (rows grow downward, so counterclockwise means decreasing `dy` first).
fn offsets(cfg: &LbpConfig) -> Vec<(f64, f64)> {
    (0..cfg.points)
        .map(|p| {
            let theta = 2.0 * std::f64::consts::PI * p as f64 / cfg.points as f64;
            (snap(-cfg.radius * theta.sin()), snap(cfg.radius * theta.cos()))
        })
        .collect()
}

pub fn lbp_spectrum(gray: &Tensor, cfg: &LbpConfig) -> Result<LabelMap> {
    cfg.validate()?;
    if gray.channels() != 1 {
        return Err(Error::UnsupportedChannels(gray.channels()));
    }
    let (_, h, w) = gray.shape();
    let limit = 2.0 * cfg.radius + 1.0;
    if (h as f64) <= limit || (w as f64) <= limit {
        return Err(Error::TooSmall(format!(
            "{h}x{w} image; LBP with radius {} needs both sides larger than {limit}",
            cfg.radius
        )));
    }
    let margin = cfg.radius.ceil() as usize;
    let (oh, ow) = (h - 2 * margin, w - 2 * margin);
    let table = uniform_label_table(cfg.points);
    let src = gray.channel(0);
    let px = |y: usize, x: usize| src[y * w + x];

    let offs = offsets(cfg);
    let mut labels = Vec::with_capacity(oh * ow);
    for y in margin..h - margin {
        for x in margin..w - margin {
            let center = px(y, x);
            let mut code = 0u32;
            for (p, &(dy, dx)) in offs.iter().enumerate() {
                let (sy, sx) = (y as f64 + dy, x as f64 + dx);
                let v = match cfg.sampling {
                    Sampling::Nearest => px(sy.round() as usize, sx.round() as usize),
                    Sampling::Bilinear => {
                        let (y0, x0) = (sy.floor(), sx.floor());
                        let (fy, fx) = (sy - y0, sx - x0);
                        let (y0, x0) = (y0 as usize, x0 as usize);
                        let y1 = (y0 + 1).min(h - 1);
                        let x1 = (x0 + 1).min(w - 1);
                        let (a, b, c, d) = (px(y0, x0), px(y0, x1), px(y1, x0), px(y1, x1));
                        // Difference form: exact on constant neighbourhoods.
                        a + fx * (b - a) + fy * (c - a) + fx * fy * (a - b - c + d)
                    }
                };
                if v >= center {
                    code |= 1 << p;
                }
            }
            labels.push(table[code as usize]);
        }
    }
    Ok(LabelMap {
        height: oh,
        width: ow,
        bins: cfg.bins(),
        labels,
    })
}
