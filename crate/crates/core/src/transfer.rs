//! Feature-statistic transforms and the whole-image transfer entry point.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{decode_with, encode, NetworkSpec, WeightStore};
use crate::tensor::{channel_stats, ChannelStats, Tensor};
use crate::wavelet::pad_symmetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Adain,
    AdainD,
    Wct,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adain" => Ok(Method::Adain),
            "adain-d" | "adain_d" => Ok(Method::AdainD),
            "wct" => Ok(Method::Wct),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Adain => "adain",
            Method::AdainD => "adain-d",
            Method::Wct => "wct",
        })
    }
}

/// Where the depth-windowed transform takes its style statistics from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleStats {
    /// Matching proportional row window of the style features.
    #[default]
    Regional,
    /// Whole style feature map for both windows.
    Whole,
}

/// Two height windows: one anchored at the top row, one at the bottom row.
/// `stride_frac` records the nominal step; with the bottom anchoring the
/// effective stride is `H - ceil(bandwidth_frac * H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthWindowConfig {
    pub bandwidth_frac: f64,
    pub stride_frac: f64,
}

impl Default for DepthWindowConfig {
    fn default() -> Self {
        DepthWindowConfig {
            bandwidth_frac: 2.0 / 3.0,
            stride_frac: 1.0 / 3.0,
        }
    }
}

impl DepthWindowConfig {
    pub fn validate(&self) -> Result<()> {
        let (b, s) = (self.bandwidth_frac, self.stride_frac);
        if !(0.0 < s && s <= b && b <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "depth window needs 0 < stride ({s}) <= bandwidth ({b}) <= 1"
            )));
        }
        if b < 0.5 {
            return Err(Error::InvalidConfig(format!(
                "two windows of bandwidth {b} leave rows uncovered"
            )));
        }
        Ok(())
    }

    /// Window rows for height `h`: `[0, b)` and `[h - b, h)`.
    pub fn windows(&self, h: usize) -> [(usize, usize); 2] {
        // The small slack keeps exact fractions such as 2/3 * 6 from rounding up.
        let b = ((self.bandwidth_frac * h as f64) - 1e-9).ceil().clamp(1.0, h as f64) as usize;
        [(0, b), (h - b, h)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub method: Method,
    pub epsilon: f64,
    pub window: DepthWindowConfig,
    /// Sites to transform; `None` uses the network's own `transfer_sites`.
    pub sites: Option<Vec<String>>,
    pub style_stats: StyleStats,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            method: Method::AdainD,
            epsilon: 1e-5,
            window: DepthWindowConfig::default(),
            sites: None,
            style_stats: StyleStats::Regional,
        }
    }
}

impl TransferConfig {
    pub fn with_method(method: Method) -> Self {
        TransferConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.window.validate()
    }
}

/// Aligns per-channel mean and std of `x` to `target`:
/// `σ_y · (x − μ_x) / max(σ_x, ε) + μ_y`.
pub fn adain(x: &Tensor, target: &ChannelStats, epsilon: f64) -> Result<Tensor> {
    if x.channels() != target.len() {
        return Err(Error::ChannelMismatch {
            expected: target.len(),
            got: x.channels(),
        });
    }
    let own = channel_stats(x)?;
    let (c, h, w) = x.shape();
    let mut data = Vec::with_capacity(x.len());
    for ch in 0..c {
        let scale = target.std[ch] / own.std[ch].max(epsilon);
        let (mx, my) = (own.mean[ch], target.mean[ch]);
        data.extend(x.channel(ch).iter().map(|&v| scale * (v - mx) + my));
    }
    Tensor::new(c, h, w, data)
}

/// Rows of the style map matching content rows `[start, end)` of a map of height `h`.
fn proportional_rows(start: usize, end: usize, h: usize, style_h: usize) -> (usize, usize) {
    let s = start * style_h / h;
    let e = (end * style_h).div_ceil(h).max(s + 1).min(style_h);
    (s.min(e - 1), e)
}

/// AdaIN over two overlapping depth windows, averaging the overlapping rows.
pub fn adain_depth(x: &Tensor, y: &Tensor, cfg: &DepthWindowConfig, epsilon: f64, mode: StyleStats) -> Result<Tensor> {
    cfg.validate()?;
    if x.channels() != y.channels() {
        return Err(Error::ChannelMismatch {
            expected: y.channels(),
            got: x.channels(),
        });
    }
    let h = x.height();
    if h < 3 {
        return Err(Error::TooSmall(format!("depth-windowed AdaIN needs height >= 3, got {h}")));
    }
    let whole = match mode {
        StyleStats::Whole => Some(channel_stats(y)?),
        StyleStats::Regional => None,
    };
    let windows = cfg.windows(h);
    let mut parts = Vec::with_capacity(2);
    for &(start, end) in &windows {
        let target = match &whole {
            Some(s) => s.clone(),
            None => {
                let (ys, ye) = proportional_rows(start, end, h, y.height());
                channel_stats(&y.rows(ys, ye))?
            }
        };
        parts.push(adain(&x.rows(start, end), &target, epsilon)?);
    }

    let (c, _, w) = x.shape();
    let [(s1, e1), (s2, e2)] = windows;
    let mut out = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for r in 0..h {
            let in1 = r >= s1 && r < e1;
            let in2 = r >= s2 && r < e2;
            for col in 0..w {
                let v = match (in1, in2) {
                    (true, true) => (parts[0].get(ch, r - s1, col) + parts[1].get(ch, r - s2, col)) / 2.0,
                    (true, false) => parts[0].get(ch, r - s1, col),
                    (false, true) => parts[1].get(ch, r - s2, col),
                    (false, false) => unreachable!("windows cover every row"),
                };
                out.set(ch, r, col, v);
            }
        }
    }
    Ok(out)
}

fn centered(t: &Tensor) -> (DMatrix<f64>, DVector<f64>) {
    let (c, h, w) = t.shape();
    let mut m = DMatrix::from_row_slice(c, h * w, t.data());
    let mut mean = DVector::zeros(c);
    for (i, mut row) in m.row_iter_mut().enumerate() {
        let mu = row.sum() / (h * w) as f64;
        row.add_scalar_mut(-mu);
        mean[i] = mu;
    }
    (m, mean)
}

/// Population channel covariance `X Xᵀ / n` of a centered `c × n` matrix.
fn covariance(xc: &DMatrix<f64>) -> DMatrix<f64> {
    let n = xc.ncols() as f64;
    let mut cov = xc * xc.transpose();
    cov /= n;
    cov
}

/// Channel covariance of a feature map.
pub fn channel_covariance(t: &Tensor) -> DMatrix<f64> {
    covariance(&centered(t).0)
}

/// Whitening–coloring transform: removes the channel covariance of `x` and
/// imposes that of `y`, then adds `y`'s channel means.
pub fn wct(x: &Tensor, y: &Tensor, epsilon: f64) -> Result<Tensor> {
    if x.channels() != y.channels() {
        return Err(Error::ChannelMismatch {
            expected: y.channels(),
            got: x.channels(),
        });
    }
    for t in [x, y] {
        if t.height() * t.width() < 2 {
            return Err(Error::TooSmall("covariance needs at least two spatial samples".into()));
        }
    }
    let (xc, _) = centered(x);
    let (yc, ymean) = centered(y);

    let ex = SymmetricEigen::new(covariance(&xc));
    let inv_sqrt = ex.eigenvalues.map(|l| 1.0 / l.max(epsilon).sqrt());
    let whiten = &ex.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * ex.eigenvectors.transpose();

    let ey = SymmetricEigen::new(covariance(&yc));
    let sqrt = ey.eigenvalues.map(|l| l.max(0.0).sqrt());
    let color = &ey.eigenvectors * DMatrix::from_diagonal(&sqrt) * ey.eigenvectors.transpose();

    let mut out = (color * whiten) * xc;
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row.add_scalar_mut(ymean[i]);
    }
    let (c, h, w) = x.shape();
    let mut data = Vec::with_capacity(c * h * w);
    for row in out.row_iter() {
        data.extend(row.iter());
    }
    Tensor::new(c, h, w, data)
}

/// Encodes content and style, transforms the content's low-frequency trunk at
/// each configured site using the style's features at the same site, then
/// decodes with the content's own detail bands.
pub fn transfer_image(
    content: &Tensor,
    style: &Tensor,
    spec: &NetworkSpec,
    weights: &WeightStore,
    cfg: &TransferConfig,
) -> Result<Tensor> {
    cfg.validate()?;
    let align = spec.alignment();
    let (content_p, (h, w)) = pad_symmetric(content, align)?;
    let (style_p, _) = pad_symmetric(style, align)?;
    let content_state = encode(&content_p, spec, weights)?;
    let style_state = encode(&style_p, spec, weights)?;

    let sites = cfg.sites.as_ref().unwrap_or(&spec.transfer_sites);
    let out = decode_with(&content_state, spec, weights, |site, trunk| {
        if !sites.iter().any(|s| s == site) {
            return Ok(trunk);
        }
        let style_feat = style_state
            .feature(site)
            .ok_or_else(|| Error::SpecMismatch(format!("style has no feature at site {site}")))?;
        transform_features(&trunk, style_feat, cfg)
    })?;
    Ok(out.crop(h, w).clamp01())
}

/// Applies the configured block. Maps too small for the windowed or
/// covariance-based blocks fall back to plain AdaIN.
pub fn transform_features(x: &Tensor, style: &Tensor, cfg: &TransferConfig) -> Result<Tensor> {
    match cfg.method {
        Method::AdainD if x.height() >= 3 => adain_depth(x, style, &cfg.window, cfg.epsilon, cfg.style_stats),
        Method::Wct if x.height() * x.width() >= 2 && style.height() * style.width() >= 2 => {
            wct(x, style, cfg.epsilon)
        }
        _ => adain(x, &channel_stats(style)?, cfg.epsilon),
    }
}

/// 256-bin cumulative-histogram equalization; each level maps to the
/// fraction of pixels at or below it.
pub fn hist_equalize(img: &Tensor) -> Result<Tensor> {
    if img.channels() != 1 {
        return Err(Error::UnsupportedChannels(img.channels()));
    }
    if img.is_empty() {
        return Err(Error::Empty("cannot equalize an empty image"));
    }
    let levels: Vec<u8> = img.data().iter().map(|&v| crate::io::quantize(v)).collect();
    let mut hist = [0usize; 256];
    for &l in &levels {
        hist[l as usize] += 1;
    }
    let mut cdf = [0.0; 256];
    let mut acc = 0;
    for (i, &count) in hist.iter().enumerate() {
        acc += count;
        cdf[i] = acc as f64 / levels.len() as f64;
    }
    let data = levels.iter().map(|&l| cdf[l as usize]).collect();
    Tensor::new(1, img.height(), img.width(), data)
}

/// Median wall-clock milliseconds of each block on random `c×h×w` features.
pub fn benchmark_blocks(c: usize, h: usize, w: usize, repetitions: usize, seed: u64) -> Result<Vec<(Method, f64)>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_fn(c, h, w, |_, _, _| rng.random::<f64>());
    let y = Tensor::from_fn(c, h, w, |_, _, _| rng.random::<f64>() * 0.5 + 0.2);
    let cfg = DepthWindowConfig::default();
    let reps = repetitions.max(1);

    let mut results = Vec::new();
    for method in [Method::Adain, Method::AdainD, Method::Wct] {
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let out = match method {
                Method::Adain => adain(&x, &channel_stats(&y)?, 1e-5)?,
                Method::AdainD => adain_depth(&x, &y, &cfg, 1e-5, StyleStats::Regional)?,
                Method::Wct => wct(&x, &y, 1e-5)?,
            };
            times.push(start.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(out);
        }
        times.sort_by(f64::total_cmp);
        results.push((method, times[times.len() / 2]));
    }
    Ok(results)
}
