//! Synthetic depth-dependent gain perturbations and speckled phantoms.
//!
//! Gains are multiplicative on linear intensity and clamped to `[0, 1]`. This
//! reproduces the kind of banded brightness shift a changed TGC setting
//! causes, not the acoustics behind it.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_image, quantize, save_image};
use crate::metrics::Mask;
use crate::tensor::Tensor;

pub const MIN_GAIN: f64 = 0.4;
pub const MAX_GAIN: f64 = 1.8;
/// Random profiles deviate from unit gain by at least this much somewhere.
const MIN_DEVIATION: f64 = 0.25;

/// Piecewise-linear gain over normalized depth `0..=1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainProfile {
    pub points: Vec<(f64, f64)>,
}

impl GainProfile {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let p = GainProfile { points };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(gain: f64) -> Self {
        GainProfile {
            points: vec![(0.0, gain), (1.0, gain)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pts = &self.points;
        if pts.len() < 2 {
            return Err(Error::MalformedProfile("need at least the endpoints 0 and 1".into()));
        }
        if pts[0].0 != 0.0 || pts[pts.len() - 1].0 != 1.0 {
            return Err(Error::MalformedProfile("first depth must be 0 and last depth 1".into()));
        }
        if pts.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::MalformedProfile("depths must be strictly increasing".into()));
        }
        if pts.iter().any(|&(_, g)| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::MalformedProfile("gains must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn gain_at(&self, depth: f64) -> f64 {
        let pts = &self.points;
        let d = depth.clamp(0.0, 1.0);
        let i = pts.partition_point(|&(x, _)| x <= d).clamp(1, pts.len() - 1);
        let ((x0, g0), (x1, g1)) = (pts[i - 1], pts[i]);
        let t = (d - x0) / (x1 - x0);
        g0 * (1.0 - t) + g1 * t
    }

    /// Gains of each row of an image of height `h`.
    pub fn row_gains(&self, h: usize) -> Vec<f64> {
        (0..h)
            .map(|r| {
                let depth = if h > 1 { r as f64 / (h - 1) as f64 } else { 0.0 };
                self.gain_at(depth)
            })
            .collect()
    }

    /// Random profile: 2–4 interior control points, gains in `[0.4, 1.8]`,
    /// resampled until some gain is at least 0.25 away from 1.
    pub fn random(rng: &mut impl Rng) -> Self {
        loop {
            let interior = rng.random_range(2..=4);
            let mut depths: Vec<f64> = (0..interior).map(|_| rng.random_range(0.05..0.95)).collect();
            depths.sort_by(f64::total_cmp);
            depths.dedup();
            let mut points = vec![(0.0, rng.random_range(MIN_GAIN..=MAX_GAIN))];
            points.extend(depths.into_iter().map(|d| (d, rng.random_range(MIN_GAIN..=MAX_GAIN))));
            points.push((1.0, rng.random_range(MIN_GAIN..=MAX_GAIN)));
            if points.iter().any(|&(_, g)| (g - 1.0).abs() >= MIN_DEVIATION) {
                return GainProfile { points };
            }
        }
    }
}

/// Multiplies row `r` by the profile's gain at depth `r / (H − 1)`, clamped to `[0, 1]`.
pub fn apply_tgc(img: &Tensor, profile: &GainProfile) -> Result<Tensor> {
    profile.validate()?;
    if img.channels() != 1 {
        return Err(Error::UnsupportedChannels(img.channels()));
    }
    let gains = profile.row_gains(img.height());
    Ok(Tensor::from_fn(1, img.height(), img.width(), |_, y, x| {
        (img.get(0, y, x) * gains[y]).clamp(0.0, 1.0)
    }))
}

/// Geometry of a phantom's bright structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    /// Semi-axis along the rotated x direction.
    pub a: f64,
    pub b: f64,
    pub angle: f64,
}

impl Ellipse {
    /// Normalized radius; `<= 1` inside.
    pub fn radius(&self, y: f64, x: f64) -> f64 {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let (s, c) = self.angle.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }
}

fn phantom_parts(seed: u64, h: usize, w: usize) -> Result<(Tensor, Mask, Ellipse)> {
    if h < 32 || w < 32 {
        return Err(Error::TooSmall(format!("phantoms need at least 32x32, got {h}x{w}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hf, wf) = (h as f64, w as f64);
    let short = hf.min(wf);

    let a = rng.random_range(0.25..0.38) * short;
    let b = rng.random_range(0.25..0.34) * short;
    let reach = a.max(b) + 1.0;
    let ellipse = Ellipse {
        cy: rng.random_range(reach..(hf - reach).max(reach + 1e-9)),
        cx: rng.random_range(reach..(wf - reach).max(reach + 1e-9)),
        a,
        b,
        angle: rng.random_range(0.0..std::f64::consts::PI),
    };

    let base = rng.random_range(0.28..0.38);
    let falloff = rng.random_range(0.1..0.3);
    let inner = rng.random_range(0.5..0.62);
    let rim = rng.random_range(0.78..0.88);
    let (f1, f2) = (rng.random_range(1.0..3.0), rng.random_range(1.0..3.0));
    let (p1, p2) = (rng.random_range(0.0..6.3), rng.random_range(0.0..6.3));

    let mut data = Vec::with_capacity(h * w);
    let mut mask = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (yn, xn) = (y as f64 / hf, x as f64 / wf);
            let background = base * (1.0 - falloff * yn)
                + 0.04 * (2.0 * std::f64::consts::PI * f1 * xn + p1).sin()
                + 0.03 * (2.0 * std::f64::consts::PI * f2 * yn + p2).cos();
            let r = ellipse.radius(y as f64, x as f64);
            let inside = r <= 1.0;
            let clean = if !inside {
                background
            } else if r > 0.82 {
                rim
            } else {
                inner
            };
            // Unit-mean Rayleigh speckle, softened.
            let u: f64 = 1.0 - rng.random::<f64>();
            let rayleigh = (-2.0 * u.ln()).sqrt() / (std::f64::consts::PI / 2.0).sqrt();
            let speckle = 1.0 + 0.35 * (rayleigh - 1.0);
            data.push((clean * speckle).clamp(0.0, 1.0));
            mask.push(inside);
        }
    }
    Ok((Tensor::new(1, h, w, data)?, Mask::new(h, w, mask)?, ellipse))
}

/// Deterministic speckled phantom with a bright elliptical structure; the mask
/// is the filled ellipse.
pub fn gen_phantom(seed: u64, h: usize, w: usize) -> Result<(Tensor, Mask)> {
    let (img, mask, _) = phantom_parts(seed, h, w)?;
    Ok((img, mask))
}

/// As [`gen_phantom`], also returning the ellipse geometry.
pub fn gen_phantom_with_geometry(seed: u64, h: usize, w: usize) -> Result<(Tensor, Mask, Ellipse)> {
    phantom_parts(seed, h, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusGroup {
    pub original: String,
    pub variants: Vec<String>,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<GainProfile>,
}

/// Corpus manifest. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub groups: Vec<CorpusGroup>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl CorpusManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Resolves a manifest-relative path.
pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Rounds to the nearest 8-bit level, as a saved image would.
pub fn quantized(t: &Tensor) -> Tensor {
    t.map(|v| quantize(v) as f64 / 255.0)
}

/// Writes `n` groups of one original, `variants` TGC variants and a mask,
/// plus `manifest.json`, under `out`. Returns the manifest path.
pub fn gen_corpus(seed: u64, n: usize, variants: usize, size: (usize, usize), out: impl AsRef<Path>) -> Result<PathBuf> {
    let out = out.as_ref();
    for sub in ["originals", "variants", "masks"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(n);
    for g in 0..n {
        let group_seed: u64 = master.random();
        let (phantom, mask) = gen_phantom(group_seed, size.0, size.1)?;
        let original = quantized(&phantom);
        let mut rng = ChaCha8Rng::seed_from_u64(group_seed ^ 0x9e37_79b9_7f4a_7c15);

        let original_rel = format!("originals/group_{g:03}.png");
        let mask_rel = format!("masks/group_{g:03}.png");
        save_image(&original, out.join(&original_rel))?;
        save_image(&mask.to_tensor(), out.join(&mask_rel))?;

        let mut variant_paths = Vec::with_capacity(variants);
        let mut profiles = Vec::with_capacity(variants);
        for v in 0..variants {
            let profile = GainProfile::random(&mut rng);
            let rel = format!("variants/group_{g:03}_v{v}.png");
            save_image(&apply_tgc(&original, &profile)?, out.join(&rel))?;
            variant_paths.push(rel);
            profiles.push(profile);
        }
        groups.push(CorpusGroup {
            original: original_rel,
            variants: variant_paths,
            mask: mask_rel,
            profiles,
        });
    }
    let manifest_path = out.join(MANIFEST_NAME);
    CorpusManifest { seed, groups }.save(&manifest_path)?;
    Ok(manifest_path)
}

/// Loads a group's original, variants and mask.
pub fn load_group(manifest_path: &Path, group: &CorpusGroup) -> Result<(Tensor, Vec<Tensor>, Mask)> {
    let original = load_image(resolve(manifest_path, &group.original))?;
    let variants = group
        .variants
        .iter()
        .map(|v| load_image(resolve(manifest_path, v)))
        .collect::<Result<Vec<_>>>()?;
    let mask = Mask::from_tensor(&load_image(resolve(manifest_path, &group.mask))?)?;
    Ok((original, variants, mask))
}
