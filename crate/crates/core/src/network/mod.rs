//! Wavelet-corrected encoder–decoder.
//!
//! Each encoder level runs a convolution stage and then Haar-pools the result.
//! Only the `ll` band continues down the trunk; the `(lh, hl, hh)` detail bands
//! are pushed onto a skip list and handed to the decoder untouched. The decoder
//! walks the levels in reverse: optional feature transform at the level's
//! transfer site, Haar unpooling with that level's skip bands, then the
//! decoder convolution stage.
//!
//! Transfer sites are the low-frequency tensors entering each unpooling step:
//! `stage0 .. stage{L-2}` for the pooled output of the shallower levels and
//! `bottleneck` for the deepest one.

mod weights;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use weights::{load_weights, save_weights, ConvWeights, WeightStore};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::wavelet::{haar_pool, haar_unpool, WaveletBands};

pub const BOTTLENECK: &str = "bottleneck";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Layer {
    Conv {
        name: String,
        kh: usize,
        kw: usize,
        in_ch: usize,
        out_ch: usize,
    },
    Relu,
}

/// Declarative architecture. `encoder[l]` and `decoder[l]` both run at the
/// resolution of level `l`; `decoder[0]` is the last stage executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub in_channels: usize,
    pub levels: usize,
    pub encoder: Vec<Vec<Layer>>,
    pub decoder: Vec<Vec<Layer>>,
    pub transfer_sites: Vec<String>,
}

/// Site name of the low-frequency tensor produced by pooling level `level`.
pub fn site_name(level: usize, levels: usize) -> String {
    if level + 1 == levels {
        BOTTLENECK.to_string()
    } else {
        format!("stage{level}")
    }
}

pub fn all_sites(levels: usize) -> Vec<String> {
    (0..levels).map(|l| site_name(l, levels)).collect()
}

fn stage_channels(layers: &[Layer], input: usize, what: &str) -> Result<usize> {
    let mut ch = input;
    for layer in layers {
        if let Layer::Conv { name, in_ch, out_ch, .. } = layer {
            if *in_ch != ch {
                return Err(Error::SpecMismatch(format!(
                    "{what}: layer {name} expects {in_ch} input channels, receives {ch}"
                )));
            }
            ch = *out_ch;
        }
    }
    Ok(ch)
}

impl NetworkSpec {
    /// Checks channel chaining, stage counts and site names.
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::SpecMismatch("levels must be at least 1".into()));
        }
        if self.encoder.len() != self.levels || self.decoder.len() != self.levels {
            return Err(Error::SpecMismatch(format!(
                "{} levels need {0} encoder and {0} decoder stages, found {} and {}",
                self.levels,
                self.encoder.len(),
                self.decoder.len()
            )));
        }
        let mut trunk = Vec::with_capacity(self.levels);
        let mut ch = self.in_channels;
        for (l, stage) in self.encoder.iter().enumerate() {
            let input = ch;
            ch = stage_channels(stage, ch, &format!("encoder stage {l}"))?;
            trunk.push((input, ch));
        }
        for l in (0..self.levels).rev() {
            let (input, output) = trunk[l];
            let out = stage_channels(&self.decoder[l], output, &format!("decoder stage {l}"))?;
            if out != input {
                return Err(Error::SpecMismatch(format!(
                    "decoder stage {l} produces {out} channels, level input has {input}"
                )));
            }
        }
        let sites = all_sites(self.levels);
        for s in &self.transfer_sites {
            if !sites.contains(s) {
                return Err(Error::SpecMismatch(format!("unknown transfer site {s:?}; valid: {sites:?}")));
            }
        }
        Ok(())
    }

    /// Checks that every conv layer has a matching-shape entry in `weights`.
    pub fn check_weights(&self, weights: &WeightStore) -> Result<()> {
        for layer in self.encoder.iter().chain(&self.decoder).flatten() {
            if let Layer::Conv { name, kh, kw, in_ch, out_ch } = layer {
                let w = weights
                    .get(name)
                    .ok_or_else(|| Error::SpecMismatch(format!("no weights for layer {name}")))?;
                if (w.out_ch, w.in_ch, w.kh, w.kw) != (*out_ch, *in_ch, *kh, *kw) {
                    return Err(Error::SpecMismatch(format!(
                        "layer {name}: spec {out_ch}x{in_ch}x{kh}x{kw}, weights {}x{}x{}x{}",
                        w.out_ch, w.in_ch, w.kh, w.kw
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: NetworkSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("spec serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Spatial dims must be multiples of this.
    pub fn alignment(&self) -> usize {
        1 << self.levels
    }
}

/// Every stage is a single 1×1 identity conv on one channel, making the
/// network a pure Haar cascade.
pub fn make_identity_network(levels: usize) -> Result<(NetworkSpec, WeightStore)> {
    if levels == 0 {
        return Err(Error::InvalidConfig("identity network needs at least one level".into()));
    }
    let mut store = WeightStore::default();
    let mut conv = |name: String| {
        store.insert(name.clone(), ConvWeights::identity(1));
        vec![Layer::Conv {
            name,
            kh: 1,
            kw: 1,
            in_ch: 1,
            out_ch: 1,
        }]
    };
    let encoder = (0..levels).map(|l| conv(format!("enc{l}_conv0"))).collect();
    let decoder = (0..levels).map(|l| conv(format!("dec{l}_conv0"))).collect();
    let spec = NetworkSpec {
        in_channels: 1,
        levels,
        encoder,
        decoder,
        transfer_sites: all_sites(levels),
    };
    Ok((spec, store))
}

/// Same-size cross-correlation with zero padding. For even kernel sizes the
/// extra padding goes to the bottom/right.
pub fn conv2d(x: &Tensor, w: &ConvWeights) -> Result<Tensor> {
    let (c, h, width) = x.shape();
    if w.in_ch != c {
        return Err(Error::ChannelMismatch {
            expected: w.in_ch,
            got: c,
        });
    }
    let (oy, ox) = ((w.kh - 1) / 2, (w.kw - 1) / 2);
    let plane = h * width;
    let data: Vec<f64> = (0..w.out_ch)
        .into_par_iter()
        .flat_map_iter(|o| {
            let mut out = vec![w.bias[o]; plane];
            for i in 0..c {
                let src = x.channel(i);
                for ky in 0..w.kh {
                    for kx in 0..w.kw {
                        let k = w.at(o, i, ky, kx);
                        if k == 0.0 {
                            continue;
                        }
                        for y in 0..h {
                            let sy = y as isize + ky as isize - oy as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let row = &src[sy as usize * width..(sy as usize + 1) * width];
                            let dst = &mut out[y * width..(y + 1) * width];
                            for (xx, d) in dst.iter_mut().enumerate() {
                                let sx = xx as isize + kx as isize - ox as isize;
                                if sx >= 0 && sx < width as isize {
                                    *d += k * row[sx as usize];
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    Tensor::new(w.out_ch, h, width, data)
}

fn run_stage(mut x: Tensor, layers: &[Layer], weights: &WeightStore) -> Result<Tensor> {
    for layer in layers {
        x = match layer {
            Layer::Conv { name, .. } => {
                let w = weights
                    .get(name)
                    .ok_or_else(|| Error::SpecMismatch(format!("no weights for layer {name}")))?;
                conv2d(&x, w)?
            }
            Layer::Relu => x.map(|v| v.max(0.0)),
        };
    }
    Ok(x)
}

/// Output of the encoder: the low-frequency tensor at every site (shallow to
/// deep) and the detail bands of every level in pooling order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState {
    pub sites: Vec<(String, Tensor)>,
    pub skips: Vec<[Tensor; 3]>,
}

impl EncodedState {
    pub fn feature(&self, site: &str) -> Option<&Tensor> {
        self.sites.iter().find(|(s, _)| s == site).map(|(_, t)| t)
    }

    pub fn bottleneck(&self) -> &Tensor {
        &self.sites.last().expect("encoded state has at least one site").1
    }
}

pub fn encode(img: &Tensor, spec: &NetworkSpec, weights: &WeightStore) -> Result<EncodedState> {
    spec.validate()?;
    spec.check_weights(weights)?;
    if img.channels() != spec.in_channels {
        return Err(Error::ChannelMismatch {
            expected: spec.in_channels,
            got: img.channels(),
        });
    }
    let align = spec.alignment();
    if img.height() % align != 0 || img.width() % align != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} input is not a multiple of {align}; pad it first",
            img.height(),
            img.width()
        )));
    }
    let mut trunk = img.clone();
    let mut sites = Vec::with_capacity(spec.levels);
    let mut skips = Vec::with_capacity(spec.levels);
    for (l, stage) in spec.encoder.iter().enumerate() {
        let feat = run_stage(trunk, stage, weights)?;
        let WaveletBands { ll, lh, hl, hh } = haar_pool(&feat)?;
        skips.push([lh, hl, hh]);
        sites.push((site_name(l, spec.levels), ll.clone()));
        trunk = ll;
    }
    Ok(EncodedState { sites, skips })
}

/// Decodes with `transform(site, trunk)` applied at each site before
/// unpooling. The transform decides which sites it acts on.
pub fn decode_with<F>(state: &EncodedState, spec: &NetworkSpec, weights: &WeightStore, mut transform: F) -> Result<Tensor>
where
    F: FnMut(&str, Tensor) -> Result<Tensor>,
{
    spec.validate()?;
    spec.check_weights(weights)?;
    if state.skips.len() != spec.levels || state.sites.len() != spec.levels {
        return Err(Error::SpecMismatch(format!(
            "state has {} skip levels and {} sites, spec has {} levels",
            state.skips.len(),
            state.sites.len(),
            spec.levels
        )));
    }
    let mut trunk = state.bottleneck().clone();
    for l in (0..spec.levels).rev() {
        let site = site_name(l, spec.levels);
        trunk = transform(&site, trunk)?;
        let [lh, hl, hh] = &state.skips[l];
        let bands = WaveletBands {
            ll: trunk,
            lh: lh.clone(),
            hl: hl.clone(),
            hh: hh.clone(),
        };
        trunk = run_stage(haar_unpool(&bands)?, &spec.decoder[l], weights)?;
    }
    Ok(trunk)
}

pub fn decode(state: &EncodedState, spec: &NetworkSpec, weights: &WeightStore) -> Result<Tensor> {
    decode_with(state, spec, weights, |_, t| Ok(t))
}
