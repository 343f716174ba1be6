//! Persistent style library index.

use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::lbp::{lbp_spectrum, LbpConfig};
use super::{lbp_histogram, LbpHistogram};
use crate::error::{Error, Result};
use crate::io::load_image;
use crate::tensor::{mean_std, to_grayscale, Tensor};

pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleIndexEntry {
    pub id: usize,
    pub path: String,
    #[serde(rename = "hist", serialize_with = "ser_hist", deserialize_with = "de_hist")]
    pub histogram: LbpHistogram,
    pub mean: f64,
    pub std: f64,
}

/// Histogram reals are written with 17 significant digits.
fn ser_hist<S: Serializer>(h: &LbpHistogram, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(h.bins.len()))?;
    for v in &h.bins {
        let raw = RawValue::from_string(format!("{v:.16e}")).map_err(serde::ser::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

fn de_hist<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<LbpHistogram, D::Error> {
    Ok(LbpHistogram {
        bins: Vec::<f64>::deserialize(d)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleIndex {
    pub version: u32,
    pub lbp: LbpConfig,
    pub entries: Vec<StyleIndexEntry>,
    /// Files that could not be read when the index was built.
    #[serde(default)]
    pub skipped: Vec<String>,
}

/// LBP histogram plus whole-image mean and std of the grayscale image.
pub fn describe(img: &Tensor, cfg: &LbpConfig) -> Result<(LbpHistogram, f64, f64)> {
    let gray = to_grayscale(img)?;
    let hist = lbp_histogram(&lbp_spectrum(&gray, cfg)?)?;
    let (mean, std) = mean_std(gray.channel(0));
    Ok((hist, mean, std))
}

impl StyleIndex {
    /// Indexes in-memory images; ids follow the given order.
    pub fn from_images(images: Vec<(String, Tensor)>, cfg: LbpConfig) -> Result<Self> {
        cfg.validate()?;
        let described: Vec<_> = images
            .par_iter()
            .map(|(_, img)| describe(img, &cfg))
            .collect::<Result<_>>()?;
        let entries = images
            .into_iter()
            .zip(described)
            .enumerate()
            .map(|(id, ((path, _), (histogram, mean, std)))| StyleIndexEntry {
                id,
                path,
                histogram,
                mean,
                std,
            })
            .collect();
        Ok(StyleIndex {
            version: INDEX_VERSION,
            lbp: cfg,
            entries,
            skipped: Vec::new(),
        })
    }

    pub fn entry(&self, id: usize) -> Option<&StyleIndexEntry> {
        self.entries.get(id).filter(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("index serializes") + "\n"
    }
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "pgm")
    )
}

/// Indexes every `.png`/`.pgm` file directly inside `dir`, in lexicographic
/// path order. Unreadable images are skipped and listed in `skipped`.
pub fn build_index(dir: impl AsRef<Path>, cfg: &LbpConfig) -> Result<StyleIndex> {
    let dir = dir.as_ref();
    cfg.validate()?;
    let read = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = read
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty("style directory contains no .png or .pgm images"));
    }

    let described: Vec<(PathBuf, Result<(LbpHistogram, f64, f64)>)> = paths
        .into_par_iter()
        .map(|p| {
            let d = load_image(&p).and_then(|img| describe(&img, cfg));
            (p, d)
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (path, d) in described {
        let path_str = path.display().to_string();
        match d {
            Ok((histogram, mean, std)) => entries.push(StyleIndexEntry {
                id: entries.len(),
                path: path_str,
                histogram,
                mean,
                std,
            }),
            Err(e) => {
                warn!("skipping {path_str}: {e}");
                skipped.push(path_str);
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Empty("no readable images in style directory"));
    }
    Ok(StyleIndex {
        version: INDEX_VERSION,
        lbp: *cfg,
        entries,
        skipped,
    })
}

pub fn save_index(index: &StyleIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, index.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<StyleIndex> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let index: StyleIndex = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if index.entries.iter().enumerate().any(|(i, e)| e.id != i) {
        return Err(Error::InvalidConfig(format!(
            "{}: entry ids must be dense and ordered from 0",
            path.display()
        )));
    }
    index.lbp.validate()?;
    Ok(index)
}
