//! Case-specific style selection over a style library.
//!
//! 1. Describe every library image and the content by a uniform-LBP histogram
//!    and whole-image mean/std.
//! 2. Retrieve the `k` library entries whose histograms correlate best with
//!    the content's.
//! 3. Among those, pick the entry minimizing `|μ(s) − μ(c)| + |σ(s) − σ(c)|`.

mod index;
mod lbp;

pub use index::{build_index, describe, load_index, save_index, StyleIndex, StyleIndexEntry, INDEX_VERSION};
pub use lbp::{lbp_spectrum, transitions, uniform_label_table, LabelMap, LbpConfig, LbpVariant, Sampling};

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;

/// Normalized label histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpHistogram {
    pub bins: Vec<f64>,
}

pub fn lbp_histogram(labels: &LabelMap) -> Result<LbpHistogram> {
    if labels.is_empty() {
        return Err(Error::Empty("LBP histogram of an empty label map"));
    }
    let mut counts = vec![0usize; labels.bins];
    for &l in &labels.labels {
        counts[l as usize] += 1;
    }
    let n = labels.labels.len() as f64;
    Ok(LbpHistogram {
        bins: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Pearson correlation of two bin vectors. Zero-variance histograms compare
/// as 1 when equal and 0 otherwise.
pub fn hist_correlation(a: &LbpHistogram, b: &LbpHistogram) -> Result<f64> {
    if a.bins.len() != b.bins.len() {
        return Err(Error::ShapeMismatch(format!(
            "histograms have {} and {} bins",
            a.bins.len(),
            b.bins.len()
        )));
    }
    let n = a.bins.len() as f64;
    let ma = a.bins.iter().sum::<f64>() / n;
    let mb = b.bins.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.bins.iter().zip(&b.bins) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(if a.bins == b.bins { 1.0 } else { 0.0 });
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// A retrieved entry and its correlation with the query.
#[derive(Debug, Clone, Copy)]
pub struct Ranked<'a> {
    pub entry: &'a StyleIndexEntry,
    pub correlation: f64,
}

/// Top `k` entries by correlation, descending; ties go to the lower id.
pub fn retrieve_topk<'a>(index: &'a StyleIndex, content: &LbpHistogram, k: usize) -> Result<Vec<Ranked<'a>>> {
    if index.entries.is_empty() {
        return Err(Error::Empty("style index has no entries"));
    }
    let mut ranked = index
        .entries
        .iter()
        .map(|entry| {
            Ok(Ranked {
                correlation: hist_correlation(&entry.histogram, content)?,
                entry,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.correlation
            .partial_cmp(&a.correlation)
            .unwrap_or(Ordering::Equal)
            .then(a.entry.id.cmp(&b.entry.id))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// `|μ(s) − μ(c)| + |σ(s) − σ(c)|` for whole-image scalar statistics.
pub fn stat_distance(entry: &StyleIndexEntry, content_mean: f64, content_std: f64) -> f64 {
    (entry.mean - content_mean).abs() + (entry.std - content_std).abs()
}

/// Candidate with the smallest statistic distance; ties go to the lower id.
pub fn select_style<'a>(
    candidates: &[&'a StyleIndexEntry],
    content_mean: f64,
    content_std: f64,
) -> Result<&'a StyleIndexEntry> {
    candidates
        .iter()
        .copied()
        .min_by(|a, b| {
            stat_distance(a, content_mean, content_std)
                .partial_cmp(&stat_distance(b, content_mean, content_std))
                .unwrap_or(Ordering::Equal)
                .then(a.id.cmp(&b.id))
        })
        .ok_or(Error::Empty("no candidate styles to select from"))
}
