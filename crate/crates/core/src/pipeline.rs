//! Style selection followed by transfer.

use crate::error::Result;
use crate::network::{NetworkSpec, WeightStore};
use crate::styleselect::{describe, retrieve_topk, select_style, StyleIndex};
use crate::tensor::Tensor;
use crate::transfer::{transfer_image, TransferConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub style_id: usize,
    pub style_path: String,
    /// Retrieved `(id, correlation)` pairs in rank order.
    pub candidates: Vec<(usize, f64)>,
    pub content_mean: f64,
    pub content_std: f64,
}

/// Retrieves the top `k` library entries by LBP histogram correlation and
/// picks the one whose whole-image mean/std is closest to the content's.
pub fn select_for(content: &Tensor, index: &StyleIndex, k: usize) -> Result<Selection> {
    let (hist, mean, std) = describe(content, &index.lbp)?;
    let ranked = retrieve_topk(index, &hist, k)?;
    let entries: Vec<_> = ranked.iter().map(|r| r.entry).collect();
    let chosen = select_style(&entries, mean, std)?;
    Ok(Selection {
        style_id: chosen.id,
        style_path: chosen.path.clone(),
        candidates: ranked.iter().map(|r| (r.entry.id, r.correlation)).collect(),
        content_mean: mean,
        content_std: std,
    })
}

/// Selects a style from `index`, fetches it with `load_style(id, path)` and
/// transfers it onto `content`.
pub fn restore<F>(
    content: &Tensor,
    index: &StyleIndex,
    k: usize,
    mut load_style: F,
    spec: &NetworkSpec,
    weights: &WeightStore,
    cfg: &TransferConfig,
) -> Result<(Tensor, Selection)>
where
    F: FnMut(usize, &str) -> Result<Tensor>,
{
    let selection = select_for(content, index, k)?;
    let style = load_style(selection.style_id, &selection.style_path)?;
    let out = transfer_image(content, &style, spec, weights, cfg)?;
    Ok((out, selection))
}
