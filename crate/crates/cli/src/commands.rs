use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::warn;
use rayon::prelude::*;

use usstyle::io::{load_image, save_image};
use usstyle::metrics::{psnr, ssim};
use usstyle::network::{make_identity_network, save_weights};
use usstyle::pipeline::select_for;
use usstyle::styleselect::{build_index, load_index, save_index, LbpConfig, StyleIndex};
use usstyle::tensor::to_grayscale;
use usstyle::tgcsim::{gen_corpus, load_group, resolve, CorpusManifest};
use usstyle::transfer::{benchmark_blocks, hist_equalize, transfer_image, Method};
use usstyle::Tensor;

use crate::net::{lbp_config, load_for_network, load_network, transfer_config};
use crate::{Command, Metric};

macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildIndex { dir, out, lbp } => {
            let index = build_index(&dir, &lbp_config(&lbp)).with_context(|| format!("indexing {}", dir.display()))?;
            save_index(&index, &out)?;
            out!(
                "indexed {} images ({} skipped) -> {}",
                index.entries.len(),
                index.skipped.len(),
                out.display()
            );
            Ok(())
        }
        Command::SelectStyle { content, index, top_k } => {
            let index = load_index(&index)?;
            let img = load_image(&content)?;
            let sel = select_for(&img, &index, top_k)?;
            out!("selected {} {}", sel.style_id, sel.style_path);
            out!("content mean={:.6} std={:.6}", sel.content_mean, sel.content_std);
            for (rank, (id, corr)) in sel.candidates.iter().enumerate() {
                let e = &index.entries[*id];
                out!(
                    "candidate rank={} id={} corr={:.6} mean={:.6} std={:.6} {}",
                    rank + 1,
                    id,
                    corr,
                    e.mean,
                    e.std,
                    e.path
                );
            }
            Ok(())
        }
        Command::Transfer {
            content,
            style,
            index,
            top_k,
            net,
            transfer,
            out,
        } => {
            let t0 = Instant::now();
            let (spec, weights) = load_network(&net)?;
            let content_img = load_for_network(&content, &spec)?;
            let load_ms = ms(t0);

            let t1 = Instant::now();
            let (style_path, selected) = match (style, index) {
                (Some(s), _) => (s, None),
                (None, Some(index_path)) => {
                    let index = load_index(&index_path)?;
                    let sel = select_for(&content_img, &index, top_k)?;
                    (PathBuf::from(&sel.style_path), Some(sel.style_id))
                }
                (None, None) => bail!("either --style or --index is required"),
            };
            let style_img = load_for_network(&style_path, &spec)?;
            let select_ms = ms(t1);

            let t2 = Instant::now();
            let stylized = transfer_image(&content_img, &style_img, &spec, &weights, &transfer_config(&transfer))?;
            let transfer_ms = ms(t2);

            let t3 = Instant::now();
            save_image(&stylized, &out)?;
            let save_ms = ms(t3);

            match selected {
                Some(id) => out!("selected style: {id} {}", style_path.display()),
                None => out!("style: {}", style_path.display()),
            }
            out!(
                "timing_ms load={load_ms:.3} select={select_ms:.3} transfer={transfer_ms:.3} save={save_ms:.3}"
            );
            let (gc, gs) = (gray(&content_img)?, gray(&stylized)?);
            out!("ssim_vs_content={:.6} psnr_vs_content={:.4}", ssim(&gc, &gs)?, psnr(&gc, &gs)?);
            out!("wrote {}", out.display());
            Ok(())
        }
        Command::Sweep {
            content,
            index,
            reference,
            metric,
            top_k,
            net,
            transfer,
            out,
        } => sweep(&content, &index, reference.as_deref(), metric, top_k, &net, &transfer, out.as_deref()),
        Command::SimulateTgc {
            seed,
            n,
            variants,
            size,
            out,
        } => {
            let manifest = gen_corpus(seed, n, variants, size, &out)?;
            out!(
                "wrote {n} groups x {variants} variants ({}x{}) -> {}",
                size.0,
                size.1,
                manifest.display()
            );
            Ok(())
        }
        Command::Evaluate {
            corpus,
            index,
            top_k,
            net,
            transfer,
            out,
        } => evaluate(&corpus, index.as_deref(), top_k, &net, &transfer, out.as_deref()),
        Command::Benchmark {
            sizes,
            repetitions,
            seed,
            out,
        } => benchmark(&sizes, repetitions, seed, out.as_deref()),
        Command::InitNetwork {
            levels,
            spec_out,
            weights_out,
        } => {
            let (spec, weights) = make_identity_network(levels)?;
            spec.save(&spec_out)?;
            save_weights(&weights, &weights_out)?;
            out!("wrote {} and {}", spec_out.display(), weights_out.display());
            Ok(())
        }
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn gray(t: &Tensor) -> Result<Tensor> {
    Ok(to_grayscale(t)?)
}

/// Writes CSV text preceded by a `#` comment line, to a file or stdout.
fn emit_csv(header_comment: &str, body: Vec<u8>, out: Option<&Path>) -> Result<()> {
    let mut text = format!("# {header_comment}\n").into_bytes();
    text.extend(body);
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(&text)?;
            Ok(())
        }
    }
}

fn load_styles(index: &StyleIndex) -> Vec<Option<Tensor>> {
    index
        .entries
        .par_iter()
        .map(|e| match load_image(&e.path).and_then(|t| Ok(to_grayscale(&t)?)) {
            Ok(t) => Some(t),
            Err(err) => {
                warn!("style {} unavailable: {err}", e.path);
                None
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    content: &Path,
    index_path: &Path,
    reference: Option<&Path>,
    metric: Metric,
    top_k: usize,
    net: &crate::NetArgs,
    transfer: &crate::TransferArgs,
    out: Option<&Path>,
) -> Result<()> {
    let (spec, weights) = load_network(net)?;
    let index = load_index(index_path)?;
    if index.entries.is_empty() {
        bail!("{} has no entries", index_path.display());
    }
    let content_img = load_for_network(content, &spec)?;
    let reference_img = match reference {
        Some(p) => load_for_network(p, &spec)?,
        None => content_img.clone(),
    };
    let cfg = transfer_config(transfer);
    let selected = select_for(&content_img, &index, top_k)?.style_id;
    let styles = load_styles(&index);

    let mut scored = index
        .entries
        .par_iter()
        .zip(styles.par_iter())
        .map(|(entry, style)| {
            let style = style.as_ref().ok_or_else(|| anyhow!("style {} could not be loaded", entry.path))?;
            let stylized = transfer_image(&content_img, style, &spec, &weights, &cfg)?;
            let score = match metric {
                Metric::Psnr => psnr(&stylized, &reference_img)?,
                Metric::Ssim => ssim(&gray(&stylized)?, &gray(&reference_img)?)?,
            };
            Ok((entry.id, entry.path.clone(), score))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let metric_name = match metric {
        Metric::Psnr => "psnr",
        Metric::Ssim => "ssim",
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "style_id", "path", metric_name, "selected"])?;
    for (rank, (id, path, score)) in scored.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            id.to_string(),
            path.clone(),
            format!("{score:.6}"),
            u8::from(*id == selected).to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    emit_csv(
        &format!(
            "usstyle sweep content={} method={} metric={metric_name} selected={selected}",
            content.display(),
            cfg.method
        ),
        body,
        out,
    )?;
    if out.is_some() {
        let pos = scored.iter().position(|s| s.0 == selected).unwrap_or(0) + 1;
        out!("selected style {selected} ranks {pos} of {} by {metric_name}", scored.len());
    }
    Ok(())
}

struct EvalRow {
    group: String,
    variant: String,
    method: &'static str,
    ssim: f64,
    psnr: f64,
    style: Option<usize>,
}

fn corpus_index(manifest_path: &Path, manifest: &CorpusManifest) -> Result<StyleIndex> {
    let images: Vec<(String, Tensor)> = manifest
        .groups
        .iter()
        .filter_map(|g| {
            let p = resolve(manifest_path, &g.original);
            match load_image(&p) {
                Ok(t) => Some((p.display().to_string(), t)),
                Err(e) => {
                    warn!("missing corpus original: {e}");
                    None
                }
            }
        })
        .collect();
    if images.is_empty() {
        bail!("no readable originals in {}", manifest_path.display());
    }
    Ok(StyleIndex::from_images(images, LbpConfig::default())?)
}

fn evaluate(
    corpus: &Path,
    index_path: Option<&Path>,
    top_k: usize,
    net: &crate::NetArgs,
    transfer: &crate::TransferArgs,
    out: Option<&Path>,
) -> Result<()> {
    let (spec, weights) = load_network(net)?;
    let manifest = CorpusManifest::load(corpus)?;
    let index = match index_path {
        Some(p) => load_index(p)?,
        None => corpus_index(corpus, &manifest)?,
    };
    let styles = load_styles(&index);
    let cfg = transfer_config(transfer);

    let per_group: Vec<Vec<EvalRow>> = manifest
        .groups
        .par_iter()
        .map(|g| {
            let (original, variants, _) = match load_group(corpus, g) {
                Ok(parts) => parts,
                Err(e) => {
                    eprintln!("warning: skipping group {}: {e}", g.original);
                    return Vec::new();
                }
            };
            let mut rows = Vec::new();
            for (rel, variant) in g.variants.iter().zip(&variants) {
                let result = (|| -> Result<()> {
                    let restored_sel = select_for(variant, &index, top_k)?;
                    let style = styles[restored_sel.style_id]
                        .as_ref()
                        .ok_or_else(|| anyhow!("selected style {} unavailable", restored_sel.style_path))?;
                    let restored = transfer_image(variant, style, &spec, &weights, &cfg)?;
                    let equalized = hist_equalize(variant)?;
                    for (method, img, sid) in [
                        ("none", variant, None),
                        ("he", &equalized, None),
                        ("transfer", &restored, Some(restored_sel.style_id)),
                    ] {
                        rows.push(EvalRow {
                            group: g.original.clone(),
                            variant: rel.clone(),
                            method,
                            ssim: ssim(img, &original)?,
                            psnr: psnr(img, &original)?,
                            style: sid,
                        });
                    }
                    Ok(())
                })();
                if let Err(e) = result {
                    eprintln!("warning: skipping variant {rel}: {e:#}");
                }
            }
            rows
        })
        .collect();
    let rows: Vec<EvalRow> = per_group.into_iter().flatten().collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "variant", "method", "ssim", "psnr", "style_id"])?;
    for r in &rows {
        w.write_record([
            r.group.clone(),
            r.variant.clone(),
            r.method.to_string(),
            format!("{:.6}", r.ssim),
            format!("{:.6}", r.psnr),
            r.style.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    emit_csv(
        &format!(
            "usstyle evaluate corpus={} seed={} method={} levels={}",
            corpus.display(),
            manifest.seed,
            cfg.method,
            spec.levels
        ),
        body,
        out,
    )?;

    let summary = summarize(&rows);
    let sink: &mut dyn std::io::Write = if out.is_some() {
        &mut std::io::stdout()
    } else {
        &mut std::io::stderr()
    };
    writeln!(sink, "{summary}")?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn summarize(rows: &[EvalRow]) -> String {
    let mut s = format!("{:<10} {:>8} {:>18} {:>18}\n", "method", "n", "SSIM(%)", "PSNR(dB)");
    for method in ["none", "he", "transfer"] {
        let sel: Vec<&EvalRow> = rows.iter().filter(|r| r.method == method).collect();
        let (sm, ss) = mean_std(&sel.iter().map(|r| r.ssim * 100.0).collect::<Vec<_>>());
        let (pm, ps) = mean_std(&sel.iter().map(|r| r.psnr).collect::<Vec<_>>());
        s.push_str(&format!(
            "{:<10} {:>8} {:>10.2} ± {:<5.2} {:>10.2} ± {:<5.2}\n",
            method,
            sel.len(),
            sm,
            ss,
            pm,
            ps
        ));
    }
    let none: Vec<&EvalRow> = rows.iter().filter(|r| r.method == "none").collect();
    let improved = rows
        .iter()
        .filter(|r| r.method == "transfer")
        .filter(|t| {
            none.iter()
                .find(|n| n.variant == t.variant)
                .is_some_and(|n| t.psnr > n.psnr && t.ssim > n.ssim)
        })
        .count();
    s.push_str(&format!("transfer improved PSNR and SSIM on {improved} of {} variants", none.len()));
    s
}

fn benchmark(sizes: &[(usize, usize, usize)], repetitions: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["size", "method", "median_ms"])?;
    let mut ratios = Vec::new();
    for &(c, h, wd) in sizes {
        let size = format!("{c}x{h}x{wd}");
        let timings = benchmark_blocks(c, h, wd, repetitions, seed)?;
        for (method, median) in &timings {
            w.write_record([size.clone(), method.to_string(), format!("{median:.4}")])?;
        }
        let get = |m: Method| timings.iter().find(|t| t.0 == m).map(|t| t.1).unwrap_or(f64::NAN);
        ratios.push((size, get(Method::Wct) / get(Method::Adain)));
    }
    let body = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    emit_csv(&format!("usstyle benchmark repetitions={repetitions} seed={seed}"), body, out)?;

    let sink: &mut dyn std::io::Write = if out.is_some() {
        &mut std::io::stdout()
    } else {
        &mut std::io::stderr()
    };
    for (size, ratio) in ratios {
        writeln!(sink, "{size}: wct/adain median ratio {ratio:.1}")?;
    }
    Ok(())
}
