//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use usstyle::metrics::{dice, hausdorff_boundary, jaccard, psnr, psnr_from_mse, ssim, Mask};
use usstyle::network::{decode, encode, make_identity_network};
use usstyle::pipeline::select_for;
use usstyle::styleselect::{
    build_index, lbp_spectrum, LbpConfig, LbpHistogram, StyleIndex, StyleIndexEntry,
};
use usstyle::tensor::channel_stats;
use usstyle::tgcsim::{gen_corpus, load_group, CorpusManifest};
use usstyle::transfer::{
    adain, adain_depth, benchmark_blocks, transfer_image, wct, DepthWindowConfig, Method, StyleStats,
    TransferConfig,
};
use usstyle::wavelet::{haar_pool, haar_unpool, pad_symmetric};
use usstyle::{ChannelStats, Tensor};

type Outcome = Result<String, String>;

fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn(c, h, w, |_, _, _| rng.random_range(-1.0..1.0))
}

fn check(cond: bool, fail: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(fail())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

fn wavelet_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_err, mut worst_energy) = (0.0f64, 0.0f64);
    for _ in 0..120 {
        let c = rng.random_range(1..=8);
        let h = 2 * rng.random_range(1..=40);
        let w = 2 * rng.random_range(1..=40);
        let x = random_tensor(&mut rng, c, h, w);
        let bands = haar_pool(&x).map_err(|e| e.to_string())?;
        let back = haar_unpool(&bands).map_err(|e| e.to_string())?;
        worst_err = worst_err.max(back.max_abs_diff(&x));
        let e = x.energy();
        worst_energy = worst_energy.max((bands.energy() - e).abs() / e);
    }
    let elapsed = start.elapsed();
    check(worst_err <= 1e-10, || format!("reconstruction error {worst_err:e}"))?;
    check(worst_energy <= 1e-12, || format!("relative energy error {worst_energy:e}"))?;
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!(
        "120 tensors, max error {worst_err:.1e}, energy {worst_energy:.1e}, {elapsed:.2?}"
    ))
}

fn network_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for levels in 1..=3 {
        let (spec, weights) = make_identity_network(levels).map_err(|e| e.to_string())?;
        for &(h, w) in &[(16, 16), (24, 40), (17, 23), (33, 9), (5, 7), (64, 31)] {
            let img = Tensor::from_fn(1, h, w, |_, _, _| rng.random::<f64>());
            let (padded, (oh, ow)) = pad_symmetric(&img, spec.alignment()).map_err(|e| e.to_string())?;
            let state = encode(&padded, &spec, &weights).map_err(|e| e.to_string())?;
            let out = decode(&state, &spec, &weights).map_err(|e| e.to_string())?.crop(oh, ow);
            worst = worst.max(out.max_abs_diff(&img));
            cases += 1;
        }
    }
    check(worst <= 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("{cases} images over levels 1-3, max error {worst:.1e}"))
}

fn adain_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_stats, mut worst_self) = (0.0f64, 0.0f64);
    for &sigma in &[1e-3, 1e-2, 1.0, 25.0] {
        for _ in 0..10 {
            let c = rng.random_range(1..=8);
            let (h, w) = (rng.random_range(3..=24), rng.random_range(3..=24));
            let offset = rng.random_range(-5.0..5.0);
            let x = Tensor::from_fn(c, h, w, |_, _, _| offset + sigma * rng.random_range(-1.7..1.7));
            let target = ChannelStats {
                mean: (0..c).map(|_| rng.random_range(-2.0..2.0)).collect(),
                std: (0..c).map(|_| rng.random_range(0.01..3.0)).collect(),
            };
            let out = adain(&x, &target, 1e-5).map_err(|e| e.to_string())?;
            let got = channel_stats(&out).map_err(|e| e.to_string())?;
            for ch in 0..c {
                worst_stats = worst_stats
                    .max((got.mean[ch] - target.mean[ch]).abs())
                    .max((got.std[ch] - target.std[ch]).abs());
            }
            let own = channel_stats(&x).map_err(|e| e.to_string())?;
            let same = adain(&x, &own, 1e-5).map_err(|e| e.to_string())?;
            let scale = x.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst_self = worst_self.max(same.max_abs_diff(&x) / scale);
        }
    }
    check(worst_stats <= 1e-6, || format!("stat error {worst_stats:e}"))?;
    check(worst_self <= 1e-5, || format!("self-transfer relative error {worst_self:e}"))?;
    Ok(format!("stat error {worst_stats:.1e}, self-transfer {worst_self:.1e}"))
}

/// Population mean and std of one channel of a row slice, computed the
/// straightforward way.
fn oracle_stats(t: &Tensor, ch: usize, r0: usize, r1: usize) -> (f64, f64) {
    let vals: Vec<f64> = (r0..r1)
        .flat_map(|r| (0..t.width()).map(move |c| (r, c)))
        .map(|(r, c)| t.get(ch, r, c))
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn oracle_adain_depth(x: &Tensor, y: &Tensor, eps: f64) -> Tensor {
    let (c, h, w) = x.shape();
    let hs = y.height();
    let band = (2 * h).div_ceil(3);
    let windows = [(0, band), (h - band, h)];
    let mut acc = vec![vec![0.0; c * h * w]; 2];
    for (k, &(s, e)) in windows.iter().enumerate() {
        let ys = s * hs / h;
        let ye = (e * hs).div_ceil(h);
        for ch in 0..c {
            let (mx, sx) = oracle_stats(x, ch, s, e);
            let (my, sy) = oracle_stats(y, ch, ys, ye);
            let scale = sy / sx.max(eps);
            for r in s..e {
                for col in 0..w {
                    acc[k][(ch * h + r) * w + col] = scale * (x.get(ch, r, col) - mx) + my;
                }
            }
        }
    }
    Tensor::from_fn(c, h, w, |ch, r, col| {
        let i = (ch * h + r) * w + col;
        let (in0, in1) = (r < windows[0].1, r >= windows[1].0);
        match (in0, in1) {
            (true, true) => (acc[0][i] + acc[1][i]) / 2.0,
            (true, false) => acc[0][i],
            _ => acc[1][i],
        }
    })
}

fn adain_d_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = DepthWindowConfig::default();
    for h in 3..=64 {
        let c = rng.random_range(1..=4);
        let w = rng.random_range(2..=12);
        let hs = if h % 2 == 0 { h } else { rng.random_range(3..=70) };
        let x = random_tensor(&mut rng, c, h, w);
        let y = random_tensor(&mut rng, c, hs, w + 1);
        let got = adain_depth(&x, &y, &cfg, 1e-5, StyleStats::Regional).map_err(|e| e.to_string())?;
        let want = oracle_adain_depth(&x, &y, 1e-5);
        if got.data().iter().zip(want.data()).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(format!("H={h} (style H={hs}) differs from oracle by {:e}", got.max_abs_diff(&want)));
        }
    }
    let windows = cfg.windows(6);
    check(windows == [(0, 4), (2, 6)], || format!("H=6 windows {windows:?}"))?;
    // Rows 2-3 must be the mean of the two window outputs.
    let x = Tensor::from_fn(1, 6, 3, |_, r, c| (r * 3 + c) as f64 * 0.37 - (r as f64).powi(2) * 0.11);
    let y = Tensor::from_fn(1, 6, 3, |_, r, c| (r as f64 * 1.3).sin() + c as f64);
    let out = adain_depth(&x, &y, &cfg, 1e-5, StyleStats::Regional).map_err(|e| e.to_string())?;
    let stats = |r0, r1| ChannelStats {
        mean: vec![oracle_stats(&y, 0, r0, r1).0],
        std: vec![oracle_stats(&y, 0, r0, r1).1],
    };
    let top = adain(&x.rows(0, 4), &stats(0, 4), 1e-5).map_err(|e| e.to_string())?;
    let bottom = adain(&x.rows(2, 6), &stats(2, 6), 1e-5).map_err(|e| e.to_string())?;
    for r in 2..4 {
        for c in 0..3 {
            let avg = (top.get(0, r, c) + bottom.get(0, r - 2, c)) / 2.0;
            check(out.get(0, r, c) == avg, || format!("row {r} is not the window average"))?;
        }
    }
    Ok("H=3..64 bit-identical to oracle; H=6 windows [0,4) and [2,6), rows 2-3 averaged".into())
}

fn oracle_covariance(t: &Tensor) -> Vec<Vec<f64>> {
    let (c, h, w) = t.shape();
    let n = (h * w) as f64;
    let means: Vec<f64> = (0..c).map(|ch| t.channel(ch).iter().sum::<f64>() / n).collect();
    (0..c)
        .map(|i| {
            (0..c)
                .map(|j| {
                    t.channel(i)
                        .iter()
                        .zip(t.channel(j))
                        .map(|(a, b)| (a - means[i]) * (b - means[j]))
                        .sum::<f64>()
                        / n
                })
                .collect()
        })
        .collect()
}

/// Features with a random but well-conditioned channel covariance: identity
/// plus a small random mixing.
fn mixed_features(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    let mix: Vec<f64> = (0..c * c)
        .map(|k| if k % (c + 1) == 0 { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3))
        .collect();
    let z = random_tensor(rng, c, h, w);
    let offsets: Vec<f64> = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_fn(c, h, w, |ch, y, x| {
        offsets[ch] + (0..c).map(|k| mix[ch * c + k] * z.get(k, y, x)).sum::<f64>()
    })
}

fn wct_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for c in 4..=16 {
        for _ in 0..3 {
            let x = mixed_features(&mut rng, c, 24, 24);
            let y = mixed_features(&mut rng, c, 20, 28);
            let out = wct(&x, &y, 1e-5).map_err(|e| e.to_string())?;
            let (co, cy) = (oracle_covariance(&out), oracle_covariance(&y));
            for i in 0..c {
                for j in 0..c {
                    worst = worst.max((co[i][j] - cy[i][j]).abs());
                }
            }
        }
    }
    check(worst <= 1e-4, || format!("covariance error {worst:e}"))?;
    Ok(format!("4-16 channels, max covariance error {worst:.1e}"))
}

fn block_speedup() -> Outcome {
    let timings = benchmark_blocks(256, 64, 64, 11, 6).map_err(|e| e.to_string())?;
    let get = |m: Method| timings.iter().find(|t| t.0 == m).map(|t| t.1).unwrap_or(f64::NAN);
    let (a, w) = (get(Method::Adain), get(Method::Wct));
    check(a * 10.0 <= w, || format!("adain {a:.2} ms, wct {w:.2} ms"))?;
    Ok(format!("median adain {a:.2} ms, wct {w:.2} ms, ratio {:.0}", w / a))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    sab / (saa * sbb).sqrt()
}

fn brute_force_select(entries: &[StyleIndexEntry], hist: &LbpHistogram, mean: f64, std: f64) -> usize {
    let mut scored: Vec<(f64, usize)> = entries.iter().map(|e| (pearson(&hist.bins, &e.histogram.bins), e.id)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, usize)> = None;
    for &(_, id) in scored.iter().take(10) {
        let e = &entries[id];
        let d = (e.mean - mean).abs() + (e.std - std).abs();
        if best.is_none_or(|(bd, bid)| d < bd || (d == bd && id < bid)) {
            best = Some((d, id));
        }
    }
    best.expect("non-empty library").1
}

fn synthetic_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    let (fy, fx) = (rng.random_range(0.05..0.6), rng.random_range(0.05..0.6));
    let (gain, base, noise) = (rng.random_range(0.1..0.5), rng.random_range(0.2..0.6), rng.random_range(0.0..0.4));
    Tensor::from_fn(1, h, w, |_, y, x| {
        let v = base + gain * ((y as f64 * fy).sin() * (x as f64 * fx).cos()) + noise * rng.random_range(-0.5..0.5);
        (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
    })
}

fn selection_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = LbpConfig::default();
    let (mut queries, mut agree) = (0, 0);
    for _ in 0..20 {
        let n = rng.random_range(50..=200);
        let mut images: Vec<(String, Tensor)> = Vec::with_capacity(n);
        for i in 0..n {
            // Some duplicates to exercise tie-breaking.
            let img = if i > 0 && rng.random_bool(0.1) {
                images[rng.random_range(0..i)].1.clone()
            } else {
                let (h, w) = (rng.random_range(12..=40), rng.random_range(12..=40));
                synthetic_image(&mut rng, h, w)
            };
            images.push((format!("lib_{i}.png"), img));
        }
        let library: Vec<Tensor> = images.iter().map(|(_, t)| t.clone()).collect();
        let index = StyleIndex::from_images(images, cfg).map_err(|e| e.to_string())?;
        for q in 0..10 {
            let content = if q % 2 == 0 {
                library[rng.random_range(0..n)].map(|v| (v * 0.9 + 0.05).clamp(0.0, 1.0))
            } else {
                synthetic_image(&mut rng, 32, 32)
            };
            let sel = select_for(&content, &index, 10).map_err(|e| e.to_string())?;
            let labels = lbp_spectrum(&content, &cfg).map_err(|e| e.to_string())?;
            let hist = usstyle::styleselect::lbp_histogram(&labels).map_err(|e| e.to_string())?;
            let stats = channel_stats(&content).map_err(|e| e.to_string())?;
            let want = brute_force_select(&index.entries, &hist, stats.mean[0], stats.std[0]);
            queries += 1;
            agree += usize::from(want == sel.style_id);
        }
    }
    let elapsed = start.elapsed();
    check(agree == queries, || format!("{agree}/{queries} queries agree"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!("{agree}/{queries} queries agree over 20 libraries, {elapsed:.2?}"))
}

fn lbp_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = LbpConfig::default();
    for i in 0..20 {
        let (h, w) = (rng.random_range(8..=48), rng.random_range(8..=48));
        let img = Tensor::from_fn(1, h, w, |_, _, _| rng.random_range(0..=255u8) as f64 / 255.0);
        let base = lbp_spectrum(&img, &cfg).map_err(|e| e.to_string())?;
        for (name, remap) in [("v^2", &(|v: f64| v * v) as &dyn Fn(f64) -> f64), ("0.5+0.5v", &|v| 0.5 + 0.5 * v)] {
            let other = lbp_spectrum(&img.map(remap), &cfg).map_err(|e| e.to_string())?;
            check(other.labels == base.labels, || format!("image {i}: labels change under {name}"))?;
        }
    }
    let flat = Tensor::filled(1, 20, 20, 0.42);
    let hist = usstyle::styleselect::lbp_histogram(&lbp_spectrum(&flat, &cfg).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let all_ones = 57;
    for (b, &v) in hist.bins.iter().enumerate() {
        let want = if b == all_ones { 1.0 } else { 0.0 };
        check(v == want, || format!("constant image: bin {b} = {v}"))?;
    }
    Ok("20 images invariant under both remaps; constant image is the all-ones indicator".into())
}

fn end_to_end_restoration() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = gen_corpus(2024, 50, 4, (128, 128), dir.path().join("corpus")).map_err(|e| e.to_string())?;
    // The style library is the corpus originals, as in the CLI `evaluate`.
    let index = build_index(dir.path().join("corpus/originals"), &LbpConfig::default()).map_err(|e| e.to_string())?;
    let styles: Vec<Tensor> = index
        .entries
        .iter()
        .map(|e| usstyle::io::load_image(&e.path))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (spec, weights) = make_identity_network(2).map_err(|e| e.to_string())?;
    let cfg = TransferConfig::default();

    let manifest = CorpusManifest::load(&corpus).map_err(|e| e.to_string())?;
    let (mut before_psnr, mut after_psnr, mut before_ssim, mut after_ssim) = (0.0, 0.0, 0.0, 0.0);
    let (mut n, mut improved) = (0usize, 0usize);
    for group in &manifest.groups {
        let (original, variants, _) = load_group(&corpus, group).map_err(|e| e.to_string())?;
        for variant in &variants {
            let sel = select_for(variant, &index, 10).map_err(|e| e.to_string())?;
            let out = transfer_image(variant, &styles[sel.style_id], &spec, &weights, &cfg).map_err(|e| e.to_string())?;
            let (p0, p1) = (psnr(variant, &original).unwrap(), psnr(&out, &original).unwrap());
            let (s0, s1) = (ssim(variant, &original).unwrap(), ssim(&out, &original).unwrap());
            before_psnr += p0;
            after_psnr += p1;
            before_ssim += s0;
            after_ssim += s1;
            n += 1;
            improved += usize::from(p1 > p0 && s1 > s0);
        }
    }
    let elapsed = start.elapsed();
    let nf = n as f64;
    let (bp, ap, bs, as_) = (before_psnr / nf, after_psnr / nf, before_ssim / nf, after_ssim / nf);
    let frac = improved as f64 / nf;
    let summary = format!(
        "PSNR {bp:.2} -> {ap:.2} dB, SSIM {bs:.4} -> {as_:.4}, {improved}/{n} variants improved, {elapsed:.1?}"
    );
    check(ap > bp && as_ > bs && frac >= 0.9, || summary.clone())?;
    within(elapsed, Duration::from_secs(300))?;
    Ok(summary)
}

fn metric_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = Tensor::from_fn(1, 40, 33, |_, _, _| rng.random::<f64>());
    let s = ssim(&x, &x).map_err(|e| e.to_string())?;
    check((s - 1.0).abs() <= 1e-9, || format!("ssim(x,x) = {s}"))?;

    let a = Tensor::filled(1, 8, 8, 0.0);
    let b = Tensor::filled(1, 8, 8, 0.5);
    let p = psnr(&a, &b).map_err(|e| e.to_string())?;
    check((p - 6.0206).abs() <= 1e-3, || format!("psnr at mse 0.25 = {p}"))?;
    check((psnr_from_mse(0.25) - 6.0206).abs() <= 1e-3, || "psnr_from_mse(0.25)".into())?;

    let left = Mask::from_fn(2, 4, |_, x| x < 2);
    let right = Mask::from_fn(2, 4, |_, x| (1..3).contains(&x));
    let (d, j) = (dice(&left, &right).unwrap(), jaccard(&left, &right).unwrap());
    check(d == 0.5, || format!("dice {d}"))?;
    check(j == 1.0 / 3.0, || format!("jaccard {j}"))?;

    let p0 = Mask::from_fn(5, 5, |y, x| (y, x) == (0, 0));
    let p1 = Mask::from_fn(5, 5, |y, x| (y, x) == (3, 4));
    let hd = hausdorff_boundary(&p0, &p1).unwrap();
    check(hd == 5.0, || format!("hausdorff {hd}"))?;
    Ok(format!("ssim(x,x)={s}, psnr={p:.4} dB, dice={d}, jaccard={j:.6}, hausdorff={hd}"))
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("wavelet exactness", wavelet_exactness),
        ("network exactness", network_exactness),
        ("adain contract", adain_contract),
        ("adain-d geometry", adain_d_geometry),
        ("wct contract", wct_contract),
        ("block speedup", block_speedup),
        ("style selection oracle", selection_oracle),
        ("lbp invariance", lbp_invariance),
        ("end-to-end restoration", end_to_end_restoration),
        ("metric sanity", metric_sanity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
