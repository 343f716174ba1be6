use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod net;

#[derive(Parser)]
#[command(name = "usstyle", version, about = "Wavelet-corrected AdaIN style transfer for depth-dependent appearance shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index every PNG/PGM image in a style library directory.
    BuildIndex {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        lbp: LbpArgs,
    },
    /// Pick the style image for a content image from an index.
    SelectStyle {
        content: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Stylize one content image with an explicit or index-selected style.
    Transfer {
        content: PathBuf,
        #[arg(long, conflicts_with = "index", required_unless_present = "index")]
        style: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        transfer: TransferArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transfer a content image against every library style and rank the results.
    Sweep {
        content: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Image the outputs are scored against; defaults to the content.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Metric::Psnr)]
        metric: Metric,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        transfer: TransferArgs,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus of phantoms and TGC-shifted variants.
    SimulateTgc {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        variants: usize,
        /// Image size as HxW.
        #[arg(long, default_value = "128x128", value_parser = parse_hw)]
        size: (usize, usize),
        #[arg(long)]
        out: PathBuf,
    },
    /// Score no processing, histogram equalization and style transfer on a corpus.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// Style index; built from the corpus originals when omitted.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        transfer: TransferArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the AdaIN, depth-windowed AdaIN and WCT blocks on random features.
    Benchmark {
        /// Comma-separated CxHxW feature sizes.
        #[arg(long, value_delimiter = ',', default_value = "64x32x32,256x64x64", value_parser = parse_chw)]
        sizes: Vec<(usize, usize, usize)>,
        #[arg(long, default_value_t = 11)]
        repetitions: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an identity network spec and its weight file.
    InitNetwork {
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long)]
        spec_out: PathBuf,
        #[arg(long)]
        weights_out: PathBuf,
    },
}

#[derive(Args, Clone)]
pub struct NetArgs {
    /// Network spec (JSON). Without it an identity network is used.
    #[arg(long, requires = "weights")]
    pub net: Option<PathBuf>,
    /// WTS1 weight file matching --net.
    #[arg(long, requires = "net")]
    pub weights: Option<PathBuf>,
    /// Wavelet levels of the default identity network.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
}

#[derive(Args, Clone)]
pub struct TransferArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::AdainD)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Comma-separated transfer sites; defaults to the network's own list.
    #[arg(long, value_delimiter = ',')]
    pub sites: Option<Vec<String>>,
    /// Use whole-image style statistics in both depth windows.
    #[arg(long)]
    pub whole_style_stats: bool,
}

#[derive(Args, Clone)]
pub struct LbpArgs {
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long)]
    pub bilinear: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Adain,
    AdainD,
    Wct,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Metric {
    Psnr,
    Ssim,
}

fn parse_dims<const N: usize>(s: &str) -> Result<[usize; N], String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("{s:?}: expected {N} dimensions separated by 'x'"))
}

fn parse_hw(s: &str) -> Result<(usize, usize), String> {
    let [h, w] = parse_dims::<2>(s)?;
    Ok((h, w))
}

fn parse_chw(s: &str) -> Result<(usize, usize, usize), String> {
    let [c, h, w] = parse_dims::<3>(s)?;
    Ok((c, h, w))
}

fn configure_threads() {
    if let Some(n) = std::env::var("USSTYLE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
