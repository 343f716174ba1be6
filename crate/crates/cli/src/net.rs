use anyhow::{Context, Result};

use usstyle::io::load_image;
use usstyle::network::{load_weights, make_identity_network, NetworkSpec, WeightStore};
use usstyle::styleselect::{LbpConfig, Sampling};
use usstyle::tensor::to_grayscale;
use usstyle::transfer::{Method, StyleStats, TransferConfig};
use usstyle::Tensor;

use crate::{LbpArgs, MethodArg, NetArgs, TransferArgs};

pub fn load_network(args: &NetArgs) -> Result<(NetworkSpec, WeightStore)> {
    match (&args.net, &args.weights) {
        (Some(net), Some(weights)) => {
            let spec = NetworkSpec::load(net).with_context(|| format!("loading network spec {}", net.display()))?;
            let store = load_weights(weights).with_context(|| format!("loading weights {}", weights.display()))?;
            spec.check_weights(&store)
                .with_context(|| format!("{} does not match {}", weights.display(), net.display()))?;
            Ok((spec, store))
        }
        _ => Ok(make_identity_network(args.levels)?),
    }
}

pub fn transfer_config(args: &TransferArgs) -> TransferConfig {
    TransferConfig {
        method: match args.method {
            MethodArg::Adain => Method::Adain,
            MethodArg::AdainD => Method::AdainD,
            MethodArg::Wct => Method::Wct,
        },
        epsilon: args.epsilon,
        sites: args.sites.clone(),
        style_stats: if args.whole_style_stats {
            StyleStats::Whole
        } else {
            StyleStats::Regional
        },
        ..Default::default()
    }
}

pub fn lbp_config(args: &LbpArgs) -> LbpConfig {
    LbpConfig {
        points: args.points,
        radius: args.radius,
        sampling: if args.bilinear {
            Sampling::Bilinear
        } else {
            Sampling::Nearest
        },
        ..Default::default()
    }
}

/// Loads an image and converts it to the network's channel count.
pub fn load_for_network(path: &std::path::Path, spec: &NetworkSpec) -> Result<Tensor> {
    let img = load_image(path)?;
    if spec.in_channels == 1 && img.channels() != 1 {
        return Ok(to_grayscale(&img)?);
    }
    Ok(img)
}
