//! `qcnn audit`: print each layer's parameter and multiply counts for a
//! preset without building (or training) the network.

use crate::config::parse_conv_widths;
use crate::opts::AuditArgs;
use crate::specs::{scaled, Preset};
use crate::{CmdResult, Failure};
use qcnn_core::net;
use qcnn_core::presets;

pub fn run(args: AuditArgs) -> CmdResult {
    let preset: Preset = match args.preset {
        Some(raw) => raw.parse().map_err(Failure::Usage)?,
        None => Preset::ShallowCifar,
    };
    let ratio = args.filter_ratio.unwrap_or(1.0);
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Failure::usage(format!("filter-ratio must be positive, got {ratio}")));
    }
    let conv = match args.conv_widths {
        Some(raw) => parse_conv_widths(&raw)?,
        None => presets::SHALLOW_CONV_WIDTHS,
    }
    .map(|w| scaled(w, ratio));
    let dense = scaled(args.dense_width.unwrap_or(presets::SHALLOW_DENSE_WIDTH), ratio);
    let base = scaled(args.base_width.unwrap_or(presets::DENOISER_BASE_WIDTH), ratio);

    let spec = match preset {
        Preset::ShallowCifar => presets::shallow_classifier(args.quaternion, conv, dense, 10),
        Preset::Denoiser => presets::denoiser(args.quaternion, base),
        Preset::Vggs => presets::vggs_classifier(args.quaternion, 10),
    };

    let flavor = if args.quaternion { "quaternion" } else { "real" };
    println!("preset = {} ({flavor}), input {}x{}", preset.name(), spec.input_h, spec.input_w);
    let rows = net::audit(&spec)?;
    println!("{:>5}  {:<28} {:>12} {:>14}", "layer", "kind", "params", "mults");
    let mut params = 0u64;
    let mut mults = 0u64;
    for r in &rows {
        println!("{:>5}  {:<28} {:>12} {:>14}", r.index, r.label, r.params, r.mults);
        params += r.params;
        mults += r.mults;
    }
    println!("{:>5}  {:<28} {:>12} {:>14}", "", "total", params, mults);
    Ok(0)
}
