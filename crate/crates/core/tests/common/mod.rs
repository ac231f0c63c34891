#![allow(dead_code)]

use std::path::Path;

use carrygap_core::config::RunConfig;
use carrygap_core::features::{Panel, PanelBuilder, PanelSource};
use carrygap_core::pipeline::{identify_stage, load_market_data, panel_source};
use carrygap_core::synth::{gen_world, SynthWorldConfig, World};
use carrygap_core::Result;

pub struct Loaded {
    pub world: World,
    pub cfg: RunConfig,
    pub source: PanelBuilder,
}

/// Writes a world into `dir` and rebuilds the panel from the files.
pub fn world_in(dir: &Path, synth: &SynthWorldConfig) -> Result<Loaded> {
    let world = gen_world(synth, dir)?;
    let cfg = RunConfig::load(dir.join("config.toml"))?;
    let data = load_market_data(&cfg)?;
    let id = identify_stage(&data, &cfg)?;
    let source = panel_source(&cfg, &id, &data.ois)?;
    Ok(Loaded { world, cfg, source })
}

/// A panel source whose base targets have been replaced.
pub struct Retargeted<'a> {
    pub inner: &'a PanelBuilder,
    pub base: Panel,
}

impl PanelSource for Retargeted<'_> {
    fn base(&self) -> &Panel {
        &self.base
    }

    fn asset_column(&self, asset: &str, window: usize) -> Result<Vec<Option<f64>>> {
        self.inner.asset_column(asset, window)
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
