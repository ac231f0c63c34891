//! Run configuration: input locations, conventions and search settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::econometrics::{HacConfig, Specification};
use crate::error::{Error, Result};
use crate::features::{AlignmentConfig, AssetTerm};
use crate::implied_discount::CleaningConfig;
use crate::market_data::Market;
use crate::synth::SynthWorldConfig;
use crate::validation::NestedConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayCount {
    #[default]
    Act365,
    Act360,
}

impl DayCount {
    pub fn year_fraction(self, days: i32) -> f64 {
        match self {
            DayCount::Act365 => days as f64 / 365.0,
            DayCount::Act360 => days as f64 / 360.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub option_quotes: PathBuf,
    pub ois: PathBuf,
    /// Volatility index per market.
    pub vol: BTreeMap<Market, PathBuf>,
    pub nfci: PathBuf,
    pub dollar_index: Option<PathBuf>,
    /// ETF price series by asset name.
    pub prices: BTreeMap<String, PathBuf>,
}

/// A named regression: OIS terms of `base` first, then the asset terms,
/// then the rest of `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub name: String,
    pub base: Vec<String>,
    #[serde(default)]
    pub assets: Vec<AssetTerm>,
}

impl SpecConfig {
    pub fn new(name: &str, base: &[&str], assets: &[(&str, usize)]) -> Self {
        Self {
            name: name.into(),
            base: base.iter().map(|s| s.to_string()).collect(),
            assets: assets.iter().map(|(a, w)| AssetTerm::new(*a, *w)).collect(),
        }
    }

    pub fn specification(&self) -> Result<Specification> {
        let split = self.base.iter().take_while(|b| b.starts_with("gbm_ois")).count();
        let mut regressors: Vec<String> = self.base[..split].to_vec();
        regressors.extend(self.assets.iter().map(AssetTerm::column_name));
        regressors.extend(self.base[split..].iter().cloned());
        Specification::new(self.name.clone(), regressors)
    }
}

fn default_specs() -> Vec<SpecConfig> {
    let three = ["gbm_ois_1y", "ba_over_tau", "nfci"];
    vec![
        SpecConfig::new("baseline", &["gbm_ois_1y", "gbm_ois_10y", "ba_over_tau", "nfci"], &[]),
        SpecConfig::new("main3etf", &three, &[("IEFA", 70), ("IGOV", 441), ("IAU", 315)]),
        SpecConfig::new("us_only", &three, &[("VTI", 42), ("BND", 252), ("IAU", 300)]),
        SpecConfig::new("em", &three, &[("IEMG", 63), ("EBND", 126), ("IAU", 300)]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    /// Holdout years; every year with enough rows when empty.
    pub years: Vec<i32>,
    pub min_fold_rows: usize,
    pub specs: Vec<String>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            years: Vec::new(),
            min_fold_rows: crate::validation::MIN_FOLD_ROWS,
            specs: vec!["baseline".into(), "main3etf".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub asset: String,
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl ScanGrid {
    pub fn windows(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step.max(1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub baseline: String,
    pub grids: Vec<ScanGrid>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        let g = |a: &str, start, end, step| ScanGrid {
            asset: a.into(),
            start,
            end,
            step,
        };
        Self {
            baseline: "baseline".into(),
            grids: vec![g("IEFA", 10, 250, 10), g("IGOV", 50, 550, 25), g("IAU", 50, 550, 25)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    /// Spec whose asset block is rotated.
    pub spec: String,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            spec: "main3etf".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub inputs: InputPaths,
    pub cleaning: CleaningConfig,
    pub atm_band: f64,
    pub day_count: DayCount,
    pub alignment: AlignmentConfig,
    pub hac: HacConfig,
    /// Assets whose prices are divided by the dollar index before slopes.
    pub fx_neutral: Vec<String>,
    pub specs: Vec<SpecConfig>,
    /// Specs estimated by `fit`; all of `specs` when empty.
    pub fit_specs: Vec<String>,
    pub cv: CvConfig,
    pub scan: ScanConfig,
    pub nested: NestedConfig,
    pub pca: PcaConfig,
    pub synth: SynthWorldConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20240611,
            inputs: InputPaths::default(),
            cleaning: CleaningConfig::default(),
            atm_band: 0.025,
            day_count: DayCount::Act365,
            alignment: AlignmentConfig::default(),
            hac: HacConfig::default(),
            fx_neutral: Vec::new(),
            specs: default_specs(),
            fit_specs: Vec::new(),
            cv: CvConfig::default(),
            scan: ScanConfig::default(),
            nested: NestedConfig::default(),
            pca: PcaConfig::default(),
            synth: SynthWorldConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config; relative input paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cleaning.validate()?;
        if !(self.atm_band > 0.0 && self.atm_band < 1.0) {
            return Err(Error::Config(format!("atm_band {} outside (0, 1)", self.atm_band)));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.specs {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("spec `{}` defined twice", s.name)));
            }
        }
        for n in self.fit_specs.iter().chain(&self.cv.specs) {
            self.spec_config(n)?;
        }
        self.spec_config(&self.scan.baseline)?;
        self.spec_config(&self.pca.spec)?;
        self.nested.search.validate()?;
        for g in &self.scan.grids {
            if g.step == 0 || g.start < 2 || g.start > g.end {
                return Err(Error::Config(format!("scan grid for {} is empty or invalid", g.asset)));
            }
        }
        self.synth.validate()
    }

    pub fn spec_config(&self, name: &str) -> Result<&SpecConfig> {
        self.specs
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("unknown spec `{name}`")))
    }

    /// Specs selected by name, or the configured defaults.
    pub fn selected_specs(&self, names: &[String]) -> Result<Vec<Specification>> {
        let names: Vec<String> = if !names.is_empty() {
            names.to_vec()
        } else if !self.fit_specs.is_empty() {
            self.fit_specs.clone()
        } else {
            self.specs.iter().map(|s| s.name.clone()).collect()
        };
        if names.is_empty() {
            return Err(Error::Config("no specifications selected".into()));
        }
        names.iter().map(|n| self.spec_config(n)?.specification()).collect()
    }

    /// Every asset term any configured spec needs.
    pub fn asset_terms(&self) -> Vec<AssetTerm> {
        let mut t: Vec<AssetTerm> = self.specs.iter().flat_map(|s| s.assets.iter().cloned()).collect();
        t.sort();
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text, "").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn spec_ordering() {
        let s = default_specs()[1].specification().unwrap();
        assert_eq!(s, Specification::main3etf());
        let b = default_specs()[0].specification().unwrap();
        assert_eq!(b, Specification::baseline());
    }

    #[test]
    fn rejects_unknown_keys_and_specs() {
        assert!(RunConfig::from_toml("bogus = 1", "").is_err());
        assert!(RunConfig::from_toml("fit_specs = [\"nope\"]", "").is_err());
        assert!(RunConfig::from_toml("atm_band = 2.0", "").is_err());
        let ok = RunConfig::from_toml("atm_band = 0.03\n[hac]\nlag = 5\nmode = \"row_order\"\n", "/x").unwrap();
        assert_eq!(ok.hac.lag, 5);
        assert_eq!(ok.resolve(Path::new("a.csv")), PathBuf::from("/x/a.csv"));
    }
}
