//! Synthetic data with known answers: option chains, Brownian support
//! estimates, a reference HAC estimator and full input worlds.

mod brute;
mod chain;
mod mc;
mod world;

pub use brute::{brute_hac, gauss_jordan_inverse};
pub use chain::{gen_chain, strike_grid, ChainParams, ATM_SPREAD_BAND, MID_FLOOR};
pub use mc::{
    closed_form_support, discretization_allowance, mc_expected_support, BrownianSupportEstimate,
    DISCRETE_SUP_BIAS,
};
pub use world::{
    build_world, gen_world, load_truth, world_run_config, write_truth, Manifest, MarketTruth,
    PlantedAsset, PlantedModel, SynthWorldConfig, TruthRow, World, OIS_TENORS, RNG_NAME,
    TRUTH_HEADER,
};
