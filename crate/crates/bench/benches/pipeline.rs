use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carrygap_core::econometrics::{hac_se, HacConfig};
use carrygap_core::features::slope_series;
use carrygap_core::implied_discount::{build_pairs, clean_pairs, identify_discount, CleaningConfig};
use carrygap_core::market_data::{DailySeries, Date, SeriesUnit};
use carrygap_core::synth::{brute_hac, gen_chain, strike_grid, ChainParams};

fn identification(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = ChainParams::simple(0.98, 4000.0, strike_grid(4000.0, 41, 0.3, 5.0), 0.0);
    let quotes = gen_chain(&p, &mut rng);
    c.bench_function("identify 41-strike chain", |b| {
        b.iter(|| {
            let (pairs, _) = build_pairs(&quotes);
            identify_discount(&clean_pairs(&pairs, &CleaningConfig::default())).unwrap()
        })
    });
}

fn slopes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dates: Vec<Date> = (0..3000).map(|i| Date::from_ordinal(15_000 + i)).collect();
    let values = dates.iter().map(|_| rng.random_range(90.0..110.0)).collect();
    let prices = DailySeries::new("P", dates, values, SeriesUnit::PriceLevel).unwrap();
    c.bench_function("slope series n=320 over 3000 days", |b| b.iter(|| slope_series(&prices, 320).unwrap()));
}

fn hac(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dates: Vec<Date> = (0..2000).flat_map(|i| std::iter::repeat_n(Date::from_ordinal(15_000 + i), 6)).collect();
    let n = dates.len();
    let x = DMatrix::from_fn(n, 7, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let resid: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cfg = HacConfig::default();
    let mut g = c.benchmark_group("hac 2000 dates x 6 maturities");
    g.bench_function("clustered bartlett", |b| b.iter(|| hac_se(&x, &resid, &dates, &cfg).unwrap()));
    g.sample_size(10);
    g.bench_function("brute force", |b| {
        b.iter_batched(|| resid.clone(), |r| brute_hac(&x, &r, &dates, cfg.lag).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, identification, slopes, hac);
criterion_main!(benches);
