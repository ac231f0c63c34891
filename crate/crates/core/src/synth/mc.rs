use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

const PATHS_PER_CHUNK: usize = 1024;

/// Leading constant of the discrete-monitoring bias of a Brownian maximum,
/// `-zeta(1/2) / sqrt(2 pi)`.
pub const DISCRETE_SUP_BIAS: f64 = 0.5826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrownianSupportEstimate {
    pub sigma: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Mean over paths of the time-averaged running support.
    pub estimate: f64,
    pub std_error: f64,
    /// `(2/3) sigma sqrt(2 T / pi)`.
    pub closed_form: f64,
}

impl BrownianSupportEstimate {
    /// Bound on the grid bias: the monitored supremum lags the continuous
    /// one by about `0.5826 sigma sqrt(dt)`, plus the trapezoid error.
    pub fn discretization_allowance(&self) -> f64 {
        discretization_allowance(self.sigma, self.horizon, self.n_steps)
    }
}

pub fn discretization_allowance(sigma: f64, horizon: f64, n_steps: usize) -> f64 {
    let n = n_steps as f64;
    DISCRETE_SUP_BIAS * sigma * (horizon / n).sqrt() + sigma * (2.0 * horizon / PI).sqrt() / n
}

pub fn closed_form_support(sigma: f64, horizon: f64) -> f64 {
    (2.0 / 3.0) * sigma * (2.0 * horizon / PI).sqrt()
}

/// Time average of `sup_{s<=t} (-sigma B_s)^+` on a uniform grid (trapezoid).
fn path_average(rng: &mut ChaCha8Rng, scale: f64, n_steps: usize) -> f64 {
    let mut x = 0.0_f64;
    let mut low = 0.0_f64;
    let mut acc = 0.0;
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(rng);
        x += scale * z;
        let prev = low;
        low = low.min(x);
        acc += -(prev + low);
    }
    0.5 * acc / n_steps as f64
}

/// Monte-Carlo estimate of the expected time-averaged capital support of
/// `X = sigma B` over `[0, horizon]`. Paths are simulated in chunks, each
/// with its own ChaCha8 stream, and reduced in chunk order.
pub fn mc_expected_support(
    sigma: f64,
    horizon: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> BrownianSupportEstimate {
    assert!(n_paths >= 2 && n_steps >= 1, "need at least two paths and one step");
    let scale = sigma * (horizon / n_steps as f64).sqrt();
    let chunks = n_paths.div_ceil(PATHS_PER_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = PATHS_PER_CHUNK.min(n_paths - c * PATHS_PER_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let v = path_average(&mut rng, scale, n_steps);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = n_paths as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    BrownianSupportEstimate {
        sigma,
        horizon,
        n_paths,
        n_steps,
        estimate: mean,
        std_error: (var / n).sqrt(),
        closed_form: closed_form_support(sigma, horizon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_vol_is_zero() {
        let e = mc_expected_support(0.0, 1.0, 100, 50, 1);
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn linear_in_sigma_with_common_numbers() {
        let a = mc_expected_support(0.1, 0.5, 2000, 100, 3);
        let b = mc_expected_support(0.2, 0.5, 2000, 100, 3);
        assert!((b.estimate - 2.0 * a.estimate).abs() < 1e-12);
    }

    #[test]
    fn closed_form_value() {
        assert!((closed_form_support(0.2, 1.0) - 0.10638).abs() < 1e-5);
    }

    #[test]
    fn deterministic() {
        assert_eq!(mc_expected_support(0.3, 1.0, 3000, 64, 11), mc_expected_support(0.3, 1.0, 3000, 64, 11));
    }
}
