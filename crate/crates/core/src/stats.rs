//! Seed derivation and summary statistics shared by the Monte Carlo estimators.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Seed for trajectory `index` of a run with master seed `master`.
///
/// A pure function of both arguments, so results never depend on scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

/// Sample mean with the standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error of i.i.d. samples, summed in the given order.
///
/// One sample gives stderr 0.
pub fn mean_stderr(samples: &[f64]) -> MeanStderr {
    let n = samples.len();
    if n == 0 {
        return MeanStderr { mean: f64::NAN, stderr: f64::NAN, count: 0 };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    MeanStderr { mean, stderr, count: n }
}

/// Runs `f(trial, seed)` for every trial in parallel and returns results in trial order.
pub(crate) fn run_trials<T, F>(trials: usize, master: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    use rayon::prelude::*;
    (0..trials)
        .into_par_iter()
        .map(|t| f(t, derive_seed(master, t as u64)))
        .collect()
}
