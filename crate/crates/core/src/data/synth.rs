use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesDataset};
use crate::tensor::{Scalar, Tensor};

/// Parameters of [`gen_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub t: usize,
    pub f: usize,
    /// Class separation: peak magnitude of the class-1 offset.
    pub delta: f64,
    /// Standard deviation of the per-step Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

/// Scale of the per-sample latent level shared by all features.
pub const SHARED_LEVEL_SCALE: f64 = 3.0;

/// Two-class surrogate data.
///
/// Every sample and feature follows its own smooth trend (random level,
/// slope and a slow sinusoid) plus i.i.d. `N(0, sigma²)` noise. On top of
/// that each sample has a latent level `z ~ N(0, 1)` that enters feature `f`
/// as `SHARED_LEVEL_SCALE · z · c_f` with fixed loadings `c_f ~ N(0, 1)`.
/// It dominates the raw variance, so a classifier has to learn to look past
/// it. Class 1 adds a fixed per-feature pattern `delta · s_f · (0.5 + 0.5 · t/(T-1))` with
/// random signs `s_f`. Labels alternate before shuffling, so an even `n`
/// gives an exact 50/50 balance.
pub fn gen_synthetic<E: Scalar>(spec: &SyntheticSpec) -> Result<TimeSeriesDataset<E>, DataError> {
    let SyntheticSpec { n, t, f, delta, sigma, seed } = *spec;
    if !(delta >= 0.0 && sigma >= 0.0) {
        return Err(DataError::Shape(format!("delta and sigma must be non-negative, got {delta}, {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<f64> = (0..f).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let loadings: Vec<f64> = (0..f).map(|_| SHARED_LEVEL_SCALE * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    labels.shuffle(&mut rng);

    let noise = Normal::new(0.0, sigma).map_err(|e| DataError::Shape(e.to_string()))?;
    let ramp = |step: usize| if t > 1 { 0.5 + 0.5 * step as f64 / (t - 1) as f64 } else { 1.0 };
    let mut data = Vec::with_capacity(n * t * f);
    let mut trend = vec![(0.0, 0.0, 0.0, 0.0, 0.0); f];
    for &label in &labels {
        let z: f64 = StandardNormal.sample(&mut rng);
        for tr in trend.iter_mut() {
            let level: f64 = StandardNormal.sample(&mut rng);
            let slope: f64 = StandardNormal.sample(&mut rng);
            let amp = rng.random_range(0.0..1.0);
            let freq = rng.random_range(0.5..2.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            *tr = (level, slope, amp, freq, phase);
        }
        for step in 0..t {
            let u = step as f64 / t as f64;
            for (j, &(level, slope, amp, freq, phase)) in trend.iter().enumerate() {
                let mut v = z * loadings[j] + level + slope * u + amp * (std::f64::consts::TAU * freq * u + phase).sin();
                v += noise.sample(&mut rng);
                if label == 1 {
                    v += delta * signs[j] * ramp(step);
                }
                data.push(E::from_f64_lossy(v));
            }
        }
    }
    let samples = Tensor::new(vec![n, t, f], data)?;
    let origin = format!("synthetic(n={n},t={t},f={f},delta={delta},sigma={sigma},seed={seed})");
    TimeSeriesDataset::new(samples, labels, TimeSeriesDataset::<E>::default_feature_names(f), origin)
}
