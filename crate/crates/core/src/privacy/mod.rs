//! Privacy diagnostics: nearest-neighbour distances between condensed and
//! original samples, distance histograms and per-variable temporal trends.
//!
//! Distances are Euclidean over flattened `T×F` matrices. Callers pass
//! samples in standardized space.

use serde::{Deserialize, Serialize};

use crate::eval::{mean, population_sd};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum PrivacyError {
    #[error("expected a rank-3 sample tensor, got shape {0:?}")]
    Rank(Vec<usize>),
    #[error(
        "condensed samples are {condensed:?} (T×F) but originals are {original:?}; \
         samples of different length can only be compared in an embedding space, which is not supported"
    )]
    ShapeMismatch { condensed: [usize; 2], original: [usize; 2] },
    #[error("nearest-neighbour distances need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("histogram needs at least one value")]
    Empty,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("non-finite value in histogram input")]
    NonFinite,
    #[error("feature index {index} out of range for {f} features")]
    Feature { index: usize, f: usize },
}

fn dims<E: Scalar>(x: &Tensor<E>) -> Result<(usize, usize), PrivacyError> {
    match *x.shape() {
        [n, t, f] => Ok((n, t * f)),
        _ => Err(PrivacyError::Rank(x.shape().to_vec())),
    }
}

fn dist<E: Scalar>(a: &[E], b: &[E]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// For each condensed sample, its distance to the closest original.
pub fn min_distances_c2o<E: Scalar>(condensed: &Tensor<E>, original: &Tensor<E>) -> Result<Vec<f64>, PrivacyError> {
    let (_, dc) = dims(condensed)?;
    let (n, d) = dims(original)?;
    let (cs, os) = (condensed.shape(), original.shape());
    if cs[1..] != os[1..] {
        return Err(PrivacyError::ShapeMismatch { condensed: [cs[1], cs[2]], original: [os[1], os[2]] });
    }
    if n == 0 {
        return Err(PrivacyError::TooFew { needed: 1, got: 0 });
    }
    Ok(condensed
        .data()
        .chunks_exact(dc.max(1))
        .map(|c| original.data().chunks_exact(d.max(1)).map(|o| dist(c, o)).fold(f64::INFINITY, f64::min))
        .collect())
}

/// For each original sample, its distance to the closest other original.
pub fn min_distances_o2o<E: Scalar>(original: &Tensor<E>) -> Result<Vec<f64>, PrivacyError> {
    let (n, d) = dims(original)?;
    if n < 2 {
        return Err(PrivacyError::TooFew { needed: 2, got: n });
    }
    let rows: Vec<&[E]> = original.data().chunks_exact(d.max(1)).collect();
    let mut best = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = dist(rows[i], rows[j]);
            best[i] = best[i].min(v);
            best[j] = best[j].min(v);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    OriginalToOriginal,
    CondensedToOriginal,
}

impl Population {
    pub fn tag(self) -> &'static str {
        match self {
            Population::OriginalToOriginal => "original-to-original",
            Population::CondensedToOriginal => "condensed-to-original",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    /// `counts.len() + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub population: Population,
    pub summary: DistanceSummary,
}

/// Equal-width histogram over `[min, max]`; the last bin is closed on the right.
///
/// When all values coincide there is nothing to split, so a single unit-wide
/// bin centred on the value is returned.
pub fn histogram(values: &[f64], bins: usize, population: Population) -> Result<DistanceHistogram, PrivacyError> {
    if bins == 0 {
        return Err(PrivacyError::NoBins);
    }
    if values.is_empty() {
        return Err(PrivacyError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PrivacyError::NonFinite);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = DistanceSummary { min: lo, mean: mean(values), max: hi };
    if lo == hi {
        return Ok(DistanceHistogram { edges: vec![lo - 0.5, lo + 0.5], counts: vec![values.len()], population, summary });
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(DistanceHistogram { edges, counts, population, summary })
}

impl DistanceHistogram {
    /// `bin_lo,bin_hi,count` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], c));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub step: usize,
    pub mean: f64,
    /// Population SD across samples at this step.
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableTrend {
    pub feature: usize,
    pub points: Vec<TrendPoint>,
}

impl VariableTrend {
    /// `step,mean,sd` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,mean,sd\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.step, p.mean, p.sd));
        }
        s
    }
}

/// Mean and SD of one feature across samples, per time step.
pub fn variable_trend<E: Scalar>(samples: &Tensor<E>, feature: usize) -> Result<VariableTrend, PrivacyError> {
    let [n, t, f] = *samples.shape() else { return Err(PrivacyError::Rank(samples.shape().to_vec())) };
    if feature >= f {
        return Err(PrivacyError::Feature { index: feature, f });
    }
    if n == 0 {
        return Err(PrivacyError::TooFew { needed: 1, got: 0 });
    }
    let x = samples.data();
    let points = (0..t)
        .map(|step| {
            let col: Vec<f64> = (0..n).map(|i| x[(i * t + step) * f + feature].as_f64()).collect();
            TrendPoint { step, mean: mean(&col), sd: population_sd(&col) }
        })
        .collect();
    Ok(VariableTrend { feature, points })
}
