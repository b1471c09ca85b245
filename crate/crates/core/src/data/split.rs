use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeriesDataset};
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    /// Train/validation/test fractions summing to 1. Test takes the remainder
    /// after rounding the first two.
    Fractions { train: f64, validation: f64, test: f64, seed: u64 },
    Counts { train: usize, validation: usize, test: usize, seed: u64 },
}

impl SplitSpec {
    pub fn counts(&self, n: usize) -> Result<[usize; 3], DataError> {
        match *self {
            SplitSpec::Fractions { train, validation, test, .. } => {
                if [train, validation, test].iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(DataError::Split(format!("fractions must lie in [0, 1], got ({train}, {validation}, {test})")));
                }
                if (train + validation + test - 1.0).abs() > 1e-9 {
                    return Err(DataError::Split(format!("fractions sum to {}, not 1", train + validation + test)));
                }
                let a = (train * n as f64).round() as usize;
                let b = (validation * n as f64).round() as usize;
                if a + b > n {
                    return Err(DataError::Split(format!("rounded counts {a}+{b} exceed n={n}")));
                }
                Ok([a, b, n - a - b])
            }
            SplitSpec::Counts { train, validation, test, .. } => {
                if train + validation + test != n {
                    return Err(DataError::Split(format!("counts {train}+{validation}+{test} do not sum to n={n}")));
                }
                Ok([train, validation, test])
            }
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            SplitSpec::Fractions { seed, .. } | SplitSpec::Counts { seed, .. } => seed,
        }
    }
}

/// Sorted, disjoint index sets covering `0..n`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3], DataError> {
    let [a, b, _] = spec.counts(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed()));
    let mut parts = [order[..a].to_vec(), order[a..a + b].to_vec(), order[a + b..].to_vec()];
    parts.iter_mut().for_each(|p| p.sort_unstable());
    Ok(parts)
}

#[derive(Clone, Debug)]
pub struct Splits<E: Scalar> {
    pub train: TimeSeriesDataset<E>,
    pub validation: TimeSeriesDataset<E>,
    pub test: TimeSeriesDataset<E>,
}

/// Random split, standardized with statistics fitted on the train part only.
pub fn split<E: Scalar>(ds: &TimeSeriesDataset<E>, spec: &SplitSpec) -> Result<Splits<E>, DataError> {
    if ds.is_standardized() {
        return Err(DataError::Split("split expects unstandardized data".into()));
    }
    let [tr, va, te] = split_indices(ds.n(), spec)?;
    if tr.is_empty() {
        return Err(DataError::Split("train split is empty".into()));
    }
    let part = |idx: &[usize], name: &str| ds.subset(idx, format!("{}#{name}", ds.origin()));
    let (train, stats) = part(&tr, "train")?.standardize(None)?;
    let std_with = |idx: &[usize], name: &str| -> Result<TimeSeriesDataset<E>, DataError> {
        if idx.is_empty() {
            return Err(DataError::Split(format!("{name} split is empty")));
        }
        Ok(part(idx, name)?.standardize(Some(&stats))?.0)
    };
    Ok(Splits { validation: std_with(&va, "validation")?, test: std_with(&te, "test")?, train })
}
