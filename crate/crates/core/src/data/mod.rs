//! Labeled time-series datasets: the in-memory type, standardization,
//! splitting, synthetic generation, on-disk formats and size accounting.

pub(crate) mod io;
mod split;
mod synth;

pub use io::{load_dataset, save_dataset, DatasetMeta, Format};
pub use split::{split, split_indices, SplitSpec, Splits};
pub use synth::{gen_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::tensor::{Scalar, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: invalid metadata: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("record {index}: label {value} is not 0 or 1")]
    Label { index: usize, value: i64 },
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Split(String),
    #[error("{0}")]
    Stats(String),
    #[error("class {0} has no samples")]
    EmptyClass(u8),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-feature statistics used to standardize a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero-variance features are stored as 1.
    pub std: Vec<f64>,
    /// Fingerprint of the dataset the statistics were computed on.
    pub source: String,
    /// Features whose variance was zero.
    #[serde(default)]
    pub degenerate: Vec<usize>,
}

impl Standardization {
    /// Computes per-feature mean and population std over all `N·T` values.
    pub fn fit<E: Scalar>(ds: &TimeSeriesDataset<E>) -> Self {
        let f = ds.f();
        let count = (ds.n() * ds.t()) as f64;
        let mut mean = vec![0.0; f];
        for row in ds.samples.data().chunks_exact(f) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; f];
        for row in ds.samples.data().chunks_exact(f) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v.as_f64() - m;
                *s += d * d;
            }
        }
        let mut degenerate = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let sd = (s / count).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    degenerate.push(j);
                    1.0
                }
            })
            .collect();
        Standardization { mean, std, source: ds.fingerprint(), degenerate }
    }
}

/// `N` samples of shape `[T, F]` with binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset<E: Scalar> {
    samples: Tensor<E>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    stats: Option<Standardization>,
    origin: String,
    warnings: Vec<String>,
}

impl<E: Scalar> TimeSeriesDataset<E> {
    pub fn new(samples: Tensor<E>, labels: Vec<u8>, feature_names: Vec<String>, origin: impl Into<String>) -> Result<Self, DataError> {
        let shape = samples.shape();
        if shape.len() != 3 {
            return Err(DataError::Shape(format!("samples must be [N, T, F], got {shape:?}")));
        }
        let (n, t, f) = (shape[0], shape[1], shape[2]);
        if n == 0 || t == 0 || f == 0 {
            return Err(DataError::Shape(format!("dataset dimensions must be positive, got {shape:?}")));
        }
        if labels.len() != n {
            return Err(DataError::Shape(format!("{} labels for {n} samples", labels.len())));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(DataError::Label { index: i, value: labels[i] as i64 });
        }
        if feature_names.len() != f {
            return Err(DataError::Shape(format!("{} feature names for {f} features", feature_names.len())));
        }
        Ok(TimeSeriesDataset { samples, labels, feature_names, stats: None, origin: origin.into(), warnings: Vec::new() })
    }

    /// `feature_0 .. feature_{f-1}`.
    pub fn default_feature_names(f: usize) -> Vec<String> {
        (0..f).map(|j| format!("feature_{j}")).collect()
    }

    pub fn n(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn t(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn f(&self) -> usize {
        self.samples.shape()[2]
    }

    pub fn samples(&self) -> &Tensor<E> {
        &self.samples
    }

    /// The `[T, F]` block of sample `i`, row-major.
    pub fn sample(&self, i: usize) -> &[E] {
        let len = self.t() * self.f();
        &self.samples.data()[i * len..(i + 1) * len]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn stats(&self) -> Option<&Standardization> {
        self.stats.as_ref()
    }

    pub fn is_standardized(&self) -> bool {
        self.stats.is_some()
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn set_metadata(&mut self, stats: Option<Standardization>, warnings: Vec<String>) {
        self.stats = stats;
        self.warnings = warnings;
    }

    pub fn class_indices(&self, class: u8) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows `indices` in the given order; statistics and warnings carry over.
    pub fn subset(&self, indices: &[usize], origin: impl Into<String>) -> Result<Self, DataError> {
        let samples = self.samples.select_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut out = Self::new(samples, labels, self.feature_names.clone(), origin)?;
        out.set_metadata(self.stats.clone(), self.warnings.clone());
        Ok(out)
    }

    pub fn cast<F: Scalar>(&self) -> TimeSeriesDataset<F> {
        TimeSeriesDataset {
            samples: self.samples.cast(),
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            stats: self.stats.clone(),
            origin: self.origin.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// SHA-256 over shape, element width, values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in self.samples.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        h.update((E::BYTES as u64).to_le_bytes());
        let mut buf = Vec::with_capacity(self.samples.numel() * E::BYTES);
        for &v in self.samples.data() {
            v.write_le(&mut buf);
        }
        h.update(&buf);
        h.update(&self.labels);
        hex::encode(h.finalize())
    }

    /// Matrix size in MB (`2^20` bytes) at `bytes_per_element`.
    pub fn size_megabytes(&self, bytes_per_element: usize) -> f64 {
        size_megabytes(self.n(), self.t(), self.f(), bytes_per_element)
    }

    /// `x' = (x - mean_f) / std_f`.
    ///
    /// With `stats` absent they are fitted on this dataset; otherwise they
    /// are applied as given and never recomputed. Zero-variance features pass
    /// through centred, with a warning.
    pub fn standardize(&self, stats: Option<&Standardization>) -> Result<(Self, Standardization), DataError> {
        if self.is_standardized() {
            return Err(DataError::Stats("dataset is already standardized".into()));
        }
        let stats = match stats {
            Some(s) => s.clone(),
            None => Standardization::fit(self),
        };
        let f = self.f();
        if stats.mean.len() != f || stats.std.len() != f {
            return Err(DataError::Stats(format!("statistics cover {} features, dataset has {f}", stats.mean.len())));
        }
        let mut data = self.samples.data().to_vec();
        for row in data.chunks_exact_mut(f) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = E::from_f64_lossy((v.as_f64() - stats.mean[j]) / stats.std[j]);
            }
        }
        let mut out = self.clone();
        out.samples = Tensor::new(self.samples.shape().to_vec(), data)?;
        for &j in &stats.degenerate {
            out.warnings.push(format!("feature `{}` has zero variance; std treated as 1", self.feature_names[j]));
        }
        out.stats = Some(stats.clone());
        Ok((out, stats))
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn destandardize(&self) -> Result<Self, DataError> {
        let stats = self.stats.as_ref().ok_or_else(|| DataError::Stats("dataset is not standardized".into()))?;
        let mut out = self.clone();
        out.samples = destandardize_tensor(&self.samples, stats)?;
        out.stats = None;
        Ok(out)
    }
}

/// Maps standardized `[.., F]` values back to the original feature scale.
pub fn destandardize_tensor<E: Scalar>(x: &Tensor<E>, stats: &Standardization) -> Result<Tensor<E>, DataError> {
    let f = stats.mean.len();
    if x.shape().last() != Some(&f) {
        return Err(DataError::Stats(format!("statistics cover {f} features, tensor shape is {:?}", x.shape())));
    }
    let mut data = x.data().to_vec();
    for row in data.chunks_exact_mut(f) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = E::from_f64_lossy(v.as_f64() * stats.std[j] + stats.mean[j]);
        }
    }
    Ok(Tensor::new(x.shape().to_vec(), data)?)
}

/// `n·t·f·bytes / 2^20`.
pub fn size_megabytes(n: usize, t: usize, f: usize, bytes_per_element: usize) -> f64 {
    (n * t * f * bytes_per_element) as f64 / (1u64 << 20) as f64
}

/// Matrix size at both storage widths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub mb_32bit: f64,
    pub mb_64bit: f64,
}

impl SizeReport {
    pub fn new(n: usize, t: usize, f: usize) -> Self {
        SizeReport { mb_32bit: size_megabytes(n, t, f, 4), mb_64bit: size_megabytes(n, t, f, 8) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(values: &[f64], n: usize, t: usize, f: usize, labels: Vec<u8>) -> TimeSeriesDataset<f64> {
        let x = Tensor::new(vec![n, t, f], values.to_vec()).unwrap();
        TimeSeriesDataset::new(x, labels, TimeSeriesDataset::<f64>::default_feature_names(f), "test").unwrap()
    }

    #[test]
    fn two_values_standardize_to_unit() {
        let d = ds(&[1.0, 3.0], 2, 1, 1, vec![0, 1]);
        let (s, stats) = d.standardize(None).unwrap();
        assert_eq!(s.samples().data(), &[-1.0, 1.0]);
        assert_eq!(stats.mean, vec![2.0]);
        assert_eq!(stats.std, vec![1.0]);
    }

    #[test]
    fn constant_feature_becomes_zero_with_warning() {
        let d = ds(&[5.0, 1.0, 5.0, 2.0, 5.0, 3.0], 3, 1, 2, vec![0, 1, 0]);
        let (s, stats) = d.standardize(None).unwrap();
        assert_eq!(stats.degenerate, vec![0]);
        assert!(s.samples().data().iter().step_by(2).all(|&v| v == 0.0));
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn standardized_moments_and_inverse() {
        let vals: Vec<f64> = (0..60).map(|i| ((i * 7919) % 101) as f64 * 0.37 - 4.0 + (i % 3) as f64 * 10.0).collect();
        let d = ds(&vals, 5, 4, 3, vec![0, 1, 0, 1, 1]);
        let (s, _) = d.standardize(None).unwrap();
        let again = Standardization::fit(&s);
        for j in 0..3 {
            assert!(again.mean[j].abs() < 1e-5);
            assert!((again.std[j] - 1.0).abs() < 1e-5);
        }
        let back = s.destandardize().unwrap();
        for (a, b) in back.samples().data().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn given_stats_are_applied_not_refit() {
        let train = ds(&[0.0, 2.0], 2, 1, 1, vec![0, 1]);
        let (_, stats) = train.standardize(None).unwrap();
        let test = ds(&[10.0, 12.0, 14.0], 3, 1, 1, vec![0, 1, 0]);
        let (s, used) = test.standardize(Some(&stats)).unwrap();
        assert_eq!(used.source, train.fingerprint());
        assert_eq!(s.samples().data(), &[9.0, 11.0, 13.0]);
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        let x = Tensor::new(vec![2, 1, 1], vec![0.0f64, 1.0]).unwrap();
        let err = TimeSeriesDataset::new(x.clone(), vec![0, 2], vec!["a".into()], "t").unwrap_err();
        assert!(matches!(err, DataError::Label { index: 1, value: 2 }));
        assert!(TimeSeriesDataset::new(x, vec![0], vec!["a".into()], "t").is_err());
        let empty = Tensor::<f64>::new(vec![0, 1, 1], vec![]).unwrap();
        assert!(TimeSeriesDataset::new(empty, vec![], vec!["a".into()], "t").is_err());
    }

    #[test]
    fn table_sizes() {
        let r = SizeReport::new(5120, 48, 47);
        assert!((r.mb_32bit - 44.06).abs() < 0.005);
        assert!((r.mb_64bit - 88.13).abs() < 0.005);
        assert!((size_megabytes(20, 48, 47, 4) - 0.17).abs() < 0.005);
        assert!((size_megabytes(20, 48, 47, 8) - 0.344).abs() < 0.0005);
        assert!((size_megabytes(80, 48, 47, 4) - 0.69).abs() < 0.005);
        assert_eq!(size_megabytes(0, 48, 47, 4), 0.0);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ds(&[1.0, 2.0], 2, 1, 1, vec![0, 1]);
        let b = ds(&[1.0, 2.0], 2, 1, 1, vec![1, 0]);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
