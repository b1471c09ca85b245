use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CondensedSet, Provenance};
use crate::data::io::{check_labels, io_err, read_json, read_le_file, write_json, write_le_file, DATA_FILE, META_FILE};
use crate::data::{DataError, Standardization};
use crate::tensor::{Scalar, Tensor};

pub const LOSS_FILE: &str = "loss.csv";

/// `meta.json` of a condensed set. It is a superset of the dataset
/// metadata, so the directory also loads as a plain dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CondensedMeta {
    pub n: usize,
    pub t: usize,
    pub f: usize,
    pub labels: Vec<i64>,
    pub feature_names: Vec<String>,
    pub standardized: bool,
    pub stats: Option<Standardization>,
    pub element_width: usize,
    pub origin: String,
    pub provenance: Provenance,
}

/// Writes `meta.json`, 32-bit `data.bin` and `loss.csv`.
///
/// The wall-clock time is left out so that reruns are byte-identical.
pub fn save_condensed<E: Scalar>(set: &CondensedSet<E>, trace: &[f64], dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let shape = set.samples.shape();
    let meta = CondensedMeta {
        n: shape[0],
        t: shape[1],
        f: shape[2],
        labels: set.labels.iter().map(|&l| l as i64).collect(),
        feature_names: set.feature_names.clone(),
        standardized: set.stats.is_some(),
        stats: set.stats.clone(),
        element_width: 32,
        origin: format!("condensed(seed={},M={})", set.provenance.seed, set.provenance.iterations),
        provenance: set.provenance.clone(),
    };
    write_json(&dir.join(META_FILE), &meta)?;
    let narrow: Vec<f32> = set.samples.data().iter().map(|v| v.as_f64() as f32).collect();
    write_le_file(&dir.join(DATA_FILE), &narrow)?;

    let mut text = String::from("iteration,loss\n");
    for (i, l) in trace.iter().enumerate() {
        text.push_str(&format!("{},{l}\n", i + 1));
    }
    let path = dir.join(LOSS_FILE);
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn load_condensed<E: Scalar>(dir: &Path) -> Result<CondensedSet<E>, DataError> {
    let meta: CondensedMeta = read_json(&dir.join(META_FILE))?;
    let dims = format!("n={} t={} f={}", meta.n, meta.t, meta.f);
    let data = read_le_file::<E>(&dir.join(DATA_FILE), meta.n * meta.t * meta.f, meta.element_width, &dims)?;
    if meta.labels.len() != meta.n {
        return Err(DataError::Shape(format!("{} labels for n={}", meta.labels.len(), meta.n)));
    }
    let labels = check_labels(&meta.labels)?;
    let provenance = meta.provenance;
    Ok(CondensedSet {
        samples: Tensor::new(vec![meta.n, meta.t, meta.f], data)?,
        labels,
        feature_names: meta.feature_names,
        stats: meta.stats,
        provenance,
    })
}
