use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Standardization, TimeSeriesDataset};
use crate::tensor::{Scalar, Tensor};

pub const META_FILE: &str = "meta.json";
pub const DATA_FILE: &str = "data.bin";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const LABELS_CSV: &str = "labels.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// `meta.json` plus little-endian `data.bin`.
    Binary,
    /// `samples.csv` and `labels.csv`, with `meta.json` for the extras.
    Csv,
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub t: usize,
    pub f: usize,
    pub labels: Vec<i64>,
    pub feature_names: Vec<String>,
    pub standardized: bool,
    #[serde(default)]
    pub stats: Option<Standardization>,
    /// Bits per stored element, 32 or 64.
    pub element_width: usize,
    #[serde(default)]
    pub origin: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| format_err(path, e.to_string())
}

fn format_err(path: &Path, msg: impl Into<String>) -> DataError {
    DataError::Format { path: path.display().to_string(), msg: msg.into() }
}

fn meta_of<E: Scalar>(ds: &TimeSeriesDataset<E>) -> DatasetMeta {
    DatasetMeta {
        n: ds.n(),
        t: ds.t(),
        f: ds.f(),
        labels: ds.labels().iter().map(|&l| l as i64).collect(),
        feature_names: ds.feature_names().to_vec(),
        standardized: ds.is_standardized(),
        stats: ds.stats().cloned(),
        element_width: E::BYTES * 8,
        origin: ds.origin().to_string(),
        warnings: ds.warnings().to_vec(),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| DataError::Json { path: path.display().to_string(), source })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| DataError::Json { path: path.display().to_string(), source })
}

pub(crate) fn write_le_file<E: Scalar>(path: &Path, data: &[E]) -> Result<(), DataError> {
    let mut buf = Vec::with_capacity(data.len() * E::BYTES);
    for &v in data {
        v.write_le(&mut buf);
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// Reads `count` little-endian values stored at `width_bits`, converting to `E`.
pub(crate) fn read_le_file<E: Scalar>(path: &Path, count: usize, width_bits: usize, dims: &str) -> Result<Vec<E>, DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let width = match width_bits {
        32 => 4,
        64 => 8,
        w => return Err(format_err(path, format!("unsupported element width {w} bits"))),
    };
    if bytes.len() != count * width {
        return Err(format_err(
            path,
            format!("metadata {dims} at {width_bits}-bit needs {} bytes, file has {}", count * width, bytes.len()),
        ));
    }
    Ok(match width {
        4 => bytes.chunks_exact(4).map(|c| E::from_f64_lossy(f32::read_le(c) as f64)).collect(),
        _ => bytes.chunks_exact(8).map(|c| E::from_f64_lossy(f64::read_le(c))).collect(),
    })
}

pub(crate) fn check_labels(raw: &[i64]) -> Result<Vec<u8>, DataError> {
    raw.iter()
        .enumerate()
        .map(|(i, &v)| if v == 0 || v == 1 { Ok(v as u8) } else { Err(DataError::Label { index: i, value: v }) })
        .collect()
}

/// Writes `ds` into directory `dir` (created if missing).
pub fn save_dataset<E: Scalar>(ds: &TimeSeriesDataset<E>, dir: &Path, format: Format) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join(META_FILE), &meta_of(ds))?;
    match format {
        Format::Binary => write_le_file(&dir.join(DATA_FILE), ds.samples().data()),
        Format::Csv => write_csv(ds, dir),
    }
}

fn write_csv<E: Scalar>(ds: &TimeSeriesDataset<E>, dir: &Path) -> Result<(), DataError> {
    let path = dir.join(SAMPLES_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header = vec!["sample_id".to_string(), "time_index".to_string()];
    header.extend(ds.feature_names().iter().cloned());
    w.write_record(&header).map_err(csv_err(&path))?;
    let f = ds.f();
    for i in 0..ds.n() {
        for (t, row) in ds.sample(i).chunks_exact(f).enumerate() {
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let lpath = dir.join(LABELS_CSV);
    let mut w = csv::Writer::from_path(&lpath).map_err(csv_err(&lpath))?;
    w.write_record(["sample_id", "label"]).map_err(csv_err(&lpath))?;
    for (i, l) in ds.labels().iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()]).map_err(csv_err(&lpath))?;
    }
    w.flush().map_err(io_err(&lpath))
}

/// Loads a dataset directory in either format. `data.bin` takes precedence
/// over `samples.csv` when both exist.
pub fn load_dataset<E: Scalar>(dir: &Path) -> Result<TimeSeriesDataset<E>, DataError> {
    if !dir.is_dir() {
        return Err(DataError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        });
    }
    let meta_path = dir.join(META_FILE);
    if dir.join(DATA_FILE).exists() {
        let meta: DatasetMeta = read_json(&meta_path)?;
        let dims = format!("n={} t={} f={}", meta.n, meta.t, meta.f);
        let data = read_le_file::<E>(&dir.join(DATA_FILE), meta.n * meta.t * meta.f, meta.element_width, &dims)?;
        return from_meta(meta, data, dir);
    }
    if dir.join(SAMPLES_CSV).exists() {
        let meta = if meta_path.exists() { Some(read_json::<DatasetMeta>(&meta_path)?) } else { None };
        return load_csv(dir, meta);
    }
    Err(format_err(dir, format!("neither {DATA_FILE} nor {SAMPLES_CSV} found")))
}

fn from_meta<E: Scalar>(meta: DatasetMeta, data: Vec<E>, dir: &Path) -> Result<TimeSeriesDataset<E>, DataError> {
    if meta.labels.len() != meta.n {
        return Err(format_err(dir, format!("{} labels for n={}", meta.labels.len(), meta.n)));
    }
    if meta.standardized != meta.stats.is_some() {
        return Err(format_err(dir, "`standardized` disagrees with presence of `stats`"));
    }
    let labels = check_labels(&meta.labels)?;
    let samples = Tensor::new(vec![meta.n, meta.t, meta.f], data)?;
    let mut ds = TimeSeriesDataset::new(samples, labels, meta.feature_names, meta.origin)?;
    ds.set_metadata(meta.stats, meta.warnings);
    Ok(ds)
}

fn load_csv<E: Scalar>(dir: &Path, meta: Option<DatasetMeta>) -> Result<TimeSeriesDataset<E>, DataError> {
    let path = dir.join(SAMPLES_CSV);
    let mut r = csv::Reader::from_path(&path).map_err(|e| format_err(&path, e.to_string()))?;
    let header = r.headers().map_err(|e| format_err(&path, e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "time_index" {
        return Err(format_err(&path, "header must be `sample_id,time_index,<features...>`"));
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let f = feature_names.len();

    let mut rows: Vec<(usize, usize, Vec<E>)> = Vec::new();
    for (index, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format_err(&path, format!("record {index}: {e}")))?;
        if rec.len() != f + 2 {
            return Err(format_err(&path, format!("record {index}: {} fields, expected {}", rec.len(), f + 2)));
        }
        let parse_idx = |s: &str| s.trim().parse::<usize>().map_err(|_| format_err(&path, format!("record {index}: bad index `{s}`")));
        let sid = parse_idx(&rec[0])?;
        let tid = parse_idx(&rec[1])?;
        let vals = rec
            .iter()
            .skip(2)
            .map(|s| s.trim().parse::<E>().map_err(|_| format_err(&path, format!("record {index}: bad value `{s}`"))))
            .collect::<Result<Vec<E>, _>>()?;
        rows.push((sid, tid, vals));
    }
    if rows.is_empty() {
        return Err(format_err(&path, "no records"));
    }
    let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let t = rows.iter().map(|r| r.1).max().unwrap() + 1;
    if rows.len() != n * t {
        return Err(format_err(&path, format!("{} records cannot fill {n} samples x {t} steps", rows.len())));
    }
    let mut data = vec![E::zero(); n * t * f];
    let mut seen = vec![false; n * t];
    for (index, (sid, tid, vals)) in rows.into_iter().enumerate() {
        let cell = sid * t + tid;
        if std::mem::replace(&mut seen[cell], true) {
            return Err(format_err(&path, format!("record {index}: duplicate (sample {sid}, time {tid})")));
        }
        data[cell * f..(cell + 1) * f].copy_from_slice(&vals);
    }

    let lpath = dir.join(LABELS_CSV);
    let mut r = csv::Reader::from_path(&lpath).map_err(|e| format_err(&lpath, e.to_string()))?;
    let mut raw = vec![None; n];
    for (index, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format_err(&lpath, format!("record {index}: {e}")))?;
        let sid: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| format_err(&lpath, format!("record {index}: bad sample_id")))?;
        let label: i64 = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| format_err(&lpath, format!("record {index}: bad label")))?;
        if sid >= n {
            return Err(format_err(&lpath, format!("record {index}: sample_id {sid} out of range (n={n})")));
        }
        if label != 0 && label != 1 {
            return Err(DataError::Label { index, value: label });
        }
        raw[sid] = Some(label);
    }
    let labels = raw
        .iter()
        .enumerate()
        .map(|(i, l)| l.map(|v| v as u8).ok_or_else(|| format_err(&lpath, format!("no label for sample {i}"))))
        .collect::<Result<Vec<u8>, _>>()?;

    let samples = Tensor::new(vec![n, t, f], data)?;
    match meta {
        Some(meta) => {
            if (meta.n, meta.t, meta.f) != (n, t, f) {
                return Err(format_err(dir, format!("meta.json says {}x{}x{}, CSV holds {n}x{t}x{f}", meta.n, meta.t, meta.f)));
            }
            let mut ds = TimeSeriesDataset::new(samples, labels, feature_names, meta.origin)?;
            ds.set_metadata(meta.stats, meta.warnings);
            Ok(ds)
        }
        None => TimeSeriesDataset::new(samples, labels, feature_names, format!("csv:{}", dir.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TimeSeriesDataset<f32> {
        let vals: Vec<f32> = (0..24).map(|i| (i as f32 * 0.731).sin() * 1e3 + 1.0 / (i as f32 + 3.0)).collect();
        let x = Tensor::new(vec![4, 3, 2], vals).unwrap();
        TimeSeriesDataset::new(x, vec![0, 1, 1, 0], vec!["hr".into(), "map".into()], "unit").unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, _) = small().standardize(None).unwrap();
        save_dataset(&ds, dir.path(), Format::Binary).unwrap();
        let back: TimeSeriesDataset<f32> = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small();
        save_dataset(&ds, dir.path(), Format::Csv).unwrap();
        let back: TimeSeriesDataset<f32> = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        fs::remove_file(dir.path().join(META_FILE)).unwrap();
        let bare: TimeSeriesDataset<f32> = load_dataset(dir.path()).unwrap();
        assert_eq!(bare.samples(), ds.samples());
        assert_eq!(bare.labels(), ds.labels());
    }

    #[test]
    fn csv_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(SAMPLES_CSV), "sample_id,time_index,feature_0,feature_1\n0,1,3.5,4\n0,0,1,-2.25\n").unwrap();
        fs::write(dir.path().join(LABELS_CSV), "sample_id,label\n0,1\n").unwrap();
        let from_csv: TimeSeriesDataset<f64> = load_dataset(dir.path()).unwrap();
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, -2.25, 3.5, 4.0]).unwrap();
        let ds = TimeSeriesDataset::new(x, vec![1], TimeSeriesDataset::<f64>::default_feature_names(2), "b").unwrap();
        let bin = tempfile::tempdir().unwrap();
        save_dataset(&ds, bin.path(), Format::Binary).unwrap();
        let from_bin: TimeSeriesDataset<f64> = load_dataset(bin.path()).unwrap();
        assert_eq!(from_csv.samples(), from_bin.samples());
        assert_eq!(from_csv.labels(), from_bin.labels());
    }

    #[test]
    fn byte_length_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&small(), dir.path(), Format::Binary).unwrap();
        fs::write(dir.path().join(DATA_FILE), vec![0u8; 10]).unwrap();
        let msg = load_dataset::<f32>(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("n=4 t=3 f=2") && msg.contains("96") && msg.contains("10"), "{msg}");
    }

    #[test]
    fn bad_label_reports_record() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&small(), dir.path(), Format::Binary).unwrap();
        let mut meta: DatasetMeta = read_json(&dir.path().join(META_FILE)).unwrap();
        meta.labels[2] = 7;
        write_json(&dir.path().join(META_FILE), &meta).unwrap();
        let err = load_dataset::<f32>(dir.path()).unwrap_err();
        assert!(matches!(err, DataError::Label { index: 2, value: 7 }), "{err}");
    }

    #[test]
    fn wider_file_loads_at_narrower_width() {
        let dir = tempfile::tempdir().unwrap();
        let ds = small().cast::<f64>();
        save_dataset(&ds, dir.path(), Format::Binary).unwrap();
        let back: TimeSeriesDataset<f32> = load_dataset(dir.path()).unwrap();
        assert_eq!(back.samples(), small().samples());
    }
}
