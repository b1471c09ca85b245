use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Category, CliError, Settings};
use crate::condense::{condense_with, load_condensed, save_condensed, CondenseConfig, Optimizer};
use crate::data::io::{read_json, write_json};
use crate::data::{gen_synthetic, load_dataset, save_dataset, split, Format, SplitSpec, SyntheticSpec, TimeSeriesDataset};
use crate::eval::{run_cohort, CohortConfig, ConvergenceRule, EvalReport, TrainConfig};
use crate::nets::{ArchSpec, CATALOG_NAMES};
use crate::privacy::{
    histogram, min_distances_c2o, min_distances_o2o, variable_trend, DistanceSummary, Population,
};

pub const RUN_CONFIG_FILE: &str = "run.cfg";
pub const REPORT_FILE: &str = "report.json";
const SPLITS: [&str; 3] = ["train", "validation", "test"];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::new(Category::Config, msg)
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::new(Category::Io, format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io(path))
}

fn say(w: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(w, "{}", text.as_ref()).map_err(|e| CliError::new(Category::Io, format!("stdout: {e}")))
}

fn prepare_out(out: &Path, settings: &Settings) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io(out))?;
    write_text(&out.join(RUN_CONFIG_FILE), &settings.render())
}

pub fn gen(s: &Settings, out: &Path, w: &mut dyn Write) -> Result<(), CliError> {
    let seed: u64 = s.get("seed")?;
    let spec = SyntheticSpec { n: s.get("n")?, t: s.get("t")?, f: s.get("f")?, delta: s.get("delta")?, sigma: s.get("sigma")?, seed };
    let format = match s.str("format") {
        "binary" => Format::Binary,
        "csv" => Format::Csv,
        other => return Err(config_err(format!("format must be `binary` or `csv`, got `{other}`"))),
    };
    let spec_split = SplitSpec::Fractions {
        train: s.get("train_fraction")?,
        validation: s.get("validation_fraction")?,
        test: s.get("test_fraction")?,
        seed,
    };
    let raw: TimeSeriesDataset<f32> = gen_synthetic(&spec)?;
    let parts = split(&raw, &spec_split)?;
    prepare_out(out, s)?;
    for (name, ds) in SPLITS.iter().zip([&parts.train, &parts.validation, &parts.test]) {
        save_dataset(ds, &out.join(name), format)?;
    }
    say(
        w,
        format!(
            "wrote {} train / {} validation / {} test samples ({}×{}) to {}",
            parts.train.n(),
            parts.validation.n(),
            parts.test.n(),
            spec.t,
            spec.f,
            out.display()
        ),
    )
}

fn catalog_names(list: Option<Vec<String>>) -> Vec<String> {
    list.unwrap_or_else(|| CATALOG_NAMES.iter().map(|s| s.to_string()).collect())
}

pub fn condense(s: &Settings, out: &Path, w: &mut dyn Write) -> Result<(), CliError> {
    let data = PathBuf::from(s.str("data"));
    let train: TimeSeriesDataset<f32> = load_dataset(&data.join("train"))?;
    let lr: f64 = s.get("lr")?;
    let config = CondenseConfig {
        size: s.get("size")?,
        t_star: match s.str("t_star") {
            "same" => None,
            _ => Some(s.get("t_star")?),
        },
        iterations: s.get("iterations")?,
        batch_size: s.get("batch_size")?,
        optimizer: match s.str("optimizer") {
            "adam" => Optimizer::Adam { lr },
            "sgd" => Optimizer::Sgd { lr },
            other => return Err(config_err(format!("optimizer must be `adam` or `sgd`, got `{other}`"))),
        },
        networks: catalog_names(s.list("networks")),
        seed: s.get("seed")?,
    };
    let every = (config.iterations / 20).max(1);
    let (set, trace) = condense_with(&train, &config, |p| {
        if p.iteration % every == 0 || p.iteration == p.iterations {
            eprintln!("iteration {}/{}: loss {:.6} ({})", p.iteration, p.iterations, p.loss, p.network);
        }
    })?;
    prepare_out(out, s)?;
    save_condensed(&set, &trace, out)?;
    let size = set.size_report();
    say(
        w,
        format!(
            "condensed {} samples into {} ({}×{}, {:.4} MB at 32-bit) in {:.1} s wall clock; final loss {}",
            train.n(),
            set.len(),
            set.t(),
            set.f(),
            size.mb_32bit,
            set.provenance.wall_clock_seconds,
            trace.last().map_or("n/a".to_string(), |l| format!("{l:.6}")),
        ),
    )
}

/// `report.json` of `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    /// `original` or `condensed`.
    pub train_kind: String,
    pub run_config: BTreeMap<String, String>,
    pub report: EvalReport,
}

pub fn eval(s: &Settings, out: &Path, w: &mut dyn Write) -> Result<(), CliError> {
    let data = PathBuf::from(s.str("data"));
    let val: TimeSeriesDataset<f32> = load_dataset(&data.join("validation"))?;
    let test: TimeSeriesDataset<f32> = load_dataset(&data.join("test"))?;
    let kind = s.str("train");
    let train: TimeSeriesDataset<f32> = match kind {
        "original" => load_dataset(&data.join("train"))?,
        "condensed" => {
            let dir = s.str("condensed");
            if dir.is_empty() {
                return Err(config_err("--train condensed needs --condensed DIR"));
            }
            load_condensed::<f32>(Path::new(dir))?.to_dataset()?
        }
        other => return Err(config_err(format!("train must be `original` or `condensed`, got `{other}`"))),
    };
    let archs = catalog_names(s.list("archs"))
        .iter()
        .map(|n| ArchSpec::catalog(n, train.f()))
        .collect::<Result<Vec<_>, _>>()?;
    let config = CohortConfig {
        train: TrainConfig {
            steps: s.get("steps")?,
            batch_size: s.get("batch_size")?,
            lr: s.get("lr")?,
            seed: s.get("seed")?,
            eval_interval: s.get("eval_interval")?,
        },
        repeats: s.get("repeats")?,
        convergence: ConvergenceRule { window: s.get("window")?, tolerance: s.get("tolerance")? },
        workers: s.get("workers")?,
    };
    let report = run_cohort(&train, &val, &test, &archs, &config)?;

    prepare_out(out, s)?;
    let curves = out.join("curves");
    fs::create_dir_all(&curves).map_err(io(&curves))?;
    for t in &report.trials {
        write_text(&curves.join(format!("{}_r{}.csv", t.arch, t.repeat)), &t.curve.to_csv())?;
    }
    let output = EvalOutput { train_kind: kind.to_string(), run_config: s.map(), report };
    write_json(&out.join(REPORT_FILE), &output)?;

    let r = &output.report;
    say(w, format!("trained on {} ({} samples, {:.4} MB at 32-bit)", r.train_origin, r.train_samples, r.size.mb_32bit))?;
    for a in &r.archs {
        say(w, format!("  {:<8} AUC {:.4} ± {:.4}   convergence step {:.1}", a.arch, a.mean_auc, a.sd_auc, a.mean_convergence_step))?;
    }
    say(w, format!("cohort mean AUC {:.4} (SD across architectures {:.4})", r.cohort_mean_auc, r.sd_across_archs))
}

/// `diagnose.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseSummary {
    /// Space the distances were measured in.
    pub space: String,
    pub original_n: usize,
    pub condensed_n: usize,
    pub original_to_original: DistanceSummary,
    pub condensed_to_original: DistanceSummary,
    /// Condensed samples that coincide exactly with an original.
    pub exact_copies: usize,
    pub run_config: BTreeMap<String, String>,
}

fn distances_csv(d: &[f64], labels: &[u8]) -> String {
    let mut s = String::from("index,label,min_distance\n");
    for (i, (v, l)) in d.iter().zip(labels).enumerate() {
        let _ = writeln!(s, "{i},{l},{v}");
    }
    s
}

pub fn diagnose(s: &Settings, out: &Path, w: &mut dyn Write) -> Result<(), CliError> {
    let data = PathBuf::from(s.str("data"));
    let original: TimeSeriesDataset<f32> = load_dataset(&data.join("train"))?;
    let condensed = load_condensed::<f32>(Path::new(s.str("condensed")))?;
    let Some(stats) = original.stats() else {
        return Err(CliError::new(Category::Format, "the reference train split is not standardized"));
    };
    if condensed.stats.as_ref().map(|c| &c.source) != Some(&stats.source) {
        return Err(CliError::new(Category::Format, "the condensed set was not learned from this train split"));
    }
    let bins: usize = s.get("bins")?;
    let features: Vec<usize> = match s.list("features") {
        None => (0..original.f()).collect(),
        Some(list) => list
            .iter()
            .map(|v| v.parse().map_err(|_| config_err(format!("feature index `{v}` is not an integer"))))
            .collect::<Result<_, _>>()?,
    };
    let c2o = min_distances_c2o(&condensed.samples, original.samples())?;
    let o2o = min_distances_o2o(original.samples())?;
    let h_c2o = histogram(&c2o, bins, Population::CondensedToOriginal)?;
    let h_o2o = histogram(&o2o, bins, Population::OriginalToOriginal)?;
    let mut trends = Vec::new();
    for &j in &features {
        trends.push((j, variable_trend(original.samples(), j)?, variable_trend(&condensed.samples, j)?));
    }

    prepare_out(out, s)?;
    write_text(&out.join("distances_c2o.csv"), &distances_csv(&c2o, &condensed.labels))?;
    write_text(&out.join("distances_o2o.csv"), &distances_csv(&o2o, original.labels()))?;
    write_text(&out.join("hist_c2o.csv"), &h_c2o.to_csv())?;
    write_text(&out.join("hist_o2o.csv"), &h_o2o.to_csv())?;
    let dir = out.join("trends");
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    for (j, orig, cond) in &trends {
        write_text(&dir.join(format!("original_{j}.csv")), &orig.to_csv())?;
        write_text(&dir.join(format!("condensed_{j}.csv")), &cond.to_csv())?;
    }
    let summary = DiagnoseSummary {
        space: "standardized with the train split statistics".into(),
        original_n: original.n(),
        condensed_n: condensed.len(),
        original_to_original: h_o2o.summary,
        condensed_to_original: h_c2o.summary,
        exact_copies: c2o.iter().filter(|&&d| d == 0.0).count(),
        run_config: s.map(),
    };
    write_json(&out.join("diagnose.json"), &summary)?;
    say(
        w,
        format!(
            "mean nearest-original distance: condensed {:.4}, original {:.4}; {} exact copies",
            summary.condensed_to_original.mean, summary.original_to_original.mean, summary.exact_copies
        ),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub label: String,
    pub samples: usize,
    pub mean_auc: f64,
    /// Population SD of the per-architecture mean AUCs.
    pub sd_auc: f64,
    pub mb_32bit: f64,
    pub mb_64bit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchComparison {
    pub arch: String,
    pub original_auc: f64,
    pub condensed_auc: f64,
    pub original_steps: f64,
    pub condensed_steps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    pub archs: Vec<ArchComparison>,
}

impl CompareTable {
    pub fn new(original: &EvalReport, condensed: &EvalReport) -> Self {
        let row = |label: &str, r: &EvalReport| CompareRow {
            label: format!("{label} ({})", r.train_samples),
            samples: r.train_samples,
            mean_auc: r.cohort_mean_auc,
            sd_auc: r.sd_across_archs,
            mb_32bit: r.size.mb_32bit,
            mb_64bit: r.size.mb_64bit,
        };
        let archs = original
            .archs
            .iter()
            .filter_map(|o| {
                let c = condensed.arch(&o.arch)?;
                Some(ArchComparison {
                    arch: o.arch.clone(),
                    original_auc: o.mean_auc,
                    condensed_auc: c.mean_auc,
                    original_steps: o.mean_convergence_step,
                    condensed_steps: c.mean_convergence_step,
                })
            })
            .collect();
        CompareTable { rows: vec![row("Original", original), row("Condensed", condensed)], archs }
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<18} {:>17} {:>12} {:>12}\n", "Training set", "AUC mean ± SD", "MB (32-bit)", "MB (64-bit)");
        for r in &self.rows {
            let auc = format!("{:.4} ± {:.4}", r.mean_auc, r.sd_auc);
            let _ = writeln!(s, "{:<18} {auc:>17} {:>12.2} {:>12.2}", r.label, half_up(r.mb_32bit), half_up(r.mb_64bit));
        }
        let _ = writeln!(s, "\nSD is across architectures. Convergence steps are means over repeats.");
        let _ = writeln!(
            s,
            "{:<10} {:>12} {:>13} {:>14} {:>15} {:>10}",
            "Arch", "AUC orig", "AUC cond", "Steps orig", "Steps cond", "Ratio"
        );
        for a in &self.archs {
            let ratio = if a.original_steps > 0.0 { format!("{:.2}", a.condensed_steps / a.original_steps) } else { "n/a".into() };
            let _ = writeln!(
                s,
                "{:<10} {:>12.4} {:>13.4} {:>14.1} {:>15.1} {ratio:>10}",
                a.arch, a.original_auc, a.condensed_auc, a.original_steps, a.condensed_steps
            );
        }
        s
    }
}

/// Two-decimal rounding with ties away from zero, so 88.125 prints as 88.13.
fn half_up(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn read_report(path: &str) -> Result<EvalOutput, CliError> {
    let p = Path::new(path);
    let file = if p.is_dir() { p.join(REPORT_FILE) } else { p.to_path_buf() };
    if !file.exists() {
        return Err(CliError::new(Category::Io, format!("{}: no such report", file.display())));
    }
    Ok(read_json(&file)?)
}

pub fn compare(s: &Settings, out: Option<&Path>, w: &mut dyn Write) -> Result<(), CliError> {
    let original = read_report(s.str("original"))?;
    let condensed = read_report(s.str("condensed"))?;
    let table = CompareTable::new(&original.report, &condensed.report);
    let text = table.render();
    if let Some(out) = out {
        prepare_out(out, s)?;
        write_text(&out.join("compare.txt"), &text)?;
        write_json(&out.join("compare.json"), &table)?;
    }
    write!(w, "{text}").map_err(|e| CliError::new(Category::Io, format!("stdout: {e}")))
}
