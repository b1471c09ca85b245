use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{convergence_step, dataset_auc, train_classifier, ConvergenceRule, EvalError, LearningCurve, TrainConfig};
use crate::data::{SizeReport, TimeSeriesDataset};
use crate::nets::ArchSpec;
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    pub train: TrainConfig,
    pub repeats: usize,
    pub convergence: ConvergenceRule,
    /// Trials run concurrently on this many threads; results do not depend on it.
    pub workers: usize,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { train: TrainConfig::default(), repeats: 5, convergence: ConvergenceRule::default(), workers: 1 }
    }
}

/// One (architecture, repeat) trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub arch: String,
    pub repeat: usize,
    pub seed: u64,
    pub test_auc: f64,
    pub best_val_auc: f64,
    pub convergence_step: usize,
    #[serde(skip)]
    pub curve: LearningCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSummary {
    pub arch: String,
    pub test_aucs: Vec<f64>,
    pub mean_auc: f64,
    /// Population SD over repeats.
    pub sd_auc: f64,
    pub convergence_steps: Vec<usize>,
    pub mean_convergence_step: f64,
}

/// Aggregate of a cohort run.
///
/// Three spreads are reported since "SD of the cohort" is ambiguous: across
/// the per-architecture means, the mean within-architecture SD over repeats,
/// and over all individual runs. All are population SDs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_origin: String,
    pub train_fingerprint: String,
    pub train_samples: usize,
    pub size: SizeReport,
    pub repeats: usize,
    pub config: TrainConfig,
    pub convergence: ConvergenceRule,
    pub archs: Vec<ArchSummary>,
    pub cohort_mean_auc: f64,
    pub sd_across_archs: f64,
    pub sd_across_repeats: f64,
    pub sd_all_runs: f64,
    pub trials: Vec<TrialResult>,
}

impl EvalReport {
    pub fn arch(&self, name: &str) -> Option<&ArchSummary> {
        self.archs.iter().find(|a| a.arch == name)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation; 0 for fewer than two values.
pub fn population_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_trial<E: Scalar>(
    spec: &ArchSpec,
    arch_index: usize,
    repeat: usize,
    train: &TimeSeriesDataset<E>,
    val: &TimeSeriesDataset<E>,
    test: &TimeSeriesDataset<E>,
    config: &CohortConfig,
) -> Result<TrialResult, EvalError> {
    let seed = mix_seed(config.train.seed, arch_index as u64, repeat as u64);
    let cfg = TrainConfig { seed, ..config.train.clone() };
    let wrap = |e: EvalError| EvalError::Trial { arch: spec.name.clone(), repeat, source: Box::new(e) };
    let (model, curve) = train_classifier(spec, train, val, &cfg).map_err(wrap)?;
    let test_auc = dataset_auc(&model, test).map_err(wrap)?;
    let best_val_auc = curve.points.iter().map(|p| p.val_auc).fold(f64::NAN, f64::max);
    let convergence_step = convergence_step(&curve, config.convergence).unwrap_or(0);
    Ok(TrialResult { arch: spec.name.clone(), repeat, seed, test_auc, best_val_auc, convergence_step, curve })
}

/// Trains every architecture `repeats` times on `train`, selects on `val`
/// and scores on `test`.
///
/// Each trial's seed is derived from the master seed and its (architecture,
/// repeat) position, so the report is identical for any worker count.
pub fn run_cohort<E: Scalar>(
    train: &TimeSeriesDataset<E>,
    val: &TimeSeriesDataset<E>,
    test: &TimeSeriesDataset<E>,
    archs: &[ArchSpec],
    config: &CohortConfig,
) -> Result<EvalReport, EvalError> {
    if config.repeats == 0 || archs.is_empty() {
        return Err(EvalError::Config("a cohort needs at least one architecture and one repeat".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..archs.len()).flat_map(|a| (0..config.repeats).map(move |r| (a, r))).collect();
    let slots: Vec<Mutex<Option<Result<TrialResult, EvalError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let j = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(a, r)) = jobs.get(j) else { break };
        let out = run_trial(&archs[a], a, r, train, val, test, config);
        *slots[j].lock().expect("poisoned") = Some(out);
    };
    let workers = config.workers.clamp(1, jobs.len());
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    let trials = slots
        .into_iter()
        .map(|m| m.into_inner().expect("poisoned").expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;

    let archs_out: Vec<ArchSummary> = archs
        .iter()
        .map(|spec| {
            let mine: Vec<&TrialResult> = trials.iter().filter(|t| t.arch == spec.name).collect();
            let aucs: Vec<f64> = mine.iter().map(|t| t.test_auc).collect();
            let steps: Vec<usize> = mine.iter().map(|t| t.convergence_step).collect();
            ArchSummary {
                arch: spec.name.clone(),
                mean_auc: mean(&aucs),
                sd_auc: population_sd(&aucs),
                mean_convergence_step: mean(&steps.iter().map(|&s| s as f64).collect::<Vec<_>>()),
                test_aucs: aucs,
                convergence_steps: steps,
            }
        })
        .collect();
    let arch_means: Vec<f64> = archs_out.iter().map(|a| a.mean_auc).collect();
    let all: Vec<f64> = trials.iter().map(|t| t.test_auc).collect();
    Ok(EvalReport {
        train_origin: train.origin().to_string(),
        train_fingerprint: train.fingerprint(),
        train_samples: train.n(),
        size: SizeReport::new(train.n(), train.t(), train.f()),
        repeats: config.repeats,
        config: config.train.clone(),
        convergence: config.convergence,
        cohort_mean_auc: mean(&arch_means),
        sd_across_archs: population_sd(&arch_means),
        sd_across_repeats: mean(&archs_out.iter().map(|a| a.sd_auc).collect::<Vec<_>>()),
        sd_all_runs: population_sd(&all),
        archs: archs_out,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, split, SplitSpec, SyntheticSpec};

    #[test]
    fn sd_and_mean_helpers() {
        assert_eq!(population_sd(&[0.7]), 0.0);
        assert_eq!(population_sd(&[1.0, 3.0]), 1.0);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
        assert_ne!(mix_seed(1, 0, 1), mix_seed(1, 1, 0));
    }

    #[test]
    fn cohort_is_worker_independent() {
        let raw = gen_synthetic::<f32>(&SyntheticSpec { n: 120, t: 6, f: 2, delta: 2.0, sigma: 0.5, seed: 8 }).unwrap();
        let s = split(&raw, &SplitSpec::Fractions { train: 0.6, validation: 0.2, test: 0.2, seed: 8 }).unwrap();
        let archs = vec![ArchSpec::catalog("RNN-β", 2).unwrap(), ArchSpec::catalog("TCN-β", 2).unwrap()];
        let cfg = |workers| CohortConfig {
            train: TrainConfig { steps: 12, batch_size: 16, lr: 3e-3, seed: 5, eval_interval: 4 },
            repeats: 2,
            convergence: ConvergenceRule::default(),
            workers,
        };
        let one = run_cohort(&s.train, &s.validation, &s.test, &archs, &cfg(1)).unwrap();
        let three = run_cohort(&s.train, &s.validation, &s.test, &archs, &cfg(3)).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.trials.len(), 4);
        let m = (one.archs[0].mean_auc + one.archs[1].mean_auc) / 2.0;
        assert!((one.cohort_mean_auc - m).abs() < 1e-15);

        let single = run_cohort(&s.train, &s.validation, &s.test, &archs[..1], &CohortConfig { repeats: 1, ..cfg(1) }).unwrap();
        assert_eq!(single.archs[0].test_aucs.len(), 1);
        assert_eq!(single.archs[0].sd_auc, 0.0);
    }
}
