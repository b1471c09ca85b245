//! Trains a small classifier cohort on synthetic originals and reports AUC
//! and convergence steps.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use tscond::data::{gen_synthetic, split, SplitSpec, SyntheticSpec, TimeSeriesDataset};
use tscond::eval::{run_cohort, CohortConfig, TrainConfig};
use tscond::nets::ArchSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw: TimeSeriesDataset<f32> = gen_synthetic(&SyntheticSpec { n: 400, t: 16, f: 4, delta: 2.0, sigma: 1.0, seed: 5 })?;
    let parts = split(&raw, &SplitSpec::Fractions { train: 0.6, validation: 0.2, test: 0.2, seed: 5 })?;
    let archs = ["TCN-β", "ViT-β", "LSTM-β", "RNN-β"].map(|n| ArchSpec::catalog(n, 4)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let config = CohortConfig {
        train: TrainConfig { steps: 80, batch_size: 32, lr: 1e-3, seed: 5, eval_interval: 2 },
        repeats: 2,
        workers: 2,
        ..CohortConfig::default()
    };
    let report = run_cohort(&parts.train, &parts.validation, &parts.test, &archs, &config)?;
    for a in &report.archs {
        println!("{:<7} test AUC {:.4} ± {:.4}  convergence steps {:?}", a.arch, a.mean_auc, a.sd_auc, a.convergence_steps);
    }
    println!(
        "cohort mean {:.4}; SD across architectures {:.4}, within repeats {:.4}, over all runs {:.4}",
        report.cohort_mean_auc, report.sd_across_archs, report.sd_across_repeats, report.sd_all_runs
    );
    print!("learning curve of the first trial:\n{}", report.trials[0].curve.to_csv());
    Ok(())
}
