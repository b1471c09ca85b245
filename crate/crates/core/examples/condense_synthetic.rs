//! Condenses a synthetic train split into 20 samples and saves the result.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use tscond::condense::{condense_with, save_condensed, CondenseConfig};
use tscond::data::{gen_synthetic, split, SplitSpec, SyntheticSpec, TimeSeriesDataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw: TimeSeriesDataset<f32> = gen_synthetic(&SyntheticSpec { n: 600, t: 24, f: 8, delta: 2.0, sigma: 1.0, seed: 1 })?;
    let parts = split(&raw, &SplitSpec::Fractions { train: 0.64, validation: 0.16, test: 0.2, seed: 1 })?;
    let config = CondenseConfig { size: 20, iterations: 300, batch_size: 64, seed: 7, ..CondenseConfig::default() };
    let (set, trace) = condense_with(&parts.train, &config, |p| {
        if p.iteration % 50 == 0 {
            println!("iteration {:>4}: loss {:>8.4} ({})", p.iteration, p.loss, p.network);
        }
    })?;
    let size = set.size_report();
    println!(
        "{} condensed samples of {}x{} ({:.4} MB at 32-bit) in {:.1} s",
        set.len(),
        set.t(),
        set.f(),
        size.mb_32bit,
        set.provenance.wall_clock_seconds
    );
    let dir = std::env::temp_dir().join("tscond-condensed");
    save_condensed(&set, &trace, &dir)?;
    println!("saved to {}", dir.display());
    Ok(())
}
