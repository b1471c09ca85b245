//! Compares nearest-neighbour distances of condensed and original samples
//! and prints one variable's temporal trend for both sets.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use tscond::condense::{condense, CondenseConfig};
use tscond::data::{gen_synthetic, split, SplitSpec, SyntheticSpec, TimeSeriesDataset};
use tscond::privacy::{histogram, min_distances_c2o, min_distances_o2o, variable_trend, Population};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw: TimeSeriesDataset<f32> = gen_synthetic(&SyntheticSpec { n: 400, t: 16, f: 4, delta: 2.0, sigma: 1.0, seed: 9 })?;
    let train = split(&raw, &SplitSpec::Fractions { train: 0.6, validation: 0.2, test: 0.2, seed: 9 })?.train;
    let config = CondenseConfig { size: 10, iterations: 200, batch_size: 32, seed: 9, ..CondenseConfig::default() };
    let (set, _) = condense(&train, &config)?;

    let c2o = min_distances_c2o(&set.samples, train.samples())?;
    let o2o = min_distances_o2o(train.samples())?;
    for (values, population) in [(&o2o, Population::OriginalToOriginal), (&c2o, Population::CondensedToOriginal)] {
        let h = histogram(values, 8, population)?;
        println!("{} (min {:.3}, mean {:.3}, max {:.3})", population.tag(), h.summary.min, h.summary.mean, h.summary.max);
        print!("{}", h.to_csv());
    }
    let orig = variable_trend(train.samples(), 0)?;
    let cond = variable_trend(&set.samples, 0)?;
    println!("feature 0 trend: step, original mean ± sd, condensed mean ± sd");
    for (o, c) in orig.points.iter().zip(&cond.points) {
        println!("{:>3}  {:>7.3} ± {:.3}  {:>7.3} ± {:.3}", o.step, o.mean, o.sd, c.mean, c.sd);
    }
    Ok(())
}
