//! Generates synthetic data, splits and standardizes it, and round-trips
//! it through both storage formats.

use tscond::data::{gen_synthetic, load_dataset, save_dataset, split, DataError, Format, SizeReport, SplitSpec, SyntheticSpec, TimeSeriesDataset};

fn main() -> Result<(), DataError> {
    let raw: TimeSeriesDataset<f32> = gen_synthetic(&SyntheticSpec { n: 500, t: 24, f: 6, delta: 2.0, sigma: 1.0, seed: 3 })?;
    println!("{}: {} samples of {}x{}, classes {:?}", raw.origin(), raw.n(), raw.t(), raw.f(), raw.class_counts());

    let parts = split(&raw, &SplitSpec::Fractions { train: 0.64, validation: 0.16, test: 0.2, seed: 3 })?;
    let stats = parts.train.stats().expect("splits are standardized");
    println!("train/validation/test = {}/{}/{}, feature means {:.3?}", parts.train.n(), parts.validation.n(), parts.test.n(), stats.mean);

    let dir = std::env::temp_dir().join("tscond-dataset-io");
    for (format, sub) in [(Format::Binary, "bin"), (Format::Csv, "csv")] {
        let path = dir.join(sub);
        save_dataset(&parts.train, &path, format)?;
        let back: TimeSeriesDataset<f32> = load_dataset(&path)?;
        println!("{sub}: reloaded identical = {}", back == parts.train);
    }
    let size = SizeReport::new(5120, 48, 47);
    println!("a 5120x48x47 set takes {:.2} MB at 32-bit and {:.2} MB at 64-bit", size.mb_32bit, size.mb_64bit);
    Ok(())
}
