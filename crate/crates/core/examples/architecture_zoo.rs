//! Lists the architecture catalog and runs every network on one batch.

use tscond::nets::{ArchSpec, Model, NetError, CATALOG_NAMES};
use tscond::tensor::Tensor;

fn main() -> Result<(), NetError> {
    let (batch, t, f) = (4, 24, 8);
    let x = Tensor::from_f64(vec![batch, t, f], &(0..batch * t * f).map(|i| (i as f64 * 0.013).sin()).collect::<Vec<_>>())?;
    println!("{:<8} {:<6} {:>9} {:>10} {:>11}  probabilities", "name", "family", "params", "embedding", "max kernel");
    for name in CATALOG_NAMES {
        let spec = ArchSpec::catalog(name, f)?;
        let model = Model::<f64>::build(&spec, 1)?;
        let probs = model.predict_tensor(&x)?;
        println!(
            "{:<8} {:<6} {:>9} {:>10} {:>11}  {:.3?}",
            name,
            spec.family.tag(),
            model.params().num_params(),
            spec.embedding_dim(),
            spec.max_kernel(),
            probs
        );
    }
    // specs round-trip through their text form, which is how custom variants are configured
    let custom = ArchSpec::from_config_block(&ArchSpec::catalog("TCN-β", f)?.to_config_block())?;
    println!("\nTCN-β as a config block:\n{}", custom.to_config_block());
    Ok(())
}
