//! Runs `gen → condense → eval (both sets) → diagnose → compare` through the
//! command-line front end, in process.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use tscond::cli::{run, CliError};

fn main() -> Result<(), CliError> {
    let root = std::env::temp_dir().join("tscond-pipeline");
    let p = |sub: &str| root.join(sub).display().to_string();
    let (data, cond, eo, ec, diag) = (p("data"), p("condensed"), p("eval-original"), p("eval-condensed"), p("diagnose"));
    let eval_flags = ["--archs", "TCN-α,ViT-α,LSTM-α", "--repeats", "1", "--steps", "100", "--eval-interval", "1", "--seed", "1"];
    let commands: Vec<Vec<&str>> = vec![
        vec!["gen", "--out", &data, "--n", "600", "--seed", "1"],
        vec!["condense", "--data", &data, "--out", &cond, "--iterations", "400", "--batch-size", "64", "--seed", "1"],
        [&["eval", "--data", &data, "--out", &eo][..], &eval_flags].concat(),
        [&["eval", "--data", &data, "--out", &ec, "--train", "condensed", "--condensed", &cond][..], &eval_flags].concat(),
        vec!["diagnose", "--data", &data, "--condensed", &cond, "--out", &diag],
        vec!["compare", "--original", &eo, "--condensed", &ec],
    ];
    let mut stdout = std::io::stdout();
    for args in commands {
        println!("$ tscond {}", args.join(" "));
        run(std::iter::once("tscond").chain(args), &mut stdout)?;
    }
    Ok(())
}
