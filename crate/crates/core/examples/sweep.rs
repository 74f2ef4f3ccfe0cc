//! Sweep every mode over step counts and betas and print the CSV.

use dcd_core::harness::sweep::{run_sweep, to_csv, SweepOptions};
use dcd_core::harness::synth::{gen_data, SyntheticKind, SyntheticSpec};
use dcd_core::models::TableSource;
use dcd_core::sampler::Mode;

fn main() -> dcd_core::Result<()> {
    let data = gen_data(&SyntheticSpec::new(
        SyntheticKind::MarkovChain,
        4,
        2,
        0.7,
        3,
    ))?;
    let source = TableSource::exact(data.clone());
    let rows = run_sweep(
        &data,
        &source,
        &source,
        &Mode::ALL,
        &[1, 2, 4],
        &[0.5, 1.0, 2.0],
        &SweepOptions::default(),
    )?;
    print!("{}", to_csv(&rows));
    Ok(())
}
