//! Exact KL from the data to each sampler's output distribution as the
//! number of denoising steps grows.

use dcd_core::harness::induced::induced_distribution;
use dcd_core::harness::synth::{gen_data, SyntheticKind, SyntheticSpec};
use dcd_core::models::{ARCopulaModel, DiffusionMarginalModel};
use dcd_core::noising::{make_schedule, ScheduleFamily};
use dcd_core::sampler::{Mode, SamplerConfig};
use dcd_core::{kl, total_correlation};

fn main() -> dcd_core::Result<()> {
    let data = gen_data(&SyntheticSpec::new(
        SyntheticKind::CorrelatedPhrases,
        3,
        2,
        0.8,
        0,
    ))?;
    println!("TC(data) = {:.4}\n", total_correlation(&data));
    println!(
        "{:>16} {:>10} {:>10} {:>10} {:>10}",
        "mode", "T=1", "T=2", "T=4", "T=8"
    );
    for mode in Mode::ALL {
        let mut row = format!("{mode:>16}");
        for steps in [1, 2, 4, 8] {
            let schedule = make_schedule(ScheduleFamily::LogLinear, steps, 1e-3)?;
            let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
            let induced = induced_distribution(
                &dm,
                &ARCopulaModel::exact(&data),
                &SamplerConfig::new(mode, schedule, 1.0, 0),
            )?;
            row += &format!(" {:>10.2e}", kl(&data, &induced)?);
        }
        println!("{row}");
    }
    Ok(())
}
