//! Fit count-backed models from a sampled corpus and see how the sampler
//! output degrades relative to exact models.

use dcd_core::harness::induced::induced_distribution;
use dcd_core::harness::synth::{gen_data, sample_corpus, SyntheticKind, SyntheticSpec};
use dcd_core::kl;
use dcd_core::models::{ARCopulaModel, DiffusionMarginalModel, TableSource};
use dcd_core::noising::{make_schedule, ScheduleFamily};
use dcd_core::sampler::{Mode, SamplerConfig};

fn main() -> dcd_core::Result<()> {
    let data = gen_data(&SyntheticSpec::new(
        SyntheticKind::CorrelatedPhrases,
        3,
        3,
        0.8,
        2,
    ))?;
    let schedule = make_schedule(ScheduleFamily::LogLinear, 2, 1e-3)?;
    for size in [50, 500, 5000, 50_000] {
        let corpus = sample_corpus(&data, size, 9);
        let fitted = TableSource::fit(data.alphabet(), &corpus, 1.0)?;
        let dm = DiffusionMarginalModel::new(fitted.clone(), schedule.clone());
        let ar = ARCopulaModel::new(fitted.clone());
        let mut line = format!(
            "corpus {size:>6}: KL(data||fit) {:.4}",
            kl(&data, fitted.table())?
        );
        for mode in [Mode::Dcd, Mode::DiffusionOnly, Mode::ArOnly] {
            let induced = induced_distribution(
                &dm,
                &ar,
                &SamplerConfig::new(mode, schedule.clone(), 1.0, 0),
            )?;
            line += &format!("  {mode} {:.4}", kl(&data, &induced)?);
        }
        println!("{line}");
    }
    Ok(())
}
