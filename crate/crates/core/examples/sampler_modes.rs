//! Draw a few sequences with each sampler mode and print one trace.

use dcd_core::harness::synth::{gen_data, SyntheticKind, SyntheticSpec};
use dcd_core::models::{ARCopulaModel, DiffusionMarginalModel};
use dcd_core::noising::{make_schedule, ScheduleFamily};
use dcd_core::sampler::{sample, sample_many, Mode, SamplerConfig};

fn main() -> dcd_core::Result<()> {
    let data = gen_data(&SyntheticSpec::new(
        SyntheticKind::CorrelatedPhrases,
        4,
        2,
        0.8,
        1,
    ))?;
    let schedule = make_schedule(ScheduleFamily::LogLinear, 2, 1e-3)?;
    let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
    let ar = ARCopulaModel::exact(&data);

    for mode in Mode::ALL {
        let cfg = SamplerConfig::new(mode, schedule.clone(), 1.0, 5);
        let draws = sample_many(&dm, &ar, &cfg, 8)?;
        let rendered: Vec<String> = draws
            .iter()
            .map(|x| x.iter().map(|t| t.to_string()).collect::<String>())
            .collect();
        println!("{mode:>16}: {}", rendered.join(" "));
    }

    let (_, trace) = sample(&dm, &ar, &SamplerConfig::new(Mode::Dcd, schedule, 1.0, 5))?;
    println!("\ndcd trace ({} copula queries):", trace.copula_queries);
    for (state, factors) in trace
        .states
        .iter()
        .zip(trace.factor_matrices.iter().chain(std::iter::repeat(&None)))
    {
        match factors {
            Some(v) => println!(
                "  t={} {}  |V|max={:.3}",
                state.time,
                state.render(),
                v.max_abs()
            ),
            None => println!("  t={} {}", state.time, state.render()),
        }
    }
    Ok(())
}
