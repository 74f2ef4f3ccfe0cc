//! The factors that fuse diffusion marginals into the copula at one step,
//! and the effect of beta on the projected step distribution.

use dcd_core::harness::synth::{gen_data, SyntheticKind, SyntheticSpec};
use dcd_core::iproj::dcd_factors;
use dcd_core::models::{ARCopulaModel, DiffusionMarginalModel};
use dcd_core::noising::{make_schedule, ScheduleFamily, SequenceState};
use dcd_core::sampler::{step_distribution, Mode, SamplerConfig};

fn main() -> dcd_core::Result<()> {
    let data = gen_data(&SyntheticSpec::new(
        SyntheticKind::CorrelatedPhrases,
        3,
        2,
        0.8,
        0,
    ))?;
    let schedule = make_schedule(ScheduleFamily::LogLinear, 2, 1e-3)?;
    let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
    let ar = ARCopulaModel::exact(&data);
    let x_next = SequenceState::new(vec![2, 1, 2], 1, 2)?;

    let full = dm.marginals_full(&x_next, 0)?;
    let causal = dm.marginals_causal(&x_next, 0)?;
    let v = dcd_factors(&full, &causal, 1.0)?;
    println!("context {}", x_next.render());
    for i in 0..3 {
        println!(
            "  row {i}: full {:?} causal {:?} V {:?}",
            full.row(i),
            causal.row(i),
            v.row(i)
        );
    }

    for beta in [0.0, 0.5, 1.0, 2.0] {
        let cfg = SamplerConfig::new(Mode::Dcd, schedule.clone(), beta, 0);
        let dist = step_distribution(&dm, &ar, &x_next, 0, &cfg)?;
        let shown: Vec<String> = dist
            .iter()
            .map(|(s, p)| format!("{}:{p:.3}", s.render()))
            .collect();
        println!("beta {beta}: {}", shown.join(" "));
    }
    Ok(())
}
