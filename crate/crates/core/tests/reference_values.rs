//! Values computed independently (closed forms and a standalone IPF script)
//! and frozen here.

use dcd_core::copula::conditional_odds_ratio;
use dcd_core::harness::synth::{gen_data, SyntheticKind, SyntheticSpec};
use dcd_core::iproj::{apply_factors, iproject_exact, rankwise_update};
use dcd_core::noising::{make_schedule, ScheduleFamily};
use dcd_core::sampler::ar_unmask_schedule;
use dcd_core::{kl, total_correlation, Alphabet, JointTable, MarginalSet};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

fn pair_table(cells: [f64; 4]) -> JointTable {
    JointTable::from_weights(Alphabet::new(2, 2).unwrap(), cells.to_vec()).unwrap()
}

#[test]
fn odds_ratio_of_the_demo_table() {
    let p = pair_table([125.0, 1.0, 1.0, 1.0]);
    close(
        conditional_odds_ratio(&p, &[0, 1], &[]).unwrap(),
        125.0,
        1e-9,
    );
}

#[test]
fn information_quantities_of_a_symmetric_pair() {
    let p = pair_table([0.4, 0.1, 0.1, 0.4]);
    close(total_correlation(&p), 0.1927447570217573, 1e-14);
    close(
        kl(&p, &JointTable::uniform(p.alphabet())).unwrap(),
        0.19274475702175753,
        1e-14,
    );
}

#[test]
fn projection_of_a_symmetric_pair() {
    let p = pair_table([0.4, 0.1, 0.1, 0.4]);
    let target = MarginalSet::new(vec![vec![0.7, 0.3], vec![0.6, 0.4]], false).unwrap();
    let (v, _) = iproject_exact(&p, &target, 1e-13, 10_000).unwrap();
    let (p_hat, _) = apply_factors(&p, &v).unwrap();
    let expected = [
        0.5456945145195828,
        0.1543054854804172,
        0.05430548548041721,
        0.2456945145195828,
    ];
    for (a, b) in p_hat.probs().iter().zip(expected) {
        close(*a, b, 1e-12);
    }
    close(
        conditional_odds_ratio(&p_hat, &[0, 1], &[]).unwrap(),
        16.0,
        1e-9,
    );
}

#[test]
fn rankwise_update_closed_form() {
    let v = rankwise_update(&[0.4, 0.6], &[0.5, 0.5]).unwrap();
    close(v[0], 0.8f64.ln(), 1e-15);
    close(v[1], 1.2f64.ln(), 1e-15);
}

#[test]
fn schedules() {
    let lin = make_schedule(ScheduleFamily::Linear, 4, 0.0).unwrap();
    assert_eq!(lin.alphas(), &[0.25, 0.5, 0.75, 1.0]);
    let log = make_schedule(ScheduleFamily::LogLinear, 4, 1e-3).unwrap();
    for (a, b) in log.alphas().iter().zip([0.24975, 0.4995, 0.74925, 1.0]) {
        close(*a, b, 1e-15);
    }
    close(lin.alpha(0), 0.0, 0.0);
    close(lin.step_mask_prob(2), 1.0 / 3.0, 1e-15);
    assert_eq!(ar_unmask_schedule(10, 4), vec![3, 5, 8, 10]);
}

#[test]
fn fully_correlated_pair_has_log2_total_correlation() {
    let p = gen_data(&SyntheticSpec::new(
        SyntheticKind::CorrelatedPhrases,
        2,
        2,
        1.0,
        0,
    ))
    .unwrap();
    close(total_correlation(&p), std::f64::consts::LN_2, 1e-12);
}
