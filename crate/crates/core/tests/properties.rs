use dcd_core::copula::{all_log_odds_ratios, same_copula};
use dcd_core::harness::induced::induced_distribution;
use dcd_core::iproj::{apply_factors, iproject_exact, objective, FactorMatrix};
use dcd_core::models::{ARCopulaModel, DiffusionMarginalModel};
use dcd_core::noising::{make_schedule, ScheduleFamily};
use dcd_core::oracle::{
    linear_entropy, linear_kl, naive_entropy, naive_kl, naive_marginals, random_factors,
    random_marginals, random_table,
};
use dcd_core::sampler::{sample, Mode, SamplerConfig};
use dcd_core::{entropy, kl, total_correlation, univariate_marginals, Alphabet, JointTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table(n: usize, c: usize, conc: f64, seed: u64) -> JointTable {
    random_table(
        Alphabet::new(n, c).unwrap(),
        conc,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4, 2usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_correlation_is_nonnegative((n, c) in shape(), conc in 0.1f64..3.0, seed in any::<u64>()) {
        let p = table(n, c, conc, seed);
        prop_assert!(total_correlation(&p) >= -1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self((n, c) in shape(), seed in any::<u64>()) {
        let p = table(n, c, 1.0, seed);
        let q = table(n, c, 1.0, seed ^ 0x9e37);
        prop_assert!(kl(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn log_and_linear_entropy_agree((n, c) in shape(), seed in any::<u64>()) {
        let p = table(n, c, 0.7, seed);
        let q = table(n, c, 0.7, seed.wrapping_add(1));
        prop_assert!((entropy(&p) - naive_entropy(&p)).abs() < 1e-10);
        prop_assert!((entropy(&p) - linear_entropy(&p)).abs() < 1e-10);
        let reference = naive_kl(&p, &q).unwrap();
        prop_assert!((kl(&p, &q).unwrap() - reference).abs() < 1e-10);
        prop_assert!((linear_kl(&p, &q) - reference).abs() < 1e-10);
    }

    #[test]
    fn product_of_marginals_has_those_marginals((n, c) in shape(), seed in any::<u64>()) {
        let m = random_marginals(n, c, 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
        let p = JointTable::product(&m).unwrap();
        prop_assert!(univariate_marginals(&p).max_abs_diff(&m) < 1e-12);
        prop_assert!(total_correlation(&p).abs() < 1e-10);
    }

    #[test]
    fn marginals_match_reference((n, c) in shape(), seed in any::<u64>()) {
        let p = table(n, c, 1.0, seed);
        let m = univariate_marginals(&p);
        for (row, reference) in m.rows().iter().zip(naive_marginals(&p)) {
            for (a, b) in row.iter().zip(reference) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn univariate_factors_preserve_odds_ratios(n in 2usize..=4, seed in any::<u64>(), scale in 0.1f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_table(Alphabet::new(n, 2).unwrap(), 1.0, &mut rng);
        let (q, _) = apply_factors(&p, &random_factors(n, 2, scale, &mut rng)).unwrap();
        let (lp, lq) = (all_log_odds_ratios(&p).unwrap(), all_log_odds_ratios(&q).unwrap());
        for (a, b) in lp.iter().zip(&lq) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        prop_assert!(same_copula(&p, &q, 1e-8));
    }

    #[test]
    fn objective_is_convex_along_segments((n, c) in (1usize..=3, 2usize..=3), seed in any::<u64>(), s in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_table(Alphabet::new(n, c).unwrap(), 1.0, &mut rng);
        let target = random_marginals(n, c, 1.0, &mut rng);
        let a = random_factors(n, c, 2.0, &mut rng);
        let b = random_factors(n, c, 2.0, &mut rng);
        let mix: Vec<Vec<f64>> = a.rows().iter().zip(b.rows())
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (1.0 - s) * x + s * y).collect())
            .collect();
        let mid = objective(&FactorMatrix::from_rows(mix, 1.0).unwrap(), &p, &target).unwrap();
        let chord = (1.0 - s) * objective(&a, &p, &target).unwrap() + s * objective(&b, &p, &target).unwrap();
        prop_assert!(mid <= chord + 1e-10);
    }

    #[test]
    fn ipf_objective_never_increases((n, c) in (2usize..=3, 2usize..=3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_table(Alphabet::new(n, c).unwrap(), 1.0, &mut rng);
        let target = random_marginals(n, c, 1.0, &mut rng);
        let (v, report) = iproject_exact(&p, &target, 1e-10, 10_000).unwrap();
        prop_assert!(report.converged);
        for w in report.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        let (p_hat, _) = apply_factors(&p, &v).unwrap();
        prop_assert!(univariate_marginals(&p_hat).max_abs_diff(&target) <= 1e-10);
    }

    #[test]
    fn canonicalization_keeps_the_tilted_table((n, c) in (1usize..=3, 2usize..=3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_table(Alphabet::new(n, c).unwrap(), 1.0, &mut rng);
        let target = random_marginals(n, c, 1.0, &mut rng);
        let v = random_factors(n, c, 2.0, &mut rng);
        let mut w = v.clone();
        w.canonicalize();
        prop_assert!(apply_factors(&p, &v).unwrap().0.max_abs_diff(&apply_factors(&p, &w).unwrap().0) < 1e-12);
        let (ov, ow) = (objective(&v, &p, &target).unwrap(), objective(&w, &p, &target).unwrap());
        prop_assert!((ov - ow).abs() < 1e-10);
    }

    #[test]
    fn samples_are_mask_free_and_in_support(seed in any::<u64>(), steps in 1usize..=4, mode_idx in 0usize..4) {
        let data = table(3, 2, 1.0, seed);
        let schedule = make_schedule(ScheduleFamily::LogLinear, steps, 1e-3).unwrap();
        let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
        let ar = ARCopulaModel::exact(&data);
        let cfg = SamplerConfig::new(Mode::ALL[mode_idx], schedule, 1.0, seed);
        let (x, trace) = sample(&dm, &ar, &cfg).unwrap();
        prop_assert!(x.is_mask_free());
        prop_assert!(data.prob(&x.tokens) > 0.0);
        prop_assert_eq!(trace.states.len(), steps + 1);
        // Unmasked tokens are never changed or re-masked on the way down.
        for pair in trace.states.windows(2) {
            for i in 0..3 {
                if !pair[0].is_masked(i) {
                    prop_assert_eq!(pair[0].tokens[i], pair[1].tokens[i]);
                }
            }
        }
    }

    #[test]
    fn induced_distributions_are_normalized(seed in any::<u64>(), steps in 1usize..=3, mode_idx in 0usize..4) {
        let data = table(3, 2, 1.0, seed);
        let schedule = make_schedule(ScheduleFamily::Linear, steps, 0.0).unwrap();
        let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
        let ar = ARCopulaModel::exact(&data);
        let induced = induced_distribution(&dm, &ar, &SamplerConfig::new(Mode::ALL[mode_idx], schedule, 1.0, 0)).unwrap();
        prop_assert!((induced.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if matches!(Mode::ALL[mode_idx], Mode::ArOnly | Mode::DcdArUnmask) {
            prop_assert!(induced.max_abs_diff(&data) < 1e-10);
        }
    }
}
