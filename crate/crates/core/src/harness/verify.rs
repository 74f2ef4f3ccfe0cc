//! Self-verification suites, run at fixed seeds.
//!
//! | id      | checks                                                        |
//! |---------|---------------------------------------------------------------|
//! | prop1   | optimal factorized denoiser attains the bound; perturbed ones exceed it |
//! | prop2   | projection strictly improves KL; Pythagorean identity        |
//! | thm1    | block updates converge and agree with a gradient solve; KKT   |
//! | prop4   | odds ratios survive per-position rescaling                    |
//! | thmc2   | equal odds ratios project to the same table                   |
//! | prop5   | reverse posterior factorizes through the auxiliary sequence   |
//! | prop6   | renormalized reverse marginals equal auxiliary marginals      |
//! | sampler | baseline and AR modes induce their closed-form distributions  |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::copula::same_copula;
use crate::error::{Error, Result};
use crate::harness::elbo::{elbo_bound, factorized_nelbo, OptimalDenoiser, PerturbedDenoiser};
use crate::harness::induced::induced_distribution;
use crate::iproj::{apply_factors, iproject_exact, objective_gradient};
use crate::models::{ARCopulaModel, DiffusionMarginalModel};
use crate::noising::{
    aux_posterior, brute_reverse_posterior, forward_marginal, make_schedule, masked_marginals,
    renormalize_marginals, reverse_posterior_via_aux, NoiseSchedule, ScheduleFamily, SequenceState,
};
use crate::oracle::{gradient_projection, random_factors, random_marginals, random_table};
use crate::sampler::{Mode, SamplerConfig};
use crate::table::{entropy, kl, univariate_marginals, Alphabet, JointTable, MarginalSet};

pub const SUITES: [&str; 8] = [
    "prop1", "prop2", "thm1", "prop4", "thmc2", "prop5", "prop6", "sampler",
];

const MAX_REPORTED_FAILURES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub id: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub failure_count: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }

    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        format!(
            "{status} {} ({} checks, {} failed)",
            self.id, self.checks, self.failure_count
        )
    }
}

struct Checker {
    report: SuiteReport,
}

impl Checker {
    fn new(id: &str) -> Self {
        Self {
            report: SuiteReport {
                id: id.into(),
                checks: 0,
                failures: Vec::new(),
                failure_count: 0,
            },
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.report.checks += 1;
        if !ok {
            self.report.failure_count += 1;
            if self.report.failures.len() < MAX_REPORTED_FAILURES {
                self.report.failures.push(detail());
            }
        }
    }

    fn finish(self) -> SuiteReport {
        self.report
    }
}

/// Runs one suite by id, or every suite for `"all"`.
pub fn verify(id: &str) -> Result<Vec<SuiteReport>> {
    if id == "all" {
        return SUITES.iter().map(|s| run_suite(s)).collect();
    }
    Ok(vec![run_suite(id)?])
}

pub fn run_suite(id: &str) -> Result<SuiteReport> {
    match id {
        "prop1" => prop1(),
        "prop2" => prop2(),
        "thm1" => thm1(),
        "prop4" => prop4(),
        "thmc2" => thmc2(),
        "prop5" => prop5(),
        "prop6" => prop6(),
        "sampler" => sampler(),
        other => Err(Error::Config(format!(
            "unknown verification suite {other:?}; expected one of {SUITES:?} or all"
        ))),
    }
}

fn correlated_pair() -> JointTable {
    JointTable::from_weights(
        Alphabet::new(2, 2).expect("valid"),
        vec![0.4, 0.1, 0.1, 0.4],
    )
    .expect("valid")
}

fn prop1() -> Result<SuiteReport> {
    let mut ck = Checker::new("prop1");
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let data = correlated_pair();
    for steps in 1..=3 {
        let schedule = make_schedule(ScheduleFamily::Linear, steps, 0.0)?;
        let bound = elbo_bound(&data, &schedule)?;
        let optimal = OptimalDenoiser {
            data: &data,
            schedule: &schedule,
        };
        let nelbo = factorized_nelbo(&data, &schedule, &optimal)?;
        ck.check((nelbo - bound).abs() <= 1e-9, || {
            format!("T={steps}: optimal {nelbo} vs bound {bound}")
        });
        for _ in 0..20 {
            let noise = random_marginals(2, 3, 1.0, &mut rng).rows().to_vec();
            let weight = rng.random_range(0.01..0.5);
            let perturbed = PerturbedDenoiser {
                optimal: OptimalDenoiser {
                    data: &data,
                    schedule: &schedule,
                },
                noise,
                weight,
            };
            let value = factorized_nelbo(&data, &schedule, &perturbed)?;
            ck.check(value > bound, || {
                format!("T={steps}: perturbed {value} not above {bound}")
            });
        }
    }
    let product = JointTable::product(&MarginalSet::new(
        vec![vec![0.3, 0.7], vec![0.9, 0.1], vec![0.5, 0.5]],
        false,
    )?)?;
    for family in [ScheduleFamily::Linear, ScheduleFamily::LogLinear] {
        let schedule = make_schedule(family, 3, 1e-3)?;
        let gap = (elbo_bound(&product, &schedule)? - entropy(&product)).abs();
        ck.check(gap <= 1e-12, || {
            format!("{family:?}: product bound off entropy by {gap}")
        });
    }
    Ok(ck.finish())
}

fn prop2() -> Result<SuiteReport> {
    let mut ck = Checker::new("prop2");
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let a = Alphabet::new(3, 3)?;
    for k in 0..100 {
        let p_tar = random_table(a, 1.0, &mut rng);
        let p_est = random_table(a, 1.0, &mut rng);
        let target = univariate_marginals(&p_tar);
        let (v, report) = iproject_exact(&p_est, &target, 1e-12, 10_000)?;
        let (p_hat, _) = apply_factors(&p_est, &v)?;
        if univariate_marginals(&p_est).max_abs_diff(&target) > 1e-6 {
            let (before, after) = (kl(&p_tar, &p_est)?, kl(&p_tar, &p_hat)?);
            ck.check(after < before, || {
                format!("pair {k}: {after} not below {before}")
            });
        }
        ck.check(report.converged, || {
            format!("pair {k}: projection did not converge")
        });
        // A random member of the constraint set: project some other table.
        let member = project_member(random_table(a, 1.0, &mut rng), &target)?;
        let lhs = kl(&member, &p_est)?;
        let rhs = kl(&member, &p_hat)? + kl(&p_hat, &p_est)?;
        ck.check((lhs - rhs).abs() <= 1e-8, || {
            format!("pair {k}: Pythagorean gap {}", lhs - rhs)
        });
    }
    Ok(ck.finish())
}

fn project_member(start: JointTable, target: &MarginalSet) -> Result<JointTable> {
    let (v, _) = iproject_exact(&start, target, 1e-13, 10_000)?;
    Ok(apply_factors(&start, &v)?.0)
}

fn thm1() -> Result<SuiteReport> {
    let mut ck = Checker::new("thm1");
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let a = Alphabet::new(3, 3)?;
    for k in 0..100 {
        let p_est = random_table(a, 1.0, &mut rng);
        let target = random_marginals(3, 3, 2.0, &mut rng);
        let (v, report) = iproject_exact(&p_est, &target, 1e-10, 10_000)?;
        ck.check(report.converged && report.max_marginal_gap <= 1e-10, || {
            format!(
                "instance {k}: gap {} after {} sweeps",
                report.max_marginal_gap, report.iterations
            )
        });
        let (p_hat, _) = apply_factors(&p_est, &v)?;
        let solve = gradient_projection(&p_est, &target, 1e-12, 500_000)?;
        let tv = p_hat.total_variation(&solve.table);
        ck.check(tv <= 1e-6, || {
            format!("instance {k}: TV to gradient solve {tv}")
        });
        let grad = objective_gradient(&v, &p_est, &target)?;
        let worst = grad.iter().flatten().fold(0.0f64, |m, g| m.max(g.abs()));
        ck.check(worst < 1e-8, || {
            format!("instance {k}: KKT residual {worst}")
        });
    }
    Ok(ck.finish())
}

fn prop4() -> Result<SuiteReport> {
    let mut ck = Checker::new("prop4");
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for k in 0..1000 {
        let n = 2 + k % 3;
        let p = random_table(Alphabet::new(n, 2)?, 1.0, &mut rng);
        let v = random_factors(n, 2, 2.0, &mut rng);
        let (q, _) = apply_factors(&p, &v)?;
        ck.check(same_copula(&p, &q, 1e-8), || {
            format!("pair {k} (N={n}): odds ratios changed")
        });
    }
    Ok(ck.finish())
}

fn thmc2() -> Result<SuiteReport> {
    let mut ck = Checker::new("thmc2");
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for k in 0..50 {
        let n = 2 + k % 3;
        let a = Alphabet::new(n, 2)?;
        let p = random_table(a, 1.0, &mut rng);
        let (q, _) = apply_factors(&p, &random_factors(n, 2, 2.0, &mut rng))?;
        let target = random_marginals(n, 2, 2.0, &mut rng);
        let (vp, _) = iproject_exact(&p, &target, 1e-12, 10_000)?;
        let (vq, _) = iproject_exact(&q, &target, 1e-12, 10_000)?;
        let tv = apply_factors(&p, &vp)?
            .0
            .total_variation(&apply_factors(&q, &vq)?.0);
        ck.check(tv <= 1e-8, || {
            format!("instance {k}: projections differ by TV {tv}")
        });
    }
    Ok(ck.finish())
}

/// Every `(t, x_{t+1})` with positive forward probability.
pub fn reachable_contexts(
    data: &JointTable,
    schedule: &NoiseSchedule,
) -> Result<Vec<(usize, SequenceState)>> {
    let a = data.alphabet();
    let mut out = Vec::new();
    for t in 0..schedule.steps() {
        let q = forward_marginal(data, schedule, t + 1)?;
        let masked = q.alphabet();
        for (k, &p) in q.probs().iter().enumerate() {
            if p > 0.0 {
                out.push((
                    t,
                    SequenceState {
                        tokens: masked.decode(k),
                        time: t + 1,
                        mask: a.mask_index(),
                    },
                ));
            }
        }
    }
    Ok(out)
}

fn kernel_instance() -> Result<(JointTable, NoiseSchedule)> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    Ok((
        random_table(Alphabet::new(3, 2)?, 1.0, &mut rng),
        make_schedule(ScheduleFamily::Linear, 3, 0.0)?,
    ))
}

fn prop5() -> Result<SuiteReport> {
    let mut ck = Checker::new("prop5");
    let (data, schedule) = kernel_instance()?;
    for (t, x_next) in reachable_contexts(&data, &schedule)? {
        let brute = brute_reverse_posterior(&data, &x_next, &schedule, t)?;
        let via_aux = reverse_posterior_via_aux(&data, &x_next, &schedule, t)?;
        let gap = brute.max_abs_diff(&via_aux);
        ck.check(gap <= 1e-10, || {
            format!("t={t}, x={}: gap {gap}", x_next.render())
        });
    }
    Ok(ck.finish())
}

fn prop6() -> Result<SuiteReport> {
    let mut ck = Checker::new("prop6");
    let (data, schedule) = kernel_instance()?;
    let dm = DiffusionMarginalModel::exact(&data, schedule.clone());
    for (t, x_next) in reachable_contexts(&data, &schedule)? {
        let brute = masked_marginals(&brute_reverse_posterior(&data, &x_next, &schedule, t)?);
        let renormalized = renormalize_marginals(&brute, &x_next.partition())?;
        let aux = univariate_marginals(&aux_posterior(&data, &x_next)?);
        let gap = renormalized.max_abs_diff(&aux);
        ck.check(gap <= 1e-10, || {
            format!("t={t}, x={}: gap {gap}", x_next.render())
        });
        let model_gap = dm.marginals_full(&x_next, t)?.max_abs_diff(&aux);
        ck.check(model_gap <= 1e-10, || {
            format!("t={t}, x={}: model gap {model_gap}", x_next.render())
        });
    }
    Ok(ck.finish())
}

fn sampler() -> Result<SuiteReport> {
    let mut ck = Checker::new("sampler");
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let product = JointTable::product(&random_marginals(3, 2, 1.0, &mut rng))?;
    let data = random_table(Alphabet::new(3, 2)?, 1.0, &mut rng);
    for steps in 1..=3 {
        let schedule = make_schedule(ScheduleFamily::LogLinear, steps, 1e-3)?;
        for (name, table) in [("product", &product), ("random", &data)] {
            let dm = DiffusionMarginalModel::exact(table, schedule.clone());
            let ar = ARCopulaModel::exact(table);
            for mode in Mode::ALL {
                let cfg = SamplerConfig::new(mode, schedule.clone(), 1.0, 0);
                let induced = induced_distribution(&dm, &ar, &cfg)?;
                let exact = name == "product" || mode == Mode::ArOnly || mode == Mode::DcdArUnmask;
                if exact {
                    let gap = induced.max_abs_diff(table);
                    ck.check(gap <= 1e-8, || {
                        format!("{name}, {mode}, T={steps}: gap {gap}")
                    });
                } else {
                    let total: f64 = induced.probs().iter().sum();
                    ck.check((total - 1.0).abs() <= 1e-12, || {
                        format!("{name}, {mode}, T={steps}: mass {total}")
                    });
                }
            }
        }
    }
    Ok(ck.finish())
}
