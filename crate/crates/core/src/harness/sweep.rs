//! Step-count and beta sweeps over sampler modes.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::elbo::elbo_bound;
use crate::harness::induced::induced_auto;
use crate::models::{ARCopulaModel, DiffusionMarginalModel, TableSource};
use crate::noising::{make_schedule, ScheduleFamily};
use crate::sampler::{Mode, SamplerConfig};
use crate::table::{kl, JointTable};

pub const CSV_HEADER: &str = "mode,T,beta,kl_to_data,nll,elbo_bound,wall_ms";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub family: ScheduleFamily,
    pub epsilon: f64,
    pub chunk_size: usize,
    pub seed: u64,
    /// Record wall-clock time per cell. Off by default so the CSV is
    /// byte-stable.
    pub timing: bool,
    /// Monte Carlo sample count when exact enumeration is too large.
    pub mc_samples: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            family: ScheduleFamily::LogLinear,
            epsilon: crate::noising::DEFAULT_EPSILON,
            chunk_size: 1,
            seed: 0,
            timing: false,
            mc_samples: None,
        }
    }
}

/// One `(mode, T, beta)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub mode: Mode,
    #[serde(rename = "T")]
    pub steps: usize,
    pub beta: f64,
    /// `KL(data || induced)`; infinite when the sampler misses data support.
    pub kl_to_data: f64,
    /// Expected `-log data(x)` per sequence under the induced distribution.
    pub nll: f64,
    pub elbo_bound: f64,
    pub wall_ms: u64,
}

/// Expected negative log-likelihood of `induced` samples under `data`.
pub fn expected_nll(data: &JointTable, induced: &JointTable) -> f64 {
    data.probs()
        .iter()
        .zip(induced.probs())
        .filter(|(_, &q)| q > 0.0)
        .map(|(&p, &q)| if p > 0.0 { -q * p.ln() } else { f64::INFINITY })
        .sum()
}

/// Evaluates every `(mode, T, beta)` combination. Results come back sorted
/// by mode, then `T`, then `beta`.
pub fn run_sweep(
    data: &JointTable,
    dm_source: &TableSource,
    copula_source: &TableSource,
    modes: &[Mode],
    steps_list: &[usize],
    beta_list: &[f64],
    options: &SweepOptions,
) -> Result<Vec<ExperimentResult>> {
    if dm_source.alphabet() != data.alphabet() || copula_source.alphabet() != data.alphabet() {
        return Err(Error::ShapeMismatch(
            "models and data use different alphabets".into(),
        ));
    }
    let copula = ARCopulaModel::new(copula_source.clone());
    let mut rows = Vec::new();
    for &steps in steps_list {
        let schedule = make_schedule(options.family, steps, options.epsilon)?;
        let bound = elbo_bound(data, &schedule)?;
        let dm = DiffusionMarginalModel::new(dm_source.clone(), schedule.clone());
        for &mode in modes {
            for &beta in beta_list {
                let cfg = SamplerConfig::new(mode, schedule.clone(), beta, options.seed)
                    .with_chunk_size(options.chunk_size);
                let start = Instant::now();
                let induced = induced_auto(&dm, &copula, &cfg, options.mc_samples)?;
                let elapsed = start.elapsed();
                let table = induced.table();
                rows.push(ExperimentResult {
                    mode,
                    steps,
                    beta,
                    kl_to_data: kl(data, table).unwrap_or(f64::INFINITY),
                    nll: expected_nll(data, table),
                    elbo_bound: bound,
                    wall_ms: if options.timing {
                        elapsed.as_millis() as u64
                    } else {
                        0
                    },
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.mode, a.steps)
            .cmp(&(b.mode, b.steps))
            .then(a.beta.total_cmp(&b.beta))
    });
    Ok(rows)
}

pub fn to_csv(rows: &[ExperimentResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.mode,
            r.steps,
            r.beta,
            num(r.kl_to_data),
            num(r.nll),
            num(r.elbo_bound),
            r.wall_ms
        );
    }
    out
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-5 || x.abs() >= 1e15) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Two-column `T kl_to_data` files, one per `(mode, beta)`, named
/// `kl_<mode>_beta<beta>.dat`.
pub fn plot_files(rows: &[ExperimentResult]) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = Vec::new();
    for r in rows {
        let name = format!("kl_{}_beta{}.dat", r.mode, r.beta);
        let line = format!("{} {}\n", r.steps, num(r.kl_to_data));
        match files.iter_mut().find(|(n, _)| *n == name) {
            Some((_, body)) => body.push_str(&line),
            None => files.push((name, format!("# T kl_to_data\n{line}"))),
        }
    }
    files
}
