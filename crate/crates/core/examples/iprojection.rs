//! Project a random 3x3x3 table onto random marginals with iterative
//! proportional fitting and compare with a plain gradient solver.

use dcd_core::iproj::{apply_factors, iproject_exact, objective, FactorMatrix};
use dcd_core::oracle::{gradient_projection, random_table};
use dcd_core::{kl, univariate_marginals, Alphabet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dcd_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let p_est = random_table(Alphabet::new(3, 3)?, 1.0, &mut rng);
    let p_tar = random_table(Alphabet::new(3, 3)?, 1.0, &mut rng);
    let target = univariate_marginals(&p_tar);

    let (v, report) = iproject_exact(&p_est, &target, 1e-12, 10_000)?;
    let (p_hat, _) = apply_factors(&p_est, &v)?;
    println!(
        "IPF: {} sweeps, gap {:.2e}, objective {:.10}",
        report.iterations, report.max_marginal_gap, report.objective
    );
    println!("factors {:?}", v.rows());

    let solve = gradient_projection(&p_est, &target, 1e-12, 500_000)?;
    println!(
        "gradient: {} iterations, TV to IPF {:.2e}",
        solve.iterations,
        p_hat.total_variation(&solve.table)
    );
    println!(
        "objective at zero factors {:.6}",
        objective(&FactorMatrix::zeros(3, 3), &p_est, &target)?
    );

    println!("KL(p_tar || p_est) = {:.6}", kl(&p_tar, &p_est)?);
    println!("KL(p_tar || p_hat) = {:.6}", kl(&p_tar, &p_hat)?);
    Ok(())
}
