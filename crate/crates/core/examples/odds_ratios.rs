//! A two-position table with odds ratio 125 keeps that ratio under any
//! per-position reweighting, even after projecting onto new marginals.

use dcd_core::copula::conditional_odds_ratio;
use dcd_core::iproj::{apply_factors, iproject_exact};
use dcd_core::{total_correlation, univariate_marginals, Alphabet, JointTable, MarginalSet};

fn main() -> dcd_core::Result<()> {
    let p = JointTable::from_weights(Alphabet::new(2, 2)?, vec![125.0, 1.0, 1.0, 1.0])?;
    println!("p        = {:?}", p.probs());
    println!(
        "odds     = {:.6}",
        conditional_odds_ratio(&p, &[0, 1], &[])?
    );
    println!("TC       = {:.6}", total_correlation(&p));

    let target = MarginalSet::new(vec![vec![0.3, 0.7], vec![0.5, 0.5]], false)?;
    let (v, report) = iproject_exact(&p, &target, 1e-12, 10_000)?;
    let (q, _) = apply_factors(&p, &v)?;
    println!("\nprojected onto {:?}", target.rows());
    println!("q        = {:?}", q.probs());
    println!("marginals= {:?}", univariate_marginals(&q).rows());
    println!(
        "odds     = {:.6} after {} sweeps",
        conditional_odds_ratio(&q, &[0, 1], &[])?,
        report.iterations
    );
    Ok(())
}
