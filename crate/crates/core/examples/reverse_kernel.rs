//! The exact reverse step of the absorbing-mask process, built two ways:
//! by brute force over all clean sequences and from the auxiliary
//! posterior followed by the re-mask kernel.

use dcd_core::noising::{
    aux_posterior, brute_reverse_posterior, make_schedule, reverse_posterior_via_aux,
    ScheduleFamily, SequenceState,
};
use dcd_core::oracle::random_table;
use dcd_core::{univariate_marginals, Alphabet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dcd_core::Result<()> {
    let data = random_table(Alphabet::new(3, 2)?, 1.0, &mut ChaCha8Rng::seed_from_u64(7));
    let schedule = make_schedule(ScheduleFamily::Linear, 3, 0.0)?;
    let x_next = SequenceState::new(vec![1, 2, 2], 2, 2)?;
    println!("x_2 = {}", x_next.render());

    let aux = aux_posterior(&data, &x_next)?;
    println!(
        "aux posterior marginals: {:?}",
        univariate_marginals(&aux).rows()
    );

    let brute = brute_reverse_posterior(&data, &x_next, &schedule, 1)?;
    let composed = reverse_posterior_via_aux(&data, &x_next, &schedule, 1)?;
    println!(
        "max |brute - composed| = {:.2e}",
        brute.max_abs_diff(&composed)
    );
    for (i, p) in brute.probs().iter().enumerate().filter(|(_, p)| **p > 0.0) {
        let x_t = SequenceState::new(brute.alphabet().decode(i), 1, 2)?;
        println!("  x_1 = {}  p = {p:.6}", x_t.render());
    }
    Ok(())
}
