//! Exact, enumerable discrete copula diffusion.
//!
//! An absorbing-mask diffusion model gives accurate per-position marginals
//! of each reverse step but samples positions independently. An
//! autoregressive model captures dependencies but cannot look at unmasked
//! tokens to its right. This crate fuses the two: the diffusion marginals
//! rescale the autoregressive distribution through per-position log factors
//! (an information projection onto the diffusion marginals), which fixes
//! the marginals while keeping the autoregressive model's odds ratios.
//!
//! Everything operates on small dense tables, so each quantity can be
//! checked against brute-force enumeration.
//!
//! | module | contents |
//! |--------|----------|
//! | [`table`] | joint tables, marginals, entropy, KL, total correlation, conditioning |
//! | [`copula`] | conditional odds ratios and copula equality |
//! | [`noising`] | schedules, forward masking, reverse kernels |
//! | [`models`] | diffusion-marginal and autoregressive copula models |
//! | [`iproj`] | factor matrices, exact I-projection, fused factor rules |
//! | [`sampler`] | the fused sampler, its baselines, exact step distributions |
//! | [`harness`] | synthetic data, ELBO bound, induced distributions, sweeps, verification |

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod copula;
pub mod error;
pub mod harness;
pub mod iproj;
pub mod models;
pub mod noising;
pub mod numeric;
pub mod oracle;
pub mod sampler;
pub mod table;

pub use error::{Error, Result};
pub use table::{
    condition, entropy, kl, total_correlation, univariate_marginals, Alphabet, IndexPartition,
    JointTable, MarginalSet,
};
