//! Numerical laboratory for log-gauge Hausdorff contents and observability
//! constants.
//!
//! The crate is organised around a handful of interlocking experiments:
//! gauge functions and their inverses ([`gauge`]), generalized Cantor sets
//! with certified content bounds ([`fractal`]), Cartan covers of polynomial
//! lemniscates ([`lemniscate`]), Remez/propagation inequalities ([`remez`]),
//! Dirichlet spectral subspaces ([`spectral1d`]), amalgam-space uncertainty
//! principles ([`bandlimited`]), the heat semigroup and an explicit
//! non-observable set ([`heat1d`]), the Lebeau–Robbiano time schedule
//! ([`lr`]), and discrete potential theory ([`capacity`]).
//!
//! Quantities routinely span magnitudes like `exp(-2^40)`, so nearly all
//! arithmetic runs through [`lognum::LogNum`], a signed log-domain scalar.

pub mod bandlimited;
pub mod capacity;
pub mod cli;
pub mod error;
pub mod fractal;
pub mod gauge;
pub mod heat1d;
pub mod lemniscate;
pub mod lognum;
pub mod lr;
pub mod remez;
pub mod rng;
pub mod spectral1d;
