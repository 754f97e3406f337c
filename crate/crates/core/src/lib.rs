//! Bayesian network meta-analysis with coherent treatment-ranking graphs.
//!
//! This crate fits contrast-based binomial-logit models to a network of
//! randomized trials and turns the posterior into directed comparison graphs
//! whose edges state, with quantified probability, that one treatment is
//! equivalent to or better than another.
//!
//! Three nested-effect models are provided:
//!
//! * **Gaussian effects** — each basic treatment effect has an independent
//!   normal prior (the conventional formulation; every pair of treatments is
//!   declared different with probability one);
//! * **DP Gaussian effects** — the effects are drawn from a Dirichlet-process
//!   mixture with a normal base measure, so treatments can share a cluster
//!   and hence be exactly equivalent a posteriori;
//! * **DP spike–slab effects** — the base measure is a two-component
//!   spike–slab (a narrow normal spike at zero and an inverse-moment slab),
//!   so clusters can additionally be pinned to "no effect vs. reference".
//!
//! Pipeline: [`data`] parses and validates trial networks; [`kernels`] holds
//! the density/linear-algebra primitives; [`samplers`] runs seeded
//! Metropolis-within-Gibbs chains; [`graph`] summarizes draws into coherent
//! comparison graphs with probability-ordered trimming; [`league`] builds
//! conditional credible intervals and league tables; [`sim`] generates
//! synthetic networks and scores recovery.
//!
//! The numeric kernels are generic over [`real::Real`] (any float with the
//! required `num-traits` capabilities — `f32` and `f64` out of the box).
//! Inference and serialization run on [`Scalar`] = `f64`.

pub mod data;
pub mod graph;
pub mod kernels;
pub mod league;
pub mod real;
pub mod samplers;
pub mod sim;

pub use real::Real;

/// The concrete scalar used by inference, summaries, and serialization.
pub type Scalar = f64;

/// Equicorrelated multivariate normal at the crate's working precision.
pub type EquicorrSpec = kernels::equicorr::EquicorrSpec<Scalar>;
/// Inverse-moment slab parameters at the crate's working precision.
pub type NlpSpec = kernels::nlp::NlpSpec<Scalar>;
/// Stick-breaking weights at the crate's working precision.
pub type StickWeights = kernels::stick::StickWeights<Scalar>;
