//! Order-q diversity partitioning over haplotype panels.
//!
//! The library measures how genetic variation splits into within-group and
//! between-group parts under a one-parameter family of entropies indexed by
//! an order `q`. It provides:
//!
//! * biallelic entropy kernels for arbitrary `q > 0` ([`entropy`]),
//! * per-locus and genome-wide differentiation statistics, including
//!   one-vs-rest and leave-one-out decompositions ([`freq`]),
//! * a bit-packed haplotype panel with VCF and native-container codecs and
//!   genetic-map support ([`panel`], [`io`]),
//! * an equal-weight, per-population-capped bootstrap ([`resample`]),
//! * a forward-time diploid simulator with pedigree-aware mate choice for
//!   controlled audits of the statistics ([`sim`]).
//!
//! All randomized code paths draw from counter-based generators seeded
//! explicitly, so every result is reproducible from a single `u64` seed.

pub mod entropy;
pub mod error;
pub mod freq;
pub mod io;
pub mod panel;
pub mod resample;
pub mod rng;
pub mod sim;
mod sum;

pub use error::{Error, Result};
