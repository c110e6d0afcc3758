//! Exact-arithmetic computation of quiver Donaldson-Thomas invariants from
//! attractor DT invariants via the flow tree expansion.
//!
//! The pipeline: a [`quiver::Quiver`] with its skew-symmetrized Euler form,
//! attractor DT input tables ([`dt::DTTable`]), enumeration of rooted binary
//! trees with a discrete attractor flow ([`trees`]), a geometric realization
//! of those trees as tropical curves in `Q^d` ([`tropical`]), and an
//! independent finite-field point-count oracle via the Harder-Narasimhan
//! recursion ([`oracle`]).
//!
//! All arithmetic is exact: arbitrary-precision integers and rationals,
//! no floating point anywhere.

pub mod dt;
pub mod io;
pub mod oracle;
pub mod quiver;
pub mod rational;
pub mod trees;
pub mod tropical;

/// Arbitrary-precision integer used throughout.
pub type Int = num_bigint::BigInt;
/// Exact rational used throughout.
pub type Rat = num_rational::BigRational;

/// Reproducibility knobs for the perturbed flow computation.
///
/// Defaults are deterministic; there are no entropy sources anywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    /// Base seed for the deterministic perturbation generator.
    pub seed: u64,
    /// Perturbation magnitude bound `B`: perturbation entries are drawn as
    /// `k / (B * P)` with `|k| <= B` and `P` a fixed large prime.
    pub bound: u64,
    /// Degenerate-perturbation retries (seed advances) per escalation level.
    pub seed_retries: u32,
    /// Number of times `B` is multiplied by 100 before giving up.
    pub escalations: u32,
    /// When set, every flow tree coefficient is recomputed with three
    /// distinct seeds and the results are required to agree exactly.
    pub verify: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            bound: 1_000_000,
            seed_retries: 8,
            escalations: 3,
            verify: true,
        }
    }
}
