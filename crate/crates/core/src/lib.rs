//! Momentum-based distributed resource scheduling over time-varying networks.
//!
//! A group of `n` agents jointly minimises `F(x) = Σ f_i(x_i)` subject to the
//! coupling constraint `Σ (x_i - b_i) = 0`. Each agent only talks to its
//! neighbours, exchanges (possibly quantized, possibly delayed) local
//! gradients, and adds a momentum term to its own update. The constraint holds
//! at every round, not just in the limit.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. File formats, the CLI and the experiment runner live in the
//! companion `sched` crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | topologies, Erdős–Rényi sampling, Laplacian spectrum, link failures |
//! | [`costs`] | local objectives, box penalties, problem normalisation |
//! | [`nonlinearity`] | sector-bound channel maps (log quantizer, leaky saturation) |
//! | [`protocol`] | agent state, delays, the round-based engine and its trace |
//! | [`analysis`] | centralised oracle, step-size bound, residual metrics |

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod costs;
pub mod graph;
pub mod linalg;
pub mod nonlinearity;
pub mod protocol;
pub mod rng;

pub use analysis::{OptimalSolution, StepBound};
pub use costs::{CompositeCost, Problem};
pub use graph::{SpectralInfo, SwitchingNetwork, Topology};
pub use nonlinearity::SectorMap;
pub use protocol::{DelayModel, Engine, Trace};
